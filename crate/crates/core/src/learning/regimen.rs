//! Training regimens: terrain frequencies, command distributions, budgets.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::controller::Command;
use crate::error::{Error, Result};
use crate::protocol::TRIAL_SPEED;
use crate::seed::Rng;
use crate::terrain::{
    build_obstacle, build_standard, Difficulty, ObstacleKind, StandardKind, StandardParams, TerrainField,
    TerrainKind,
};

/// Reference iteration budgets of the full regimens and the single-test ones.
pub const REFERENCE_FULL_BUDGET: u64 = 110_000;
pub const REFERENCE_SINGLE_BUDGET: u64 = 20_000;
/// Desk-scale counterparts, preserving the 20k : 110k ratio.
pub const FULL_BUDGET: u64 = 2000;
pub const SINGLE_BUDGET: u64 = 364;

/// Names of the seven regimens, in table order.
pub const REGIMEN_NAMES: [&str; 7] = [
    "standard",
    "multi-test",
    "combined",
    "single-test-slope",
    "single-test-dropoff",
    "single-test-bridge",
    "single-test-gap",
];

/// Terrain frequencies of each regimen, columns in [`TerrainKind::ALL`] order.
///
/// The combined row sums to 1.02; [`RegimenSpec::builtin`] divides every row
/// by its sum.
pub const TABLE: [[f64; 9]; 7] = [
    [0.03, 0.07, 0.20, 0.35, 0.35, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.25, 0.25, 0.25, 0.25],
    [0.015, 0.035, 0.10, 0.185, 0.185, 0.125, 0.125, 0.125, 0.125],
    [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandDistribution {
    Fixed(Command),
    Uniform {
        forward: (f64, f64),
        lateral: (f64, f64),
        turn: (f64, f64),
    },
}

impl CommandDistribution {
    /// Command ranges of the standard regimen and the blind phase.
    pub fn standard() -> Self {
        CommandDistribution::Uniform {
            forward: (-0.5, 1.5),
            lateral: (-0.3, 0.3),
            turn: (-0.4, 0.4),
        }
    }

    pub fn test() -> Self {
        CommandDistribution::Fixed(Command::forward(TRIAL_SPEED))
    }

    pub fn sample(&self, rng: &mut Rng) -> Command {
        match *self {
            CommandDistribution::Fixed(c) => c,
            CommandDistribution::Uniform { forward, lateral, turn } => {
                let mut draw = |(lo, hi): (f64, f64)| if lo < hi { rng.random_range(lo..hi) } else { lo };
                Command {
                    forward: draw(forward),
                    lateral: draw(lateral),
                    turn: draw(turn),
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            CommandDistribution::Fixed(c) => [c.forward, c.lateral, c.turn].iter().all(|v| v.is_finite()),
            CommandDistribution::Uniform { forward, lateral, turn } => [forward, lateral, turn]
                .iter()
                .all(|(lo, hi)| lo.is_finite() && hi.is_finite() && lo <= hi),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("invalid command distribution".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimenSpec {
    pub name: String,
    pub frequencies: BTreeMap<TerrainKind, f64>,
    pub commands: CommandDistribution,
    /// Desk-scale iteration budget.
    pub iterations: u64,
    /// Reference budget this regimen stands in for.
    pub reference_iterations: u64,
}

/// What [`sample_terrain`] drew for one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerrainDraw {
    pub kind: TerrainKind,
    /// Uniform in `[0, 1]` for test obstacles.
    pub difficulty: Option<Difficulty>,
    pub seed: u64,
    /// Drawn shape parameters for standard terrains.
    pub params: Option<StandardParams>,
}

impl TerrainDraw {
    pub fn build(&self) -> Result<TerrainField> {
        match self.kind {
            TerrainKind::Obstacle(k) => {
                let d = self.difficulty.unwrap_or(Difficulty::ZERO);
                build_obstacle(k, d.value(), self.seed)
            }
            TerrainKind::Standard(k) => build_standard(k, self.seed, &self.params.unwrap_or_default()),
        }
    }
}

impl RegimenSpec {
    /// One of the seven table regimens by name.
    pub fn builtin(name: &str) -> Result<Self> {
        let row = REGIMEN_NAMES.iter().position(|n| *n == name).ok_or_else(|| {
            Error::Config(format!(
                "unknown regimen `{name}`; expected one of: {}",
                REGIMEN_NAMES.join(", ")
            ))
        })?;
        let single = name.starts_with("single-test");
        let total: f64 = TABLE[row].iter().sum();
        let frequencies = TerrainKind::ALL
            .iter()
            .zip(TABLE[row])
            .filter(|(_, p)| *p > 0.0)
            .map(|(k, p)| (*k, p / total))
            .collect();
        Ok(RegimenSpec {
            name: name.to_string(),
            frequencies,
            commands: if name == "standard" {
                CommandDistribution::standard()
            } else {
                CommandDistribution::test()
            },
            iterations: if single { SINGLE_BUDGET } else { FULL_BUDGET },
            reference_iterations: if single {
                REFERENCE_SINGLE_BUDGET
            } else {
                REFERENCE_FULL_BUDGET
            },
        })
    }

    /// The blind phase: flat ground only, standard command ranges.
    pub fn flat() -> Self {
        RegimenSpec {
            name: "flat".into(),
            frequencies: BTreeMap::from([(TerrainKind::Standard(StandardKind::Flat), 1.0)]),
            commands: CommandDistribution::standard(),
            iterations: FULL_BUDGET,
            reference_iterations: REFERENCE_FULL_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies.values().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Config(format!("regimen `{}` has a negative frequency", self.name)));
        }
        let total: f64 = self.frequencies.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "regimen `{}` frequencies sum to {total}, not 1",
                self.name
            )));
        }
        self.commands.validate()
    }

    pub fn frequency(&self, kind: TerrainKind) -> f64 {
        self.frequencies.get(&kind).copied().unwrap_or(0.0)
    }

    /// Reference-scale iterations attributed to `kind` under its frequency.
    pub fn reference_share(&self, kind: TerrainKind) -> f64 {
        self.reference_iterations as f64 * self.frequency(kind)
    }

    /// Reference-scale value of `iterations` desk-scale iterations.
    pub fn to_reference(&self, iterations: f64) -> f64 {
        iterations * self.reference_iterations as f64 / self.iterations as f64
    }
}

fn draw_params(rng: &mut Rng) -> StandardParams {
    let scale = rng.random_range(0.25..=1.0);
    let d = StandardParams::default();
    StandardParams {
        hill_amplitude: d.hill_amplitude * scale,
        ridge_min_height: d.ridge_min_height * scale,
        ridge_max_height: d.ridge_max_height * scale,
        block_max_height: d.block_max_height * scale,
        stair_rise: d.stair_rise * scale,
        ..d
    }
}

/// Draw a terrain kind per the regimen's table, plus its difficulty or
/// shape parameters and a build seed.
pub fn sample_terrain(regimen: &RegimenSpec, rng: &mut Rng) -> TerrainDraw {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut kind = None;
    for k in TerrainKind::ALL {
        let p = regimen.frequency(k);
        if p <= 0.0 {
            continue;
        }
        kind = Some(k);
        acc += p;
        if u < acc {
            break;
        }
    }
    let kind = kind.unwrap_or(TerrainKind::Standard(StandardKind::Flat));
    let seed = rng.random();
    match kind {
        TerrainKind::Obstacle(_) => TerrainDraw {
            kind,
            difficulty: Some(Difficulty::new(rng.random_range(0.0..=1.0)).unwrap()),
            seed,
            params: None,
        },
        TerrainKind::Standard(StandardKind::Flat) => TerrainDraw {
            kind,
            difficulty: None,
            seed,
            params: None,
        },
        TerrainKind::Standard(_) => TerrainDraw {
            kind,
            difficulty: None,
            seed,
            params: Some(draw_params(rng)),
        },
    }
}

/// Whether a regimen trains on any obstacle.
pub fn uses_obstacles(regimen: &RegimenSpec) -> bool {
    ObstacleKind::ALL
        .iter()
        .any(|k| regimen.frequency(TerrainKind::Obstacle(*k)) > 0.0)
}
