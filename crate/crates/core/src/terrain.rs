//! Procedural terrains as queryable heightfields.
//!
//! Heights are stored on a regular node grid and queried by bilinear
//! interpolation. Test obstacles are laid out in a fixed frame: the robot
//! walks toward `+x`, the obstacle's near edge sits at `x = 0` and its far
//! edge at `x = 1.5`, and the field is centred laterally on `y = 0`.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub mod export;

/// Node spacing over test obstacles.
pub const OBSTACLE_CELL: f64 = 0.02;
/// Node spacing over standard terrains.
pub const STANDARD_CELL: f64 = 0.05;
/// Length of the obstacle span `[near_edge_x, far_edge_x]`.
pub const OBSTACLE_SPAN: f64 = 1.5;
/// Depth of gap and bridge voids below deck level.
pub const VOID_DEPTH: f64 = 2.0;
pub const DEFAULT_FRICTION: f64 = 0.8;

const RUNWAY: f64 = 6.0;
const LANDING: f64 = 6.0;
const HALF_WIDTH: f64 = 3.0;
const STANDARD_HALF_EXTENT_X: (f64, f64) = (8.0, 16.0);
const STANDARD_HALF_WIDTH: f64 = 8.0;
const START_PAD: f64 = 1.5;

/// The four parameterized test obstacles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObstacleKind {
    Slope,
    DropOff,
    Gap,
    Bridge,
}

impl ObstacleKind {
    pub const ALL: [ObstacleKind; 4] = [
        ObstacleKind::Slope,
        ObstacleKind::DropOff,
        ObstacleKind::Gap,
        ObstacleKind::Bridge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObstacleKind::Slope => "slope",
            ObstacleKind::DropOff => "dropoff",
            ObstacleKind::Gap => "gap",
            ObstacleKind::Bridge => "bridge",
        }
    }

    /// Values of the governing property at difficulty 0 and 1.
    ///
    /// Slope: downward angle in degrees. Drop-off: step-down height (m).
    /// Gap: width (m). Bridge: deck width (m).
    pub fn property_endpoints(self) -> (f64, f64) {
        match self {
            ObstacleKind::Slope => (0.0, 90.0),
            ObstacleKind::DropOff => (0.0, 1.5),
            ObstacleKind::Gap => (0.0, 1.0),
            ObstacleKind::Bridge => (1.02, 0.02),
        }
    }

    /// The governing property at difficulty `d`.
    pub fn property(self, d: Difficulty) -> f64 {
        let d = d.value();
        match self {
            ObstacleKind::Slope => 90.0 * d,
            ObstacleKind::DropOff => 1.5 * d,
            ObstacleKind::Gap => 1.0 * d,
            ObstacleKind::Bridge => 1.02 - 1.00 * d,
        }
    }
}

impl fmt::Display for ObstacleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObstacleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "slope" | "slopes" => Ok(ObstacleKind::Slope),
            "dropoff" | "drop-off" | "dropoffs" | "drop-offs" => Ok(ObstacleKind::DropOff),
            "gap" | "gaps" => Ok(ObstacleKind::Gap),
            "bridge" | "bridges" => Ok(ObstacleKind::Bridge),
            other => Err(Error::Domain(format!(
                "unknown obstacle `{other}` (expected slope, dropoff, gap, bridge)"
            ))),
        }
    }
}

/// The five standard training terrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StandardKind {
    Flat,
    Hills,
    Ridges,
    Blocks,
    Stairs,
}

impl StandardKind {
    pub const ALL: [StandardKind; 5] = [
        StandardKind::Flat,
        StandardKind::Hills,
        StandardKind::Ridges,
        StandardKind::Blocks,
        StandardKind::Stairs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StandardKind::Flat => "flat",
            StandardKind::Hills => "hills",
            StandardKind::Ridges => "ridges",
            StandardKind::Blocks => "blocks",
            StandardKind::Stairs => "stairs",
        }
    }
}

/// Any of the nine terrain kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TerrainKind {
    Standard(StandardKind),
    Obstacle(ObstacleKind),
}

impl TerrainKind {
    /// Table order: flat, hills, ridges, blocks, stairs, slope, drop-off, bridge, gap.
    pub const ALL: [TerrainKind; 9] = [
        TerrainKind::Standard(StandardKind::Flat),
        TerrainKind::Standard(StandardKind::Hills),
        TerrainKind::Standard(StandardKind::Ridges),
        TerrainKind::Standard(StandardKind::Blocks),
        TerrainKind::Standard(StandardKind::Stairs),
        TerrainKind::Obstacle(ObstacleKind::Slope),
        TerrainKind::Obstacle(ObstacleKind::DropOff),
        TerrainKind::Obstacle(ObstacleKind::Bridge),
        TerrainKind::Obstacle(ObstacleKind::Gap),
    ];

    pub fn name(self) -> &'static str {
        match self {
            TerrainKind::Standard(k) => k.name(),
            TerrainKind::Obstacle(k) => k.name(),
        }
    }

    pub fn obstacle(self) -> Option<ObstacleKind> {
        match self {
            TerrainKind::Obstacle(k) => Some(k),
            TerrainKind::Standard(_) => None,
        }
    }
}

impl fmt::Display for TerrainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TerrainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        for k in StandardKind::ALL {
            if k.name() == lower {
                return Ok(TerrainKind::Standard(k));
            }
        }
        lower
            .parse::<ObstacleKind>()
            .map(TerrainKind::Obstacle)
            .map_err(|_| Error::Domain(format!("unknown terrain kind `{s}`")))
    }
}

impl Serialize for TerrainKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for TerrainKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Obstacle difficulty in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Difficulty(f64);

impl Difficulty {
    pub const ZERO: Difficulty = Difficulty(0.0);
    pub const ONE: Difficulty = Difficulty(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Difficulty(value))
        } else {
            Err(Error::Domain(format!("difficulty {value} outside [0, 1]")))
        }
    }

    /// The `index`-th of `levels` evenly spaced difficulties from 0 to 1.
    pub fn level(index: usize, levels: usize) -> Result<Self> {
        if levels < 2 || index >= levels {
            return Err(Error::Domain(format!(
                "level {index} of {levels} is not a valid sweep level"
            )));
        }
        Difficulty::new(index as f64 / (levels - 1) as f64)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl<'de> Deserialize<'de> for Difficulty {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Difficulty::new(f64::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Shape parameters for standard terrains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StandardParams {
    /// Upper bound on the summed sinusoid amplitude (m).
    pub hill_amplitude: f64,
    /// Shortest allowed hill wavelength (m).
    pub hill_min_wavelength: f64,
    pub ridge_min_height: f64,
    pub ridge_max_height: f64,
    pub ridge_min_width: f64,
    pub ridge_max_width: f64,
    pub block_max_height: f64,
    /// Riser height (m); every step in a flight uses the same rise.
    pub stair_rise: f64,
    pub stair_min_tread: f64,
    pub stair_max_tread: f64,
}

impl Default for StandardParams {
    fn default() -> Self {
        StandardParams {
            hill_amplitude: 0.3,
            hill_min_wavelength: 2.0,
            ridge_min_height: 0.1,
            ridge_max_height: 0.3,
            ridge_min_width: 0.2,
            ridge_max_width: 0.5,
            block_max_height: 0.4,
            stair_rise: 0.15,
            stair_min_tread: 0.25,
            stair_max_tread: 0.35,
        }
    }
}

impl StandardParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hill_amplitude", self.hill_amplitude),
            ("hill_min_wavelength", self.hill_min_wavelength),
            ("ridge_min_height", self.ridge_min_height),
            ("ridge_max_height", self.ridge_max_height),
            ("ridge_min_width", self.ridge_min_width),
            ("ridge_max_width", self.ridge_max_width),
            ("block_max_height", self.block_max_height),
            ("stair_rise", self.stair_rise),
            ("stair_min_tread", self.stair_min_tread),
            ("stair_max_tread", self.stair_max_tread),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        let ordered = [
            ("ridge height", self.ridge_min_height, self.ridge_max_height),
            ("ridge width", self.ridge_min_width, self.ridge_max_width),
            ("stair tread", self.stair_min_tread, self.stair_max_tread),
        ];
        for (name, lo, hi) in ordered {
            if lo > hi {
                return Err(Error::Domain(format!("{name} range [{lo}, {hi}] is inverted")));
            }
        }
        Ok(())
    }
}

/// Closed-form description of an obstacle, relative to its near edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Geometry {
    Flat,
    /// A planar face of fixed surface length descending at `angle` (rad).
    Slope { angle: f64, run: f64, drop: f64 },
    DropOff { drop: f64 },
    Gap { width: f64, depth: f64 },
    Bridge { width: f64, length: f64, depth: f64 },
    /// Seeded standard terrain with no closed form.
    Generated,
}

impl Geometry {
    fn for_obstacle(kind: ObstacleKind, d: Difficulty) -> Geometry {
        let p = kind.property(d);
        match kind {
            ObstacleKind::Slope => {
                let angle = p.to_radians();
                let mut run = OBSTACLE_SPAN * angle.cos();
                if run < 1e-9 {
                    run = 0.0;
                }
                let drop = OBSTACLE_SPAN * angle.sin();
                Geometry::Slope { angle, run, drop }
            }
            ObstacleKind::DropOff => Geometry::DropOff { drop: p },
            ObstacleKind::Gap => Geometry::Gap {
                width: p,
                depth: VOID_DEPTH,
            },
            ObstacleKind::Bridge => Geometry::Bridge {
                width: p,
                length: OBSTACLE_SPAN,
                depth: VOID_DEPTH,
            },
        }
    }

    /// Height at `(x, y)`, with the near edge at `x = 0`.
    fn height(&self, x: f64, y: f64) -> f64 {
        match *self {
            Geometry::Flat | Geometry::Generated => 0.0,
            Geometry::Slope { angle, run, drop } => {
                if x <= 0.0 {
                    0.0
                } else if x < run {
                    -x * angle.tan()
                } else {
                    -drop
                }
            }
            Geometry::DropOff { drop } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -drop
                }
            }
            Geometry::Gap { width, depth } => {
                if x > 0.0 && x < width {
                    -depth
                } else {
                    0.0
                }
            }
            Geometry::Bridge {
                width,
                length,
                depth,
            } => {
                if (0.0..=length).contains(&x) && y.abs() > 0.5 * width {
                    -depth
                } else {
                    0.0
                }
            }
        }
    }

    fn is_void(&self, x: f64, y: f64) -> bool {
        match *self {
            Geometry::Gap { width, .. } => x > 0.0 && x < width,
            Geometry::Bridge { width, length, .. } => {
                (0.0..=length).contains(&x) && y.abs() > 0.5 * width
            }
            _ => false,
        }
    }
}

/// Rectangular bounds of a field in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Extent {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

/// An immutable heightfield with obstacle metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainField {
    heights: Vec<f64>,
    nx: usize,
    ny: usize,
    cell: f64,
    /// Node index whose coordinate is exactly 0, per axis.
    x_zero: usize,
    y_zero: usize,
    pub kind: TerrainKind,
    pub difficulty: Option<Difficulty>,
    pub seed: u64,
    pub near_edge_x: f64,
    pub far_edge_x: f64,
    pub deck_bounds: Option<(f64, f64)>,
    pub friction: f64,
    pub geometry: Geometry,
}

impl TerrainField {
    /// Build a field by sampling `f` at every node of a grid covering `extent`.
    ///
    /// `extent` bounds are rounded outward to whole cells measured from the origin.
    pub fn from_fn(
        extent: Extent,
        cell: f64,
        kind: TerrainKind,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        if !(cell.is_finite() && cell > 0.0) {
            return Err(Error::Domain(format!("cell size {cell} must be positive")));
        }
        if !(extent.x_min <= 0.0
            && extent.x_max >= 0.0
            && extent.y_min <= 0.0
            && extent.y_max >= 0.0)
        {
            return Err(Error::Domain("extent must contain the origin".into()));
        }
        let x_zero = (-extent.x_min / cell).ceil() as usize;
        let y_zero = (-extent.y_min / cell).ceil() as usize;
        let nx = x_zero + (extent.x_max / cell).ceil() as usize + 1;
        let ny = y_zero + (extent.y_max / cell).ceil() as usize + 1;
        let mut heights = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            let y = (j as f64 - y_zero as f64) * cell;
            for i in 0..nx {
                let x = (i as f64 - x_zero as f64) * cell;
                heights.push(f(x, y));
            }
        }
        if heights.iter().any(|h| !h.is_finite()) {
            return Err(Error::Domain("terrain function produced a non-finite height".into()));
        }
        Ok(TerrainField {
            heights,
            nx,
            ny,
            cell,
            x_zero,
            y_zero,
            kind,
            difficulty: None,
            seed: 0,
            near_edge_x: 0.0,
            far_edge_x: OBSTACLE_SPAN,
            deck_bounds: None,
            friction: DEFAULT_FRICTION,
            geometry: Geometry::Generated,
        })
    }

    /// Rebuild a field from raw node heights (row-major, rows along `y`).
    pub(crate) fn from_nodes(
        heights: Vec<f64>,
        nx: usize,
        ny: usize,
        cell: f64,
        x_zero: usize,
        y_zero: usize,
        kind: TerrainKind,
    ) -> Result<Self> {
        if heights.len() != nx * ny || nx < 2 || ny < 2 {
            return Err(Error::Domain("node array does not match grid shape".into()));
        }
        Ok(TerrainField {
            heights,
            nx,
            ny,
            cell,
            x_zero,
            y_zero,
            kind,
            difficulty: None,
            seed: 0,
            near_edge_x: 0.0,
            far_edge_x: OBSTACLE_SPAN,
            deck_bounds: None,
            friction: DEFAULT_FRICTION,
            geometry: Geometry::Generated,
        })
    }

    pub fn with_friction(mut self, friction: f64) -> Self {
        self.friction = friction;
        self
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    /// Grid shape as `(rows, cols)`; rows run along `y`, columns along `x`.
    pub fn shape(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.heights
    }

    pub fn node_x(&self, i: usize) -> f64 {
        (i as f64 - self.x_zero as f64) * self.cell
    }

    pub fn node_y(&self, j: usize) -> f64 {
        (j as f64 - self.y_zero as f64) * self.cell
    }

    pub fn node(&self, i: usize, j: usize) -> f64 {
        self.heights[j * self.nx + i]
    }

    pub fn extent(&self) -> Extent {
        Extent {
            x_min: self.node_x(0),
            x_max: self.node_x(self.nx - 1),
            y_min: self.node_y(0),
            y_max: self.node_y(self.ny - 1),
        }
    }

    /// Height of the deck or runway surface that voids are measured against.
    pub fn deck_level(&self) -> f64 {
        0.0
    }

    /// Whether `(x, y)` lies over a gap or bridge void.
    pub fn is_void(&self, x: f64, y: f64) -> bool {
        self.geometry.is_void(x - self.near_edge_x, y)
    }

    /// Fractional grid coordinate along one axis, snapped onto nodes.
    fn locate(v: f64, zero: usize, cell: f64, n: usize) -> (usize, f64) {
        let mut u = v / cell + zero as f64;
        let r = u.round();
        if (u - r).abs() < 1e-9 {
            u = r;
        }
        let i = (u.floor() as usize).min(n - 2);
        (i, u - i as f64)
    }

    fn check(&self, x: f64, y: f64) -> Result<()> {
        let e = self.extent();
        if x.is_finite() && y.is_finite() && e.contains(x, y) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "query ({x:.3}, {y:.3}) outside terrain extent [{:.2}, {:.2}] x [{:.2}, {:.2}]",
                e.x_min, e.x_max, e.y_min, e.y_max
            )))
        }
    }

    /// Bilinearly interpolated height at `(x, y)`.
    pub fn height_at(&self, x: f64, y: f64) -> Result<f64> {
        self.check(x, y)?;
        let (i, fx) = Self::locate(x, self.x_zero, self.cell, self.nx);
        let (j, fy) = Self::locate(y, self.y_zero, self.cell, self.ny);
        let h00 = self.node(i, j);
        if fx == 0.0 && fy == 0.0 {
            return Ok(h00);
        }
        let h10 = self.node(i + 1, j);
        let h01 = self.node(i, j + 1);
        let h11 = self.node(i + 1, j + 1);
        let lower = h00 + (h10 - h00) * fx;
        let upper = h01 + (h11 - h01) * fx;
        Ok(lower + (upper - lower) * fy)
    }

    /// Height and gradient `(dh/dx, dh/dy)` of the bilinear interpolant.
    pub fn height_and_gradient(&self, x: f64, y: f64) -> Result<(f64, f64, f64)> {
        self.check(x, y)?;
        let (i, fx) = Self::locate(x, self.x_zero, self.cell, self.nx);
        let (j, fy) = Self::locate(y, self.y_zero, self.cell, self.ny);
        let h00 = self.node(i, j);
        let h10 = self.node(i + 1, j);
        let h01 = self.node(i, j + 1);
        let h11 = self.node(i + 1, j + 1);
        let lower = h00 + (h10 - h00) * fx;
        let upper = h01 + (h11 - h01) * fx;
        let h = lower + (upper - lower) * fy;
        let dx = ((h10 - h00) * (1.0 - fy) + (h11 - h01) * fy) / self.cell;
        let dy = (upper - lower) / self.cell;
        Ok((h, dx, dy))
    }

    /// Terrain heights ahead of the pelvis, relative to the ground beneath it.
    /// Samples past the field edge read the nearest edge height; only the
    /// pelvis itself must lie on the field.
    pub fn sample_height_grid(&self, pelvis_x: f64, pelvis_y: f64, heading: f64) -> Result<HeightGrid> {
        let (s, c) = heading.sin_cos();
        let base = self.height_at(pelvis_x, pelvis_y)?;
        let e = self.extent();
        let mut values = [[0.0; HeightGrid::COLS]; HeightGrid::ROWS];
        for (row, out) in values.iter_mut().enumerate() {
            let fwd = HeightGrid::forward_offset(row);
            for (col, v) in out.iter_mut().enumerate() {
                let lat = HeightGrid::lateral_offset(col);
                let x = (pelvis_x + fwd * c - lat * s).clamp(e.x_min, e.x_max);
                let y = (pelvis_y + fwd * s + lat * c).clamp(e.y_min, e.y_max);
                *v = self.height_at(x, y)? - base;
            }
        }
        Ok(HeightGrid { values })
    }
}

/// 20 x 30 egocentric terrain heights.
///
/// `values[row][col]`: rows advance forward from the pelvis (row 0 nearest),
/// columns sweep from the robot's right (col 0) to its left. Samples sit at
/// cell centres of a 1.0 m wide by 1.5 m long rectangle starting at the pelvis.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightGrid {
    pub values: [[f64; HeightGrid::COLS]; HeightGrid::ROWS],
}

impl HeightGrid {
    pub const ROWS: usize = 30;
    pub const COLS: usize = 20;
    pub const LEN: usize = Self::ROWS * Self::COLS;
    pub const LENGTH: f64 = 1.5;
    pub const WIDTH: f64 = 1.0;

    pub fn zeros() -> Self {
        HeightGrid {
            values: [[0.0; Self::COLS]; Self::ROWS],
        }
    }

    pub fn forward_offset(row: usize) -> f64 {
        (row as f64 + 0.5) * (Self::LENGTH / Self::ROWS as f64)
    }

    pub fn lateral_offset(col: usize) -> f64 {
        (col as f64 + 0.5) * (Self::WIDTH / Self::COLS as f64) - 0.5 * Self::WIDTH
    }

    /// Row-major flattening: row 0 first, columns right to left within a row.
    pub fn flatten(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flat_map(|r| r.iter().copied())
    }
}

/// Build one of the four test obstacles at difficulty `d`.
///
/// Obstacle geometry is fully determined by `(kind, d)`; `seed` is recorded
/// but never consumed.
pub fn build_obstacle(kind: ObstacleKind, difficulty: f64, seed: u64) -> Result<TerrainField> {
    let d = Difficulty::new(difficulty)?;
    let geometry = Geometry::for_obstacle(kind, d);
    let extent = Extent {
        x_min: -RUNWAY,
        x_max: OBSTACLE_SPAN + LANDING,
        y_min: -HALF_WIDTH,
        y_max: HALF_WIDTH,
    };
    let mut field = TerrainField::from_fn(extent, OBSTACLE_CELL, TerrainKind::Obstacle(kind), |x, y| {
        geometry.height(x, y)
    })?;
    field.difficulty = Some(d);
    field.seed = seed;
    field.geometry = geometry;
    field.near_edge_x = 0.0;
    field.far_edge_x = OBSTACLE_SPAN;
    if let Geometry::Bridge { width, .. } = geometry {
        field.deck_bounds = Some((-0.5 * width, 0.5 * width));
    }
    Ok(field)
}

fn smoothstep(edge0: f64, edge1: f64, v: f64) -> f64 {
    let t = ((v - edge0) / (edge1 - edge0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Build a seeded standard terrain.
///
/// A flat pad of half-width 1.5 m surrounds the origin so the robot always
/// starts on level ground.
pub fn build_standard(kind: StandardKind, seed: u64, params: &StandardParams) -> Result<TerrainField> {
    params.validate()?;
    let extent = Extent {
        x_min: -STANDARD_HALF_EXTENT_X.0,
        x_max: STANDARD_HALF_EXTENT_X.1,
        y_min: -STANDARD_HALF_WIDTH,
        y_max: STANDARD_HALF_WIDTH,
    };
    let mut rng = seed::rng(seed::derive(seed, "standard-terrain", &[kind as u64]));
    let tk = TerrainKind::Standard(kind);
    let in_pad = |x: f64, y: f64| x.abs() < START_PAD && y.abs() < START_PAD;
    let mut field = match kind {
        StandardKind::Flat => TerrainField::from_fn(extent, STANDARD_CELL, tk, |_, _| 0.0)?,
        StandardKind::Hills => {
            let n = rng.random_range(2..=4);
            let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = weights.iter().sum();
            let waves: Vec<(f64, f64, f64, f64)> = weights
                .iter()
                .map(|w| {
                    let amp = params.hill_amplitude * w / total;
                    let wavelength = params.hill_min_wavelength * rng.random_range(1.0..3.0);
                    let dir: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    (amp, wavelength, dir, phase)
                })
                .collect();
            TerrainField::from_fn(extent, STANDARD_CELL, tk, |x, y| {
                let r = x.abs().max(y.abs());
                let blend = smoothstep(1.0, START_PAD + 1.0, r);
                let h: f64 = waves
                    .iter()
                    .map(|&(a, l, dir, ph)| {
                        let along = x * dir.cos() + y * dir.sin();
                        a * (std::f64::consts::TAU * along / l + ph).sin()
                    })
                    .sum();
                blend * h
            })?
        }
        StandardKind::Ridges => {
            let mut strips = Vec::new();
            for sign in [1.0, -1.0] {
                let mut x = START_PAD + rng.random_range(0.2..0.8);
                let limit = if sign > 0.0 { extent.x_max } else { -extent.x_min };
                while x < limit {
                    let w = rng.random_range(params.ridge_min_width..=params.ridge_max_width);
                    let h = rng.random_range(params.ridge_min_height..=params.ridge_max_height);
                    let (a, b) = if sign > 0.0 { (x, x + w) } else { (-x - w, -x) };
                    strips.push((a, b, h));
                    x += w + rng.random_range(0.6..1.5);
                }
            }
            TerrainField::from_fn(extent, STANDARD_CELL, tk, |x, _| {
                strips
                    .iter()
                    .find(|&&(a, b, _)| x >= a && x < b)
                    .map_or(0.0, |&(_, _, h)| h)
            })?
        }
        StandardKind::Blocks => {
            let size = 0.5;
            let bx = ((extent.x_max - extent.x_min) / size).ceil() as usize;
            let by = ((extent.y_max - extent.y_min) / size).ceil() as usize;
            let tops: Vec<f64> = (0..bx * by)
                .map(|_| rng.random_range(0.0..=params.block_max_height))
                .collect();
            TerrainField::from_fn(extent, STANDARD_CELL, tk, |x, y| {
                if in_pad(x, y) {
                    return 0.0;
                }
                let i = (((x - extent.x_min) / size).floor() as usize).min(bx - 1);
                let j = (((y - extent.y_min) / size).floor() as usize).min(by - 1);
                tops[j * bx + i]
            })?
        }
        StandardKind::Stairs => {
            // Tread boundaries along |x|, and the tread heights between them.
            let mut edges = vec![START_PAD];
            let mut levels = vec![0.0];
            let mut level = 0.0;
            let mut up = true;
            let reach = extent.x_max.max(-extent.x_min);
            while *edges.last().unwrap() < reach {
                let steps = rng.random_range(3..=6);
                for _ in 0..steps {
                    level += if up { params.stair_rise } else { -params.stair_rise };
                    let tread = rng.random_range(params.stair_min_tread..=params.stair_max_tread);
                    let start = *edges.last().unwrap();
                    edges.push(start + tread);
                    levels.push(level);
                }
                up = !up;
            }
            TerrainField::from_fn(extent, STANDARD_CELL, tk, |x, _| {
                let ax = x.abs();
                let k = edges.partition_point(|&e| e <= ax);
                if k == 0 {
                    0.0
                } else {
                    levels[(k).min(levels.len() - 1)]
                }
            })?
        }
    };
    field.seed = seed;
    field.near_edge_x = START_PAD;
    field.far_edge_x = extent.x_max;
    Ok(field)
}

/// Tread heights and boundaries of a stairs field along `+x`, for inspection.
pub fn stair_profile(field: &TerrainField) -> Vec<(f64, f64)> {
    let (_, nx) = field.shape();
    let j = field.y_zero;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for i in field.x_zero..nx {
        let h = field.node(i, j);
        match out.last() {
            Some(&(_, last)) if last == h => {}
            _ => out.push((field.node_x(i), h)),
        }
    }
    out
}
