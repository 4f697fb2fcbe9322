use std::fmt;
use std::path::{Path, PathBuf};

use gaitbench::behavior::{read_report, summarize, write_report, ReportRow};
use gaitbench::checkpoint::{Checkpoint, Phase};
use gaitbench::learning::TrainConfig;
use gaitbench::protocol::{run_sweep, SweepOptions, SweepResult, MANIFEST_NAME};
use gaitbench::terrain::{build_obstacle, build_standard, export, ObstacleKind, StandardParams, TerrainKind};
use gaitbench::Error;

use crate::manifest::RunManifest;

pub const RUN_MANIFEST: &str = "run_manifest.json";
pub const MERGED_REPORT: &str = "merged.csv";

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, configuration or input files.
    Usage(String),
    /// Anything else.
    Internal(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Internal(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Internal(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Domain(_) | Error::Format { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

/// Errors reading an input are the caller's problem, whatever their kind.
fn input(e: Error) -> Failure {
    match e {
        Error::Contract(_) | Error::SimulationFault(_) | Error::Optimization(_) => Failure::Internal(e.to_string()),
        _ => Failure::Usage(e.to_string()),
    }
}

fn write_manifest(manifest: &RunManifest, path: &Path) -> Outcome {
    manifest.write(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::AlreadyExists => Failure::Usage(format!(
            "{} already exists; choose a fresh --out",
            path.display()
        )),
        _ => Failure::Internal(format!("writing {}: {e}", path.display())),
    })
}

pub struct TrainArgs {
    pub config: PathBuf,
    pub phase: Phase,
    pub regimen: Option<String>,
    pub resume: Option<PathBuf>,
    pub iterations: Option<u64>,
    pub out: PathBuf,
    pub workers: usize,
}

pub fn train(args: &TrainArgs) -> Outcome {
    let bytes = std::fs::read(&args.config)
        .map_err(|e| Failure::Usage(format!("reading {}: {e}", args.config.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Failure::Usage(format!("{} is not UTF-8", args.config.display())))?;
    let cfg = TrainConfig::from_toml(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", args.config.display())))?;
    let mut spec = cfg.train_spec(args.phase, args.regimen.as_deref())?;
    if let Some(n) = args.iterations {
        spec.iterations = n;
    }
    spec.threads = args.workers;
    let resume = args.resume.as_deref().map(Checkpoint::load).transpose().map_err(input)?;
    if spec.phase == Phase::Visual && resume.is_none() {
        return Err(Failure::Usage("the visual phase needs --resume <blind checkpoint>".into()));
    }
    let manifest = RunManifest::new(vec![args.out.clone()])
        .with_config(&bytes)
        .seed("ppo", spec.ppo.seed);
    write_manifest(&manifest, &args.out.join(RUN_MANIFEST))?;
    eprintln!(
        "training {} phase, regimen {}, {} iterations",
        phase_name(spec.phase),
        spec.regimen.name,
        spec.iterations
    );
    let total = spec.iterations;
    let result = gaitbench::learning::train(&spec, resume.as_ref(), Some(&args.out), |row| {
        if row.iteration % 10 == 0 || row.iteration == total {
            eprintln!(
                "iter {:>6}  reward {:>9.3}  ep_len {:>6.1}  kl {:+.4}",
                row.iteration, row.mean_reward, row.mean_ep_len, row.kl
            );
        }
    })?;
    if let Some(path) = result.final_path {
        println!("{}", path.display());
    }
    Ok(())
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Blind => "blind",
        Phase::Visual => "visual",
    }
}

pub struct EvaluateArgs {
    pub checkpoint: PathBuf,
    pub obstacle: String,
    pub seed: u64,
    pub levels: usize,
    pub trials: usize,
    pub out: PathBuf,
    pub workers: usize,
}

fn parse_obstacles(s: &str) -> Result<Vec<ObstacleKind>, Failure> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(ObstacleKind::ALL.to_vec());
    }
    s.split(',')
        .map(|k| k.trim().parse::<ObstacleKind>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Usage(format!("{e}; expected slope, dropoff, gap, bridge or all")))
}

/// Sweeps go to `<out>/<obstacle>/`.
pub fn evaluate(args: &EvaluateArgs) -> Outcome {
    let kinds = parse_obstacles(&args.obstacle)?;
    let ck = Checkpoint::load(&args.checkpoint).map_err(input)?;
    let opts = SweepOptions {
        levels: args.levels,
        trials: args.trials,
        workers: args.workers,
    };
    if opts.levels < 2 || opts.trials == 0 {
        return Err(Failure::Usage("need --levels >= 2 and --trials >= 1".into()));
    }
    let outputs = kinds.iter().map(|k| args.out.join(k.name())).collect();
    let manifest = RunManifest::new(outputs).seed("master", args.seed);
    write_manifest(&manifest, &args.out.join(RUN_MANIFEST))?;
    for kind in kinds {
        let dir = args.out.join(kind.name());
        let sweep = run_sweep(&ck, kind, args.seed, &opts, &dir)?;
        let successes: usize = sweep
            .outcomes
            .iter()
            .flatten()
            .filter(|c| c.as_char() == 'S')
            .count();
        eprintln!(
            "{}: {} trials, {} successes -> {}",
            kind,
            opts.levels * opts.trials,
            successes,
            dir.display()
        );
    }
    Ok(())
}

/// Expand each argument to the sweep directories it names or contains.
fn find_sweeps(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for p in paths {
        if p.join(MANIFEST_NAME).is_file() {
            out.push(p.clone());
            continue;
        }
        let entries = std::fs::read_dir(p)
            .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
        let mut found: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|d| d.join(MANIFEST_NAME).is_file())
            .collect();
        if found.is_empty() {
            return Err(Failure::Usage(format!("no sweep manifest under {}", p.display())));
        }
        found.sort();
        out.extend(found);
    }
    Ok(out)
}

pub fn analyze(sweeps: &[PathBuf], out: &Path, workers: usize) -> Outcome {
    if sweeps.is_empty() {
        return Err(Failure::Usage("analyze needs at least one sweep directory".into()));
    }
    let dirs = find_sweeps(sweeps)?;
    let loaded = dirs
        .iter()
        .map(|d| SweepResult::load(d))
        .collect::<Result<Vec<_>, _>>()
        .map_err(input)?;
    if let Some(dup) = ObstacleKind::ALL
        .iter()
        .find(|k| loaded.iter().filter(|s| s.kind == **k).count() > 1)
    {
        return Err(Failure::Usage(format!("more than one {dup} sweep given")));
    }
    let mut manifest_path = out.as_os_str().to_owned();
    manifest_path.push(".manifest.json");
    let mut manifest = RunManifest::new(vec![out.to_path_buf()]);
    for s in &loaded {
        manifest = manifest.seed(s.kind.name(), s.master_seed);
    }
    write_manifest(&manifest, Path::new(&manifest_path))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::Internal(e.to_string()))?;
    let report = pool.install(|| summarize(&loaded, &[])).map_err(input)?;
    let total: usize = loaded.iter().map(|s| s.levels() * s.trials()).sum();
    for msg in &report.skipped {
        eprintln!("warning: skipped {msg}");
    }
    if !report.skipped.is_empty() {
        eprintln!("warning: {} of {total} logs skipped", report.skipped.len());
        if report.skipped.len() == total {
            return Err(Failure::Usage("every trial log was unreadable".into()));
        }
    }
    for gap in &report.gaps {
        eprintln!("note: no {gap} sweep; its rows are empty");
    }
    write_report(out, &report.rows())?;
    println!("{}", out.display());
    Ok(())
}

/// Concatenate reports into `<out>/merged.csv`, ordered by checkpoint id.
pub fn report(reports: &[PathBuf], out: &Path) -> Outcome {
    if reports.is_empty() {
        return Err(Failure::Usage("report needs at least one report CSV".into()));
    }
    let mut rows: Vec<ReportRow> = Vec::new();
    let mut ids = Vec::new();
    for path in reports {
        let r = read_report(path).map_err(input)?;
        if let Some(first) = r.first() {
            if ids.contains(&first.checkpoint_id) {
                return Err(Failure::Usage(format!(
                    "checkpoint {} appears in more than one report",
                    first.checkpoint_id
                )));
            }
            ids.push(first.checkpoint_id.clone());
        }
        rows.extend(r);
    }
    rows.sort_by(|a, b| a.checkpoint_id.cmp(&b.checkpoint_id));
    write_manifest(&RunManifest::new(vec![out.join(MERGED_REPORT)]), &out.join(RUN_MANIFEST))?;
    let merged = out.join(MERGED_REPORT);
    write_report(&merged, &rows)?;
    println!("{}", merged.display());
    eprintln!(
        "plot with: python -m plotgen {} --out {} --format png",
        merged.display(),
        out.join("figures").display()
    );
    Ok(())
}

pub fn terrain(kind: &str, difficulty: f64, seed: u64, out: &Path) -> Outcome {
    let kind: TerrainKind = kind.parse()?;
    let field = match kind {
        TerrainKind::Obstacle(k) => build_obstacle(k, difficulty, seed)?,
        TerrainKind::Standard(k) => build_standard(k, seed, &StandardParams::default())?,
    };
    let stem = match kind {
        TerrainKind::Obstacle(_) => format!("{kind}_d{difficulty:.3}_s{seed}"),
        TerrainKind::Standard(_) => format!("{kind}_s{seed}"),
    };
    std::fs::create_dir_all(out).map_err(|e| Failure::Internal(format!("{}: {e}", out.display())))?;
    let (json, _) = export::export(&field, out, &stem)?;
    println!("{}", json.display());
    Ok(())
}
