//! Command-line runner: one subcommand per experiment kind plus `plot` and
//! `run`. Outputs land atomically in `<out>/<kind>-<unix seconds>` next to the
//! effective config and a `run.json` record hashing every file.
//!
//! Exit codes: 0 ok, 1 other failure, 2 config error, 3 numeric or verdict
//! conflict, 4 budget exceeded. Failures print one JSON object on stderr.

pub mod config;
pub mod experiments;
pub mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use config::{ConfigError, ExperimentConfig, Kind};
use experiments::{Output, RunError};

#[derive(Parser, Debug)]
#[command(name = "rclab", version, about = "Long-range random-cluster numerics laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Experiment config (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parent directory for the run directory; overrides `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Wulff shape and dual vectors of the configured norm.
    Wulff(RunArgs),
    /// Saturation criterion and series verdicts per direction.
    Criterion(RunArgs),
    /// Saturation flip over a grid of polynomial exponents.
    AlphaSat(RunArgs),
    /// Exact enumeration of a small region with audits.
    Exact(RunArgs),
    /// Monte Carlo two-point function and effective correlation lengths.
    Mc(RunArgs),
    /// G/J against the finite-n prediction, exponential envelope.
    Theorem14(RunArgs),
    /// G/J against beta chi^2/q, no envelope.
    Theorem17(RunArgs),
    /// Cluster-size tail conditioned on a connection.
    Tail(RunArgs),
    /// Connection probability to distance n, scanned over beta.
    FnScan(RunArgs),
    /// Self-avoiding walk bounds and the cone series.
    Saw(RunArgs),
    /// Sequence-lemma laboratory.
    Seq(RunArgs),
    /// Kind taken from the config's `kind` field.
    Run(RunArgs),
    /// Renders SVGs from a results directory into that directory.
    Plot {
        dir: PathBuf,
        /// Write the SVGs here instead.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// One manifest entry.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Provenance of a run, written as `run.json`.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub kind: String,
    pub config_sha256: String,
    pub version: String,
    pub seed: Option<u64>,
    pub jobs: usize,
    pub wall_time_s: f64,
    pub manifest: Vec<ManifestEntry>,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    field: Option<&'a str>,
    message: String,
}

fn report(e: &RunError) -> i32 {
    let (error, field, message) = match e {
        RunError::Config(c) => ("config", Some(c.field.as_str()), c.message.clone()),
        RunError::Conflict(m) => ("conflict", None, m.clone()),
        RunError::Budget(m) => ("budget", None, m.clone()),
        RunError::Other(m) => ("error", None, m.clone()),
    };
    let json = serde_json::to_string(&ErrorReport { error, field, message }).expect("error serializes");
    eprintln!("{json}");
    e.exit_code()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path, e: std::io::Error) -> RunError {
    RunError::Other(format!("{}: {e}", path.display()))
}

/// Reads, parses and seeds the config.
pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig, RunError> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| ConfigError { field: "--config".into(), message: format!("{}: {e}", p.display()) })?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if seed.is_some() {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Manifest over `outputs` in name order.
pub fn manifest(outputs: &[Output]) -> Vec<ManifestEntry> {
    let mut m: Vec<ManifestEntry> = outputs
        .iter()
        .map(|o| ManifestEntry { file: o.name.clone(), sha256: sha256_hex(&o.bytes), bytes: o.bytes.len() as u64 })
        .collect();
    m.sort_by(|a, b| a.file.cmp(&b.file));
    m
}

/// Writes `files` into a fresh `<parent>/<stem>` via a `.partial` sibling and
/// a rename; a numeric suffix avoids collisions.
fn write_atomically(parent: &Path, stem: &str, files: &[Output]) -> Result<PathBuf, RunError> {
    fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    let mut target = parent.join(stem);
    let mut k = 1;
    while target.exists() {
        target = parent.join(format!("{stem}-{k}"));
        k += 1;
    }
    let partial = target.with_extension("partial");
    if partial.exists() {
        fs::remove_dir_all(&partial).map_err(|e| io_err(&partial, e))?;
    }
    fs::create_dir(&partial).map_err(|e| io_err(&partial, e))?;
    for f in files {
        let p = partial.join(&f.name);
        fs::write(&p, &f.bytes).map_err(|e| io_err(&p, e))?;
    }
    fs::rename(&partial, &target).map_err(|e| io_err(&target, e))?;
    Ok(target)
}

/// Runs one experiment and writes its directory. Returns the directory.
pub fn execute(kind: Kind, args_config: Option<&Path>, out: Option<&Path>, jobs: usize, seed: Option<u64>) -> Result<PathBuf, RunError> {
    let cfg = load_config(args_config, seed)?;
    cfg.validate(kind)?;
    let effective = cfg.to_toml();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| RunError::Other(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let seed_value = cfg.seed.unwrap_or(0);
    let mut outputs = pool.install(|| experiments::run(kind, &cfg, seed_value))?;
    let wall = start.elapsed().as_secs_f64();
    outputs.push(Output { name: "config.toml".into(), bytes: effective.clone().into_bytes() });
    let record = RunRecord {
        kind: kind.name().into(),
        config_sha256: sha256_hex(effective.as_bytes()),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        jobs: jobs.max(1),
        wall_time_s: wall,
        manifest: manifest(&outputs),
    };
    let mut run_json = serde_json::to_vec_pretty(&record).map_err(|e| RunError::Other(e.to_string()))?;
    run_json.push(b'\n');
    outputs.push(Output { name: "run.json".into(), bytes: run_json });
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let parent = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&cfg.output));
    write_atomically(&parent, &format!("{}-{secs}", kind.name()), &outputs)
}

/// Renders the plots of `dir` into `out` (default `dir`), one temp file and
/// rename per SVG.
pub fn plot_into(dir: &Path, out: Option<&Path>) -> Result<Vec<PathBuf>, RunError> {
    let svgs = plot::plot_dir(dir)?;
    let target = out.unwrap_or(dir);
    fs::create_dir_all(target).map_err(|e| io_err(target, e))?;
    let mut written = Vec::new();
    for s in svgs {
        let p = target.join(&s.name);
        let tmp = target.join(format!("{}.partial", s.name));
        fs::write(&tmp, &s.bytes).map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &p).map_err(|e| io_err(&p, e))?;
        written.push(p);
    }
    Ok(written)
}

fn kind_of(c: &Command) -> Option<Kind> {
    Some(match c {
        Command::Wulff(_) => Kind::Wulff,
        Command::Criterion(_) => Kind::Criterion,
        Command::AlphaSat(_) => Kind::AlphaSat,
        Command::Exact(_) => Kind::Exact,
        Command::Mc(_) => Kind::Mc,
        Command::Theorem14(_) => Kind::Theorem14,
        Command::Theorem17(_) => Kind::Theorem17,
        Command::Tail(_) => Kind::Tail,
        Command::FnScan(_) => Kind::FnScan,
        Command::Saw(_) => Kind::Saw,
        Command::Seq(_) => Kind::Seq,
        Command::Run(_) | Command::Plot { .. } => return None,
    })
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    let args = match &cli.command {
        Command::Plot { dir, out } => {
            for p in plot_into(dir, out.as_deref())? {
                println!("{}", p.display());
            }
            return Ok(());
        }
        Command::Wulff(a)
        | Command::Criterion(a)
        | Command::AlphaSat(a)
        | Command::Exact(a)
        | Command::Mc(a)
        | Command::Theorem14(a)
        | Command::Theorem17(a)
        | Command::Tail(a)
        | Command::FnScan(a)
        | Command::Saw(a)
        | Command::Seq(a)
        | Command::Run(a) => a.clone(),
    };
    let kind = match kind_of(&cli.command) {
        Some(k) => k,
        None => load_config(args.config.as_deref(), None)?
            .kind
            .ok_or_else(|| ConfigError { field: "kind".into(), message: "`run` needs a kind in the config".into() })?,
    };
    if args.print_config {
        let cfg = load_config(args.config.as_deref(), args.seed)?;
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let dir = execute(kind, args.config.as_deref(), args.out.as_deref(), args.jobs, args.seed)?;
    println!("{}", dir.display());
    Ok(())
}

/// Entry point; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}
