//! `attnet`: simulate recordings, run filters, train and apply networks, and
//! run the evaluation protocols. Failures print a JSON object on stderr and
//! exit nonzero.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use attnet_core::data::{load_recording, save_recording, simulate_recording, taxonomy, Kind, MotionLabel, Pausing, Recording, Speed};
use attnet_core::eval::{
    compute_rmse, default_split, emit_report, run_ablation, run_loocv, run_size_sweep, EmitOptions, EvalReport, Split,
};
use attnet_core::filters::{run_filter, tune_filter, FilterParams, Variant};
use attnet_core::nn::{load_checkpoint, predict, save_checkpoint, train_with, EpochRecord, History};
use attnet_core::{Error, Quaternion};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "attnet", version, about = "IMU attitude estimation: filters and learned estimators")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Overrides the training seed and the simulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON run configuration (net, train, filter, filter_grid, imu, tcn, sizes).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Independent jobs (folds, variants, sizes) to run concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Record wall-clock runtimes in report CSVs (makes reruns differ).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Simulate one recording, or a taxonomy set into a directory.
    Simulate(SimulateArgs),
    /// Run a conventional filter over a recording.
    Filter(FilterArgs),
    /// Grid-search the baseline filter on a set of recordings.
    TuneFilter(TuneArgs),
    /// Train a network on a directory of recordings.
    Train(TrainArgs),
    /// Apply a trained network to a recording.
    Predict(PredictArgs),
    /// Leave-one-out cross-validation.
    Loocv(ProtocolArgs),
    /// Cumulative ablation on a train/validation split.
    Ablation(AblationArgs),
    /// Hidden-size sweep on a train/validation split.
    SizeSweep(SweepArgs),
    /// Merge report JSON files and write CSVs and plot scripts.
    Report(ReportArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum KindArg {
    Rotation,
    Translation,
    Arbitrary,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SpeedArg {
    Slow,
    Medium,
    Fast,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum PausingArg {
    Paused,
    Nonstop,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "arbitrary")]
    kind: KindArg,
    #[arg(long, value_enum, default_value = "medium")]
    speed: SpeedArg,
    #[arg(long, value_enum, default_value = "nonstop")]
    pausing: PausingArg,
    /// Seconds.
    #[arg(long, default_value_t = 180.0)]
    duration: f64,
    /// Hz.
    #[arg(long, default_value_t = 286.0)]
    rate: f64,
    /// Simulate this many taxonomy recordings (seeds seed, seed+1, ...) into
    /// the directory given by --out instead of one recording.
    #[arg(long)]
    set: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum VariantArg {
    Baseline,
    FixedGain,
    Strapdown,
}

#[derive(Args, Debug)]
struct FilterArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "baseline")]
    variant: VariantArg,
    /// Correction fraction per step for the fixed-gain variant.
    #[arg(long, default_value_t = 0.01)]
    gain: f64,
    /// Baseline parameters as written by `tune-filter`; defaults to the config.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Estimate CSV (`t,qw,qx,qy,qz`).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TuneArgs {
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data_dir: PathBuf,
    /// Validation recordings; must not overlap the training recordings.
    #[arg(long)]
    val_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch history CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ProtocolArgs {
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct SplitArgs {
    /// Validation recordings by file stem, comma-separated; by default the
    /// recordings with maximum, median and minimum baseline error.
    #[arg(long, value_delimiter = ',')]
    val: Vec<String>,
}

#[derive(Args, Debug)]
struct AblationArgs {
    #[command(flatten)]
    io: ProtocolArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// Skip the TCN arm.
    #[arg(long)]
    rnn_only: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    io: ProtocolArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// Hidden sizes, comma-separated; defaults to the config.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// `report.json` files written by loocv / ablation / size-sweep.
    #[arg(long = "in", required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

/// CLI-level failure: either a library error or a usage problem.
#[derive(Debug)]
enum Failure {
    Core(Error),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn to_json(&self) -> serde_json::Value {
        match self {
            Failure::Usage(m) => json!({"error": {"kind": "usage", "message": m}}),
            Failure::Core(e) => {
                let kind = match e {
                    Error::Domain(_) => "domain",
                    Error::Parse { .. } => "parse",
                    Error::Shape(_) => "shape",
                    Error::Config(_) => "config",
                    Error::Training { .. } => "training",
                    Error::Fold { .. } => "fold",
                    Error::Checkpoint(_) => "checkpoint",
                    Error::Io { .. } => "io",
                    Error::Json(_) => "json",
                };
                let mut v = json!({"error": {"kind": kind, "message": e.to_string()}});
                match e {
                    Error::Parse { row, .. } => v["error"]["row"] = json!(row),
                    Error::Fold { fold, recording, .. } => {
                        v["error"]["fold"] = json!(fold);
                        v["error"]["recording"] = json!(recording);
                    }
                    Error::Training { epoch, iteration, .. } => {
                        v["error"]["epoch"] = json!(epoch);
                        v["error"]["iteration"] = json!(iteration);
                    }
                    _ => {}
                }
                v
            }
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", Failure::Usage(e.to_string().trim().to_string()).to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let g = cli.global;
    let mut cfg = RunConfig::load(g.config.as_deref())?;
    if let Some(s) = g.seed {
        cfg.train.seed = s;
    }
    let emit = EmitOptions {
        include_runtime: g.timing,
    };
    match cli.cmd {
        Cmd::Simulate(a) => simulate(&cfg, g.seed.unwrap_or(0), a),
        Cmd::Filter(a) => filter(&cfg, a),
        Cmd::TuneFilter(a) => {
            let recs = load_dir(&a.data_dir)?;
            let p = tune_filter(&recs, &cfg.filter_grid.expand(cfg.filter))?;
            write_json(&a.out, &p)?;
            println!("{}", json!({"params": p, "mean_rmse_deg": attnet_core::filters::mean_baseline_rmse(&recs, &p)?}));
            Ok(())
        }
        Cmd::Train(a) => train_cmd(&cfg, a, g.timing),
        Cmd::Predict(a) => {
            let net = load_checkpoint(&a.model)?;
            let rec = load_recording(&a.input)?;
            let est = predict(&net, &rec)?;
            write_estimates(&a.out, &rec, &est)?;
            println!("{}", json!({"recording": rec.name, "rmse_deg": compute_rmse(&rec.q_ref, &est, 0)?}));
            Ok(())
        }
        Cmd::Loocv(a) => {
            let recs = load_dir(&a.data_dir)?;
            let res = run_loocv(&recs, &cfg.net, &cfg.train, &cfg.filter_grid.expand(cfg.filter), g.jobs)?;
            finish_report(&res.report, &a.out_dir, emit)?;
            write_json(&a.out_dir.join("tuned_filter.json"), &res.tuned_filter)
        }
        Cmd::Ablation(a) => {
            let recs = load_dir(&a.io.data_dir)?;
            let split = resolve_split(&recs, &a.split, &cfg)?;
            let mut bases = vec![(cfg.net.clone(), cfg.train.clone())];
            if !a.rnn_only {
                bases.push((cfg.tcn.clone(), cfg.train.clone()));
            }
            let res = run_ablation(&recs, &split, &bases, g.jobs)?;
            write_json(&a.io.out_dir.join("split.json"), &split_names(&recs, &split))?;
            write_json(&a.io.out_dir.join("ablation.json"), &res.rows)?;
            finish_report(&res.report, &a.io.out_dir, emit)
        }
        Cmd::SizeSweep(a) => {
            let recs = load_dir(&a.io.data_dir)?;
            let split = resolve_split(&recs, &a.split, &cfg)?;
            let sizes = if a.sizes.is_empty() { cfg.sizes.clone() } else { a.sizes };
            let res = run_size_sweep(&recs, &split, &sizes, &cfg.net, &cfg.train, g.jobs)?;
            write_json(&a.io.out_dir.join("split.json"), &split_names(&recs, &split))?;
            write_json(&a.io.out_dir.join("size_sweep.json"), &res.rows)?;
            finish_report(&res.report, &a.io.out_dir, emit)
        }
        Cmd::Report(a) => {
            let mut merged = EvalReport::new();
            for p in &a.inputs {
                let text = fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?;
                merged.extend(serde_json::from_str(&text).map_err(Error::from)?)?;
            }
            emit_report(&merged, &a.out_dir, emit)?;
            Ok(())
        }
    }
}

fn simulate(cfg: &RunConfig, seed: u64, a: SimulateArgs) -> CliResult<()> {
    if !(a.duration > 0.0) || !(a.rate > 0.0) {
        return Err(Failure::Usage("duration and rate must be positive".into()));
    }
    match a.set {
        None => {
            let label = MotionLabel::new(
                match a.kind {
                    KindArg::Rotation => Kind::Rotation,
                    KindArg::Translation => Kind::Translation,
                    KindArg::Arbitrary => Kind::Arbitrary,
                },
                match a.speed {
                    SpeedArg::Slow => Speed::Slow,
                    SpeedArg::Medium => Speed::Medium,
                    SpeedArg::Fast => Speed::Fast,
                },
                match a.pausing {
                    PausingArg::Paused => Pausing::Paused,
                    PausingArg::Nonstop => Pausing::Nonstop,
                },
            );
            let rec = simulate_recording(label, a.duration, a.rate, &cfg.imu, seed);
            if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| Error::Io {
                    path: parent.to_path_buf(),
                    source: e,
                })?;
            }
            save_recording(&rec, &a.out)?;
        }
        Some(n) => {
            if n == 0 {
                return Err(Failure::Usage("--set needs at least one recording".into()));
            }
            fs::create_dir_all(&a.out).map_err(|e| Error::Io {
                path: a.out.clone(),
                source: e,
            })?;
            for (i, label) in taxonomy(n).into_iter().enumerate() {
                let rec = simulate_recording(label, a.duration, a.rate, &cfg.imu, seed + i as u64);
                save_recording(&rec, a.out.join(format!("{:02}_{}.csv", i, rec.name)))?;
            }
        }
    }
    Ok(())
}

fn filter(cfg: &RunConfig, a: FilterArgs) -> CliResult<()> {
    let rec = load_recording(&a.input)?;
    let variant = match a.variant {
        VariantArg::Baseline => {
            let p = match &a.params {
                Some(path) => read_json::<FilterParams>(path)?,
                None => cfg.filter,
            };
            Variant::Baseline(p)
        }
        VariantArg::FixedGain => {
            if !(0.0..=1.0).contains(&a.gain) {
                return Err(Failure::Usage("--gain must lie in [0, 1]".into()));
            }
            Variant::FixedGain { gain: a.gain }
        }
        VariantArg::Strapdown => Variant::Strapdown,
    };
    let est = run_filter(&rec, &variant, None)?;
    write_estimates(&a.out, &rec, &est)?;
    println!("{}", json!({"recording": rec.name, "method": variant.id(), "rmse_deg": compute_rmse(&rec.q_ref, &est, 0)?}));
    Ok(())
}

fn train_cmd(cfg: &RunConfig, a: TrainArgs, timing: bool) -> CliResult<()> {
    let train_recs = load_dir(&a.data_dir)?;
    let val_recs = match &a.val_dir {
        Some(d) => load_dir(d)?,
        None => Vec::new(),
    };
    let (net, history) = train_with(&train_recs, &val_recs, &cfg.net, &cfg.train, |e: &EpochRecord| {
        let mut line = json!({"epoch": e.epoch, "train_loss": e.train_loss, "val_rmse_deg": e.val_rmse_deg});
        if timing {
            line["seconds"] = json!(e.seconds);
        }
        eprintln!("{line}");
    })?;
    save_checkpoint(&net, &a.out)?;
    if let Some(h) = &a.history {
        write_history(h, &history, timing)?;
    }
    println!(
        "{}",
        json!({"param_count": history.param_count, "iterations": history.iterations, "final_val_rmse_deg": history.last_val_rmse()})
    );
    Ok(())
}

fn resolve_split(recs: &[Recording], a: &SplitArgs, cfg: &RunConfig) -> CliResult<Split> {
    if a.val.is_empty() {
        return Ok(default_split(recs, &cfg.filter_grid.expand(cfg.filter))?);
    }
    let mut val = Vec::new();
    for name in &a.val {
        match recs.iter().position(|r| &r.name == name) {
            Some(i) if !val.contains(&i) => val.push(i),
            Some(_) => return Err(Failure::Usage(format!("validation recording {name} listed twice"))),
            None => return Err(Failure::Usage(format!("no recording named {name}"))),
        }
    }
    let train: Vec<usize> = (0..recs.len()).filter(|i| !val.contains(i)).collect();
    if train.is_empty() {
        return Err(Failure::Usage("no training recordings left".into()));
    }
    Ok(Split { train, val })
}

fn split_names(recs: &[Recording], s: &Split) -> serde_json::Value {
    let names = |ix: &[usize]| ix.iter().map(|&i| recs[i].name.clone()).collect::<Vec<_>>();
    json!({"train": names(&s.train), "val": names(&s.val)})
}

fn finish_report(report: &EvalReport, out_dir: &Path, emit: EmitOptions) -> CliResult<()> {
    emit_report(report, out_dir, emit)?;
    let mut stored = report.clone();
    if !emit.include_runtime {
        for e in &mut stored.entries {
            e.runtime_s = 0.0;
        }
    }
    write_json(&out_dir.join("report.json"), &stored)
}

/// Every `*.csv` recording in `dir`, in file-name order.
fn load_dir(dir: &Path) -> CliResult<Vec<Recording>> {
    let io = |e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(io)?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::Usage(format!("no .csv recordings in {}", dir.display())));
    }
    Ok(paths.iter().map(load_recording).collect::<attnet_core::Result<Vec<_>>>()?)
}

fn write_estimates(path: &Path, rec: &Recording, est: &[Quaternion]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let enc = |e: csv::Error| Error::Domain(format!("csv encoding failed: {e}"));
    w.write_record(["t", "qw", "qx", "qy", "qz"]).map_err(enc)?;
    for (k, q) in est.iter().enumerate() {
        w.write_record([rec.time(k), q.w, q.x, q.y, q.z].map(|v| v.to_string())).map_err(enc)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Domain(e.to_string()))?;
    write_bytes(path, &bytes)
}

fn write_history(path: &Path, h: &History, timing: bool) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let enc = |e: csv::Error| Error::Domain(format!("csv encoding failed: {e}"));
    w.write_record(["epoch", "train_loss", "val_loss", "val_rmse_deg", "lr_end", "head_events", "seconds"]).map_err(enc)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for e in &h.epochs {
        w.write_record([
            e.epoch.to_string(),
            e.train_loss.to_string(),
            opt(e.val_loss),
            opt(e.val_rmse_deg),
            e.lr_end.to_string(),
            e.head_events.to_string(),
            if timing { format!("{:.3}", e.seconds) } else { String::new() },
        ])
        .map_err(enc)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Domain(e.to_string()))?;
    write_bytes(path, &bytes)
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(Error::from)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(serde_json::from_str(&text).map_err(Error::from)?)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let io = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    Ok(())
}
