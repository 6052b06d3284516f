//! Command-line surface for the pairflow toolkit: pair construction,
//! dataset-driven sampling, diagnostics, continuous-flow demos, and
//! format conversion, each with a reproducibility manifest.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O or file-format failure,
//! 3 numeric/domain error. Diagnostics go to stderr; with `--json` the
//! only thing on stdout is the report.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use pairflow::{
    chamfer, empirical_coverage, pair_continuous, pair_hamming_stats, pairflow, read_pairs,
    sample_forward, total_correlation, two_moons_nfold, write_pairs, DatasetStore, FinalRule,
    PointSet, Scheduler, SeedSpec, StepConfig, StreamDomain,
};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use manifest::RunManifest;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<pairflow::Error> for CliError {
    fn from(e: pairflow::Error) -> Self {
        use pairflow::Error as E;
        match &e {
            E::Io { .. }
            | E::BadMagic { .. }
            | E::BadVersion { .. }
            | E::ChecksumMismatch { .. }
            | E::Malformed { .. } => CliError::Io(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "pairflow",
    version,
    about = "Closed-form discrete flows over token datasets: exact denoisers, \
             coupled pair construction, sampling, and diagnostics"
)]
struct Cli {
    /// Worker threads (default: PAIRFLOW_THREADS env var, else all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Print the report as JSON on stdout; diagnostics stay on stderr
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Invert every dataset row to a coupled noise source, writing a pair file
    Pair(PairArgs),
    /// Draw new sequences by integrating the dataset-driven forward flow
    Sample(SampleArgs),
    /// Measure how much of the dataset forward sampling reproduces exactly
    Coverage(CoverageArgs),
    /// Total-correlation probe of a conditional sampler
    Tc(TcArgs),
    /// Hamming statistics of the endpoints in a pair file
    Pairstats(PairstatsArgs),
    /// Generate a stacked two-moons point cloud
    GenMoons(GenMoonsArgs),
    /// Transport Gaussian sources onto a point cloud, pairing each source
    PairContinuous(PairContinuousArgs),
    /// Symmetric Chamfer discrepancy between two point clouds
    Chamfer(ChamferArgs),
    /// Convert IDX images or CSV tokens to the DTOK dataset format
    Convert(ConvertArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.code());
    }
}

fn run(cli: Cli) -> CliResult {
    init_threads(cli.threads)?;
    let json = cli.json;
    match cli.command {
        Command::Pair(a) => cmd_pair(a, json),
        Command::Sample(a) => cmd_sample(a, json),
        Command::Coverage(a) => cmd_coverage(a, json),
        Command::Tc(a) => cmd_tc(a, json),
        Command::Pairstats(a) => cmd_pairstats(a, json),
        Command::GenMoons(a) => cmd_gen_moons(a, json),
        Command::PairContinuous(a) => cmd_pair_continuous(a, json),
        Command::Chamfer(a) => cmd_chamfer(a, json),
        Command::Convert(a) => cmd_convert(a, json),
    }
}

fn init_threads(flag: Option<usize>) -> CliResult {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var("PAIRFLOW_THREADS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| {
                CliError::Usage(format!("PAIRFLOW_THREADS={v:?} is not a thread count"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Shared helpers

fn extension(path: &Path) -> Option<&str> {
    path.extension().and_then(|e| e.to_str())
}

/// Loads `.csv` (requires `--k`) or DTOK datasets by extension.
fn load_dataset(path: &Path, k: Option<u32>) -> CliResult<DatasetStore> {
    if extension(path) == Some("csv") {
        let k = k.ok_or_else(|| CliError::Usage("--k is required for CSV datasets".into()))?;
        Ok(DatasetStore::read_csv(path, k)?)
    } else {
        Ok(DatasetStore::read_dtok(path)?)
    }
}

fn load_points(path: &Path) -> CliResult<PointSet> {
    if extension(path) == Some("csv") {
        Ok(PointSet::read_csv(path)?)
    } else {
        Ok(PointSet::read_cpts(path)?)
    }
}

fn write_points(ps: &PointSet, path: &Path) -> CliResult {
    if extension(path) == Some("csv") {
        ps.write_csv(path)?;
    } else {
        ps.write_cpts(path)?;
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numeric(format!("serialize report: {e}")))
}

/// Prints the report: JSON on stdout in json mode, a human line otherwise.
fn emit<T: Serialize>(json_mode: bool, report: &T, human: String) -> CliResult {
    if json_mode {
        println!("{}", to_json(report)?);
    } else {
        println!("{human}");
    }
    Ok(())
}

/// Writes the report JSON to `out` and a manifest alongside it.
fn write_report_artifact<T: Serialize>(
    report: &T,
    out: &Path,
    mut man: RunManifest,
    started: Instant,
) -> CliResult {
    fs::write(out, to_json(report)? + "\n")
        .map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    man.add_output(out)?;
    man.write_alongside(out, started)?;
    Ok(())
}

fn parse_scheduler(s: &str) -> CliResult<Scheduler> {
    s.parse().map_err(CliError::Usage)
}

// ---------------------------------------------------------------------------
// pair

#[derive(clap::Args)]
struct PairArgs {
    /// Token dataset (.dtok, or .csv with --k)
    #[arg(long)]
    data: PathBuf,
    /// Vocabulary size, required for CSV input
    #[arg(long)]
    k: Option<u32>,
    /// Euler steps on the backward time grid
    #[arg(long, default_value_t = 20)]
    steps: u32,
    /// Mixing schedule: linear, cosine, or poly:<p>
    #[arg(long, default_value = "linear")]
    scheduler: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Split the dataset into this many subsets paired independently
    #[arg(long, default_value_t = 1)]
    subsets: usize,
    /// Output pair file
    #[arg(long)]
    out: PathBuf,
}

fn cmd_pair(a: PairArgs, json: bool) -> CliResult {
    let started = Instant::now();
    let sched = parse_scheduler(&a.scheduler)?;
    let ds = load_dataset(&a.data, a.k)?;
    eprintln!(
        "pairing {} rows (n = {}, k = {}) with {} steps, {} subset(s)",
        ds.len(),
        ds.n(),
        ds.k(),
        a.steps,
        a.subsets
    );
    let cfg = StepConfig::new(a.steps)?;
    let ps = pairflow(&ds, &cfg, &sched, &SeedSpec::new(a.seed), a.subsets)?;
    write_pairs(&ps, &a.out)?;

    let mut man = RunManifest::new(
        "pair",
        json!({
            "data": a.data,
            "k": ds.k(),
            "steps": a.steps,
            "scheduler": sched.to_string(),
            "seed": a.seed,
            "subsets": a.subsets,
            "out": a.out,
        }),
        Some(a.seed),
    );
    man.add_input(&a.data)?;
    man.add_output(&a.out)?;
    let man_path = man.write_alongside(&a.out, started)?;

    let report = json!({
        "pairs": ps.len(),
        "n": ps.n(),
        "k": ps.k(),
        "subsets": a.subsets,
        "out": a.out,
        "manifest": man_path,
    });
    emit(
        json,
        &report,
        format!(
            "wrote {} pairs to {} (manifest {})",
            ps.len(),
            a.out.display(),
            man_path.display()
        ),
    )
}

// ---------------------------------------------------------------------------
// sample

#[derive(Clone, Copy, ValueEnum)]
enum FinalArg {
    /// Sample the terminal token from the denoiser
    Sample,
    /// Take the most likely terminal token
    Argmax,
}

impl From<FinalArg> for FinalRule {
    fn from(a: FinalArg) -> FinalRule {
        match a {
            FinalArg::Sample => FinalRule::Sample,
            FinalArg::Argmax => FinalRule::Argmax,
        }
    }
}

#[derive(clap::Args)]
struct SampleArgs {
    /// Token dataset (.dtok, or .csv with --k)
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    k: Option<u32>,
    /// Number of sequences to draw
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 20)]
    steps: u32,
    /// Mixing schedule: linear, cosine, or poly:<p>
    #[arg(long, default_value = "linear")]
    scheduler: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Terminal rule at t = 1
    #[arg(long = "final", value_enum, default_value_t = FinalArg::Sample)]
    final_rule: FinalArg,
    /// Output token file (DTOK)
    #[arg(long)]
    out: PathBuf,
}

/// DTOK header for a zero-row file; `DatasetStore` cannot represent an
/// empty dataset, but an empty artifact still records its shape.
fn write_empty_dtok(path: &Path, n: usize, k: u32) -> CliResult {
    let mut bytes = Vec::with_capacity(21);
    bytes.extend_from_slice(b"DTOK");
    bytes.push(1);
    bytes.extend_from_slice(&(n as u32).to_le_bytes());
    bytes.extend_from_slice(&k.to_le_bytes());
    bytes.extend_from_slice(&0u64.to_le_bytes());
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn cmd_sample(a: SampleArgs, json: bool) -> CliResult {
    let started = Instant::now();
    let sched = parse_scheduler(&a.scheduler)?;
    let ds = load_dataset(&a.data, a.k)?;
    let cfg = StepConfig::new(a.steps)?.with_final_rule(a.final_rule.into());
    let seeds = SeedSpec::new(a.seed);
    eprintln!("drawing {} sequences with {} steps", a.count, a.steps);

    if a.count == 0 {
        write_empty_dtok(&a.out, ds.n(), ds.k())?;
    } else {
        let samples: Vec<Vec<u32>> = (0..a.count)
            .into_par_iter()
            .map(|i| {
                let mut rng = seeds.stream(StreamDomain::ForwardSample, i as u64);
                sample_forward(&ds, &cfg, &sched, &mut rng)
            })
            .collect::<pairflow::Result<_>>()?;
        let flat: Vec<u32> = samples.into_iter().flatten().collect();
        DatasetStore::new(ds.n(), ds.k(), flat)?.write_dtok(&a.out)?;
    }

    let mut man = RunManifest::new(
        "sample",
        json!({
            "data": a.data,
            "k": ds.k(),
            "count": a.count,
            "steps": a.steps,
            "scheduler": sched.to_string(),
            "seed": a.seed,
            "final": match a.final_rule { FinalArg::Sample => "sample", FinalArg::Argmax => "argmax" },
            "out": a.out,
        }),
        Some(a.seed),
    );
    man.add_input(&a.data)?;
    man.add_output(&a.out)?;
    let man_path = man.write_alongside(&a.out, started)?;

    let report = json!({
        "samples": a.count,
        "n": ds.n(),
        "k": ds.k(),
        "out": a.out,
        "manifest": man_path,
    });
    emit(
        json,
        &report,
        format!("wrote {} samples to {}", a.count, a.out.display()),
    )
}

// ---------------------------------------------------------------------------
// coverage

#[derive(clap::Args)]
struct CoverageArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    k: Option<u32>,
    /// Forward draws (default: one per dataset row)
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long, default_value_t = 20)]
    steps: u32,
    /// Mixing schedule: linear, cosine, or poly:<p>
    #[arg(long, default_value = "linear")]
    scheduler: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional path for the JSON report artifact
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_coverage(a: CoverageArgs, json: bool) -> CliResult {
    let started = Instant::now();
    let sched = parse_scheduler(&a.scheduler)?;
    let ds = load_dataset(&a.data, a.k)?;
    let draws = a.draws.unwrap_or_else(|| ds.len());
    let cfg = StepConfig::new(a.steps)?;
    eprintln!("sampling {} draws against {} rows", draws, ds.len());
    let report = empirical_coverage(&ds, draws, &cfg, &sched, &SeedSpec::new(a.seed))?;

    if let Some(out) = &a.out {
        let mut man = RunManifest::new(
            "coverage",
            json!({
                "data": a.data,
                "k": ds.k(),
                "draws": draws,
                "steps": a.steps,
                "scheduler": sched.to_string(),
                "seed": a.seed,
                "out": out,
            }),
            Some(a.seed),
        );
        man.add_input(&a.data)?;
        write_report_artifact(&report, out, man, started)?;
    }
    emit(
        json,
        &report,
        format!(
            "coverage: empirical {:.2}% vs predicted {:.2}% ({} of {} rows matched, {} draws unmatched)",
            100.0 * report.empirical,
            100.0 * report.predicted,
            report.matched_unique,
            report.rows,
            report.unmatched_draws
        ),
    )
}

// ---------------------------------------------------------------------------
// tc

#[derive(clap::Args)]
struct TcArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    k: Option<u32>,
    /// Independent estimates to average
    #[arg(long, default_value_t = 8)]
    anchors: usize,
    /// Samples per estimate
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    #[arg(long, default_value_t = 20)]
    steps: u32,
    /// Mixing schedule: linear, cosine, or poly:<p>
    #[arg(long, default_value = "linear")]
    scheduler: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probe a factorized uniform sampler of the same shape instead of
    /// the dataset-driven flow (baseline: total correlation near zero)
    #[arg(long)]
    reference: bool,
    /// Optional path for the JSON report artifact
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_tc(a: TcArgs, json: bool) -> CliResult {
    let started = Instant::now();
    let sched = parse_scheduler(&a.scheduler)?;
    let ds = load_dataset(&a.data, a.k)?;
    let seeds = SeedSpec::new(a.seed);
    eprintln!(
        "total correlation over {} anchors x {} replicates ({})",
        a.anchors,
        a.replicates,
        if a.reference { "factorized reference" } else { "dataset flow" }
    );

    let report = if a.reference {
        let (n, k) = (ds.n(), ds.k());
        total_correlation(
            |_, _, rng| Ok((0..n).map(|_| rng.gen_range(0..k)).collect()),
            a.anchors,
            a.replicates,
            &seeds,
        )?
    } else {
        let cfg = StepConfig::new(a.steps)?;
        total_correlation(
            |_, _, rng| sample_forward(&ds, &cfg, &sched, rng),
            a.anchors,
            a.replicates,
            &seeds,
        )?
    };

    if let Some(out) = &a.out {
        let mut man = RunManifest::new(
            "tc",
            json!({
                "data": a.data,
                "k": ds.k(),
                "anchors": a.anchors,
                "replicates": a.replicates,
                "steps": a.steps,
                "scheduler": sched.to_string(),
                "seed": a.seed,
                "reference": a.reference,
                "out": out,
            }),
            Some(a.seed),
        );
        man.add_input(&a.data)?;
        write_report_artifact(&report, out, man, started)?;
    }
    emit(
        json,
        &report,
        format!(
            "total correlation: {:.4} nats (std error {:.4}) over {} anchors x {} replicates",
            report.mean_nats, report.std_error, report.anchors, report.replicates
        ),
    )
}

// ---------------------------------------------------------------------------
// pairstats

#[derive(clap::Args)]
struct PairstatsArgs {
    /// Pair file to analyze
    #[arg(long)]
    pairs: PathBuf,
    /// Optional path for the JSON report artifact
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CSV histogram (distance,count)
    #[arg(long)]
    hist_out: Option<PathBuf>,
}

fn cmd_pairstats(a: PairstatsArgs, json: bool) -> CliResult {
    let started = Instant::now();
    let ps = read_pairs(&a.pairs)?;
    let stats = pair_hamming_stats(&ps)?;

    if let Some(hist) = &a.hist_out {
        let mut body = String::from("distance,count\n");
        for (d, c) in stats.histogram.iter().enumerate() {
            body.push_str(&format!("{d},{c}\n"));
        }
        fs::write(hist, body).map_err(|e| CliError::Io(format!("{}: {e}", hist.display())))?;
    }
    if let Some(out) = &a.out {
        let mut man = RunManifest::new(
            "pairstats",
            json!({
                "pairs": a.pairs,
                "out": out,
                "hist_out": a.hist_out,
            }),
            None,
        );
        man.add_input(&a.pairs)?;
        if let Some(hist) = &a.hist_out {
            man.add_output(hist)?;
        }
        write_report_artifact(&stats, out, man, started)?;
    }
    emit(
        json,
        &stats,
        format!(
            "pair distance: mean {:.3}, std {:.3} over {} pairs x {} positions (independent baseline {:.3})",
            stats.mean, stats.std, stats.pairs, stats.positions, stats.independent_baseline
        ),
    )
}

// ---------------------------------------------------------------------------
// gen-moons

#[derive(clap::Args)]
struct GenMoonsArgs {
    /// Independent moon pairs stacked into 2*folds dimensions
    #[arg(long, default_value_t = 1)]
    folds: usize,
    /// Number of points
    #[arg(long)]
    samples: usize,
    /// Gaussian noise scale
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output point file (.cpts, or .csv)
    #[arg(long)]
    out: PathBuf,
}

fn cmd_gen_moons(a: GenMoonsArgs, json: bool) -> CliResult {
    let started = Instant::now();
    let ps = two_moons_nfold(a.folds, a.samples, a.noise, &SeedSpec::new(a.seed))?;
    write_points(&ps, &a.out)?;

    let mut man = RunManifest::new(
        "gen-moons",
        json!({
            "folds": a.folds,
            "samples": a.samples,
            "noise": a.noise,
            "seed": a.seed,
            "out": a.out,
        }),
        Some(a.seed),
    );
    man.add_output(&a.out)?;
    let man_path = man.write_alongside(&a.out, started)?;

    let report = json!({
        "points": ps.len(),
        "dims": ps.dim(),
        "out": a.out,
        "manifest": man_path,
    });
    emit(
        json,
        &report,
        format!(
            "wrote {} points in {} dimensions to {}",
            ps.len(),
            ps.dim(),
            a.out.display()
        ),
    )
}

// ---------------------------------------------------------------------------
// pair-continuous

#[derive(clap::Args)]
struct PairContinuousArgs {
    /// Point cloud to transport onto (.cpts, or .csv)
    #[arg(long)]
    data: PathBuf,
    /// Number of Gaussian sources to transport
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 256)]
    steps: u32,
    /// Snap to the nearest data point when the residual is this small
    #[arg(long, default_value_t = 1e-3)]
    snap_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes <prefix>.x0.cpts, <prefix>.x1.cpts and <prefix>.manifest.json
    #[arg(long)]
    out_prefix: PathBuf,
}

fn cmd_pair_continuous(a: PairContinuousArgs, json: bool) -> CliResult {
    let started = Instant::now();
    let ps = load_points(&a.data)?;
    eprintln!(
        "transporting {} sources onto {} points with {} steps",
        a.count,
        ps.len(),
        a.steps
    );
    let pairing = pair_continuous(&ps, a.count, a.steps, a.snap_tol, &SeedSpec::new(a.seed))?;

    let x0_path = PathBuf::from(format!("{}.x0.cpts", a.out_prefix.display()));
    let x1_path = PathBuf::from(format!("{}.x1.cpts", a.out_prefix.display()));
    pairing.x0.write_cpts(&x0_path)?;
    pairing.x1.write_cpts(&x1_path)?;

    let mut man = RunManifest::new(
        "pair-continuous",
        json!({
            "data": a.data,
            "count": a.count,
            "steps": a.steps,
            "snap_tol": a.snap_tol,
            "seed": a.seed,
            "out_prefix": a.out_prefix,
        }),
        Some(a.seed),
    );
    man.add_input(&a.data)?;
    man.add_output(&x0_path)?;
    man.add_output(&x1_path)?;
    let man_path = man.write_alongside(&a.out_prefix, started)?;

    let report = json!({
        "count": a.count,
        "dims": pairing.x1.dim(),
        "snap_rate": pairing.snap_rate,
        "mean_residual": pairing.mean_residual,
        "x0": x0_path,
        "x1": x1_path,
        "manifest": man_path,
    });
    emit(
        json,
        &report,
        format!(
            "transported {} sources (snap rate {:.3}, mean residual {:.2e}) to {} / {}",
            a.count,
            pairing.snap_rate,
            pairing.mean_residual,
            x0_path.display(),
            x1_path.display()
        ),
    )
}

// ---------------------------------------------------------------------------
// chamfer

#[derive(clap::Args)]
struct ChamferArgs {
    /// First point cloud (.cpts, or .csv)
    #[arg(long)]
    a: PathBuf,
    /// Second point cloud (.cpts, or .csv)
    #[arg(long)]
    b: PathBuf,
    /// Compare only the first two coordinates of each point
    #[arg(long)]
    first_two: bool,
}

fn cmd_chamfer(args: ChamferArgs, json: bool) -> CliResult {
    let a = load_points(&args.a)?;
    let b = load_points(&args.b)?;
    let report = chamfer(&a, &b, args.first_two)?;
    emit(
        json,
        &report,
        format!(
            "chamfer: squared {:.6}, euclidean {:.6} over {} dims",
            report.squared, report.euclidean, report.dims
        ),
    )
}

// ---------------------------------------------------------------------------
// convert

#[derive(clap::Args)]
struct ConvertArgs {
    /// IDX image file (magic 0x00000803) or .csv token rows
    #[arg(long)]
    input: PathBuf,
    /// Binarization threshold for IDX pixels: token 1 iff pixel >= threshold
    #[arg(long, default_value_t = 128)]
    threshold: u8,
    /// CSV: vocabulary size (required). IDX: omit to binarize, or 256 to
    /// pass 8-bit intensities through as tokens
    #[arg(long)]
    k: Option<u32>,
    /// Output dataset (DTOK)
    #[arg(long)]
    out: PathBuf,
}

const IDX_IMAGE_MAGIC: [u8; 4] = [0, 0, 8, 3];

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn cmd_convert(a: ConvertArgs, json: bool) -> CliResult {
    let started = Instant::now();
    let mut man = RunManifest::new(
        "convert",
        json!({
            "input": a.input,
            "threshold": a.threshold,
            "k": a.k,
            "out": a.out,
        }),
        None,
    );
    man.add_input(&a.input)?;

    let bytes =
        fs::read(&a.input).map_err(|e| CliError::Io(format!("{}: {e}", a.input.display())))?;
    let ds = if bytes.len() >= 4 && bytes[..4] == IDX_IMAGE_MAGIC {
        let ds = convert_idx(&bytes, &a, &mut man)?;
        man.add_note(format!("binarization threshold: {}", a.threshold));
        ds
    } else if extension(&a.input) == Some("csv") {
        let k = a
            .k
            .ok_or_else(|| CliError::Usage("--k is required for CSV input".into()))?;
        DatasetStore::read_csv(&a.input, k)?
    } else {
        return Err(CliError::Io(format!(
            "{}: neither an IDX image file (magic 0x00000803) nor .csv",
            a.input.display()
        )));
    };

    ds.write_dtok(&a.out)?;
    man.add_output(&a.out)?;
    let man_path = man.write_alongside(&a.out, started)?;

    let report = json!({
        "rows": ds.len(),
        "n": ds.n(),
        "k": ds.k(),
        "out": a.out,
        "manifest": man_path,
    });
    emit(
        json,
        &report,
        format!(
            "wrote {} rows (n = {}, k = {}) to {}",
            ds.len(),
            ds.n(),
            ds.k(),
            a.out.display()
        ),
    )
}

fn convert_idx(bytes: &[u8], a: &ConvertArgs, man: &mut RunManifest) -> CliResult<DatasetStore> {
    let path = &a.input;
    if bytes.len() < 16 {
        return Err(CliError::Io(format!(
            "{}: IDX header truncated",
            path.display()
        )));
    }
    let count = be_u32(bytes, 4) as usize;
    let rows = be_u32(bytes, 8) as usize;
    let cols = be_u32(bytes, 12) as usize;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| CliError::Io(format!("{}: IDX dimensions overflow", path.display())))?;
    let expected = count
        .checked_mul(n)
        .ok_or_else(|| CliError::Io(format!("{}: IDX dimensions overflow", path.display())))?;
    let pixels = &bytes[16..];
    if pixels.len() != expected {
        return Err(CliError::Io(format!(
            "{}: expected {} pixels for {} x {} x {}, found {}",
            path.display(),
            expected,
            count,
            rows,
            cols,
            pixels.len()
        )));
    }
    man.add_note(format!(
        "idx input: {count} images of {rows} x {cols} ({n} tokens per row)"
    ));

    let (k, tokens): (u32, Vec<u32>) = match a.k {
        None => (
            2,
            pixels
                .iter()
                .map(|&p| u32::from(p >= a.threshold))
                .collect(),
        ),
        Some(256) => (256, pixels.iter().map(|&p| u32::from(p)).collect()),
        Some(other) => {
            return Err(CliError::Usage(format!(
                "IDX input supports --k 256 (intensity passthrough) or no --k \
                 (binarize); got --k {other}"
            )));
        }
    };
    Ok(DatasetStore::new(n, k, tokens)?)
}
