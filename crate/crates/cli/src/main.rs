use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dte_core::channel::{params_for_target_snr, sample_raw_keys, ChannelParams, Detection};
use dte_core::estimators::{MiEstimatorConfig, MiMethod};
use dte_core::io::{
    parse_real_sequence, write_raw_keys, write_subchannel_csv, write_sweep_csv, write_sweep_json,
    SubChannelRow,
};
use dte_core::recon::{
    beta_rr_crossing, run_sweep, EfficiencySweep, MiXySource, MonteCarlo, SweepConfig,
};
use dte_core::transform::{dte_sequence, DteConfig, GaussianCdf};
use dte_core::validate::{run_validation, ValidateOptions};

const EXIT_VALIDATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Debug)]
enum Failure {
    Usage(String),
    Infeasible(String),
    Validation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Infeasible(_) => EXIT_INFEASIBLE,
            Failure::Validation(_) => EXIT_VALIDATION,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Infeasible(m) | Failure::Validation(m) => m,
        }
    }
}

impl From<dte_core::Error> for Failure {
    fn from(e: dte_core::Error) -> Self {
        match e {
            dte_core::Error::UnreachableSnr { .. } => Failure::Infeasible(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Parser, Debug)]
#[command(
    name = "dte",
    version,
    about = "Distributional transform expansion for CV-QKD reconciliation"
)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Expand samples into DTE bits, one output row per level.
    Encode(EncodeArgs),
    /// Draw a raw key pair from the channel and write it as CSV.
    Simulate(SimulateArgs),
    /// Per-level transition probabilities, BSC capacities and mutual informations.
    Subchannels(SubchannelArgs),
    /// Maximum reconciliation efficiency over an SNR grid.
    Sweep(SweepArgs),
    /// Run the cross-module invariant suite.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct EncodeArgs {
    /// File of newline- or comma-separated samples.
    #[arg(long, conflicts_with = "values", required_unless_present = "values")]
    input: Option<PathBuf>,
    /// Inline comma-separated samples.
    #[arg(long, allow_hyphen_values = true)]
    values: Option<String>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mean: f64,
    #[arg(long, conflicts_with = "variance")]
    std_dev: Option<f64>,
    #[arg(long)]
    variance: Option<f64>,
    #[arg(long, default_value_t = 3)]
    depth: u32,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ChannelArgs {
    /// Modulation variance in shot-noise units.
    #[arg(long, default_value_t = 1.0)]
    mod_variance: f64,
    #[arg(long, default_value_t = 0.02)]
    excess_noise: f64,
}

#[derive(Args, Debug, Clone)]
struct McArgs {
    /// Samples per repeat.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, env = "DTE_SEED", default_value_t = 1)]
    seed: u64,
    /// Neighbours of the kNN estimator.
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Knn)]
    method: MethodArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Knn,
    Oracle,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DetectionArg {
    Hom,
    Het,
}

impl From<DetectionArg> for Detection {
    fn from(d: DetectionArg) -> Self {
        match d {
            DetectionArg::Hom => Detection::Homodyne,
            DetectionArg::Het => Detection::Heterodyne,
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    detection: DetectionArg,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "transmittance")]
    snr_db: Option<f64>,
    #[arg(long, required_unless_present = "snr_db")]
    transmittance: Option<f64>,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, env = "DTE_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum SubchannelPreset {
    Fig1,
    Fig2,
}

#[derive(Args, Debug)]
struct SubchannelArgs {
    #[arg(long, value_enum, required_unless_present = "preset")]
    detection: Option<DetectionArg>,
    #[arg(long, allow_hyphen_values = true, required_unless_present = "preset")]
    snr_db: Option<f64>,
    #[arg(long, default_value_t = 4)]
    depth: u32,
    /// Reproduce a figure: SNR grid -6..6 dB in 0.5 dB steps, both
    /// detections, depth 4.
    #[arg(long, value_enum, conflicts_with_all = ["detection", "snr_db"])]
    preset: Option<SubchannelPreset>,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    mc: McArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum SweepPreset {
    Fig3,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MiXyArg {
    Analytic,
    Ksg,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Comma-separated SNR values in dB.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["snr_min", "snr_max", "snr_step"])]
    grid: Option<String>,
    #[arg(long, allow_hyphen_values = true, requires_all = ["snr_max", "snr_step"])]
    snr_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    snr_max: Option<f64>,
    #[arg(long)]
    snr_step: Option<f64>,
    /// Comma-separated DTE depths.
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',', value_enum)]
    detections: Option<Vec<DetectionArg>>,
    /// Grid -6..6 dB in 0.5 dB steps, depths 2,3,4, both detections.
    #[arg(long, value_enum)]
    preset: Option<SweepPreset>,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    mc: McArgs,
    #[arg(long, value_enum, default_value_t = MiXyArg::Analytic)]
    mi_xy: MiXyArg,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long, env = "DTE_SEED", default_value_t = 1)]
    seed: u64,
    /// Reduced sample sizes.
    #[arg(long)]
    quick: bool,
    #[arg(long, hide = true)]
    mutate_bsc_sign: bool,
}

const PRESET_N: usize = 10_000;
const PRESET_REPEATS: usize = 1_000;
const DEFAULT_N: usize = 10_000;
const DEFAULT_REPEATS: usize = 20;

fn preset_grid() -> Vec<f64> {
    (0..=24).map(|k| -6.0 + 0.5 * k as f64).collect()
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            Failure::Usage(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn estimator(mc: &McArgs) -> CliResult<MiEstimatorConfig> {
    let method = match mc.method {
        MethodArg::Knn => MiMethod::KnnMixed,
        MethodArg::Oracle => MiMethod::QuadratureOracle,
    };
    let mut cfg = MiEstimatorConfig::new(mc.k, method)?;
    cfg.jitter_seed = mc.seed;
    Ok(cfg)
}

fn encode(args: &EncodeArgs) -> CliResult<()> {
    let text = match (&args.input, &args.values) {
        (Some(p), _) => std::fs::read_to_string(p)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", p.display())))?,
        (None, Some(v)) => v.clone(),
        (None, None) => unreachable!("clap enforces one input"),
    };
    let values = parse_real_sequence(&text)?;
    let sd = match (args.std_dev, args.variance) {
        (Some(s), _) => s,
        (None, Some(v)) if v > 0.0 => v.sqrt(),
        (None, Some(v)) => {
            return Err(Failure::Usage(format!(
                "variance must be positive, got {v}"
            )))
        }
        (None, None) => 1.0,
    };
    let dist = GaussianCdf::new(args.mean, sd)?;
    let cfg = DteConfig::new(args.depth)?;
    let bits = dte_sequence(&values, &dist, cfg)?;
    let mut out = open_output(args.output.as_deref())?;
    out.write_all(bits.to_text().as_bytes())?;
    out.flush()?;
    Ok(())
}

fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let det = Detection::from(args.detection);
    let ch = &args.channel;
    let params = match (args.snr_db, args.transmittance) {
        (Some(db), _) => params_for_target_snr(db, ch.mod_variance, ch.excess_noise, det)?,
        (None, Some(t)) => ChannelParams::new(ch.mod_variance, t, ch.excess_noise, det)?,
        (None, None) => unreachable!("clap enforces one of the two"),
    };
    let pair = sample_raw_keys(&params, args.n, args.seed)?;
    let mut out = open_output(args.output.as_deref())?;
    write_raw_keys(&pair, &mut out)?;
    out.flush()?;
    Ok(())
}

fn report_warnings(sweep: &EfficiencySweep) {
    for w in &sweep.warnings {
        eprintln!(
            "warning: skipped {} dB ({}): {}",
            w.snr_db, w.detection, w.message
        );
    }
}

fn subchannels(args: &SubchannelArgs) -> CliResult<()> {
    let (grid, detections, depth, n, repeats) = match args.preset {
        Some(_) => (
            preset_grid(),
            Detection::ALL.to_vec(),
            4,
            args.mc.n.unwrap_or(PRESET_N),
            args.mc.repeats.unwrap_or(PRESET_REPEATS),
        ),
        None => (
            vec![args.snr_db.expect("required without preset")],
            vec![Detection::from(
                args.detection.expect("required without preset"),
            )],
            args.depth,
            args.mc.n.unwrap_or(DEFAULT_N),
            args.mc.repeats.unwrap_or(DEFAULT_REPEATS),
        ),
    };
    let cfg = SweepConfig {
        grid,
        depths: vec![depth],
        detections,
        mc: MonteCarlo {
            n,
            repeats,
            seed: args.mc.seed,
        },
        mod_variance: args.channel.mod_variance,
        excess_noise: args.channel.excess_noise,
        estimator: estimator(&args.mc)?,
        mi_xy_source: MiXySource::Analytic,
    };
    let sweep = run_sweep(&cfg)?;
    if sweep.points.is_empty() {
        let msg = sweep
            .warnings
            .first()
            .map(|w| w.message.clone())
            .unwrap_or_default();
        return Err(Failure::Infeasible(msg));
    }
    report_warnings(&sweep);
    let rows: Vec<SubChannelRow> = sweep
        .points
        .iter()
        .flat_map(|p| {
            p.reports
                .iter()
                .map(|r| SubChannelRow::new(p.snr_db, p.detection, r))
        })
        .collect();
    let mut out = open_output(args.output.as_deref())?;
    write_subchannel_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(())
}

fn stepped_grid(min: f64, max: f64, step: f64) -> CliResult<Vec<f64>> {
    if !(step > 0.0 && step.is_finite() && min.is_finite() && max.is_finite()) {
        return Err(Failure::Usage(
            "SNR step must be positive and bounds finite".into(),
        ));
    }
    let count = ((max - min) / step + 1e-9).floor();
    if count < 0.0 {
        return Err(Failure::Usage("SNR grid is empty".into()));
    }
    // Snap to 1e-9 dB so that e.g. -6 + 12 * 0.5 prints as 0.
    Ok((0..=count as usize)
        .map(|k| ((min + k as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

fn sweep(args: &SweepArgs) -> CliResult<()> {
    let preset = args.preset.is_some();
    let grid = match (&args.grid, args.snr_min) {
        (Some(g), _) => {
            if g.trim().is_empty() {
                return Err(Failure::Usage("SNR grid is empty".into()));
            }
            parse_real_sequence(g)?
        }
        (None, Some(min)) => stepped_grid(min, args.snr_max.unwrap(), args.snr_step.unwrap())?,
        (None, None) if preset => preset_grid(),
        (None, None) => {
            return Err(Failure::Usage(
                "give --grid, --snr-min/--snr-max/--snr-step or --preset".into(),
            ))
        }
    };
    let depths = match &args.depths {
        Some(d) => d.clone(),
        None if preset => vec![2, 3, 4],
        None => vec![4],
    };
    let detections = match &args.detections {
        Some(d) => d.iter().map(|&x| x.into()).collect(),
        None => Detection::ALL.to_vec(),
    };
    let (n, repeats) = if preset {
        (
            args.mc.n.unwrap_or(PRESET_N),
            args.mc.repeats.unwrap_or(PRESET_REPEATS),
        )
    } else {
        (
            args.mc.n.unwrap_or(DEFAULT_N),
            args.mc.repeats.unwrap_or(DEFAULT_REPEATS),
        )
    };
    let cfg = SweepConfig {
        grid,
        depths,
        detections,
        mc: MonteCarlo {
            n,
            repeats,
            seed: args.mc.seed,
        },
        mod_variance: args.channel.mod_variance,
        excess_noise: args.channel.excess_noise,
        estimator: estimator(&args.mc)?,
        mi_xy_source: match args.mi_xy {
            MiXyArg::Analytic => MiXySource::Analytic,
            MiXyArg::Ksg => MiXySource::Ksg,
        },
    };
    let result = run_sweep(&cfg)?;
    if result.points.is_empty() {
        return Err(Failure::Infeasible("no grid point is reachable".into()));
    }
    report_warnings(&result);

    let mut out = open_output(args.output.as_deref())?;
    match args.format {
        Format::Csv => write_sweep_csv(&result, &mut out)?,
        Format::Json => write_sweep_json(&result, &mut out)?,
    }
    out.flush()?;

    let mut depths = cfg.depths.clone();
    depths.sort_unstable();
    depths.dedup();
    eprintln!("beta_rr = 0.9 crossing:");
    for &det in &cfg.detections {
        for &d in &depths {
            match beta_rr_crossing(&result, det, d, 0.9) {
                Some(s) => eprintln!("  {det} l={d}: {s:.2} dB"),
                None => eprintln!("  {det} l={d}: none on grid"),
            }
        }
    }
    Ok(())
}

fn validate(args: &ValidateArgs) -> CliResult<()> {
    let report = run_validation(&ValidateOptions {
        seed: args.seed,
        quick: args.quick,
        flip_bsc_sign: args.mutate_bsc_sign,
    })?;
    for r in &report.results {
        println!("{r}");
    }
    let failed = report.failures();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(format!(
            "failed properties: {}",
            failed.join(", ")
        )))
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Encode(a) => encode(a),
        Command::Simulate(a) => simulate(a),
        Command::Subchannels(a) => subchannels(a),
        Command::Sweep(a) => sweep(a),
        Command::Validate(a) => validate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
