//! The `msflow` command line.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use msflow_core::calibrate::{fit_model, log_spaced, measure_confidence, rms_residual, SpeedSweep};
use msflow_core::discrim::{compare, DiscriminationCurve, DiscriminationParams};
use msflow_core::lkflow::{lk_flow, FlowField};
use msflow_core::parallel::{parallel_flow_with, ParallelParams};
use msflow_core::serial::serial_flow;
use msflow_core::synth::generate_sequence;
use msflow_core::{
    ConfidenceModel, Estimator, LkParams, ObjectKind, Pyramid, SerialParams, SynthSpec,
};

use crate::error::AppError;
use crate::pool::PoolExecutor;
use crate::{bench, config, flowio, pgm, seqio, tables};

#[derive(Debug, Parser)]
#[command(
    name = "msflow",
    version,
    about = "Multi-scale optical flow and speed discrimination"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic moving-object sequence.
    Synth(SynthCmd),
    /// Dense flow between the first two frames of a sequence.
    Flow(FlowCmd),
    /// Measure per-level confidence and fit the weight model.
    Calibrate(CalibrateCmd),
    /// Minimal detectable speed change for one estimator.
    Discriminate(DiscriminateCmd),
    /// Discrimination curves for several estimators.
    Compare(CompareCmd),
    /// Time the parallel estimator level by level.
    Bench(BenchCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Shape {
    Square,
    Disk,
    Blob,
}

impl From<Shape> for ObjectKind {
    fn from(s: Shape) -> Self {
        match s {
            Shape::Square => ObjectKind::Square,
            Shape::Disk => ObjectKind::Disk,
            Shape::Blob => ObjectKind::GaussianBlob,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct StimulusArgs {
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    #[arg(long, value_enum, default_value_t = Shape::Square)]
    pub object: Shape,
    /// Object side or diameter in pixels.
    #[arg(long, default_value_t = 16.0)]
    pub diameter: f64,
    #[arg(long, default_value_t = 0.1)]
    pub background: f64,
    /// Object intensity above the background.
    #[arg(long, default_value_t = 0.8)]
    pub contrast: f64,
    /// Standard deviation of the additive noise.
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl StimulusArgs {
    fn spec(&self) -> SynthSpec {
        SynthSpec {
            width: self.width,
            height: self.height,
            object: self.object.into(),
            diameter: self.diameter,
            background: self.background,
            contrast: self.contrast,
            noise_sigma: self.noise,
            seed: self.seed,
            ..SynthSpec::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct LkArgs {
    /// Window diameter (odd).
    #[arg(long, default_value_t = 7)]
    pub window: usize,
    #[arg(long, default_value_t = 1.5)]
    pub weight_sigma: f64,
    #[arg(long, default_value_t = 3)]
    pub iterations: usize,
    /// Smallest accepted structure-tensor eigenvalue.
    #[arg(long, default_value_t = 1e-3)]
    pub min_eigenvalue: f64,
}

impl LkArgs {
    fn params(&self) -> LkParams {
        LkParams {
            window: self.window,
            weight_sigma: self.weight_sigma,
            iterations: self.iterations,
            min_eigenvalue: self.min_eigenvalue,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthCmd {
    #[command(flatten)]
    pub stimulus: StimulusArgs,
    /// Velocity `u,v` in px/frame.
    #[arg(long, default_value = "2,2", value_parser = parse_pair, allow_hyphen_values = true)]
    pub velocity: (f64, f64),
    #[arg(long, default_value_t = 2)]
    pub frames: usize,
    /// Also write `level_<l>.pgm` for the pyramid of frame 0.
    #[arg(long)]
    pub pyramid_levels: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    pub scale: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlowMethod {
    Lk,
    Serial,
    Parallel,
}

#[derive(Debug, Clone, Args)]
pub struct FlowCmd {
    /// Directory holding `frame_%05d.pgm`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FlowMethod::Parallel)]
    pub method: FlowMethod,
    /// Weight model for the parallel method; the shipped one otherwise.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, default_value_t = 2.0)]
    pub scale: f64,
    #[command(flatten)]
    pub lk: LkArgs,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Flow CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateCmd {
    #[command(flatten)]
    pub stimulus: StimulusArgs,
    #[command(flatten)]
    pub lk: LkArgs,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, default_value_t = 2.0)]
    pub scale: f64,
    /// Log-spaced speeds `lo:hi:count`.
    #[arg(long, default_value = "0.5:20:40")]
    pub sweep: String,
    #[arg(long, default_value_t = 30)]
    pub realizations: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-level samples CSV.
    #[arg(long)]
    pub samples: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DiscrimArgs {
    #[command(flatten)]
    pub stimulus: StimulusArgs,
    #[command(flatten)]
    pub lk: LkArgs,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, default_value_t = 2.0)]
    pub scale: f64,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Reference speeds `lo:hi[:step]`.
    #[arg(long, default_value = "1:15")]
    pub range: String,
    #[arg(long, default_value_t = 30)]
    pub realizations: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.9)]
    pub quota: f64,
    /// Candidate changes in percent, `lo:hi:step`.
    #[arg(long, default_value = "2:60:1")]
    pub deltas: String,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Curve CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary CSV to write.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DiscriminateCmd {
    /// `serial`, `parallel` or `level<l>`.
    #[arg(long, default_value = "parallel")]
    pub method: String,
    #[command(flatten)]
    pub common: DiscrimArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareCmd {
    /// Comma-separated methods.
    #[arg(long, default_value = "serial,parallel")]
    pub methods: String,
    #[command(flatten)]
    pub common: DiscrimArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchCmd {
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Worker threads; the level count when omitted.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Object speed in px/frame along the diagonal.
    #[arg(long, default_value_t = 10.0)]
    pub speed: f64,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub lk: LkArgs,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `u,v`")?;
    let p = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad number `{t}`"))
    };
    Ok((p(a)?, p(b)?))
}

fn usage(msg: impl Into<String>) -> AppError {
    AppError::Usage(msg.into())
}

fn parse_f64(t: &str, what: &str) -> Result<f64, AppError> {
    t.trim()
        .parse()
        .map_err(|_| usage(format!("{what}: bad number `{t}`")))
}

/// `lo:hi:count` log-spaced speeds.
pub fn parse_sweep(s: &str) -> Result<Vec<f64>, AppError> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(usage(format!("sweep `{s}`: expected lo:hi:count")));
    };
    let (lo, hi) = (parse_f64(lo, "sweep")?, parse_f64(hi, "sweep")?);
    let n: usize = n
        .trim()
        .parse()
        .map_err(|_| usage(format!("sweep `{s}`: bad count")))?;
    if !(lo > 0.0 && hi >= lo && n >= 1) {
        return Err(usage(format!(
            "sweep `{s}`: need 0 < lo <= hi and count >= 1"
        )));
    }
    Ok(log_spaced(lo, hi, n))
}

/// `lo:hi[:step]` inclusive arithmetic range.
pub fn parse_range(s: &str) -> Result<Vec<f64>, AppError> {
    let parts: Vec<&str> = s.split(':').collect();
    let (lo, hi, step) = match parts[..] {
        [lo, hi] => (parse_f64(lo, "range")?, parse_f64(hi, "range")?, 1.0),
        [lo, hi, st] => (
            parse_f64(lo, "range")?,
            parse_f64(hi, "range")?,
            parse_f64(st, "range")?,
        ),
        _ => return Err(usage(format!("range `{s}`: expected lo:hi[:step]"))),
    };
    if !(lo.is_finite() && hi >= lo && step > 0.0) {
        return Err(usage(format!("range `{s}`: need lo <= hi and step > 0")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + i as f64 * step).collect())
}

fn load_model_or_default(path: Option<&Path>) -> Result<ConfidenceModel, AppError> {
    Ok(match path {
        Some(p) => tables::load_model(p)?,
        None => tables::default_model(),
    })
}

fn pool(jobs: usize) -> Result<PoolExecutor, AppError> {
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    PoolExecutor::new(jobs).map_err(|e| AppError::Io(std::io::Error::other(e.to_string())))
}

/// Parallel parameters from a model, overriding its level count.
fn parallel_params(
    model: ConfidenceModel,
    levels: usize,
    scale: f64,
    lk: LkParams,
) -> Result<ParallelParams, AppError> {
    if (model.scale - scale).abs() > 1e-12 {
        return Err(usage(format!(
            "model was fitted for c={}, but --scale is {scale}",
            model.scale
        )));
    }
    Ok(ParallelParams {
        lk,
        ..ParallelParams::new(model.with_levels(levels))
    })
}

fn estimator_for(name: &str, args: &DiscrimArgs) -> Result<Estimator, AppError> {
    let lk = args.lk.params();
    let name = name.trim();
    Ok(match name {
        "serial" => Estimator::Serial(SerialParams {
            levels: args.levels,
            scale: args.scale,
            lk,
        }),
        "parallel" => {
            let model = load_model_or_default(args.model.as_deref())?;
            Estimator::Parallel(parallel_params(model, args.levels, args.scale, lk)?)
        }
        "oracle" => Estimator::GroundTruth,
        other => match other.strip_prefix("level").and_then(|l| l.parse().ok()) {
            Some(level) => Estimator::SingleLevel {
                level,
                scale: args.scale,
                lk,
            },
            None => return Err(usage(format!("unknown method `{other}`"))),
        },
    })
}

fn discrim_params(args: &DiscrimArgs) -> Result<DiscriminationParams, AppError> {
    let d = parse_range(&args.deltas)?;
    Ok(DiscriminationParams {
        alpha: args.alpha,
        deltas: d.iter().map(|p| p / 100.0).collect(),
        realizations: args.realizations,
        quota: args.quota,
        stimulus: args.stimulus.spec(),
        seed: args.stimulus.seed,
        ..DiscriminationParams::default()
    })
}

fn run_curves(methods: &[&str], args: &DiscrimArgs) -> Result<(), AppError> {
    let estimators = methods
        .iter()
        .map(|m| estimator_for(m, args))
        .collect::<Result<Vec<_>, _>>()?;
    let speeds = parse_range(&args.range)?;
    let params = discrim_params(args)?;
    let exec = pool(args.jobs)?;
    let curves = compare(&estimators, &speeds, &params, &exec)?;
    let (lo, hi) = (speeds[0], *speeds.last().unwrap());
    let mut rows: Vec<(&DiscriminationCurve, _)> = Vec::new();
    for c in &curves {
        let s = c.summary(lo, hi);
        println!(
            "{} L={} mean={:.3} variance={:.3} missing={}",
            c.method, c.levels, s.mean, s.variance, s.missing
        );
        rows.push((c, s));
    }
    if let Some(p) = &args.out {
        tables::save_curves(p, &curves)?;
    }
    if let Some(p) = &args.summary {
        tables::save_summaries(p, &rows)?;
    }
    Ok(())
}

fn cmd_synth(c: &SynthCmd) -> Result<(), AppError> {
    let spec = SynthSpec {
        velocity: c.velocity,
        frames: c.frames,
        ..c.stimulus.spec()
    };
    let seq = generate_sequence(&spec)?;
    seqio::save_sequence(&c.out, &seq)?;
    seqio::save_truth(&c.out, spec.velocity)?;
    if let Some(levels) = c.pyramid_levels {
        let pyr = Pyramid::build(seq.frame(0), levels, c.scale, 1)?;
        for (l, f) in pyr.levels().iter().enumerate() {
            pgm::save(&c.out.join(format!("level_{l}.pgm")), f)?;
        }
    }
    println!("wrote {} frames to {}", seq.len(), c.out.display());
    Ok(())
}

fn cmd_flow(c: &FlowCmd) -> Result<(), AppError> {
    let seq = seqio::load_sequence(&c.input)?;
    let (prev, next) = seq.pair().map_err(|e| usage(e.to_string()))?;
    let lk = c.lk.params();
    let flow: FlowField = match c.method {
        FlowMethod::Lk => lk_flow(prev, next, &lk)?,
        FlowMethod::Serial => serial_flow(
            prev,
            next,
            &SerialParams {
                levels: c.levels,
                scale: c.scale,
                lk,
            },
        )?,
        FlowMethod::Parallel => {
            let model = load_model_or_default(c.model.as_deref())?;
            let params = parallel_params(model, c.levels, c.scale, lk)?;
            parallel_flow_with(&pool(c.jobs)?, prev, next, &params)?.fused
        }
    };
    let n = flow.valid_count();
    let (mut su, mut sv) = (0.0, 0.0);
    for y in 0..flow.height() {
        for x in 0..flow.width() {
            if let Some((u, v)) = flow.get(x, y) {
                su += u;
                sv += v;
            }
        }
    }
    let total = flow.width() * flow.height();
    if n > 0 {
        let (mu, mv) = (su / n as f64, sv / n as f64);
        print!("valid={n}/{total} mean_u={mu:.4} mean_v={mv:.4}");
        if let Some((tu, tv)) = seqio::load_truth(&c.input)? {
            print!(
                " truth_u={tu} truth_v={tv} mean_error={:.4}",
                (mu - tu).hypot(mv - tv)
            );
        }
        println!();
    } else {
        println!("valid=0/{total}");
    }
    if let Some(p) = &c.out {
        flowio::save_flow(p, &flow)?;
    }
    Ok(())
}

fn cmd_calibrate(c: &CalibrateCmd) -> Result<(), AppError> {
    let speeds = parse_sweep(&c.sweep)?;
    let stim = c.stimulus.spec();
    let sweep = SpeedSweep {
        speeds,
        realizations: c.realizations,
        noise_sigma: stim.noise_sigma,
        seed: stim.seed,
        stimulus: stim,
        ..SpeedSweep::default()
    };
    let lk = c.lk.params();
    let exec = pool(c.jobs)?;
    let mut samples = Vec::new();
    for level in 0..c.levels {
        samples.extend(measure_confidence(&sweep, level, c.scale, &lk, &exec)?);
    }
    if let Some(p) = &c.samples {
        tables::save_samples(p, &samples)?;
    }
    let model = fit_model(&samples, c.scale, c.levels)?;
    tables::save_model(&c.out, &model)?;
    print!(
        "mu0={:.6} sigma0={:.6} peak={:.4}",
        model.mu0,
        model.sigma0,
        model.mu0.exp()
    );
    for l in 0..c.levels {
        print!(" rms{l}={:.4}", rms_residual(&model, &samples, l));
    }
    println!();
    Ok(())
}

fn cmd_bench(c: &BenchCmd) -> Result<(), AppError> {
    let model = load_model_or_default(c.model.as_deref())?;
    let params = parallel_params(model, c.levels, model.scale, c.lk.params())?;
    let d = c.speed / std::f64::consts::SQRT_2;
    let spec = SynthSpec {
        width: c.size,
        height: c.size,
        ..SynthSpec::default()
    }
    .with_velocity(d, d);
    let seq = generate_sequence(&spec)?;
    let (prev, next) = seq.pair()?;
    let jobs = c.jobs.unwrap_or(c.levels);
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let report = bench::run(prev, next, &params, jobs, c.repeats)?;
    println!("{report}");
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), AppError> {
    match &cli.command {
        Command::Synth(c) => cmd_synth(c),
        Command::Flow(c) => cmd_flow(c),
        Command::Calibrate(c) => cmd_calibrate(c),
        Command::Discriminate(c) => run_curves(&[c.method.as_str()], &c.common),
        Command::Compare(c) => {
            let methods: Vec<&str> = c
                .methods
                .split(',')
                .filter(|m| !m.trim().is_empty())
                .collect();
            if methods.is_empty() {
                return Err(usage("--methods is empty"));
            }
            run_curves(&methods, &c.common)
        }
        Command::Bench(c) => cmd_bench(c),
    }
}

/// Parses `args` (config files expanded), runs, and returns the exit code.
/// Diagnostics go to stderr as a single line.
pub fn main_with(args: Vec<String>) -> i32 {
    let args = match config::expand(args) {
        Ok(a) => a,
        Err(e) => return report(&AppError::from(e)),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            return report(&usage(first));
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}

fn report(e: &AppError) -> i32 {
    eprintln!("msflow: {}", e.to_string().replace('\n', " "));
    e.exit_code()
}
