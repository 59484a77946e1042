//! Command-line front end.
//!
//! Every subcommand resolves its parameters as flag > config file > default,
//! echoes the resolved values into its output, and maps failures onto exit
//! codes: 1 for failed checks, 2 for invalid input or configuration, 3 for a
//! singular local design.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::Error;
use crate::estimators::{
    denoise_estimate, despeckle_estimate, midpoint_grid, scalar_mle,
    scalar_mle_asymptotic_variance, DEFAULT_GRID_SIZE,
};
use crate::holder::{build_basic_function, hypothesis_function, HolderSpec};
use crate::lower_bound::{
    delta_l2, gilbert_varshamov, log_likelihood_ratio_values, lr_lemma_diagnostic,
    packing_l2_separation, LrCheck,
};
use crate::noise::{
    derive_seed, design_points, fill_speckle, sample_additive, sample_speckle, NoiseModel,
    ObservationSet,
};
use crate::risk::{
    default_test_function, rate_fit, regime_sweep, select_bandwidth, theoretical_slope,
    EstimatorKind, Loss, RiskPoint, SigmaRule, SweepConfig, SweepReport, DEFAULT_L2_TRIALS,
    DEFAULT_SUP_TRIALS,
};

pub const SCHEMA_VERSION: u32 = 1;
/// Largest allowed `|x_i − i/n|` in an input CSV.
pub const DESIGN_TOLERANCE: f64 = 1e-12;
/// Largest allowed relative gap between the closed-form and the
/// density-sum log likelihood ratio.
pub const LR_ORACLE_TOLERANCE: f64 = 1e-8;
pub const MULTIPLIER_SWEEP: [f64; 3] = [0.5, 1.0, 2.0];

const DEFAULT_BETA: f64 = 2.0;
const DEFAULT_L: f64 = 20.0;
const DEFAULT_H_FLOOR: f64 = 0.2;
const DEFAULT_N: usize = 1024;
const DEFAULT_LR_N: usize = 1 << 15;
const DEFAULT_MLE_N: usize = 10_000;
const DEFAULT_MLE_TRIALS: usize = 10_000;
const DEFAULT_LR_TRIALS: usize = 2000;
const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "despeckle",
    version,
    about = "De-speckling estimators, rate experiments and lower-bound diagnostics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a data set `x,y` from the default test function.
    Sample(Params),
    /// Estimate `f` from an `x,y` CSV.
    Estimate(Params),
    /// Monte Carlo risk sweep over `--ns` with rate fits for both estimators.
    SimulateRisk(Params),
    /// Fit a rate to a risk CSV written by `simulate-risk`.
    RateFit(Params),
    /// Gilbert-Varshamov packing with distance and separation audit.
    Packing(Params),
    /// Likelihood-ratio oracle comparison and lower-tail diagnostic.
    LrCheck(Params),
    /// Monte Carlo check of the scalar estimator's asymptotic variance.
    MleCheck(Params),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossArg {
    L2,
    Sup,
}

impl From<LossArg> for Loss {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::L2 => Loss::L2,
            LossArg::Sup => Loss::Sup,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorArg {
    Despeckle,
    Denoise,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Despeckle => EstimatorKind::Despeckle,
            EstimatorArg::Denoise => EstimatorKind::Denoise,
        }
    }
}

/// Flags shared by all subcommands; each ignores the ones it has no use for.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "l")]
    #[serde(alias = "L")]
    pub l: Option<f64>,
    #[arg(long)]
    pub hfloor: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Use `σ_n = n^a` instead of a fixed `--sigma`.
    #[arg(long)]
    pub sigma_power: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorArg>,
    /// Evaluation grid size.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub bandwidth_multiplier: Option<f64>,
    /// Repeat the sweep with bandwidth multipliers 0.5, 1, 2 and keep the best.
    #[arg(long)]
    #[serde(default)]
    pub multiplier_sweep: bool,
    /// Code length for `packing`.
    #[arg(long)]
    pub m: Option<usize>,
    /// Codeword index for `lr-check`; 0 is the all-zero word.
    #[arg(long)]
    pub index: Option<usize>,
    /// True parameter for `mle-check`.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Random instances in the `lr-check` oracle comparison.
    #[arg(long)]
    pub instances: Option<usize>,
    /// Flat TOML file with the same keys as the long flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Params {
    /// Fills unset flags from `file`.
    pub fn merge(mut self, file: Params) -> Self {
        merge_fields!(self, file; beta, l, hfloor, n, ns, sigma, sigma_power, trials, seed,
            loss, estimator, grid, workers, out, input, bandwidth_multiplier, m, index,
            theta, instances);
        self.multiplier_sweep |= file.multiplier_sweep;
        self
    }

    fn spec(&self) -> Result<HolderSpec, CliError> {
        Ok(HolderSpec::new(
            self.beta.unwrap_or(DEFAULT_BETA),
            self.l.unwrap_or(DEFAULT_L),
            self.hfloor.unwrap_or(DEFAULT_H_FLOOR),
        )?)
    }

    fn sigma(&self) -> Result<f64, CliError> {
        let s = self.sigma.unwrap_or(1.0);
        if !(s >= 0.0 && s.is_finite()) {
            return Err(CliError::usage(format!(
                "--sigma must be a finite non-negative number, got {s}"
            )));
        }
        Ok(s)
    }

    fn sigma_rule(&self) -> Result<SigmaRule, CliError> {
        match self.sigma_power {
            Some(a) if !a.is_finite() => Err(CliError::usage("--sigma-power must be finite")),
            Some(a) => Ok(SigmaRule::Power(a)),
            None => Ok(SigmaRule::Fixed(self.sigma()?)),
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn failed(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SingularDesign { .. } => 3,
            Error::SearchExhausted { .. } => 1,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::usage(format!("i/o error: {e}"))
    }
}

/// Prints floats with 17 significant digits.
struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{}", fmt_f64(value))
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// `v` with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("report types serialise");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

fn emit(out: Option<&Path>, body: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, body)?,
        None => io::stdout().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn load_config(path: &Path) -> Result<Params, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    let (params, handler): (Params, fn(&Params) -> Result<(), CliError>) = match command {
        Command::Sample(p) => (p, cmd_sample),
        Command::Estimate(p) => (p, cmd_estimate),
        Command::SimulateRisk(p) => (p, cmd_simulate_risk),
        Command::RateFit(p) => (p, cmd_rate_fit),
        Command::Packing(p) => (p, cmd_packing),
        Command::LrCheck(p) => (p, cmd_lr_check),
        Command::MleCheck(p) => (p, cmd_mle_check),
    };
    let params = match &params.config {
        Some(path) => {
            let file = load_config(path)?;
            params.merge(file)
        }
        None => params,
    };
    match params.workers {
        Some(0) => Err(CliError::usage("--workers must be positive")),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| CliError::usage(format!("cannot start {w} workers: {e}")))?;
            pool.install(|| handler(&params))
        }
        None => handler(&params),
    }
}

#[derive(Serialize)]
struct EstimateEcho {
    schema_version: u32,
    command: &'static str,
    input: String,
    spec: HolderSpec,
    n: usize,
    sigma: f64,
    loss: Loss,
    estimator: EstimatorKind,
    grid: usize,
    bandwidth_multiplier: f64,
    bandwidth: f64,
}

/// Reads an `x,y` CSV and checks that `x` is the design `i/n`.
pub fn read_observations(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::from(Error::Malformed(e.to_string())))?
        .clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
        return Err(Error::Malformed(format!(
            "expected header `x,y`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        ))
        .into());
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::from(Error::Malformed(e.to_string())))?;
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| {
                CliError::from(Error::Malformed(format!(
                    "row {}: `{s}` is not a number",
                    row + 1
                )))
            })
        };
        xs.push(parse(&rec[0])?);
        ys.push(parse(&rec[1])?);
    }
    if xs.is_empty() {
        return Err(Error::Malformed("no data rows".into()).into());
    }
    let n = xs.len();
    for (i, &x) in xs.iter().enumerate() {
        let design = (i + 1) as f64 / n as f64;
        if !((x - design).abs() <= DESIGN_TOLERANCE) {
            return Err(Error::Malformed(format!(
                "row {}: x = {x} is not the design point {}/{n}",
                i + 1,
                i + 1
            ))
            .into());
        }
    }
    if let Some(y) = ys.iter().find(|y| !y.is_finite()) {
        return Err(Error::Malformed(format!("non-finite response {y}")).into());
    }
    Ok((xs, ys))
}

fn write_xy(path: Option<&Path>, xs: &[f64], ys: &[f64]) -> Result<(), CliError> {
    let mut body = String::from("x,y\n");
    for (x, y) in xs.iter().zip(ys) {
        body.push_str(&format!("{},{}\n", fmt_f64(*x), fmt_f64(*y)));
    }
    emit(path, &body)
}

fn cmd_sample(p: &Params) -> Result<(), CliError> {
    let spec = p.spec()?;
    let n = p.n.unwrap_or(DEFAULT_N);
    if n == 0 {
        return Err(CliError::usage("--n must be positive"));
    }
    let sigma = p.sigma()?;
    let seed = p.seed.unwrap_or(DEFAULT_SEED);
    let f = default_test_function(spec)?;
    let obs = match p.estimator.map(EstimatorKind::from) {
        Some(EstimatorKind::Denoise) => sample_additive(&f, n, sigma, seed),
        _ => sample_speckle(&f, n, sigma, seed),
    };
    write_xy(p.out.as_deref(), &obs.xs, &obs.ys)
}

fn cmd_estimate(p: &Params) -> Result<(), CliError> {
    let input = p
        .input
        .as_deref()
        .ok_or_else(|| CliError::usage("estimate needs --input <csv>"))?;
    let spec = p.spec()?;
    let sigma = p.sigma()?;
    let (_, ys) = read_observations(input)?;
    let n = ys.len();
    if n < 3 {
        return Err(Error::Malformed(format!("{n} rows; need at least three")).into());
    }
    if let Some(expected) = p.n {
        if expected != n {
            return Err(
                Error::Malformed(format!("--n {expected} but the file has {n} rows")).into(),
            );
        }
    }
    let estimator: EstimatorKind = p.estimator.unwrap_or(EstimatorArg::Despeckle).into();
    let loss: Loss = p.loss.unwrap_or(LossArg::L2).into();
    let multiplier = p.bandwidth_multiplier.unwrap_or(1.0);
    if !(multiplier > 0.0 && multiplier.is_finite()) {
        return Err(CliError::usage("--bandwidth-multiplier must be positive"));
    }
    let grid_size = p.grid.unwrap_or(DEFAULT_GRID_SIZE);
    if grid_size == 0 {
        return Err(CliError::usage("--grid must be positive"));
    }
    let h = select_bandwidth(estimator, loss, n, sigma, spec.beta, multiplier);
    let model = match estimator {
        EstimatorKind::Despeckle => NoiseModel::Speckle,
        EstimatorKind::Denoise => NoiseModel::AdditiveOnly,
    };
    let obs = ObservationSet {
        n,
        xs: design_points(n),
        ys,
        sigma,
        model,
        seed: 0,
    };
    let grid = midpoint_grid(grid_size);
    let curve = match estimator {
        EstimatorKind::Despeckle => despeckle_estimate(&obs, &grid, &spec, h)?,
        EstimatorKind::Denoise => denoise_estimate(&obs, &grid, &spec, h)?,
    };
    let echo = EstimateEcho {
        schema_version: SCHEMA_VERSION,
        command: "estimate",
        input: input.display().to_string(),
        spec,
        n,
        sigma,
        loss,
        estimator,
        grid: grid_size,
        bandwidth_multiplier: multiplier,
        bandwidth: h,
    };
    eprint!("{}", to_json(&echo));
    let mut body = String::from("x,f_hat,g_hat\n");
    for ((x, f), g) in curve.grid.iter().zip(&curve.values).zip(&curve.gsq_values) {
        body.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(*x),
            fmt_f64(*f),
            fmt_f64(*g)
        ));
    }
    emit(p.out.as_deref(), &body)
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn within(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target,
            tolerance,
            pass: (value - target).abs() <= tolerance,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target: bound,
            tolerance: 0.0,
            pass: value >= bound,
        }
    }
}

pub const SLOPE_TOLERANCE_L2: f64 = 0.12;
pub const SLOPE_TOLERANCE_OTHER: f64 = 0.15;
pub const MIN_R_SQUARED: f64 = 0.98;
pub const MIN_SLOPE_GAP: f64 = 0.1;

/// Tolerance checks for a sweep: the de-speckling slope always, the
/// baseline slope for L₂ loss, R² at fixed σ under L₂, and the slope gap
/// whenever theory predicts one of at least `MIN_SLOPE_GAP`.
pub fn sweep_checks(report: &SweepReport) -> Vec<Check> {
    let cfg = &report.config;
    let fixed = matches!(cfg.sigma_rule, SigmaRule::Fixed(_));
    let tol = if fixed && cfg.loss == Loss::L2 {
        SLOPE_TOLERANCE_L2
    } else {
        SLOPE_TOLERANCE_OTHER
    };
    let d = &report.despeckle.fit;
    let a = &report.denoise.fit;
    let mut checks = vec![Check::within(
        "despeckle_slope",
        d.slope,
        d.theoretical_slope,
        tol,
    )];
    if fixed && cfg.loss == Loss::L2 {
        checks.push(Check::at_least(
            "despeckle_r_squared",
            d.r_squared,
            MIN_R_SQUARED,
        ));
    }
    if cfg.loss == Loss::L2 {
        checks.push(Check::within(
            "denoise_slope",
            a.slope,
            a.theoretical_slope,
            tol,
        ));
    }
    if d.theoretical_slope - a.theoretical_slope >= MIN_SLOPE_GAP {
        checks.push(Check::at_least(
            "slope_gap",
            report.slope_gap,
            MIN_SLOPE_GAP,
        ));
    }
    checks
}

#[derive(Serialize)]
struct MultiplierOutcome {
    bandwidth_multiplier: f64,
    despeckle_slope: f64,
    denoise_slope: f64,
    mean_log_risk: f64,
}

#[derive(Serialize)]
struct Timing {
    elapsed_seconds: f64,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    schema_version: u32,
    command: &'static str,
    #[serde(flatten)]
    report: &'a SweepReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    multiplier_sweep: Vec<MultiplierOutcome>,
    checks: Vec<Check>,
    all_pass: bool,
    timing: Timing,
}

fn mean_log_risk(r: &SweepReport) -> f64 {
    let pts = r.despeckle.points.iter().chain(&r.denoise.points);
    let count = r.despeckle.points.len() + r.denoise.points.len();
    pts.map(|p| p.risk(r.config.loss).ln()).sum::<f64>() / count as f64
}

/// Header and rows of the risk CSV.
pub fn risk_csv(report: &SweepReport) -> String {
    let loss = report.config.loss;
    let mut body = String::from("estimator,n,sigma,bandwidth,risk,se\n");
    for sweep in [&report.despeckle, &report.denoise] {
        let name = match sweep.estimator {
            EstimatorKind::Despeckle => "despeckle",
            EstimatorKind::Denoise => "denoise",
        };
        for p in &sweep.points {
            body.push_str(&format!(
                "{name},{},{},{},{},{}\n",
                p.n,
                fmt_f64(p.sigma),
                fmt_f64(p.bandwidth),
                fmt_f64(p.risk(loss)),
                fmt_f64(p.se(loss))
            ));
        }
    }
    body
}

fn cmd_simulate_risk(p: &Params) -> Result<(), CliError> {
    let start = Instant::now();
    let spec = p.spec()?;
    let ns =
        p.ns.clone()
            .unwrap_or_else(|| (9..=14).map(|k| 1usize << k).collect());
    if ns.is_empty() {
        return Err(CliError::usage("--ns is empty"));
    }
    let loss: Loss = p.loss.unwrap_or(LossArg::L2).into();
    let trials = p.trials.unwrap_or(match loss {
        Loss::L2 => DEFAULT_L2_TRIALS,
        Loss::Sup => DEFAULT_SUP_TRIALS,
    });
    let base = SweepConfig {
        spec,
        ns,
        sigma_rule: p.sigma_rule()?,
        loss,
        trials,
        seed: p.seed.unwrap_or(DEFAULT_SEED),
        grid_size: p.grid.unwrap_or(DEFAULT_GRID_SIZE),
        bandwidth_multiplier: p.bandwidth_multiplier.unwrap_or(1.0),
    };
    if !(base.bandwidth_multiplier > 0.0 && base.bandwidth_multiplier.is_finite()) {
        return Err(CliError::usage("--bandwidth-multiplier must be positive"));
    }
    if base.grid_size == 0 {
        return Err(CliError::usage("--grid must be positive"));
    }
    let (report, sweep) = if p.multiplier_sweep {
        let mut best: Option<(f64, SweepReport)> = None;
        let mut outcomes = Vec::new();
        for c in MULTIPLIER_SWEEP {
            let r = regime_sweep(&SweepConfig {
                bandwidth_multiplier: c,
                ..base.clone()
            })?;
            let score = mean_log_risk(&r);
            outcomes.push(MultiplierOutcome {
                bandwidth_multiplier: c,
                despeckle_slope: r.despeckle.fit.slope,
                denoise_slope: r.denoise.fit.slope,
                mean_log_risk: score,
            });
            if best.as_ref().is_none_or(|(s, _)| score < *s) {
                best = Some((score, r));
            }
        }
        (best.expect("three multipliers").1, outcomes)
    } else {
        (regime_sweep(&base)?, Vec::new())
    };
    let checks = sweep_checks(&report);
    let all_pass = checks.iter().all(|c| c.pass);
    let out = SimulateReport {
        schema_version: SCHEMA_VERSION,
        command: "simulate-risk",
        report: &report,
        multiplier_sweep: sweep,
        checks,
        all_pass,
        timing: Timing {
            elapsed_seconds: start.elapsed().as_secs_f64(),
        },
    };
    if let Some(path) = &p.out {
        fs::write(path.with_extension("csv"), risk_csv(&report))?;
    }
    emit(p.out.as_deref(), &to_json(&out))?;
    if all_pass {
        Ok(())
    } else {
        let failed: Vec<&str> = out
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        Err(CliError::failed(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}

/// Parses a risk CSV (`estimator,n,sigma,bandwidth,risk,se`), keeping rows
/// of `estimator`.
pub fn read_risk_csv(
    path: &Path,
    estimator: EstimatorKind,
    loss: Loss,
) -> Result<Vec<RiskPoint>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::from(Error::Malformed(e.to_string())))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::from(Error::Malformed(format!("missing column `{name}`"))))
    };
    let (c_n, c_sigma, c_risk, c_se) = (col("n")?, col("sigma")?, col("risk")?, col("se")?);
    let c_est = headers.iter().position(|h| h == "estimator");
    let c_bw = headers.iter().position(|h| h == "bandwidth");
    let want = match estimator {
        EstimatorKind::Despeckle => "despeckle",
        EstimatorKind::Denoise => "denoise",
    };
    let mut points = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::from(Error::Malformed(e.to_string())))?;
        if let Some(c) = c_est {
            if &rec[c] != want {
                continue;
            }
        }
        let num = |c: usize| {
            rec[c].parse::<f64>().map_err(|_| {
                CliError::from(Error::Malformed(format!(
                    "row {}: `{}` is not a number",
                    row + 1,
                    &rec[c]
                )))
            })
        };
        let n: usize = rec[c_n].parse().map_err(|_| {
            CliError::from(Error::Malformed(format!(
                "row {}: bad n `{}`",
                row + 1,
                &rec[c_n]
            )))
        })?;
        let (risk, se) = (num(c_risk)?, num(c_se)?);
        if !(risk > 0.0) {
            return Err(Error::Malformed(format!("row {}: risk must be positive", row + 1)).into());
        }
        let (risk_l2, risk_sup, se_l2, se_sup) = match loss {
            Loss::L2 => (risk, f64::NAN, se, f64::NAN),
            Loss::Sup => (f64::NAN, risk, f64::NAN, se),
        };
        points.push(RiskPoint {
            n,
            sigma: num(c_sigma)?,
            trials: 0,
            bandwidth: c_bw.map(num).transpose()?.unwrap_or(f64::NAN),
            risk_l2,
            risk_sup,
            se_l2,
            se_sup,
        });
    }
    Ok(points)
}

#[derive(Serialize)]
struct RateFitReport {
    schema_version: u32,
    command: &'static str,
    input: String,
    estimator: EstimatorKind,
    loss: Loss,
    beta: f64,
    sigma_rule: SigmaRule,
    fit: crate::risk::RateFit,
}

fn cmd_rate_fit(p: &Params) -> Result<(), CliError> {
    let input = p
        .input
        .as_deref()
        .ok_or_else(|| CliError::usage("rate-fit needs --input <risk csv>"))?;
    let estimator: EstimatorKind = p.estimator.unwrap_or(EstimatorArg::Despeckle).into();
    let loss: Loss = p.loss.unwrap_or(LossArg::L2).into();
    let beta = p.beta.unwrap_or(DEFAULT_BETA);
    let rule = p.sigma_rule()?;
    let points = read_risk_csv(input, estimator, loss)?;
    if points.len() < 2 {
        return Err(CliError::usage(format!(
            "{} usable rows; need at least two",
            points.len()
        )));
    }
    let fit = rate_fit(&points, loss, beta, rule, estimator)?;
    debug_assert_eq!(
        fit.theoretical_slope,
        theoretical_slope(loss, estimator, beta, rule)
    );
    emit(
        p.out.as_deref(),
        &to_json(&RateFitReport {
            schema_version: SCHEMA_VERSION,
            command: "rate-fit",
            input: input.display().to_string(),
            estimator,
            loss,
            beta,
            sigma_rule: rule,
            fit,
        }),
    )
}

#[derive(Serialize)]
struct PackingReport {
    schema_version: u32,
    command: &'static str,
    m: usize,
    seed: u64,
    spec: HolderSpec,
    delta: f64,
    packing: crate::lower_bound::PackingSet,
    audit: crate::lower_bound::PackingAudit,
    separation: crate::lower_bound::SeparationAudit,
    pass: bool,
}

fn cmd_packing(p: &Params) -> Result<(), CliError> {
    let m = p.m.unwrap_or(16);
    let seed = p.seed.unwrap_or(DEFAULT_SEED);
    let spec = p.spec()?;
    let packing = gilbert_varshamov(m, seed)?;
    let audit = packing.audit();
    let bf = build_basic_function(spec.beta, spec.l)?;
    let delta = 1.0 / m as f64;
    let separation = packing_l2_separation(&packing, delta, &bf)?;
    let pass = audit.passes() && separation.passes;
    emit(
        p.out.as_deref(),
        &to_json(&PackingReport {
            schema_version: SCHEMA_VERSION,
            command: "packing",
            m,
            seed,
            spec,
            delta,
            packing,
            audit,
            separation,
            pass,
        }),
    )?;
    if pass {
        Ok(())
    } else {
        Err(CliError::failed("packing audit failed"))
    }
}

/// `Σ_i [log N(y_i; 0, 1+σ²) − log N(y_i; 0, σ²+ν_i²)]`, the log density
/// ratio summed term by term from the Gaussian densities.
pub fn log_lr_density_sum(nu_values: &[f64], ys: &[f64], sigma: f64) -> f64 {
    let log_density =
        |y: f64, var: f64| -0.5 * (2.0 * std::f64::consts::PI * var).ln() - y * y / (2.0 * var);
    let s2 = sigma * sigma;
    nu_values
        .iter()
        .zip(ys)
        .map(|(&nu, &y)| log_density(y, 1.0 + s2) - log_density(y, s2 + nu * nu))
        .sum()
}

pub fn relative_error(value: f64, reference: f64) -> f64 {
    if value == reference {
        0.0
    } else {
        (value - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
    }
}

#[derive(Serialize)]
struct OracleComparison {
    instances: usize,
    max_relative_error: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct LrReport {
    schema_version: u32,
    command: &'static str,
    spec: HolderSpec,
    n: usize,
    sigma: f64,
    seed: u64,
    m: usize,
    oracle: OracleComparison,
    diagnostic: crate::lower_bound::LrDiagnostic,
}

fn cmd_lr_check(p: &Params) -> Result<(), CliError> {
    let spec = p.spec()?;
    let n = p.n.unwrap_or(DEFAULT_LR_N);
    let sigma = p.sigma()?;
    let seed = p.seed.unwrap_or(DEFAULT_SEED);
    let trials = p.trials.unwrap_or(DEFAULT_LR_TRIALS);
    let instances = p.instances.unwrap_or(100);
    if n < 2 || trials == 0 {
        return Err(CliError::usage("lr-check needs --n ≥ 2 and --trials ≥ 1"));
    }
    let m = delta_l2(n, sigma, spec.beta).m;
    if m < 8 {
        return Err(CliError::usage(format!(
            "n = {n}, σ = {sigma} give only m = {m} bumps; the packing needs m ≥ 8 (increase --n)"
        )));
    }
    let packing = gilbert_varshamov(m, seed)?;
    let bf = build_basic_function(spec.beta, spec.l)?;
    let delta = delta_l2(n, sigma, spec.beta).delta;

    // closed form against the density sum on data drawn under each hypothesis in turn
    let words: Vec<Vec<bool>> = std::iter::once(vec![false; m])
        .chain(packing.codewords.iter().cloned())
        .collect();
    let oracle_seed = derive_seed(seed, u64::MAX);
    let errors: Vec<f64> = (0..instances)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |ys, k| -> Result<f64, Error> {
                let nu = hypothesis_function(&words[k % words.len()], delta, &bf, spec.h_floor)?;
                let nu_values = nu.on_design(n);
                fill_speckle(
                    &nu_values,
                    1.0,
                    sigma,
                    derive_seed(oracle_seed, k as u64),
                    ys,
                );
                Ok(relative_error(
                    log_likelihood_ratio_values(&nu_values, ys, sigma),
                    log_lr_density_sum(&nu_values, ys, sigma),
                ))
            },
        )
        .collect::<Result<Vec<_>, _>>()?;
    let max_relative_error = errors.iter().copied().fold(0.0, f64::max);
    let oracle = OracleComparison {
        instances,
        max_relative_error,
        tolerance: LR_ORACLE_TOLERANCE,
        pass: max_relative_error <= LR_ORACLE_TOLERANCE,
    };
    let diagnostic = lr_lemma_diagnostic(&LrCheck {
        packing: &packing,
        basic: &bf,
        l: p.index.unwrap_or(1),
        n,
        sigma,
        trials,
        seed,
        h_floor: spec.h_floor,
        lambda_override: None,
    })?;
    let pass = oracle.pass;
    emit(
        p.out.as_deref(),
        &to_json(&LrReport {
            schema_version: SCHEMA_VERSION,
            command: "lr-check",
            spec,
            n,
            sigma,
            seed,
            m,
            oracle,
            diagnostic,
        }),
    )?;
    if pass {
        Ok(())
    } else {
        Err(CliError::failed(format!(
            "closed form and density sum disagree: relative error {max_relative_error:e}"
        )))
    }
}

#[derive(Serialize)]
struct MleReport {
    schema_version: u32,
    command: &'static str,
    theta: f64,
    sigma: f64,
    n: usize,
    trials: usize,
    seed: u64,
    /// Sample variance of `√n (θ̂ − θ₀)`.
    sample_variance: f64,
    asymptotic_variance: f64,
    relative_error: f64,
    tolerance: f64,
    pass: bool,
}

pub const MLE_TOLERANCE: f64 = 0.10;

/// Sample variance of `√n (θ̂ − θ₀)` over `trials` speckle data sets of a
/// constant signal `θ₀`.
pub fn mle_sample_variance(theta: f64, sigma: f64, n: usize, trials: usize, seed: u64) -> f64 {
    let design = vec![theta; n];
    let z: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |ys, t| {
                fill_speckle(&design, 1.0, sigma, derive_seed(seed, t), ys);
                (n as f64).sqrt() * (scalar_mle(ys, sigma) - theta)
            },
        )
        .collect();
    let mean = z.iter().sum::<f64>() / trials as f64;
    z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials as f64 - 1.0)
}

fn cmd_mle_check(p: &Params) -> Result<(), CliError> {
    let theta = p.theta.unwrap_or(0.5);
    let sigma = p.sigma()?;
    let n = p.n.unwrap_or(DEFAULT_MLE_N);
    let trials = p.trials.unwrap_or(DEFAULT_MLE_TRIALS);
    let seed = p.seed.unwrap_or(DEFAULT_SEED);
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(CliError::usage("--theta must be positive"));
    }
    if n == 0 || trials < 2 {
        return Err(CliError::usage("mle-check needs --n ≥ 1 and --trials ≥ 2"));
    }
    let sample_variance = mle_sample_variance(theta, sigma, n, trials, seed);
    let asymptotic_variance = scalar_mle_asymptotic_variance(theta, sigma);
    let rel = relative_error(sample_variance, asymptotic_variance);
    let pass = rel <= MLE_TOLERANCE;
    emit(
        p.out.as_deref(),
        &to_json(&MleReport {
            schema_version: SCHEMA_VERSION,
            command: "mle-check",
            theta,
            sigma,
            n,
            trials,
            seed,
            sample_variance,
            asymptotic_variance,
            relative_error: rel,
            tolerance: MLE_TOLERANCE,
            pass,
        }),
    )?;
    if pass {
        Ok(())
    } else {
        Err(CliError::failed(format!(
            "sample variance {sample_variance} is {:.1}% from {asymptotic_variance}",
            100.0 * rel
        )))
    }
}
