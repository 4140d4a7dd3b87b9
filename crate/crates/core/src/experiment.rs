//! Experiment runner behind the `eoslab` binary: config parsing, single runs,
//! stepsize and output-scale sweeps, certification, offline verification
//! and plain-text reports.
//!
//! Configs are TOML with one table per concern:
//!
//! ```toml
//! [dataset]
//! kind = "synthetic"        # xor | two_point | synthetic | csv
//! n = 32
//! d = 10
//! gamma = 0.2
//! seed = 7
//!
//! [activation]
//! name = "leaky_softplus"
//! c = 0.5                   # every other key is an activation parameter
//!
//! [network]
//! m = 20
//! b = 1.0
//! init = "gaussian"         # gaussian | zero
//! signs = "alternating"     # alternating | half_split
//! seed = 0
//!
//! [training]
//! stepsizes = [1.0, 10.0]   # per-neuron η; η̃ = m·η
//! steps = 100000
//! cadence = "auto"          # or a record interval k
//! scales = [0.25, 1.0, 4.0] # b values for scaling-sweep
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::{certification_report, certify, make_activation, Activation, CertifiedConstants};
use crate::data::{load_csv, synthetic_separable, two_point_lower_bound, xor_dataset, Dataset};
use crate::error::{Error, Result};
use crate::margins::MarginSet;
use crate::network::{InitKind, InitSpec, SignPattern, TwoLayerNet};
use crate::theory::{acceleration_stepsize, eos_bound_reports, tau_phase_transition, BoundReport, Setup, TauForm, TheoryConstants};
use crate::trainer::{
    detect_phases, final_decade_slope, run_gd, verify_decrease_lemma, verify_stable_phase, Cadence, GdConfig, PhaseReport,
    StableReport, Stepsize,
};
use crate::trajectory::{aux_csv, parse_trajectory, trajectory_csv, TrajectoryRecord};

/// Process exit status shared by every subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum ExitStatus {
    Success = 0,
    Violations = 1,
    /// Invalid config or unreadable inputs.
    ConfigError = 2,
    Divergence = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Xor {
        /// Divide the (±1, ±1) points by √2 so every feature has unit norm.
        #[serde(default = "yes")]
        scaled: bool,
    },
    TwoPoint {
        gamma: f64,
    },
    Synthetic {
        n: usize,
        d: usize,
        gamma: f64,
        #[serde(default)]
        seed: u64,
    },
    Csv {
        path: PathBuf,
        /// Negative values count from the last column.
        #[serde(default = "last_column")]
        label_column: isize,
    },
}

fn yes() -> bool {
    true
}

fn last_column() -> isize {
    -1
}

impl DatasetSpec {
    pub fn build(&self) -> Result<Dataset> {
        match self {
            DatasetSpec::Xor { scaled } => Ok(xor_dataset(*scaled)),
            DatasetSpec::TwoPoint { gamma } => two_point_lower_bound(*gamma),
            DatasetSpec::Synthetic { n, d, gamma, seed } => synthetic_separable(*n, *d, *gamma, *seed),
            DatasetSpec::Csv { path, label_column } => load_csv(path, *label_column),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationSpec {
    pub name: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitName {
    #[default]
    Gaussian,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignName {
    #[default]
    Alternating,
    HalfSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub m: usize,
    #[serde(default = "unit_scale")]
    pub b: f64,
    #[serde(default)]
    pub init: InitName,
    /// Gaussian standard deviation; 1/√d when absent.
    pub sigma: Option<f64>,
    #[serde(default)]
    pub signs: SignName,
    #[serde(default)]
    pub seed: u64,
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepsizeKind {
    /// Entries are η, with η̃ = m·η.
    #[default]
    PerNeuron,
    EtaTilde,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CadenceSpec {
    Every(u64),
    Named(String),
}

impl Default for CadenceSpec {
    fn default() -> Self {
        CadenceSpec::Named("auto".into())
    }
}

impl CadenceSpec {
    pub fn resolve(&self, steps: u64) -> Result<Cadence> {
        match self {
            CadenceSpec::Every(0) => Err(Error::Invalid("cadence must be at least 1".into())),
            CadenceSpec::Every(k) => Ok(Cadence::Every(*k)),
            CadenceSpec::Named(s) if s == "auto" => Ok(Cadence::auto(steps)),
            CadenceSpec::Named(s) => Err(Error::Invalid(format!("cadence must be a positive integer or \"auto\", got \"{s}\""))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSpec {
    pub stepsizes: Vec<f64>,
    #[serde(default)]
    pub stepsize_kind: StepsizeKind,
    pub steps: u64,
    #[serde(default)]
    pub cadence: CadenceSpec,
    /// Output scales b for `scaling-sweep`.
    #[serde(default)]
    pub scales: Vec<f64>,
}

impl TrainingSpec {
    fn stepsize(&self, value: f64) -> Stepsize {
        match self.stepsize_kind {
            StepsizeKind::PerNeuron => Stepsize::PerNeuron(value),
            StepsizeKind::EtaTilde => Stepsize::EtaTilde(value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySpec {
    #[serde(default = "cert_lo")]
    pub lo: f64,
    #[serde(default = "cert_hi")]
    pub hi: f64,
    #[serde(default = "cert_samples")]
    pub samples: usize,
}

fn cert_lo() -> f64 {
    crate::activation::DEFAULT_CERT_LO
}

fn cert_hi() -> f64 {
    crate::activation::DEFAULT_CERT_HI
}

fn cert_samples() -> usize {
    crate::activation::DEFAULT_CERT_SAMPLES
}

impl Default for CertifySpec {
    fn default() -> Self {
        CertifySpec { lo: cert_lo(), hi: cert_hi(), samples: cert_samples() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub activation: ActivationSpec,
    pub network: NetworkSpec,
    pub training: TrainingSpec,
    #[serde(default)]
    pub certify: CertifySpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn activation(&self) -> Result<Activation> {
        make_activation(&self.activation.name, &self.activation.params)
    }

    pub fn init_spec(&self) -> InitSpec {
        let kind = match self.network.init {
            InitName::Zero => InitKind::Zero,
            InitName::Gaussian => InitKind::Gaussian { sigma: self.network.sigma },
        };
        let signs = match self.network.signs {
            SignName::Alternating => SignPattern::Alternating,
            SignName::HalfSplit => SignPattern::HalfSplit,
        };
        InitSpec { kind, signs, seed: self.network.seed }
    }

    /// Checks every precondition and builds the inputs shared by all cells.
    pub fn prepare(&self) -> Result<Prepared> {
        let activation = self.activation()?;
        let data = self.dataset.build()?;
        let t = &self.training;
        if t.steps == 0 {
            return Err(Error::Invalid("training.steps must be at least 1".into()));
        }
        t.cadence.resolve(t.steps)?;
        if let Some(bad) = t.stepsizes.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::Invalid(format!("stepsizes must be finite and nonnegative, got {bad}")));
        }
        if let Some(bad) = t.scales.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::Invalid(format!("scales must be positive, got {bad}")));
        }
        if matches!(self.network.sigma, Some(s) if !(s.is_finite() && s >= 0.0)) {
            return Err(Error::Invalid("network.sigma must be finite and nonnegative".into()));
        }
        // Catches m = 0, odd m with half_split and a bad b before any run.
        TwoLayerNet::init(activation.clone(), self.network.m, data.dim(), self.network.b, &self.init_spec())?;
        let c = self.certify;
        let cert = certify(&activation, c.lo, c.hi, c.samples)?;
        Ok(Prepared { config: self.clone(), activation, data, cert })
    }
}

/// Validated config together with its dataset and certified constants.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub activation: Activation,
    pub data: Dataset,
    pub cert: CertifiedConstants,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// η̃ = 0: the weights never move.
    NoProgress,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalState {
    pub step: u64,
    pub loss: f64,
    pub weight_norm: f64,
    pub q_min: f64,
    pub margins: MarginSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableSummary {
    pub passed: bool,
    pub checked_points: usize,
    pub checked_pairs: usize,
    pub violations: usize,
    pub note: Option<String>,
}

impl From<&StableReport> for StableSummary {
    fn from(r: &StableReport) -> Self {
        StableSummary {
            passed: r.passed(),
            checked_points: r.checked_points,
            checked_pairs: r.checked_pairs,
            violations: r.violations.len(),
            note: r.note.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub name: String,
    pub points: usize,
    pub violations: usize,
    pub max_rel_slack: Option<f64>,
    pub note: Option<String>,
}

impl From<&BoundReport> for BoundSummary {
    fn from(r: &BoundReport) -> Self {
        BoundSummary {
            name: r.name.clone(),
            points: r.points.len(),
            violations: r.violations.len(),
            max_rel_slack: r.max_rel_slack.is_finite().then_some(r.max_rel_slack),
            note: r.note.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub stable_phase: StableSummary,
    pub decrease_lemma: StableSummary,
    pub eos_bounds: Vec<BoundSummary>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.stable_phase.passed && self.decrease_lemma.passed && self.eos_bounds.iter().all(|b| b.violations == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub status: RunStatus,
    pub divergence: Option<String>,
    pub eta: f64,
    pub eta_tilde: f64,
    pub b: f64,
    pub steps: u64,
    pub phases: Option<PhaseReport>,
    /// Upper bound on the second-threshold crossing, when a separator is known.
    pub tau: Option<f64>,
    pub final_state: FinalState,
    pub final_decade_slope: Option<f64>,
    pub constants: TheoryConstants,
    pub certified: CertifiedConstants,
    pub verification: Verification,
}

impl RunSummary {
    pub fn exit_status(&self) -> ExitStatus {
        if self.status == RunStatus::Diverged {
            ExitStatus::Divergence
        } else if !self.verification.passed() {
            ExitStatus::Violations
        } else {
            ExitStatus::Success
        }
    }
}

/// Everything one run produces, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub summary: RunSummary,
    pub records: Vec<TrajectoryRecord>,
    pub net: TwoLayerNet,
    pub stable: StableReport,
    pub bounds: Vec<BoundReport>,
}

/// Trains one cell with output scale `b` and the given stepsize value, then
/// runs every verifier that applies.
pub fn run_cell(prep: &Prepared, stepsize: f64, b: f64) -> Result<RunArtifacts> {
    let cfg = &prep.config;
    let data = &prep.data;
    let net = TwoLayerNet::init(prep.activation.clone(), cfg.network.m, data.dim(), b, &cfg.init_spec())?;
    let setup = Setup {
        n: data.len(),
        m: cfg.network.m,
        d: data.dim(),
        b,
        eta: 0.0,
        w0_norm: net.weight_norm(),
        gamma: data.separator().map(|s| s.gamma),
    };
    let constants = TheoryConstants::from_certified(&prep.cert, &setup);
    let steps = cfg.training.steps;
    let gd = GdConfig { stepsize: cfg.training.stepsize(stepsize), steps, cadence: cfg.training.cadence.resolve(steps)? };
    let run = run_gd(net, data, &gd, &constants)?;
    let c = run.constants;

    let no_progress = c.eta_tilde == 0.0;
    let (phases, stable, decrease) = if no_progress {
        let rep = StableReport { note: Some("no progress: stepsize is zero".into()), ..StableReport::default() };
        (None, rep.clone(), rep)
    } else {
        let phases = detect_phases(&run.records, &c)?;
        let stable = verify_stable_phase(&run.records, &phases, &c);
        (Some(phases), stable, verify_decrease_lemma(&run.records, &c))
    };
    let bounds = if c.gamma.is_some() && !no_progress { eos_bound_reports(&run.records, &c)? } else { Vec::new() };
    let tau = if no_progress { None } else { tau_phase_transition(&c, TauForm::MarginScaled).ok() };

    let last = run.final_record();
    let status = match (&run.divergence, no_progress) {
        (Some(_), _) => RunStatus::Diverged,
        (None, true) => RunStatus::NoProgress,
        (None, false) => RunStatus::Ok,
    };
    let summary = RunSummary {
        status,
        divergence: run.divergence.clone(),
        eta: c.eta,
        eta_tilde: c.eta_tilde,
        b,
        steps,
        phases,
        tau,
        final_state: FinalState {
            step: last.step,
            loss: last.loss,
            weight_norm: last.weight_norm,
            q_min: last.q_min,
            margins: last.margins,
        },
        final_decade_slope: if status == RunStatus::Ok { final_decade_slope(&run.records) } else { None },
        constants: c,
        certified: prep.cert,
        verification: Verification {
            stable_phase: (&stable).into(),
            decrease_lemma: (&decrease).into(),
            eos_bounds: bounds.iter().map(BoundSummary::from).collect(),
        },
    };
    Ok(RunArtifacts { summary, records: run.records, net: run.net, stable, bounds })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn stable_violations_csv(rep: &StableReport) -> String {
    let mut out = String::from("step,check,measured,bound\n");
    for v in &rep.violations {
        out += &format!("{},{:?},{:.16e},{:.16e}\n", v.step, v.check, v.measured, v.bound);
    }
    out
}

fn write_bound_reports(dir: &Path, bounds: &[BoundReport]) -> Result<()> {
    if bounds.is_empty() {
        return Ok(());
    }
    let bdir = dir.join("bounds");
    create_dir(&bdir)?;
    for b in bounds {
        write(&bdir.join(format!("{}.csv", b.name)), b.to_csv())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    config: &'a ExperimentConfig,
    #[serde(flatten)]
    run: &'a RunSummary,
}

impl RunArtifacts {
    /// Writes the trajectory, auxiliary sums, final network, constants,
    /// summary and verifier outputs into `dir`.
    pub fn write_to(&self, dir: &Path, config: &ExperimentConfig) -> Result<()> {
        create_dir(dir)?;
        write(&dir.join("trajectory.csv"), trajectory_csv(&self.records))?;
        write(&dir.join("trajectory_aux.csv"), aux_csv(&self.records))?;
        write(&dir.join("network.txt"), self.net.to_snapshot())?;
        write(&dir.join("constants.json"), to_json(&self.summary.constants)?)?;
        write(&dir.join("summary.json"), to_json(&SummaryFile { config, run: &self.summary })?)?;
        write(&dir.join("stable_violations.csv"), stable_violations_csv(&self.stable))?;
        write_bound_reports(dir, &self.bounds)
    }
}

fn output_dir(config: &ExperimentConfig, out: Option<&Path>) -> Result<PathBuf> {
    out.map(Path::to_path_buf)
        .or_else(|| config.output.dir.clone())
        .ok_or_else(|| Error::Invalid("no output directory: pass --out or set [output] dir".into()))
}

/// One training run with the single configured stepsize.
pub fn cmd_run(config: &ExperimentConfig, out: Option<&Path>) -> Result<RunSummary> {
    let dir = output_dir(config, out)?;
    let [eta] = config.training.stepsizes[..] else {
        return Err(Error::Invalid(format!(
            "run takes exactly one stepsize, got {}; use sweep for several",
            config.training.stepsizes.len()
        )));
    };
    let prep = config.prepare()?;
    let art = run_cell(&prep, eta, config.network.b)?;
    art.write_to(&dir, config)?;
    Ok(art.summary)
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub index: usize,
    pub dir: String,
    pub stepsize: f64,
    pub b: f64,
    pub status: Option<RunStatus>,
    /// Set when the cell could not run at all.
    pub error: Option<String>,
    pub final_loss: Option<f64>,
    pub s_empirical: Option<u64>,
    pub s_threshold2: Option<u64>,
    pub final_gamma_bar: Option<f64>,
    pub slope: Option<f64>,
    pub verification_passed: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cells: Vec<CellResult>,
    /// Final loss strictly decreasing along the cell order, ignoring cells
    /// that diverged or failed.
    pub loss_decreasing: bool,
}

impl SweepSummary {
    pub fn exit_status(&self) -> ExitStatus {
        let finished: Vec<_> = self.cells.iter().filter(|c| c.status.is_some_and(|s| s != RunStatus::Diverged)).collect();
        if finished.iter().any(|c| c.verification_passed == Some(false)) {
            ExitStatus::Violations
        } else if finished.is_empty() {
            ExitStatus::Divergence
        } else {
            ExitStatus::Success
        }
    }

    pub fn table_csv(&self) -> String {
        let mut out = String::from("index,stepsize,b,status,final_loss,s_empirical,s_threshold2,final_gamma_bar,verified\n");
        for c in &self.cells {
            let status = match (c.status, &c.error) {
                (Some(s), _) => format!("{s:?}").to_lowercase(),
                (None, _) => "failed".into(),
            };
            out += &format!(
                "{},{:e},{:e},{},{},{},{},{},{}\n",
                c.index,
                c.stepsize,
                c.b,
                status,
                opt_num(c.final_loss),
                c.s_empirical.map_or(String::new(), |v| v.to_string()),
                c.s_threshold2.map_or(String::new(), |v| v.to_string()),
                opt_num(c.final_gamma_bar),
                c.verification_passed.map_or(String::new(), |v| u8::from(v).to_string()),
            );
        }
        out
    }

    pub fn rates_csv(&self) -> String {
        let mut out = String::from("index,stepsize,b,slope\n");
        for c in &self.cells {
            out += &format!("{},{:e},{:e},{}\n", c.index, c.stepsize, c.b, opt_num(c.slope));
        }
        out
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| format!("{v:.16e}"))
}

fn cell_result(index: usize, dir: &str, stepsize: f64, b: f64, res: Result<RunSummary>) -> CellResult {
    let mut cell = CellResult {
        index,
        dir: dir.to_string(),
        stepsize,
        b,
        status: None,
        error: None,
        final_loss: None,
        s_empirical: None,
        s_threshold2: None,
        final_gamma_bar: None,
        slope: None,
        verification_passed: None,
    };
    match res {
        Ok(s) => {
            cell.status = Some(s.status);
            cell.final_loss = Some(s.final_state.loss);
            cell.s_empirical = s.phases.as_ref().map(|p| p.s_empirical);
            cell.s_threshold2 = s.phases.as_ref().and_then(|p| p.s_threshold2);
            cell.final_gamma_bar = s.final_state.margins.gamma_bar;
            cell.slope = s.final_decade_slope;
            cell.verification_passed = Some(s.verification.passed());
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

fn run_cells(prep: &Prepared, dir: &Path, cells: &[(f64, f64)], jobs: usize) -> Result<SweepSummary> {
    create_dir(dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?;
    // Collecting an indexed parallel iterator keeps cell order.
    let results: Vec<CellResult> = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(k, &(stepsize, b))| {
                let name = format!("cell_{k:03}");
                let res = run_cell(prep, stepsize, b).and_then(|art| {
                    art.write_to(&dir.join(&name), &prep.config)?;
                    Ok(art.summary)
                });
                cell_result(k, &name, stepsize, b, res)
            })
            .collect()
    });
    let losses: Vec<f64> = results
        .iter()
        .filter(|c| c.status.is_some_and(|s| s != RunStatus::Diverged))
        .filter_map(|c| c.final_loss)
        .collect();
    let summary = SweepSummary { loss_decreasing: losses.windows(2).all(|w| w[1] < w[0]), cells: results };
    write(&dir.join("sweep.json"), to_json(&summary)?)?;
    write(&dir.join("sweep.csv"), summary.table_csv())?;
    write(&dir.join("rates.csv"), summary.rates_csv())?;
    Ok(summary)
}

/// One run per configured stepsize, in parallel on up to `jobs` threads.
pub fn cmd_sweep(config: &ExperimentConfig, out: Option<&Path>, jobs: usize) -> Result<SweepSummary> {
    let dir = output_dir(config, out)?;
    let t = &config.training;
    if t.stepsizes.len() < 2 {
        return Err(Error::Invalid(format!("sweep needs at least two stepsizes, got {}", t.stepsizes.len())));
    }
    let prep = config.prepare()?;
    let cells: Vec<(f64, f64)> = t.stepsizes.iter().map(|&s| (s, config.network.b)).collect();
    run_cells(&prep, &dir, &cells, jobs)
}

/// Per-neuron stepsize for output scale `b`, rescaled from the b = 1 value
/// by the ratio of the tuned-stepsize denominators 16ρ²b² + 8β̃b (b ≥ 1) and
/// 16ρ² + 8β̃/b (b < 1), with ρ and β̃ activation-level.
pub fn scaled_stepsize(eta_one: f64, b: f64, lip: f64, beta_tilde: f64) -> Result<f64> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::Invalid(format!("output scale b must be positive, got {b}")));
    }
    let r2 = lip * lip;
    let base = 16.0 * r2 + 8.0 * beta_tilde;
    let den = if b >= 1.0 { 16.0 * r2 * b * b + 8.0 * beta_tilde * b } else { 16.0 * r2 + 8.0 * beta_tilde / b };
    Ok(eta_one * base / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSummary {
    /// Per-neuron stepsize at b = 1 that every cell is rescaled from.
    pub eta_one: f64,
    /// Where `eta_one` came from: "budget-tuned" or "configured".
    pub eta_source: String,
    pub sweep: SweepSummary,
}

/// One run per output scale b with a budget-tuned stepsize. With a known
/// separator the b = 1 stepsize is the budget-tuned η for T = steps;
/// otherwise the first configured stepsize serves as η at b = 1.
pub fn cmd_scaling_sweep(config: &ExperimentConfig, out: Option<&Path>, jobs: usize) -> Result<ScalingSummary> {
    let dir = output_dir(config, out)?;
    let scales = &config.training.scales;
    if scales.is_empty() {
        return Err(Error::Invalid("scaling-sweep needs training.scales".into()));
    }
    if let Some(bad) = scales.iter().find(|b| !(**b > 0.0)) {
        return Err(Error::Invalid(format!("output scale b must be positive, got {bad}")));
    }
    if config.training.stepsize_kind != StepsizeKind::PerNeuron {
        return Err(Error::Invalid("scaling-sweep rescales per-neuron stepsizes; set stepsize_kind = \"per_neuron\"".into()));
    }
    let prep = config.prepare()?;
    let (eta_one, source) = match prep.data.separator() {
        Some(sep) => {
            let setup = Setup {
                n: prep.data.len(),
                m: config.network.m,
                d: prep.data.dim(),
                b: 1.0,
                eta: 0.0,
                w0_norm: TwoLayerNet::init(prep.activation.clone(), config.network.m, prep.data.dim(), 1.0, &config.init_spec())?
                    .weight_norm(),
                gamma: Some(sep.gamma),
            };
            let c = TheoryConstants::from_certified(&prep.cert, &setup);
            (acceleration_stepsize(config.training.steps as f64, &c)?.eta, "budget-tuned")
        }
        None => {
            let eta = *config
                .training
                .stepsizes
                .first()
                .ok_or_else(|| Error::Invalid("without a separator, scaling-sweep needs one configured stepsize".into()))?;
            (eta, "configured")
        }
    };
    let cells = scales
        .iter()
        .map(|&b| Ok((scaled_stepsize(eta_one, b, prep.cert.lip_hat, prep.cert.beta_hat)?, b)))
        .collect::<Result<Vec<_>>>()?;
    let sweep = run_cells(&prep, &dir, &cells, jobs)?;
    let summary = ScalingSummary { eta_one, eta_source: source.into(), sweep };
    write(&dir.join("scaling.json"), to_json(&summary)?)?;
    let mut table = String::from("b,stepsize,final_loss\n");
    for c in &summary.sweep.cells {
        table += &format!("{:e},{:e},{}\n", c.b, c.stepsize, opt_num(c.final_loss));
    }
    write(&dir.join("scaling.csv"), table)?;
    Ok(summary)
}

/// Certifies the configured activation and returns the human-readable
/// report; writes `certified.json` when `out` is given.
pub fn cmd_certify(activation: &Activation, spec: &CertifySpec, out: Option<&Path>) -> Result<(CertifiedConstants, String)> {
    let cert = certify(activation, spec.lo, spec.hi, spec.samples)?;
    let report = certification_report(activation, &cert);
    if let Some(dir) = out {
        create_dir(dir)?;
        write(&dir.join("certified.json"), to_json(&cert)?)?;
        write(&dir.join("certified.txt"), &report)?;
    }
    Ok((cert, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub phases: PhaseReport,
    pub verification: Verification,
}

impl VerifySummary {
    pub fn exit_status(&self) -> ExitStatus {
        if self.verification.passed() {
            ExitStatus::Success
        } else {
            ExitStatus::Violations
        }
    }
}

/// Re-checks a recorded trajectory offline. `run_dir` must hold
/// `trajectory.csv`; `constants` defaults to `run_dir/constants.json`.
/// Bound reports land in `out` (default `run_dir/verify`).
pub fn cmd_verify(run_dir: &Path, constants: Option<&Path>, out: Option<&Path>) -> Result<VerifySummary> {
    let main_path = run_dir.join("trajectory.csv");
    let main = fs::read_to_string(&main_path).map_err(|e| Error::io(&main_path, e))?;
    let aux = fs::read_to_string(run_dir.join("trajectory_aux.csv")).ok();
    let records = parse_trajectory(&main, aux.as_deref())?;
    let cpath = constants.map_or_else(|| run_dir.join("constants.json"), Path::to_path_buf);
    let ctext = fs::read_to_string(&cpath).map_err(|e| Error::io(&cpath, e))?;
    let c: TheoryConstants = serde_json::from_str(&ctext)?;
    if records.is_empty() {
        return Err(Error::parse("trajectory", "no records"));
    }
    let phases = detect_phases(&records, &c)?;
    let stable = verify_stable_phase(&records, &phases, &c);
    let decrease = verify_decrease_lemma(&records, &c);
    let bounds = if c.gamma.is_some() { eos_bound_reports(&records, &c)? } else { Vec::new() };

    let dir = out.map_or_else(|| run_dir.join("verify"), Path::to_path_buf);
    create_dir(&dir)?;
    write_bound_reports(&dir, &bounds)?;
    write(&dir.join("stable_violations.csv"), stable_violations_csv(&stable))?;
    write(&dir.join("decrease_violations.csv"), stable_violations_csv(&decrease))?;
    let summary = VerifySummary {
        phases,
        verification: Verification {
            stable_phase: (&stable).into(),
            decrease_lemma: (&decrease).into(),
            eos_bounds: bounds.iter().map(BoundSummary::from).collect(),
        },
    };
    write(&dir.join("verify.json"), to_json(&summary)?)?;
    Ok(summary)
}

fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn fmt_value(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::Null => "-".into(),
        serde_json::Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => format!("{x:.4e}"),
            _ => n.to_string(),
        },
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Plain-text report for a run directory (with `summary.json`) or a sweep
/// directory (with `sweep.json`). Sweeps also get `curves.csv`, every
/// cell's (step, loss, γ̄) in long format for plotting.
pub fn cmd_report(dir: &Path) -> Result<String> {
    let sweep_path = dir.join("sweep.json");
    if sweep_path.exists() {
        let sweep: SweepSummary = serde_json::from_value(read_json(&sweep_path)?)?;
        let mut out = format!("{:>5} {:>12} {:>10} {:>10} {:>14} {:>8} {:>8} {:>12} {:>9}\n", "cell", "stepsize", "b", "status", "final_loss", "s_emp", "s_thr2", "gamma_bar", "slope");
        let mut curves = String::from("cell,stepsize,b,step,loss,gamma_bar\n");
        for c in &sweep.cells {
            let status = c.status.map_or("failed".to_string(), |s| format!("{s:?}").to_lowercase());
            let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4e}"));
            let u = |x: Option<u64>| x.map_or("-".to_string(), |v| v.to_string());
            out += &format!(
                "{:>5} {:>12.4e} {:>10.4} {:>10} {:>14} {:>8} {:>8} {:>12} {:>9}\n",
                c.index,
                c.stepsize,
                c.b,
                status,
                f(c.final_loss),
                u(c.s_empirical),
                u(c.s_threshold2),
                f(c.final_gamma_bar),
                c.slope.map_or("-".to_string(), |v| format!("{v:.4}")),
            );
            if let Ok(text) = fs::read_to_string(dir.join(&c.dir).join("trajectory.csv")) {
                for r in parse_trajectory(&text, None)? {
                    curves += &format!("{},{:e},{:e},{},{:.16e},{}\n", c.index, c.stepsize, c.b, r.step, r.loss, opt_num(r.margins.gamma_bar));
                }
            }
        }
        out += &format!("final loss strictly decreasing along cells: {}\n", sweep.loss_decreasing);
        write(&dir.join("curves.csv"), curves)?;
        return Ok(out);
    }
    let summary = read_json(&dir.join("summary.json"))?;
    let get = |path: &[&str]| {
        let mut v = &summary;
        for k in path {
            v = &v[*k];
        }
        fmt_value(v)
    };
    let mut out = String::new();
    for (label, path) in [
        ("status", &["status"][..]),
        ("eta", &["eta"]),
        ("eta_tilde", &["eta_tilde"]),
        ("b", &["b"]),
        ("steps", &["steps"]),
        ("final loss", &["final_state", "loss"]),
        ("final weight norm", &["final_state", "weight_norm"]),
        ("final gamma_bar", &["final_state", "margins", "gamma_bar"]),
        ("final gamma_c", &["final_state", "margins", "gamma_c"]),
        ("threshold 1", &["phases", "thresh1"]),
        ("threshold 2", &["phases", "thresh2"]),
        ("s_threshold1", &["phases", "s_threshold1"]),
        ("s_threshold2", &["phases", "s_threshold2"]),
        ("s_empirical", &["phases", "s_empirical"]),
        ("tau", &["tau"]),
        ("final-decade slope", &["final_decade_slope"]),
        ("stable-phase violations", &["verification", "stable_phase", "violations"]),
        ("decrease-lemma violations", &["verification", "decrease_lemma", "violations"]),
    ] {
        out += &format!("{label:<26} {}\n", get(path));
    }
    if let Some(bounds) = summary["verification"]["eos_bounds"].as_array() {
        for b in bounds {
            out += &format!(
                "bound {:<20} points {:>7} violations {:>4} max rel slack {}\n",
                fmt_value(&b["name"]),
                fmt_value(&b["points"]),
                fmt_value(&b["violations"]),
                fmt_value(&b["max_rel_slack"])
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const XOR: &str = r#"
[dataset]
kind = "xor"

[activation]
name = "leaky_softplus"
c = 0.5

[network]
m = 20

[training]
stepsizes = [5.0]
steps = 2000
cadence = 1

[certify]
samples = 100001
"#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let c = ExperimentConfig::from_toml(XOR).unwrap();
        assert_eq!(c.dataset, DatasetSpec::Xor { scaled: true });
        assert_eq!(c.network.b, 1.0);
        assert_eq!(c.network.init, InitName::Gaussian);
        assert_eq!(c.training.cadence, CadenceSpec::Every(1));
        assert_eq!(c.activation.params.get("c"), Some(&0.5));
        assert_eq!(c.certify.lo, -30.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::from_toml(&XOR.replace("m = 20", "m = 20\nwidth = 3")).is_err());
        assert!(ExperimentConfig::from_toml(&XOR.replace("kind = \"xor\"", "kind = \"mnist\"")).is_err());
        let bad_act = ExperimentConfig::from_toml(&XOR.replace("leaky_softplus", "relu")).unwrap();
        assert!(matches!(bad_act.prepare(), Err(Error::UnknownActivation(_))));
        let odd = ExperimentConfig::from_toml(&XOR.replace("m = 20", "m = 3\nsigns = \"half_split\"")).unwrap();
        assert!(odd.prepare().is_err());
        let cad = ExperimentConfig::from_toml(&XOR.replace("cadence = 1", "cadence = \"sometimes\"")).unwrap();
        assert!(cad.prepare().is_err());
    }

    #[test]
    fn zero_stepsize_is_no_progress_and_passes() {
        let mut c = ExperimentConfig::from_toml(XOR).unwrap();
        c.training.stepsizes = vec![0.0];
        c.training.steps = 50;
        let art = run_cell(&c.prepare().unwrap(), 0.0, 1.0).unwrap();
        assert_eq!(art.summary.status, RunStatus::NoProgress);
        assert!(art.summary.verification.passed());
        assert_eq!(art.summary.exit_status(), ExitStatus::Success);
        assert_eq!(art.records.first().unwrap().loss, art.records.last().unwrap().loss);
    }

    #[test]
    fn scaled_stepsize_matches_both_branches() {
        let (lip, bt) = (0.625, 0.03125);
        assert_eq!(scaled_stepsize(2.0, 1.0, lip, bt).unwrap(), 2.0);
        let base = 16.0 * lip * lip + 8.0 * bt;
        let at4 = scaled_stepsize(1.0, 4.0, lip, bt).unwrap();
        assert!((at4 - base / (16.0 * lip * lip * 16.0 + 32.0 * bt)).abs() < 1e-15);
        let quarter = scaled_stepsize(1.0, 0.25, lip, bt).unwrap();
        assert!((quarter - base / (16.0 * lip * lip + 32.0 * bt)).abs() < 1e-15);
        assert!(scaled_stepsize(1.0, 0.0, lip, bt).is_err());
        assert!(scaled_stepsize(1.0, -1.0, lip, bt).is_err());
    }

    #[test]
    fn exit_status_order() {
        assert_eq!(ExitStatus::Success.code(), 0);
        assert_eq!(ExitStatus::Violations.code(), 1);
        assert_eq!(ExitStatus::ConfigError.code(), 2);
        assert_eq!(ExitStatus::Divergence.code(), 3);
    }
}
