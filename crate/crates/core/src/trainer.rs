//! Constant-stepsize full-batch GD with per-step instrumentation, phase
//! detection and the stable-phase verifier.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::margins::{iota, sandwich_upper, MarginSet};
use crate::network::TwoLayerNet;
use crate::numeric::CompensatedSum;
use crate::objective::risk;
use crate::theory::{stable_threshold_1, stable_threshold_2, TheoryConstants};
use crate::trajectory::TrajectoryRecord;

/// A run halts once the loss exceeds this multiple of its initial value.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Stepsize {
    /// η̃ applied to the raw gradient.
    EtaTilde(f64),
    /// η with η̃ = m·η.
    PerNeuron(f64),
}

impl Stepsize {
    pub fn eta_tilde(self, m: usize) -> f64 {
        match self {
            Stepsize::EtaTilde(v) => v,
            Stepsize::PerNeuron(eta) => m as f64 * eta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cadence {
    /// t = 0, k, 2k, … and the final step.
    Every(u64),
    /// Every step up to `dense_until`, then roughly `per_decade` records per
    /// factor of ten, plus the final step.
    Thinned { dense_until: u64, per_decade: u32 },
}

impl Cadence {
    /// Every step for runs of at most 10⁴ steps, geometric thinning beyond.
    pub fn auto(steps: u64) -> Self {
        if steps <= 10_000 {
            Cadence::Every(1)
        } else {
            Cadence::Thinned { dense_until: 10_000, per_decade: 1000 }
        }
    }

    /// Recorded steps in increasing order, always including 0 and `steps`.
    pub fn schedule(self, steps: u64) -> Vec<u64> {
        let mut out = Vec::new();
        match self {
            Cadence::Every(k) => {
                let k = k.max(1);
                out.extend((0..=steps).step_by(k as usize));
            }
            Cadence::Thinned { dense_until, per_decade } => {
                let dense = dense_until.min(steps);
                out.extend(0..=dense);
                let ratio = 10f64.powf(1.0 / f64::from(per_decade.max(1)));
                let mut x = dense.max(1) as f64;
                loop {
                    x *= ratio;
                    let t = x.round() as u64;
                    if t > steps {
                        break;
                    }
                    if t > *out.last().unwrap() {
                        out.push(t);
                    }
                }
            }
        }
        if *out.last().unwrap() != steps {
            out.push(steps);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub stepsize: Stepsize,
    pub steps: u64,
    pub cadence: Cadence,
}

impl GdConfig {
    pub fn new(stepsize: Stepsize, steps: u64) -> Self {
        GdConfig { stepsize, steps, cadence: Cadence::auto(steps) }
    }
}

#[derive(Debug, Clone)]
pub struct GdRun {
    pub net: TwoLayerNet,
    pub records: Vec<TrajectoryRecord>,
    /// Reason the run stopped early, if it did.
    pub divergence: Option<String>,
    /// Constants used for the margins, with η matching the run.
    pub constants: TheoryConstants,
}

impl GdRun {
    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }

    pub fn final_record(&self) -> &TrajectoryRecord {
        self.records.last().expect("a run always records t = 0")
    }
}

/// Runs W ← W − η̃∇L for `config.steps` steps. `constants` supplies the
/// certified quantities used by the margins; its stepsize fields are
/// overwritten with the configured stepsize.
pub fn run_gd(mut net: TwoLayerNet, data: &Dataset, config: &GdConfig, constants: &TheoryConstants) -> Result<GdRun> {
    let m = net.width();
    let eta_tilde = config.stepsize.eta_tilde(m);
    if !(eta_tilde >= 0.0 && eta_tilde.is_finite()) {
        return Err(Error::Invalid(format!("stepsize η̃ must be finite and nonnegative, got {eta_tilde}")));
    }
    if config.steps == 0 {
        return Err(Error::Invalid("steps must be at least 1".into()));
    }
    let mut c = constants.with_eta(eta_tilde / m as f64);
    c.n = data.len();
    c.m = m;
    c.d = data.dim();
    let w_star = data.separator().map(|s| s.w_star.clone());
    let schedule = config.cadence.schedule(config.steps);
    let mut next = schedule.iter().copied().peekable();

    let mut records = Vec::with_capacity(schedule.len());
    let mut divergence = None;
    let (mut cum_l, mut cum_g) = (CompensatedSum::default(), CompensatedSum::default());
    let mut snap = risk(&net, data)?;
    let l0 = snap.loss;
    let mut prev_loss = f64::NAN;
    for t in 0..=config.steps {
        if !snap.loss.is_finite() || !snap.grad_norm.is_finite() || !snap.v.is_finite() {
            divergence = Some(format!("non-finite loss or gradient at step {t}"));
            break;
        }
        let blown_up = snap.loss > DIVERGENCE_FACTOR * l0;
        if next.peek() == Some(&t) || blown_up {
            next.next();
            let weight_norm = net.weight_norm();
            records.push(TrajectoryRecord {
                step: t,
                loss: snap.loss,
                grad_norm: snap.grad_norm,
                weight_norm,
                v: snap.v,
                g: snap.g,
                f: snap.f,
                q_min: snap.margins.q_min,
                margins: MarginSet::compute(snap.loss, snap.margins.q_min, weight_norm, &c),
                decreased: t > 0 && snap.loss < prev_loss,
                cum_loss: cum_l.value(),
                cum_g: cum_g.value(),
                alignment: w_star.as_ref().map(|w| net.alignment(w)).transpose()?,
            });
        }
        if blown_up {
            divergence = Some(format!("loss exceeded {DIVERGENCE_FACTOR:e} times its initial value at step {t}"));
            break;
        }
        if t == config.steps {
            break;
        }
        cum_l.add(snap.loss);
        cum_g.add(snap.g);
        prev_loss = snap.loss;
        for (w, g) in net.weights_mut().iter_mut().zip(&snap.grad) {
            *w -= eta_tilde * g;
        }
        snap = risk(&net, data)?;
    }
    Ok(GdRun { net, records, divergence, constants: c })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub thresh1: f64,
    pub thresh2: f64,
    pub s_threshold1: Option<u64>,
    pub s_threshold2: Option<u64>,
    /// One past the last recorded increase of L; 0 if L never increased.
    pub s_empirical: u64,
    /// Largest gap between consecutive recorded steps; the s values are
    /// exact only when this is 1.
    pub resolution: u64,
}

pub fn detect_phases(traj: &[TrajectoryRecord], c: &TheoryConstants) -> Result<PhaseReport> {
    let thresh1 = stable_threshold_1(c)?;
    let thresh2 = stable_threshold_2(c)?;
    Ok(phases_from_losses(traj.iter().map(|r| (r.step, r.loss)), thresh1, thresh2))
}

/// Phase detection on bare (step, loss) pairs.
pub fn phases_from_losses(seq: impl IntoIterator<Item = (u64, f64)>, thresh1: f64, thresh2: f64) -> PhaseReport {
    let mut report = PhaseReport { thresh1, thresh2, s_threshold1: None, s_threshold2: None, s_empirical: 0, resolution: 0 };
    let mut prev: Option<(u64, f64)> = None;
    for (t, loss) in seq {
        if report.s_threshold1.is_none() && loss <= thresh1 {
            report.s_threshold1 = Some(t);
        }
        if report.s_threshold2.is_none() && loss <= thresh2 {
            report.s_threshold2 = Some(t);
        }
        if let Some((pt, pl)) = prev {
            report.resolution = report.resolution.max(t - pt);
            if loss > pl {
                report.s_empirical = t + 1;
            }
        }
        prev = Some((t, loss));
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StableCheck {
    /// L nonincreasing once below the first threshold.
    MonotoneAfterThreshold1,
    /// L nonincreasing once below the second threshold.
    LossMonotone,
    NormMonotone,
    NormIncreaseLower,
    NormIncreaseUpper,
    RadialAlignment,
    ModifiedMarginMonotone,
    RateLower,
    RateUpper,
    /// γ^c ≤ γ^b ≤ γ̄ ≤ (1 + c/log(1/L))·γ^c
    MarginSandwich,
    /// γ̄ ≤ γ^a ≤ γ̄ + log(2n)/‖w‖ when L ≤ 1/(2n)
    SmoothedSandwich,
    /// q_min ≥ ι(−log L − log n)
    QminLowerBound,
    DecreaseLower,
    DecreaseUpper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// For checks over a pair of records, the later step.
    pub step: u64,
    pub check: StableCheck,
    pub measured: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StableReport {
    pub checked_pairs: usize,
    pub checked_points: usize,
    pub violations: Vec<Violation>,
    pub note: Option<String>,
}

impl StableReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn require(&mut self, ok: bool, step: u64, check: StableCheck, measured: f64, bound: f64) {
        if !ok {
            self.violations.push(Violation { step, check, measured, bound });
        }
    }

    pub fn count(&self, check: StableCheck) -> usize {
        self.violations.iter().filter(|v| v.check == check).count()
    }
}

const MONO_TOL: f64 = 1e-12;
const INEQ_TOL: f64 = 1e-9;
const GAMMA_C_TOL: f64 = 1e-10;
const RATE_REL_TOL: f64 = 1e-9;
/// Relative rounding of a stored weight norm, in units of machine epsilon.
const NORM_ULPS: f64 = 4.0;

/// Checks the stable-phase claims on every recorded pair from the second
/// threshold onwards, plus loss monotonicity from the first threshold.
/// Per-step identities (norm increase) are checked only on pairs of
/// consecutive steps.
pub fn verify_stable_phase(traj: &[TrajectoryRecord], phases: &PhaseReport, c: &TheoryConstants) -> StableReport {
    let mut rep = StableReport::default();
    let Some(s2) = phases.s_threshold2 else {
        rep.note = Some("second threshold never reached; nothing to check".into());
        return rep;
    };
    let eta_tilde = c.eta_tilde;
    let log2nek = c.log_2n_e_kappa();
    let n = c.n as f64;

    if let Some(s1) = phases.s_threshold1 {
        for w in traj.windows(2).filter(|w| w[0].step >= s1) {
            rep.require(w[1].loss <= w[0].loss + MONO_TOL, w[1].step, StableCheck::MonotoneAfterThreshold1, w[1].loss, w[0].loss);
        }
    }

    let start = traj.partition_point(|r| r.step < s2);
    let stable = &traj[start..];
    let Some(anchor) = stable.first() else {
        return rep;
    };
    let (ls, gc_s) = (anchor.loss, anchor.margins.gamma_c);

    for r in stable {
        rep.checked_points += 1;
        let t = r.step;
        let lg = log2nek + r.loss.ln();
        let v_floor = -r.loss * lg;
        rep.require(r.v >= v_floor - INEQ_TOL && v_floor >= -MONO_TOL, t, StableCheck::RadialAlignment, r.v, v_floor);

        let m = r.margins;
        match (m.gamma_bar, m.gamma_b, m.gamma_c, sandwich_upper(r.loss, r.weight_norm, c)) {
            (Some(bar), Some(gb), Some(gc), Some(top)) => {
                let ok = gc <= gb + INEQ_TOL && gb <= bar + INEQ_TOL && bar <= top + INEQ_TOL;
                rep.require(ok, t, StableCheck::MarginSandwich, bar, top);
            }
            _ => rep.require(false, t, StableCheck::MarginSandwich, f64::NAN, f64::NAN),
        }

        if t > s2 {
            let dt = (t - s2) as f64;
            let lower = 1.0 / (1.0 / ls + 3.0 * eta_tilde * c.rho * c.rho * dt);
            rep.require(r.loss >= lower * (1.0 - RATE_REL_TOL), t, StableCheck::RateLower, r.loss, lower);
            if let Some(g) = gc_s {
                let upper = 2.0 / (dt * eta_tilde * g * g);
                rep.require(r.loss <= upper * (1.0 + RATE_REL_TOL), t, StableCheck::RateUpper, r.loss, upper);
            }
        }
    }

    for w in stable.windows(2) {
        rep.checked_pairs += 1;
        let (a, b) = (&w[0], &w[1]);
        rep.require(b.loss <= a.loss + MONO_TOL, b.step, StableCheck::LossMonotone, b.loss, a.loss);
        // Stored norms carry a few ulps of rounding; below that floor the
        // norm checks cannot tell a violation from noise.
        let norm_tol = MONO_TOL.max(NORM_ULPS * f64::EPSILON * b.weight_norm);
        rep.require(b.weight_norm >= a.weight_norm - norm_tol, b.step, StableCheck::NormMonotone, b.weight_norm, a.weight_norm);
        if let (Some(ga), Some(gb)) = (a.margins.gamma_c, b.margins.gamma_c) {
            rep.require(gb >= ga - GAMMA_C_TOL, b.step, StableCheck::ModifiedMarginMonotone, gb, ga);
        }
        if b.step == a.step + 1 {
            let dr2 = b.weight_norm * b.weight_norm - a.weight_norm * a.weight_norm;
            let base = 2.0 * eta_tilde * a.v;
            let lg = log2nek + a.loss.ln();
            let upper = base * (1.0 - 1.0 / (2.0 * lg));
            let tol = INEQ_TOL.max(2.0 * NORM_ULPS * f64::EPSILON * b.weight_norm * b.weight_norm);
            rep.require(dr2 >= base - tol, b.step, StableCheck::NormIncreaseLower, dr2, base);
            rep.require(dr2 <= upper + tol, b.step, StableCheck::NormIncreaseUpper, dr2, upper);
        }
    }

    // Lemmas that hold on every record.
    for r in traj {
        let floor = iota(-r.loss.ln() - n.ln());
        rep.require(r.q_min >= floor - INEQ_TOL, r.step, StableCheck::QminLowerBound, r.q_min, floor);
        if r.loss <= 1.0 / (2.0 * n) {
            if let (Some(bar), Some(ga)) = (r.margins.gamma_bar, r.margins.gamma_a) {
                let top = bar + (2.0 * n).ln() / r.weight_norm;
                rep.require(bar <= ga + INEQ_TOL && ga <= top + INEQ_TOL, r.step, StableCheck::SmoothedSandwich, ga, top);
            }
        }
    }
    rep
}

/// Two-sided one-step change of L on consecutive steps with L_t ≤ 1/(η̃ρ²).
pub fn verify_decrease_lemma(traj: &[TrajectoryRecord], c: &TheoryConstants) -> StableReport {
    let mut rep = StableReport::default();
    let (et, rho2, beta) = (c.eta_tilde, c.rho * c.rho, c.beta);
    for w in traj.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.step != a.step + 1 || a.loss > 1.0 / (et * rho2) {
            continue;
        }
        rep.checked_pairs += 1;
        let g2 = a.grad_norm * a.grad_norm;
        let dl = b.loss - a.loss;
        let lower = -et * (1.0 + beta * et * a.loss) * g2;
        let upper = -et * (1.0 - (2.0 * rho2 + beta) * et * a.loss) * g2;
        rep.require(dl >= lower - INEQ_TOL, b.step, StableCheck::DecreaseLower, dl, lower);
        rep.require(dl <= upper + INEQ_TOL, b.step, StableCheck::DecreaseUpper, dl, upper);
    }
    rep
}

/// Least-squares slope of log L against log t over records with
/// t ∈ [t_last/10, t_last], t ≥ 1.
pub fn final_decade_slope(traj: &[TrajectoryRecord]) -> Option<f64> {
    let last = traj.last()?.step;
    let pts: Vec<(f64, f64)> = traj
        .iter()
        .filter(|r| r.step >= 1 && r.step * 10 >= last && r.loss > 0.0)
        .map(|r| ((r.step as f64).ln(), r.loss.ln()))
        .collect();
    least_squares_slope(&pts)
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// (min, max) of ‖w_t‖/log t over recorded t in [from, last].
pub fn norm_growth_band(traj: &[TrajectoryRecord], from: u64) -> Option<(f64, f64)> {
    traj.iter()
        .filter(|r| r.step >= from.max(2))
        .map(|r| r.weight_norm / (r.step as f64).ln())
        .fold(None, |acc, x| match acc {
            None => Some((x, x)),
            Some((lo, hi)) => Some((f64::min(lo, x), f64::max(hi, x))),
        })
}
