//! Closed-form thresholds, bounds and schedules, plus verifiers that hold
//! recorded trajectories against the early-phase bounds.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::activation::CertifiedConstants;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::trajectory::TrajectoryRecord;

/// Constant bundle shared by every bound. `kappa`, `rho` and `beta` are
/// network-level (already multiplied by b and divided by √m or m);
/// `alpha` and `beta_tilde` are activation-level.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub rho: f64,
    pub beta: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta_tilde: f64,
    pub gamma: Option<f64>,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub eta: f64,
    pub eta_tilde: f64,
    pub b: f64,
    pub w0_norm: f64,
}

pub struct Setup {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub b: f64,
    pub eta: f64,
    pub w0_norm: f64,
    pub gamma: Option<f64>,
}

impl TheoryConstants {
    pub fn from_certified(cert: &CertifiedConstants, s: &Setup) -> Self {
        let m = s.m as f64;
        TheoryConstants {
            rho: s.b * cert.lip_hat / m.sqrt(),
            beta: s.b * cert.beta_hat / m,
            kappa: s.b * cert.kappa_hat,
            alpha: cert.alpha_hat,
            beta_tilde: cert.beta_hat,
            gamma: s.gamma,
            n: s.n,
            m: s.m,
            d: s.d,
            eta: s.eta,
            eta_tilde: m * s.eta,
            b: s.b,
            w0_norm: s.w0_norm,
        }
    }

    /// Activation Lipschitz constant recovered from ρ = b·lip/√m.
    pub fn lip(&self) -> f64 {
        self.rho * (self.m as f64).sqrt() / self.b
    }

    /// Same bundle with a different per-neuron stepsize.
    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self.eta_tilde = self.m as f64 * eta;
        self
    }

    fn gamma(&self) -> Result<f64> {
        match self.gamma {
            Some(g) if g > 0.0 => Ok(g),
            _ => Err(Error::MissingConstant("gamma")),
        }
    }

    fn positive(v: f64, name: &'static str) -> Result<f64> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::MissingConstant(name))
        }
    }

    /// log(2n·e^κ)
    pub fn log_2n_e_kappa(&self) -> f64 {
        (2.0 * self.n as f64).ln() + self.kappa
    }
}

/// 1/(η̃(2ρ² + β))
pub fn stable_threshold_1(c: &TheoryConstants) -> Result<f64> {
    let den = c.eta_tilde * (2.0 * c.rho * c.rho + c.beta);
    if !(den > 0.0) {
        return Err(Error::Invalid("η̃(2ρ²+β) must be positive".into()));
    }
    Ok(1.0 / den)
}

/// min{1/(2n·e^{κ+2}), 1/(η̃(4ρ² + 2β))}
pub fn stable_threshold_2(c: &TheoryConstants) -> Result<f64> {
    if c.n == 0 {
        return Err(Error::MissingConstant("n"));
    }
    let first = 1.0 / (2.0 * c.n as f64 * (c.kappa + 2.0).exp());
    let den = c.eta_tilde * (4.0 * c.rho * c.rho + 2.0 * c.beta);
    if !(den > 0.0) {
        return Err(Error::Invalid("η̃(4ρ²+2β) must be positive".into()));
    }
    Ok(first.min(1.0 / den))
}

fn log_gamma2_eta_t(t: f64, c: &TheoryConstants) -> Result<Option<f64>> {
    let gamma = c.gamma()?;
    let eta = TheoryConstants::positive(c.eta, "eta")?;
    let u = gamma * gamma * eta * t;
    Ok(if u > 1.0 { Some(u.ln()) } else { None })
}

/// Average-risk bound over the first t steps:
/// (1 + 8log²(γ²ηt)/α² + 8κ²/α² + η²)/(γ²ηt) + ‖w₀‖²/(mηt).
/// `None` when γ²ηt ≤ 1.
pub fn eos_average_risk_bound(t: f64, c: &TheoryConstants) -> Result<Option<f64>> {
    let Some(lg) = log_gamma2_eta_t(t, c)? else { return Ok(None) };
    let alpha = TheoryConstants::positive(c.alpha, "alpha")?;
    let (gamma, eta, a2) = (c.gamma()?, c.eta, alpha * alpha);
    let head = 1.0 + 8.0 * lg * lg / a2 + 8.0 * c.kappa * c.kappa / a2 + eta * eta;
    Ok(Some(head / (gamma * gamma * eta * t) + c.w0_norm * c.w0_norm / (c.m as f64 * eta * t)))
}

/// ‖w_t‖ ≤ √m(2 + 8log(γ²ηt)/α + 8κ/α + 4η)/γ + 2‖w₀‖.
pub fn weight_norm_bound(t: f64, c: &TheoryConstants) -> Result<Option<f64>> {
    let Some(lg) = log_gamma2_eta_t(t, c)? else { return Ok(None) };
    let alpha = TheoryConstants::positive(c.alpha, "alpha")?;
    let inner = 2.0 + 8.0 * lg / alpha + 8.0 * c.kappa / alpha + 4.0 * c.eta;
    Ok(Some((c.m as f64).sqrt() * inner / c.gamma()? + 2.0 * c.w0_norm))
}

/// Explicit average-G bound:
/// (2 + 8log(γ²ηt)/α + 8κ/α + 4η)/(αγ²ηt) + 3‖w₀‖/(√m·αγηt).
pub fn gradient_potential_bound_explicit(t: f64, c: &TheoryConstants) -> Result<Option<f64>> {
    let Some(lg) = log_gamma2_eta_t(t, c)? else { return Ok(None) };
    let alpha = TheoryConstants::positive(c.alpha, "alpha")?;
    let (gamma, eta) = (c.gamma()?, c.eta);
    let inner = 2.0 + 8.0 * lg / alpha + 8.0 * c.kappa / alpha + 4.0 * eta;
    Ok(Some(
        inner / (alpha * gamma * gamma * eta * t)
            + 3.0 * c.w0_norm / ((c.m as f64).sqrt() * alpha * gamma * eta * t),
    ))
}

/// Perceptron-style average-G bound (⟨w_t, w̄*⟩ − ⟨w₀, w̄*⟩)/(b·η̃·αγt);
/// `gain` is the alignment difference. With b = 1 this is the mαγηt form.
pub fn gradient_potential_bound_alignment(t: f64, c: &TheoryConstants, gain: f64) -> Result<f64> {
    if !(t >= 1.0) {
        return Err(Error::Invalid(format!("t must be at least 1, got {t}")));
    }
    let alpha = TheoryConstants::positive(c.alpha, "alpha")?;
    let eta_tilde = TheoryConstants::positive(c.eta_tilde, "eta_tilde")?;
    Ok(gain / (c.b * eta_tilde * alpha * c.gamma()? * t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TauForm {
    /// (128(1+4κ)/(α²γ²))·max{c₂η, c₁n, e, X·log X, X·‖w₀‖/√m}
    #[default]
    MarginScaled,
    /// (128(1+4κ)/α²)·max{c₁η, c₂n, e, X·log X, X·‖w₀‖/√m}
    Unscaled,
}

/// c₁ = 4e^{κ+2} and c₂ = 8 + 4β̃.
pub fn tau_constants(c: &TheoryConstants) -> (f64, f64) {
    (4.0 * (c.kappa + 2.0).exp(), 8.0 + 4.0 * c.beta_tilde)
}

/// Upper bound on the step at which the second stable threshold is met.
pub fn tau_phase_transition(c: &TheoryConstants, form: TauForm) -> Result<f64> {
    let alpha = TheoryConstants::positive(c.alpha, "alpha")?;
    let eta = TheoryConstants::positive(c.eta, "eta")?;
    let gamma = c.gamma()?;
    if c.n == 0 || c.m == 0 {
        return Err(Error::MissingConstant("n"));
    }
    let (c1, c2) = tau_constants(c);
    let n = c.n as f64;
    let x = (c2 * eta + c1 * n) / eta;
    let tail = [E, x * x.ln(), x * c.w0_norm / (c.m as f64).sqrt()];
    let pref = 128.0 * (1.0 + 4.0 * c.kappa) / (alpha * alpha);
    let (head, pref) = match form {
        TauForm::MarginScaled => ([c2 * eta, c1 * n], pref / (gamma * gamma)),
        TauForm::Unscaled => ([c1 * eta, c2 * n], pref),
    };
    Ok(pref * head.into_iter().chain(tail).fold(f64::NEG_INFINITY, f64::max))
}

/// 2/(α²γ²η(t−s))
pub fn stable_rate_bound(t: f64, s: f64, c: &TheoryConstants) -> Result<f64> {
    if !(t > s) {
        return Err(Error::Invalid(format!("need t > s, got t = {t}, s = {s}")));
    }
    let alpha = TheoryConstants::positive(c.alpha, "alpha")?;
    let eta = TheoryConstants::positive(c.eta, "eta")?;
    let g = c.gamma()?;
    Ok(2.0 / (alpha * alpha * g * g * eta * (t - s)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelerationPlan {
    pub eta: f64,
    pub min_budget: f64,
    /// 2048(1+4κ)c₂/(α⁴γ⁴T²)
    pub terminal_bound: f64,
    pub admissible: bool,
}

/// Budget-tuned stepsize η = α²γ²T/(256(1+4κ)c₂) and its admissibility.
pub fn acceleration_stepsize(budget: f64, c: &TheoryConstants) -> Result<AccelerationPlan> {
    let alpha = TheoryConstants::positive(c.alpha, "alpha")?;
    let gamma = c.gamma()?;
    if !(budget > 0.0) {
        return Err(Error::Invalid(format!("budget must be positive, got {budget}")));
    }
    let (c1, c2) = tau_constants(c);
    let k = 1.0 + 4.0 * c.kappa;
    let ag2 = alpha * alpha * gamma * gamma;
    let eta = ag2 * budget / (256.0 * k * c2);
    let need = (c1 * c.n as f64)
        .max(4.0 * c2 * c2)
        .max(2.0 * c2 * c.w0_norm / (c.m.max(1) as f64).sqrt());
    let min_budget = 256.0 * k / ag2 * need;
    let terminal_bound = 2048.0 * k * c2 / (ag2 * ag2 * budget * budget);
    Ok(AccelerationPlan { eta, min_budget, terminal_bound, admissible: budget >= min_budget })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub step: u64,
    pub measured: f64,
    pub bound: f64,
    pub violated: bool,
}

/// Outcome of checking `measured ≤ bound` along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub points: Vec<BoundPoint>,
    /// max of (measured − bound)/|bound|; negative means every point had room.
    pub max_rel_slack: f64,
    pub violations: Vec<u64>,
    /// Why the bound was not evaluated, if it was not.
    pub note: Option<String>,
}

impl BoundReport {
    pub fn new(name: &str) -> Self {
        BoundReport {
            name: name.to_string(),
            points: Vec::new(),
            max_rel_slack: f64::NEG_INFINITY,
            violations: Vec::new(),
            note: None,
        }
    }

    /// Records one comparison; a violation is measured > bound·(1+rel) + abs.
    pub fn check(&mut self, step: u64, measured: f64, bound: f64, rel: f64, abs: f64) {
        let scale = bound.abs().max(f64::MIN_POSITIVE);
        self.max_rel_slack = self.max_rel_slack.max((measured - bound) / scale);
        let violated = !(measured <= bound + rel * bound.abs() + abs);
        if violated {
            self.violations.push(step);
        }
        self.points.push(BoundPoint { step, measured, bound, violated });
    }

    pub fn skipped(name: &str, why: &str) -> Self {
        BoundReport { note: Some(why.to_string()), ..BoundReport::new(name) }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// CSV body `step,measured,bound,violation`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,measured,bound,violation\n");
        for p in &self.points {
            out += &format!("{},{:.16e},{:.16e},{}\n", p.step, p.measured, p.bound, u8::from(p.violated));
        }
        out
    }
}

/// Relative tolerance for the early-phase bounds.
pub const EOS_REL_TOL: f64 = 1e-9;

/// Holds a recorded trajectory against the early-phase bounds: average risk,
/// weight norm, both average-G bounds and the G/L/F and gradient-norm
/// sandwiches. The closed forms assume b = 1 and |φ′| ≤ 1; when either
/// fails those reports are returned empty with a note.
pub fn verify_eos_bounds(traj: &[TrajectoryRecord], data: &Dataset, c: &TheoryConstants) -> Result<Vec<BoundReport>> {
    let sep = data.separator().ok_or(Error::NoSeparator)?;
    let mut c = *c;
    if c.gamma.is_none() {
        c.gamma = Some(sep.gamma);
    }
    eos_bound_reports(traj, &c)
}

/// Same as [`verify_eos_bounds`] with the margin taken from `c.gamma`.
pub fn eos_bound_reports(traj: &[TrajectoryRecord], c: &TheoryConstants) -> Result<Vec<BoundReport>> {
    let c = *c;
    if !(c.alpha > 0.0) {
        return Err(Error::Invalid("certified alpha must be positive".into()));
    }
    let gamma = c.gamma()?;
    let closed_forms_apply = (c.b - 1.0).abs() < 1e-15 && c.lip() <= 1.0 + 1e-12;
    let why = "closed form assumes b = 1 and |phi'| <= 1";
    let mut avg_l = BoundReport::new("average_loss");
    let mut wnorm = BoundReport::new("weight_norm");
    let mut g_explicit = BoundReport::new("average_g_explicit");
    let mut g_align = BoundReport::new("average_g_alignment");
    let mut g_le_l = BoundReport::new("g_le_loss");
    let mut l_le_f = BoundReport::new("loss_le_f");
    let mut f_le_2g = BoundReport::new("f_le_2g");
    let mut grad_upper = BoundReport::new("grad_norm_upper");
    let mut grad_lower = BoundReport::new("grad_norm_lower");
    let align0 = traj.first().and_then(|r| r.alignment);
    let sqrt_m = (c.m as f64).sqrt();
    let n = c.n as f64;
    for r in traj {
        let step = r.step;
        g_le_l.check(step, r.g, r.loss, EOS_REL_TOL, 0.0);
        l_le_f.check(step, r.loss, r.f, EOS_REL_TOL, 0.0);
        if r.g <= 1.0 / (2.0 * n) {
            f_le_2g.check(step, r.f, 2.0 * r.g, EOS_REL_TOL, 0.0);
        }
        grad_upper.check(step, sqrt_m * r.grad_norm, sqrt_m * c.rho * r.g, EOS_REL_TOL, 0.0);
        grad_lower.check(step, c.b * c.alpha * gamma * r.g, sqrt_m * r.grad_norm, EOS_REL_TOL, 0.0);
        if step == 0 {
            continue;
        }
        let t = step as f64;
        if let (Some(a0), Some(at)) = (align0, r.alignment) {
            let bound = gradient_potential_bound_alignment(t, &c, at - a0)?;
            g_align.check(step, r.cum_g / t, bound, EOS_REL_TOL, 0.0);
        }
        if !closed_forms_apply {
            continue;
        }
        if let Some(bound) = eos_average_risk_bound(t, &c)? {
            avg_l.check(step, r.cum_loss / t, bound, EOS_REL_TOL, 0.0);
        }
        if let Some(bound) = weight_norm_bound(t, &c)? {
            wnorm.check(step, r.weight_norm, bound, EOS_REL_TOL, 0.0);
        }
        if let Some(bound) = gradient_potential_bound_explicit(t, &c)? {
            g_explicit.check(step, r.cum_g / t, bound, EOS_REL_TOL, 0.0);
        }
    }
    if !closed_forms_apply {
        for r in [&mut avg_l, &mut wnorm, &mut g_explicit] {
            r.note = Some(why.to_string());
        }
    }
    if align0.is_none() {
        g_align.note = Some("trajectory carries no separator alignment".into());
    }
    Ok(vec![avg_l, wnorm, g_explicit, g_align, g_le_l, l_le_f, f_le_2g, grad_upper, grad_lower])
}
