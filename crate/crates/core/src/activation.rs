//! Scalar activations, their derivatives, leaky combinators and a grid-based
//! certificate for the constants (α, lip, κ, β̃) that feed every bound.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this certified derivative floor an activation is reported as
/// violating the derivative lower bound.
pub const ALPHA_FLOOR: f64 = 1e-8;

pub const DEFAULT_CERT_LO: f64 = -30.0;
pub const DEFAULT_CERT_HI: f64 = 30.0;
pub const DEFAULT_CERT_SAMPLES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum Activation {
    Identity,
    Softplus,
    Sigmoid,
    Tanh,
    /// Standard GELU, x·Φ(x) with Φ the normal CDF.
    Gelu,
    Silu,
    HuberizedRelu { h: f64 },
    /// c·x + (1−c)/4·inner(x)
    Leaky { inner: Box<Activation>, c: f64 },
    /// c·x + (1−c)·tanh(x)
    LeakyTanh { c: f64 },
    /// c·x + (1−c)·σ(x)
    LeakySigmoid { c: f64 },
}

/// Constants an activation is claimed to satisfy. `None` means no claim.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClaimedConstants {
    pub alpha: Option<f64>,
    pub lip: Option<f64>,
    pub kappa: Option<f64>,
    pub beta_tilde: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifiedConstants {
    pub alpha_hat: f64,
    pub lip_hat: f64,
    pub kappa_hat: f64,
    /// Grid point where the homogeneity gap peaks.
    pub kappa_argmax: f64,
    pub beta_hat: f64,
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

fn sech2(x: f64) -> f64 {
    let s = 1.0 / x.cosh();
    s * s
}

impl Activation {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Softplus => softplus(x),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Gelu => x * normal_cdf(x),
            Activation::Silu => x * sigmoid(x),
            Activation::HuberizedRelu { h } => {
                if x <= 0.0 {
                    0.0
                } else if x <= *h {
                    x * x / (2.0 * h)
                } else {
                    x - h / 2.0
                }
            }
            Activation::Leaky { inner, c } => c * x + (1.0 - c) / 4.0 * inner.value(x),
            Activation::LeakyTanh { c } => c * x + (1.0 - c) * x.tanh(),
            Activation::LeakySigmoid { c } => c * x + (1.0 - c) * sigmoid(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Softplus => sigmoid(x),
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * sigmoid(-x)
            }
            Activation::Tanh => sech2(x),
            Activation::Gelu => normal_cdf(x) + x * normal_pdf(x),
            Activation::Silu => {
                let s = sigmoid(x);
                s * (1.0 + x * sigmoid(-x))
            }
            Activation::HuberizedRelu { h } => {
                if x <= 0.0 {
                    0.0
                } else if x <= *h {
                    x / h
                } else {
                    1.0
                }
            }
            Activation::Leaky { inner, c } => c + (1.0 - c) / 4.0 * inner.derivative(x),
            Activation::LeakyTanh { c } => c + (1.0 - c) * sech2(x),
            Activation::LeakySigmoid { c } => {
                let s = sigmoid(x);
                c + (1.0 - c) * s * sigmoid(-x)
            }
        }
    }

    /// Both φ and φ′ in one call; the network hot loop uses this.
    #[inline]
    pub fn value_and_derivative(&self, x: f64) -> (f64, f64) {
        match self {
            Activation::Softplus => (softplus(x), sigmoid(x)),
            Activation::Leaky { inner, c } if **inner == Activation::Softplus => {
                let w = (1.0 - c) / 4.0;
                (c * x + w * softplus(x), c + w * sigmoid(x))
            }
            _ => (self.value(x), self.derivative(x)),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Activation::Identity => "identity".into(),
            Activation::Softplus => "softplus".into(),
            Activation::Sigmoid => "sigmoid".into(),
            Activation::Tanh => "tanh".into(),
            Activation::Gelu => "gelu".into(),
            Activation::Silu => "silu".into(),
            Activation::HuberizedRelu { .. } => "huberized_relu".into(),
            Activation::Leaky { inner, .. } => format!("leaky_{}", inner.name()),
            Activation::LeakyTanh { .. } => "leaky_tanh".into(),
            Activation::LeakySigmoid { .. } => "leaky_sigmoid".into(),
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut p = BTreeMap::new();
        match self {
            Activation::HuberizedRelu { h } => {
                p.insert("h".into(), *h);
            }
            Activation::Leaky { inner, c } => {
                p.extend(inner.params());
                p.insert("c".into(), *c);
            }
            Activation::LeakyTanh { c } | Activation::LeakySigmoid { c } => {
                p.insert("c".into(), *c);
            }
            _ => {}
        }
        p
    }

    /// Constants stated for this activation in the literature it comes from.
    /// Leaky variants only carry the claim for 0.5 ≤ c < 1.
    pub fn claimed(&self) -> ClaimedConstants {
        let some = |alpha: Option<f64>, lip: f64, kappa: f64, beta: f64| ClaimedConstants {
            alpha,
            lip: Some(lip),
            kappa: Some(kappa),
            beta_tilde: Some(beta),
        };
        let gelu_bump = (-0.5f64).exp() / (2.0 * PI).sqrt();
        match self {
            Activation::Identity => some(Some(1.0), 1.0, 0.0, 0.0),
            Activation::Softplus => some(None, 1.0, LN_2, 1.0),
            Activation::Gelu => some(None, 1.0 + gelu_bump, gelu_bump, 2.0),
            Activation::Silu => some(None, 2.0, 1.0, 4.0),
            Activation::HuberizedRelu { h } => some(None, 1.0, h / 2.0, 1.0 / h),
            Activation::Sigmoid => some(Some(0.0), 1.0, 2.0, 1.0),
            Activation::Tanh => some(Some(0.0), 1.0, 5.0, 2.0),
            Activation::Leaky { inner, c } if leaky_c_in_range(*c) => match **inner {
                Activation::Softplus | Activation::Silu | Activation::Gelu => {
                    some(Some(0.25), 1.0, 1.0, 1.0)
                }
                Activation::HuberizedRelu { h } => some(Some(0.5), 1.0, h / 2.0, 1.0 / (4.0 * h)),
                _ => ClaimedConstants::default(),
            },
            Activation::LeakyTanh { c } | Activation::LeakySigmoid { c } if leaky_c_in_range(*c) => {
                some(Some(0.5), 1.0, 1.0, 1.0)
            }
            _ => ClaimedConstants::default(),
        }
    }

    /// Human-readable notes about parameters outside the range where the
    /// claimed constants apply.
    pub fn warnings(&self) -> Vec<String> {
        match self {
            Activation::Leaky { c, .. }
            | Activation::LeakyTanh { c }
            | Activation::LeakySigmoid { c }
                if !leaky_c_in_range(*c) =>
            {
                vec![format!("{}: c = {c} is outside [0.5, 1); no constants are claimed", self.name())]
            }
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params = self.params();
        if params.is_empty() {
            return write!(f, "{}", self.name());
        }
        let body: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{}({})", self.name(), body.join(", "))
    }
}

fn leaky_c_in_range(c: f64) -> bool {
    (0.5..1.0).contains(&c)
}

/// Builds an activation from its name and scalar parameters.
///
/// Names: `identity`, `softplus`, `sigmoid`, `tanh`, `gelu`, `silu`,
/// `huberized_relu` (needs `h`), `leaky_tanh`, `leaky_sigmoid` and
/// `leaky_<inner>` for any non-leaky inner name (need `c`). Unused
/// parameters are rejected so typos surface early.
pub fn make_activation(name: &str, params: &BTreeMap<String, f64>) -> Result<Activation> {
    let bad = |reason: String| Error::BadActivationParam { name: name.to_string(), reason };
    let mut used: Vec<&str> = Vec::new();
    let mut take = |key: &'static str| -> Result<f64> {
        used.push(key);
        params.get(key).copied().ok_or_else(|| bad(format!("missing parameter `{key}`")))
    };
    let act = match name {
        "identity" | "linear" => Activation::Identity,
        "softplus" => Activation::Softplus,
        "sigmoid" => Activation::Sigmoid,
        "tanh" => Activation::Tanh,
        "gelu" => Activation::Gelu,
        "silu" => Activation::Silu,
        "huberized_relu" => huberized(take("h")?, name)?,
        "leaky_tanh" => Activation::LeakyTanh { c: check_c(take("c")?, name)? },
        "leaky_sigmoid" => Activation::LeakySigmoid { c: check_c(take("c")?, name)? },
        _ => match name.strip_prefix("leaky_") {
            Some(inner_name) => {
                let c = check_c(take("c")?, name)?;
                let inner = match inner_name {
                    "identity" | "linear" => Activation::Identity,
                    "softplus" => Activation::Softplus,
                    "gelu" => Activation::Gelu,
                    "silu" => Activation::Silu,
                    "huberized_relu" => huberized(take("h")?, name)?,
                    _ => return Err(Error::UnknownActivation(name.to_string())),
                };
                Activation::Leaky { inner: Box::new(inner), c }
            }
            None => return Err(Error::UnknownActivation(name.to_string())),
        },
    };
    if let Some(extra) = params.keys().find(|k| !used.contains(&k.as_str())) {
        return Err(bad(format!("unexpected parameter `{extra}`")));
    }
    Ok(act)
}

fn huberized(h: f64, name: &str) -> Result<Activation> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::BadActivationParam {
            name: name.to_string(),
            reason: format!("h must be positive, got {h}"),
        });
    }
    Ok(Activation::HuberizedRelu { h })
}

fn check_c(c: f64, name: &str) -> Result<f64> {
    if !c.is_finite() {
        return Err(Error::BadActivationParam {
            name: name.to_string(),
            reason: format!("c must be finite, got {c}"),
        });
    }
    Ok(c)
}

/// Parses the compact form `name` or `name(k=v, k=v)`.
pub fn parse_activation(spec: &str) -> Result<Activation> {
    let spec = spec.trim();
    let (name, params) = match spec.find('(') {
        None => (spec, BTreeMap::new()),
        Some(open) => {
            let body = spec[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::parse("activation", format!("unbalanced parentheses in `{spec}`")))?;
            (spec[..open].trim(), parse_params(body.split(','))?)
        }
    };
    make_activation(name, &params)
}

/// Parses `k=v` items into a parameter map; blank items are skipped.
pub fn parse_params<'a>(items: impl IntoIterator<Item = &'a str>) -> Result<BTreeMap<String, f64>> {
    let mut params = BTreeMap::new();
    for item in items.into_iter().map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::parse("activation parameter", format!("expected k=v, got `{item}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::parse("activation parameter", format!("`{v}` is not a number")))?;
        params.insert(k.trim().to_string(), v);
    }
    Ok(params)
}

/// Uniform certification grid: `samples` points from `lo` to `hi`, plus
/// z = 0 when it lies strictly inside. Point k is lo + (hi−lo)·(k/(N−1)),
/// so the grid with 2N−1 samples contains the N-sample grid exactly.
fn grid(lo: f64, hi: f64, samples: usize) -> Vec<f64> {
    let den = (samples - 1) as f64;
    let mut zs: Vec<f64> = (0..samples).map(|k| lo + (hi - lo) * (k as f64 / den)).collect();
    if lo < 0.0 && 0.0 < hi {
        let pos = zs.partition_point(|&z| z < 0.0);
        if zs[pos] != 0.0 {
            zs.insert(pos, 0.0);
        }
    }
    zs
}

/// Sweeps φ and φ′ over a uniform grid and reports empirical constants.
pub fn certify(act: &Activation, lo: f64, hi: f64, samples: usize) -> Result<CertifiedConstants> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Invalid(format!("certification range [{lo}, {hi}] is empty")));
    }
    if samples < 1000 {
        return Err(Error::Invalid(format!("certification needs at least 1000 samples, got {samples}")));
    }
    let zs = grid(lo, hi, samples);
    let mut alpha_hat = f64::INFINITY;
    let mut lip_hat: f64 = 0.0;
    let mut kappa_hat = -1.0;
    let mut kappa_argmax = 0.0;
    let mut beta_hat: f64 = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for &z in &zs {
        let (v, d) = (act.value(z), act.derivative(z));
        if !v.is_finite() || !d.is_finite() {
            return Err(Error::NonFinite { z });
        }
        alpha_hat = alpha_hat.min(d.abs());
        lip_hat = lip_hat.max(d.abs());
        let gap = (v - d * z).abs();
        if gap > kappa_hat {
            kappa_hat = gap;
            kappa_argmax = z;
        }
        if let Some((pz, pd)) = prev {
            beta_hat = beta_hat.max((d - pd).abs() / (z - pz));
        }
        prev = Some((z, d));
    }
    Ok(CertifiedConstants { alpha_hat, lip_hat, kappa_hat, kappa_argmax, beta_hat, lo, hi, samples })
}

/// Certification over the default grid [−30, 30] with 10⁶ samples.
pub fn certify_default(act: &Activation) -> Result<CertifiedConstants> {
    certify(act, DEFAULT_CERT_LO, DEFAULT_CERT_HI, DEFAULT_CERT_SAMPLES)
}

impl CertifiedConstants {
    /// Assumption flags derived from the certificate.
    pub fn flags(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.alpha_hat <= ALPHA_FLOOR {
            out.push(format!(
                "alpha = 0 violates derivative lower bound (alpha_hat = {:.3e})",
                self.alpha_hat
            ));
        }
        if self.lip_hat > 1.0 + 1e-12 {
            out.push(format!("derivative exceeds 1 (lip_hat = {:.6}); bounds that assume |phi'| <= 1 do not apply", self.lip_hat));
        }
        out
    }
}

/// Claimed-versus-certified comparison, one line per constant.
pub fn certification_report(act: &Activation, cert: &CertifiedConstants) -> String {
    let claimed = act.claimed();
    let fmt_claim = |c: Option<f64>| c.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
    let mut out = format!(
        "activation {act}\ngrid [{}, {}] with {} samples\n",
        cert.lo, cert.hi, cert.samples
    );
    out += &format!("{:<10} {:>12} {:>12}\n", "constant", "claimed", "certified");
    out += &format!("{:<10} {:>12} {:>12.6}\n", "alpha", fmt_claim(claimed.alpha), cert.alpha_hat);
    out += &format!("{:<10} {:>12} {:>12.6}\n", "lip", fmt_claim(claimed.lip), cert.lip_hat);
    out += &format!("{:<10} {:>12} {:>12.6}\n", "kappa", fmt_claim(claimed.kappa), cert.kappa_hat);
    out += &format!("{:<10} {:>12} {:>12.6}\n", "beta", fmt_claim(claimed.beta_tilde), cert.beta_hat);
    out += &format!("kappa attained at z = {:.6}\n", cert.kappa_argmax);
    if let Some(k) = claimed.kappa {
        if cert.kappa_hat > k * (1.0 + 1e-9) {
            out += &format!(
                "note: certified kappa {:.6} exceeds the claimed {:.6}\n",
                cert.kappa_hat, k
            );
        }
    }
    for w in act.warnings().into_iter().chain(cert.flags()) {
        out += &format!("flag: {w}\n");
    }
    out
}
