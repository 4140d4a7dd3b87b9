//! Normalized, smoothed, auxiliary and modified margins, and the helper
//! maps ψ, ι, Φ behind them. Margins return `None` outside their domain.

use serde::{Deserialize, Serialize};

use crate::objective::logistic_loss;
use crate::theory::TheoryConstants;

/// Below this value of e^{−x}, ι uses its series branch.
const IOTA_SERIES_CUTOFF: f64 = 1e-8;

/// ψ(x) = −log ℓ(x).
pub fn psi(x: f64) -> f64 {
    if x > 0.0 {
        // ℓ(x) = u·(log1p(u)/u) with u = e^{−x}
        let u = (-x).exp();
        let ratio = if u == 0.0 { 1.0 } else { u.ln_1p() / u };
        x - ratio.ln()
    } else {
        -logistic_loss(x).ln()
    }
}

/// ψ′(x) = (1/(1+e^x))/ℓ(x).
pub fn psi_prime(x: f64) -> f64 {
    if x >= 0.0 {
        let u = (-x).exp();
        if u == 0.0 {
            1.0
        } else {
            (u / (1.0 + u)) / u.ln_1p()
        }
    } else {
        1.0 / ((1.0 + x.exp()) * logistic_loss(x))
    }
}

/// ι = ψ⁻¹, ι(x) = −log(e^{e^{−x}} − 1).
pub fn iota(x: f64) -> f64 {
    let u = (-x).exp();
    if u < IOTA_SERIES_CUTOFF {
        // expm1(u)/u = 1 + u/2 + O(u²)
        x - (0.5 * u).ln_1p()
    } else if u <= 1.0 {
        x - (u.exp_m1() / u).ln()
    } else {
        // −log(e^u − 1) = −u − log1p(−e^{−u})
        -u - (-(-u).exp()).ln_1p()
    }
}

/// ι′(x) = e^{e^{−x}}e^{−x}/(e^{e^{−x}} − 1) = u/(1 − e^{−u}).
pub fn iota_prime(x: f64) -> f64 {
    let u = (-x).exp();
    if u < IOTA_SERIES_CUTOFF {
        1.0 + 0.5 * u
    } else {
        u / -(-u).exp_m1()
    }
}

/// q_min/‖w‖.
pub fn normalized_margin(q_min: f64, weight_norm: f64) -> Option<f64> {
    (weight_norm > 0.0).then(|| q_min / weight_norm)
}

/// −log L/‖w‖.
pub fn smoothed_margin(loss: f64, weight_norm: f64) -> Option<f64> {
    (loss > 0.0 && weight_norm > 0.0).then(|| -loss.ln() / weight_norm)
}

/// −log(2n·e^κ·L)/‖w‖ for 0 < L < 1/(2n·e^κ).
pub fn auxiliary_margin(loss: f64, weight_norm: f64, n: usize, kappa: f64) -> Option<f64> {
    let lg = (2.0 * n as f64).ln() + kappa + loss.ln();
    (loss > 0.0 && lg < 0.0 && weight_norm > 0.0).then(|| -lg / weight_norm)
}

/// 1 + (4ρ² + 2β)η̃, the coefficient in Φ.
pub fn phi_coefficient(c: &TheoryConstants) -> f64 {
    1.0 + (4.0 * c.rho * c.rho + 2.0 * c.beta) * c.eta_tilde
}

/// Φ(x) = log(−log(2ne^κx)) + (1 + (4ρ²+2β)η̃)/log(2ne^κx).
pub fn phi_map(x: f64, c: &TheoryConstants) -> Option<f64> {
    let lg = c.log_2n_e_kappa() + x.ln();
    (x > 0.0 && lg < 0.0).then(|| (-lg).ln() + phi_coefficient(c) / lg)
}

/// e^{Φ(L)}/‖w‖.
pub fn modified_margin(loss: f64, weight_norm: f64, c: &TheoryConstants) -> Option<f64> {
    if !(weight_norm > 0.0) {
        return None;
    }
    phi_map(loss, c).map(|p| p.exp() / weight_norm)
}

/// c = (c₂ + e^{c₁}c₁ + c₂c₁e^{c₁})(c₂ + 1) with c₁ = 1 + (4ρ²+2β)η̃ and
/// c₂ = log(2ne^κ): γ̄ ≤ (1 + c/log(1/L))·γ^c once L ≤ 1/(2ne^{κ+2}).
pub fn sandwich_constant(c: &TheoryConstants) -> f64 {
    let c1 = phi_coefficient(c);
    let c2 = c.log_2n_e_kappa();
    let e1 = c1.exp();
    (c2 + e1 * c1 + c2 * c1 * e1) * (c2 + 1.0)
}

/// log c for the sandwich constant, finite even when e^{c₁} overflows.
pub fn ln_sandwich_constant(c: &TheoryConstants) -> f64 {
    let c1 = phi_coefficient(c);
    let c2 = c.log_2n_e_kappa();
    (c2 + 1.0).ln() + c1 + (c1 * (1.0 + c2) + c2 * (-c1).exp()).ln()
}

/// Upper end of γ̄ ≤ (1 + c/log(1/L))·γ^c, evaluated as
/// exp(Φ(L) + log(1 + c/log(1/L)))/‖w‖ so that neither e^{c₁} overflowing
/// nor γ^c underflowing turns it into ∞·0.
pub fn sandwich_upper(loss: f64, weight_norm: f64, c: &TheoryConstants) -> Option<f64> {
    let phi = phi_map(loss, c)?;
    if !(weight_norm > 0.0) {
        return None;
    }
    let r = ln_sandwich_constant(c) - (-loss.ln()).ln();
    // log(1 + e^r) without overflow
    let ln_factor = if r > 0.0 { r + (-r).exp().ln_1p() } else { r.exp().ln_1p() };
    Some((phi + ln_factor - weight_norm.ln()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MarginSet {
    pub gamma_bar: Option<f64>,
    pub gamma_a: Option<f64>,
    pub gamma_b: Option<f64>,
    pub gamma_c: Option<f64>,
}

impl MarginSet {
    pub fn compute(loss: f64, q_min: f64, weight_norm: f64, c: &TheoryConstants) -> Self {
        MarginSet {
            gamma_bar: normalized_margin(q_min, weight_norm),
            gamma_a: smoothed_margin(loss, weight_norm),
            gamma_b: auxiliary_margin(loss, weight_norm, c.n, c.kappa),
            gamma_c: modified_margin(loss, weight_norm, c),
        }
    }

    /// Bit 0: γ̄, bit 1: γ^a, bit 2: γ^b, bit 3: γ^c.
    pub fn defined_mask(&self) -> u8 {
        [self.gamma_bar, self.gamma_a, self.gamma_b, self.gamma_c]
            .iter()
            .enumerate()
            .map(|(k, g)| u8::from(g.is_some()) << k)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> TheoryConstants {
        TheoryConstants { n: 1, kappa: 0.0, rho: 1.0, beta: 0.0, eta_tilde: 1.0, ..Default::default() }
    }

    #[test]
    fn psi_at_zero() {
        assert!((psi(0.0) - 0.366513).abs() < 1e-6);
        assert!((iota(psi(5.0)) - 5.0).abs() < 1e-10);
    }

    #[test]
    fn iota_branches_meet() {
        for x in [-(1e-8f64.ln()) - 1e-9, -(1e-8f64.ln()) + 1e-9, -1e-12, 1e-12] {
            let (a, b) = (iota(x - 1e-7), iota(x + 1e-7));
            assert!((b - a - 2e-7 * iota_prime(x)).abs() < 1e-12, "{x}");
        }
        assert_eq!(iota(800.0), 800.0);
        assert_eq!(iota(-800.0), f64::NEG_INFINITY);
    }

    #[test]
    fn margin_examples() {
        assert_eq!(normalized_margin(2.0, 4.0), Some(0.5));
        assert_eq!(normalized_margin(0.0, 3.0), Some(0.0));
        assert_eq!(normalized_margin(1.0, 0.0), None);
        assert!((smoothed_margin((-1.0f64).exp(), 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((smoothed_margin((-10.0f64).exp(), 5.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(smoothed_margin(0.0, 1.0), None);
        let l = (-10.0f64).exp() / 2.0;
        assert!((auxiliary_margin(l, 1.0, 1, 0.0).unwrap() - 10.0).abs() < 1e-12);
        assert!((auxiliary_margin(1.0 / (2.0 * 1f64.exp()), 1.0, 1, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(auxiliary_margin(0.5, 1.0, 1, 0.0), None);
    }

    #[test]
    fn phi_example() {
        let c = unit();
        let x = (-10.0f64).exp() / 2.0;
        assert!((phi_map(x, &c).unwrap() - 1.802585).abs() < 1e-6);
        let gc = modified_margin(x, 1.0, &c).unwrap();
        assert!((gc - 6.0653).abs() < 1e-4);
        assert!(gc <= auxiliary_margin(x, 1.0, 1, 0.0).unwrap());
        assert_eq!(phi_map(0.6, &c), None);
    }

    #[test]
    fn phi_correction_factor_limit() {
        // e^Φ/(−log(2ne^κx)) = exp(c₁/log(2ne^κx)) exactly; it tends to 1 but
        // only like c₁/|log x|, so at x = 1e−300 the gap is c₁/690 ≈ 7.2e−3.
        let c = unit();
        let mut prev = 0.0;
        let mut x: f64 = 1e-5;
        while x > 1e-300 {
            let lg = c.log_2n_e_kappa() + x.ln();
            let ratio = phi_map(x, &c).unwrap().exp() / -lg;
            assert!((ratio - (5.0 / lg).exp()).abs() < 1e-12);
            assert!(ratio > prev);
            prev = ratio;
            x *= 1e-5;
        }
        let lg = 2f64.ln() + 1e-300f64.ln();
        let at_tiny = phi_map(1e-300, &c).unwrap().exp() / -lg;
        assert!((1.0 - at_tiny - (1.0 - (5.0 / lg).exp())).abs() < 1e-12);
        assert!(1.0 - at_tiny < 7.3e-3);
    }

    #[test]
    fn sandwich_upper_matches_direct_form_and_survives_overflow() {
        let c = TheoryConstants { n: 4, kappa: 0.1, rho: 0.14, beta: 0.0016, eta_tilde: 20.0, ..Default::default() };
        let (l, w) = (1e-6_f64, 30.0);
        let direct = (1.0 + sandwich_constant(&c) / -l.ln()) * modified_margin(l, w, &c).unwrap();
        assert!((sandwich_upper(l, w, &c).unwrap() - direct).abs() <= 1e-12 * direct);
        assert!((ln_sandwich_constant(&c) - sandwich_constant(&c).ln()).abs() < 1e-12);

        let big = TheoryConstants { eta_tilde: 6e4, ..c };
        assert!(sandwich_constant(&big).is_infinite());
        assert_eq!(modified_margin(2e-4, 1e4, &big), Some(0.0));
        assert!(sandwich_upper(2e-4, 1e4, &big).unwrap() >= 0.0);
    }

    #[test]
    fn mask_bits() {
        let c = unit();
        let m = MarginSet::compute(0.9, 0.1, 1.0, &c);
        assert_eq!(m.defined_mask(), 0b0011);
        let m = MarginSet::compute(1e-6, 10.0, 2.0, &c);
        assert_eq!(m.defined_mask(), 0b1111);
        assert_eq!(MarginSet::compute(1e-6, 1.0, 0.0, &c).defined_mask(), 0);
    }
}
