//! Logistic empirical risk and the potentials G, F and v.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::TwoLayerNet;
use crate::numeric::{dot, norm, pairwise_mean, pairwise_sum};
use crate::theory::TheoryConstants;

/// ℓ(q) = log(1 + e^{−q}).
pub fn logistic_loss(q: f64) -> f64 {
    if q >= -30.0 {
        (-q).exp().ln_1p()
    } else {
        -q + q.exp().ln_1p()
    }
}

/// ℓ′(q) = −1/(1 + e^q).
pub fn logistic_deriv(q: f64) -> f64 {
    -gradient_weight(q)
}

/// 1/(1 + e^q), the per-sample term of G.
pub fn gradient_weight(q: f64) -> f64 {
    if q > 0.0 {
        let e = (-q).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + q.exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSampleMargins {
    pub q: Vec<f64>,
    pub q_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSnapshot {
    pub loss: f64,
    pub g: f64,
    pub f: f64,
    /// Row-major m×d, same layout as the weights.
    pub grad: Vec<f64>,
    pub grad_norm: f64,
    /// ⟨∇L, −W⟩
    pub v: f64,
    pub margins: PerSampleMargins,
}

/// Evaluates L, G, F, ∇L and v from one forward pass. Every reduction over
/// samples or neurons is pairwise, so results do not depend on threads.
pub fn risk(net: &TwoLayerNet, data: &Dataset) -> Result<ObjectiveSnapshot> {
    let (n, m, d) = (data.len(), net.width(), net.input_dim());
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if data.dim() != d {
        return Err(Error::Dimension { expected: d, got: data.dim() });
    }
    let act = net.activation();
    let signs = net.signs();
    let c = net.scale() / m as f64;

    // dphi[i*m + j] = φ′(x_i·w_j)
    let mut dphi = vec![0.0; n * m];
    let mut q = vec![0.0; n];
    let mut terms = vec![0.0; m];
    for i in 0..n {
        let x = data.row(i);
        for j in 0..m {
            let (v, dv) = act.value_and_derivative(dot(x, net.row(j)));
            terms[j] = signs[j] * v;
            dphi[i * m + j] = dv;
        }
        q[i] = data.labels()[i] * c * pairwise_sum(&terms);
    }

    let losses: Vec<f64> = q.iter().map(|&qi| logistic_loss(qi)).collect();
    let weights: Vec<f64> = q.iter().map(|&qi| gradient_weight(qi)).collect();
    let exps: Vec<f64> = q.iter().map(|&qi| (-qi).exp()).collect();

    // ∇L row j = (1/n) Σ_i ℓ′(q_i) y_i c a_j φ′(z_ij) x_i
    let mut grad = vec![0.0; m * d];
    let mut col = vec![0.0; n];
    for j in 0..m {
        for k in 0..d {
            for i in 0..n {
                col[i] = -weights[i] * data.labels()[i] * dphi[i * m + j] * data.row(i)[k];
            }
            grad[j * d + k] = c * signs[j] * pairwise_mean(&col);
        }
    }
    let grad_norm = norm(&grad);
    let v = -dot(&grad, net.weights());
    let q_min = q.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ObjectiveSnapshot {
        loss: pairwise_mean(&losses),
        g: pairwise_mean(&weights),
        f: pairwise_mean(&exps),
        grad,
        grad_norm,
        v,
        margins: PerSampleMargins { q, q_min },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    /// b·lip·G − √m‖∇L‖, nonnegative when the upper bound holds.
    pub upper_slack: f64,
    pub upper_ok: bool,
    /// √m‖∇L‖ − b·αγG; only evaluated with a known separator.
    pub lower_slack: Option<f64>,
    pub lower_ok: Option<bool>,
}

/// Checks b·αγ·G ≤ √m‖∇L‖ ≤ b·lip·G, with b·lip = √m·ρ. For b = 1 and
/// lip ≤ 1 the upper side is at least as tight as √m‖∇L‖ ≤ G.
pub fn grad_norm_sandwich_check(snap: &ObjectiveSnapshot, c: &TheoryConstants, separable: bool, rel_tol: f64) -> SandwichReport {
    let sqrt_m = (c.m as f64).sqrt();
    let mid = sqrt_m * snap.grad_norm;
    let upper = sqrt_m * c.rho * snap.g;
    let upper_slack = upper - mid;
    let upper_ok = mid <= upper * (1.0 + rel_tol) + f64::MIN_POSITIVE;
    let (lower_slack, lower_ok) = match (separable, c.gamma) {
        (true, Some(gamma)) => {
            let lower = c.b * c.alpha * gamma * snap.g;
            (Some(mid - lower), Some(lower <= mid * (1.0 + rel_tol) + f64::MIN_POSITIVE))
        }
        _ => (None, None),
    };
    SandwichReport { upper_slack, upper_ok, lower_slack, lower_ok }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::{make_activation, Activation};
    use crate::data::{synthetic_separable, xor_dataset};
    use crate::network::{InitKind, InitSpec, SignPattern};
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    #[test]
    fn logistic_values() {
        assert!((logistic_loss(0.0) - LN_2).abs() < 1e-15);
        let big = logistic_loss(800.0);
        assert!(big.is_finite() && (0.0..1e-300).contains(&big));
        assert!((logistic_loss(-800.0) - 800.0).abs() <= 1e-12 * 800.0);
        assert_eq!(logistic_deriv(0.0), -0.5);
        assert!(logistic_deriv(-800.0) == -1.0 && logistic_deriv(800.0) > -1e-300);
    }

    #[test]
    fn zero_margins_give_textbook_potentials() {
        let net = TwoLayerNet::new(Activation::Identity, vec![1.0, -1.0], vec![0.0; 4], 2, 1.0).unwrap();
        let s = risk(&net, &xor_dataset(true)).unwrap();
        assert!((s.loss - LN_2).abs() < 1e-15);
        assert_eq!(s.g, 0.5);
        assert_eq!(s.f, 1.0);
        assert_eq!(s.v, 0.0);
        assert!(s.g <= s.loss && s.loss <= s.f);
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        let net = TwoLayerNet::new(Activation::Identity, vec![1.0], vec![0.0; 3], 3, 1.0).unwrap();
        assert!(matches!(risk(&net, &xor_dataset(true)), Err(Error::Dimension { .. })));
    }

    #[test]
    fn saturated_single_sample_sandwich_is_tight() {
        let data = Dataset::new(vec![1.0], vec![1.0], 1, None).unwrap();
        let net = TwoLayerNet::new(Activation::Identity, vec![1.0], vec![0.0], 1, 1.0).unwrap();
        let s = risk(&net, &data).unwrap();
        assert_eq!(s.grad_norm, 0.5);
        assert_eq!(s.g, 0.5);
        let c = TheoryConstants { rho: 1.0, m: 1, n: 1, ..TheoryConstants::default() };
        let r = grad_norm_sandwich_check(&s, &c, false, 1e-12);
        assert!(r.upper_ok && r.upper_slack == 0.0 && r.lower_ok.is_none());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = synthetic_separable(12, 3, 0.1, 4).unwrap();
        for name in ["softplus", "gelu", "silu", "leaky_softplus"] {
            let params = if name.starts_with("leaky") { [("c".to_string(), 0.5)].into() } else { Default::default() };
            let act = make_activation(name, &params).unwrap();
            for seed in 0..5 {
                let spec = InitSpec { kind: InitKind::Gaussian { sigma: Some(1.0) }, signs: SignPattern::Alternating, seed };
                let net = TwoLayerNet::init(act.clone(), 6, 3, 1.0, &spec).unwrap();
                let s = risk(&net, &data).unwrap();
                let mut err = 0.0;
                for p in 0..s.grad.len() {
                    let w = net.weights()[p];
                    let h = 1e-6 * (1.0 + w.abs());
                    let mut plus = net.clone();
                    plus.weights_mut()[p] = w + h;
                    let mut minus = net.clone();
                    minus.weights_mut()[p] = w - h;
                    let fd = (risk(&plus, &data).unwrap().loss - risk(&minus, &data).unwrap().loss) / (2.0 * h);
                    err += (fd - s.grad[p]).powi(2);
                }
                assert!(err.sqrt() <= 1e-6 * s.grad_norm, "{name}/{seed}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn derivative_bounded_by_loss(q in -700.0f64..700.0) {
            prop_assert!(logistic_deriv(q).abs() <= logistic_loss(q) * (1.0 + 1e-15));
        }

        #[test]
        fn loss_monotone_and_positive(a in -700.0f64..700.0, b in -700.0f64..700.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(logistic_loss(lo) >= logistic_loss(hi));
            prop_assert!(logistic_loss(hi) >= 0.0);
        }

        #[test]
        fn potentials_are_sandwiched(seed in 0u64..500, sigma in 0.1f64..20.0) {
            let data = synthetic_separable(10, 3, 0.05, seed).unwrap();
            let act = make_activation("leaky_softplus", &[("c".to_string(), 0.5)].into()).unwrap();
            let spec = InitSpec { kind: InitKind::Gaussian { sigma: Some(sigma) }, signs: SignPattern::Alternating, seed };
            let net = TwoLayerNet::init(act, 8, 3, 1.0, &spec).unwrap();
            let s = risk(&net, &data).unwrap();
            prop_assert!(s.g <= s.loss && s.loss <= s.f);
            if s.g <= 1.0 / 20.0 {
                prop_assert!(s.f <= 2.0 * s.g);
            }
            // ‖∇L‖ ≤ ρL with ρ = lip/√m and lip ≤ 0.625 for this activation
            prop_assert!(s.grad_norm <= 0.625 / 8f64.sqrt() * s.loss * (1.0 + 1e-12));
        }
    }
}
