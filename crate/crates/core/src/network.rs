//! Two-layer network f(W; x) = (b/m) Σ_j a_j φ(x·w_j) with fixed signs.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::activation::{parse_activation, Activation};
use crate::error::{Error, Result};
use crate::numeric::{dot, norm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitKind {
    Zero,
    /// Entries drawn i.i.d. N(0, σ²); `None` means σ = 1/√d.
    Gaussian { sigma: Option<f64> },
    /// Row-major m×d weights.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SignPattern {
    /// a_j = (−1)^j with j counted from 0.
    Alternating,
    /// First half +1, second half −1; needs even m.
    HalfSplit,
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub kind: InitKind,
    pub signs: SignPattern,
    pub seed: u64,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec { kind: InitKind::Gaussian { sigma: None }, signs: SignPattern::Alternating, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerNet {
    m: usize,
    d: usize,
    signs: Vec<f64>,
    /// Row-major, row j is w_j.
    weights: Vec<f64>,
    scale: f64,
    activation: Activation,
}

impl TwoLayerNet {
    pub fn new(activation: Activation, signs: Vec<f64>, weights: Vec<f64>, d: usize, scale: f64) -> Result<Self> {
        let m = signs.len();
        if m == 0 || d == 0 {
            return Err(Error::Invalid("width and input dimension must be positive".into()));
        }
        if let Some(s) = signs.iter().find(|&&s| s != 1.0 && s != -1.0) {
            return Err(Error::Invalid(format!("sign {s} is not ±1")));
        }
        if weights.len() != m * d {
            return Err(Error::Dimension { expected: m * d, got: weights.len() });
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Invalid(format!("scale b must be positive, got {scale}")));
        }
        Ok(TwoLayerNet { m, d, signs, weights, scale, activation })
    }

    pub fn init(activation: Activation, m: usize, d: usize, scale: f64, spec: &InitSpec) -> Result<Self> {
        let signs = match &spec.signs {
            SignPattern::Alternating => (0..m).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect(),
            SignPattern::HalfSplit => {
                if !m.is_multiple_of(2) {
                    return Err(Error::Invalid(format!("half_split needs even width, got {m}")));
                }
                (0..m).map(|j| if j < m / 2 { 1.0 } else { -1.0 }).collect()
            }
            SignPattern::Custom(v) => {
                if v.len() != m {
                    return Err(Error::Dimension { expected: m, got: v.len() });
                }
                v.clone()
            }
        };
        let weights = match &spec.kind {
            InitKind::Zero => vec![0.0; m * d],
            InitKind::Gaussian { sigma } => {
                let sigma = sigma.unwrap_or(1.0 / (d as f64).sqrt());
                let normal = Normal::new(0.0, sigma)
                    .map_err(|_| Error::Invalid(format!("gaussian sigma must be nonnegative, got {sigma}")))?;
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                (0..m * d).map(|_| normal.sample(&mut rng)).collect()
            }
            InitKind::Custom(w) => w.clone(),
        };
        TwoLayerNet::new(activation, signs, weights, d, scale)
    }

    pub fn width(&self) -> usize {
        self.m
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.weights[j * self.d..(j + 1) * self.d]
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn activation(&self) -> &Activation {
        &self.activation
    }

    /// Frobenius norm of W, i.e. ‖w‖ for the flattened parameter vector.
    pub fn weight_norm(&self) -> f64 {
        norm(&self.weights)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::Dimension { expected: self.d, got: x.len() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let s: f64 = (0..self.m)
            .map(|j| self.signs[j] * self.activation.value(dot(x, self.row(j))))
            .sum();
        Ok(self.scale / self.m as f64 * s)
    }

    /// Row-major m×d gradient of f with respect to W.
    pub fn grad_f(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let c = self.scale / self.m as f64;
        let mut g = Vec::with_capacity(self.m * self.d);
        for j in 0..self.m {
            let coef = c * self.signs[j] * self.activation.derivative(dot(x, self.row(j)));
            g.extend(x.iter().map(|xk| coef * xk));
        }
        Ok(g)
    }

    /// f(w;x) − ⟨∇f(w;x), w⟩.
    pub fn homogeneity_gap(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let s: f64 = (0..self.m)
            .map(|j| {
                let z = dot(x, self.row(j));
                let (v, d) = self.activation.value_and_derivative(z);
                self.signs[j] * (v - d * z)
            })
            .sum();
        Ok(self.scale / self.m as f64 * s)
    }

    /// ⟨W, w̄*⟩ where w̄* stacks a_j·w* for every neuron.
    pub fn alignment(&self, w_star: &[f64]) -> Result<f64> {
        self.check_dim(w_star)?;
        Ok((0..self.m).map(|j| self.signs[j] * dot(self.row(j), w_star)).sum())
    }

    /// Text snapshot; every float uses 17 significant digits so
    /// `from_snapshot` restores the exact bits.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::from("# two-layer network snapshot v1\n");
        let _ = writeln!(out, "m {}", self.m);
        let _ = writeln!(out, "d {}", self.d);
        let _ = writeln!(out, "b {:.16e}", self.scale);
        let _ = write!(out, "activation {}", self.activation.name());
        for (k, v) in self.activation.params() {
            let _ = write!(out, " {k}={v:.16e}");
        }
        out.push('\n');
        let signs: Vec<&str> = self.signs.iter().map(|&s| if s > 0.0 { "+1" } else { "-1" }).collect();
        let _ = writeln!(out, "signs {}", signs.join(" "));
        out.push_str("weights\n");
        for j in 0..self.m {
            let row: Vec<String> = self.row(j).iter().map(|w| format!("{w:.16e}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let bad = |reason: &str| Error::parse("network snapshot", reason);
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let mut field = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing `{key}` line")))?;
            let rest = line.strip_prefix(key).ok_or_else(|| bad(&format!("expected `{key}`, got `{line}`")))?;
            Ok(rest.trim().to_string())
        };
        let m: usize = field("m")?.parse().map_err(|_| bad("bad m"))?;
        let d: usize = field("d")?.parse().map_err(|_| bad("bad d"))?;
        let b: f64 = field("b")?.parse().map_err(|_| bad("bad b"))?;
        let act_line = field("activation")?;
        let mut parts = act_line.split_whitespace();
        let name = parts.next().ok_or_else(|| bad("missing activation name"))?;
        let params: Vec<&str> = parts.collect();
        let activation = if params.is_empty() {
            parse_activation(name)?
        } else {
            parse_activation(&format!("{name}({})", params.join(",")))?
        };
        let signs = field("signs")?
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| bad("bad sign")))
            .collect::<Result<Vec<_>>>()?;
        if signs.len() != m {
            return Err(bad("sign count does not match m"));
        }
        field("weights")?;
        let mut weights = Vec::with_capacity(m * d);
        for line in lines {
            for tok in line.split_whitespace() {
                weights.push(tok.parse::<f64>().map_err(|_| bad("bad weight"))?);
            }
        }
        TwoLayerNet::new(activation, signs, weights, d, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::{certify, make_activation};
    use proptest::prelude::*;
    use std::collections::BTreeMap;
    use std::f64::consts::LN_2;

    fn act(name: &str, params: &[(&str, f64)]) -> Activation {
        let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        make_activation(name, &p).unwrap()
    }

    fn gaussian(a: Activation, m: usize, d: usize, seed: u64) -> TwoLayerNet {
        let spec = InitSpec { kind: InitKind::Gaussian { sigma: Some(1.0) }, signs: SignPattern::Alternating, seed };
        TwoLayerNet::init(a, m, d, 1.0, &spec).unwrap()
    }

    #[test]
    fn balanced_zero_net_outputs_zero() {
        let spec = InitSpec { kind: InitKind::Zero, ..InitSpec::default() };
        let net = TwoLayerNet::init(Activation::Softplus, 6, 3, 1.0, &spec).unwrap();
        assert_eq!(net.forward(&[0.3, -0.2, 0.9]).unwrap(), 0.0);
    }

    #[test]
    fn all_positive_zero_net_outputs_log_two() {
        let net = TwoLayerNet::new(Activation::Softplus, vec![1.0; 4], vec![0.0; 8], 2, 1.0).unwrap();
        assert!((net.forward(&[0.5, 0.5]).unwrap() - LN_2).abs() < 1e-15);
    }

    #[test]
    fn single_leaky_tanh_neuron() {
        let net = TwoLayerNet::new(act("leaky_tanh", &[("c", 0.5)]), vec![1.0], vec![2.0], 1, 1.0).unwrap();
        assert!((net.forward(&[1.0]).unwrap() - 1.482014).abs() < 1e-6);
    }

    #[test]
    fn zero_weights_share_one_gradient_row_shape() {
        let a = act("leaky_softplus", &[("c", 0.5)]);
        let p = a.derivative(0.0);
        let net = TwoLayerNet::new(a, vec![1.0, -1.0, 1.0], vec![0.0; 6], 2, 2.0).unwrap();
        let x = [0.6, -0.8];
        let g = net.grad_f(&x).unwrap();
        for j in 0..3 {
            for k in 0..2 {
                let want = 2.0 / 3.0 * net.signs()[j] * p * x[k];
                assert!((g[j * 2 + k] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn linear_activation_has_zero_gap() {
        let net = gaussian(Activation::Identity, 5, 3, 7);
        assert!(net.homogeneity_gap(&[0.1, 0.2, -0.3]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn softplus_gap_at_zero_is_b_log_two() {
        let net = TwoLayerNet::new(Activation::Softplus, vec![1.0], vec![0.0, 0.0], 2, 3.0).unwrap();
        assert!((net.homogeneity_gap(&[0.2, 0.4]).unwrap() - 3.0 * LN_2).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let net = gaussian(Activation::Softplus, 2, 3, 0);
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension { expected: 3, got: 1 })));
        assert!(net.grad_f(&[1.0, 2.0]).is_err());
        assert!(net.homogeneity_gap(&[]).is_err());
    }

    #[test]
    fn constructor_rejects_bad_inputs() {
        assert!(TwoLayerNet::new(Activation::Softplus, vec![1.0, 0.5], vec![0.0; 2], 1, 1.0).is_err());
        assert!(TwoLayerNet::new(Activation::Softplus, vec![1.0], vec![0.0; 2], 1, 1.0).is_err());
        assert!(TwoLayerNet::new(Activation::Softplus, vec![1.0], vec![0.0], 1, 0.0).is_err());
        let odd = InitSpec { signs: SignPattern::HalfSplit, ..InitSpec::default() };
        assert!(TwoLayerNet::init(Activation::Softplus, 3, 2, 1.0, &odd).is_err());
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = gaussian(Activation::Softplus, 8, 4, 11);
        let b = gaussian(Activation::Softplus, 8, 4, 11);
        let c = gaussian(Activation::Softplus, 8, 4, 12);
        assert_eq!(a, b);
        assert_ne!(a.weights(), c.weights());
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let net = gaussian(act("leaky_huberized_relu", &[("c", 0.6), ("h", 0.3)]), 7, 3, 5);
        let back = TwoLayerNet::from_snapshot(&net.to_snapshot()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn grad_matches_finite_differences() {
        let zoo = [
            act("softplus", &[]),
            act("gelu", &[]),
            act("silu", &[]),
            act("tanh", &[]),
            act("leaky_softplus", &[("c", 0.5)]),
            act("leaky_tanh", &[("c", 0.5)]),
        ];
        for (i, a) in zoo.into_iter().enumerate() {
            for seed in 0..20u64 {
                let net = gaussian(a.clone(), 4, 3, seed * 31 + i as u64);
                let x = [0.3, -0.5, 0.7];
                let g = net.grad_f(&x).unwrap();
                let mut fd = vec![0.0; g.len()];
                #[allow(clippy::needless_range_loop)]
                for p in 0..g.len() {
                    let w = net.weights()[p];
                    let h = 1e-6 * (1.0 + w.abs());
                    let mut plus = net.clone();
                    plus.weights_mut()[p] = w + h;
                    let mut minus = net.clone();
                    minus.weights_mut()[p] = w - h;
                    fd[p] = (plus.forward(&x).unwrap() - minus.forward(&x).unwrap()) / (2.0 * h);
                }
                let err: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                assert!(err <= 1e-6 * norm(&g).max(1e-12), "{a}: {err}");
            }
        }
    }

    proptest! {
        #[test]
        fn gradient_norm_bounded_by_lipschitz(seed in 0u64..1000, x0 in -1.0f64..1.0, x1 in -1.0f64..1.0) {
            let a = act("leaky_softplus", &[("c", 0.5)]);
            let lip = certify(&a, -30.0, 30.0, 10_001).unwrap().lip_hat;
            let net = gaussian(a, 10, 2, seed);
            let x = [x0, x1];
            let g = net.grad_f(&x).unwrap();
            prop_assert!(norm(&g) <= lip / (10f64).sqrt() * norm(&x) + 1e-12);
        }

        #[test]
        fn forward_is_lipschitz_in_weights(seed in 0u64..1000, eps in 1e-4f64..1.0) {
            let a = act("leaky_tanh", &[("c", 0.5)]);
            let lip = certify(&a, -30.0, 30.0, 10_001).unwrap().lip_hat;
            let net = gaussian(a, 8, 3, seed);
            let other = gaussian(net.activation().clone(), 8, 3, seed + 1);
            let mut moved = net.clone();
            for (w, o) in moved.weights_mut().iter_mut().zip(other.weights()) {
                *w += eps * o;
            }
            let x = [0.6, 0.0, -0.8];
            let diff: Vec<f64> = net.weights().iter().zip(moved.weights()).map(|(a, b)| a - b).collect();
            let lhs = (net.forward(&x).unwrap() - moved.forward(&x).unwrap()).abs();
            prop_assert!(lhs <= lip / 8f64.sqrt() * norm(&diff) + 1e-9);
        }

        #[test]
        fn softplus_gap_bounded_by_log_two(seed in 0u64..1000, b in 0.1f64..4.0, x0 in -1.0f64..1.0, x1 in -1.0f64..1.0) {
            let spec = InitSpec { kind: InitKind::Gaussian { sigma: Some(3.0) }, signs: SignPattern::Alternating, seed };
            let net = TwoLayerNet::init(Activation::Softplus, 5, 2, b, &spec).unwrap();
            let n = (x0 * x0 + x1 * x1).sqrt().max(1.0);
            let gap = net.homogeneity_gap(&[x0 / n, x1 / n]).unwrap();
            prop_assert!(gap.abs() <= b * LN_2 + 1e-12);
        }
    }
}
