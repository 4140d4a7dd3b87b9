//! Cross-module invariants on random networks, datasets and trajectories.

mod common;

use std::sync::OnceLock;

use eoslab::margins::{modified_margin, sandwich_upper, MarginSet};
use eoslab::objective::{grad_norm_sandwich_check, gradient_weight, logistic_loss};
use eoslab::prelude::*;
use eoslab::trainer::{phases_from_losses, verify_decrease_lemma};
use eoslab::trajectory::{parse_trajectory, trajectory_csv, aux_csv};
use proptest::prelude::*;

const ACTIVATIONS: [&str; 4] = ["leaky_softplus(c=0.5)", "leaky_tanh(c=0.5)", "leaky_sigmoid(c=0.25)", "leaky_huberized_relu(c=0.3, h=0.5)"];

fn certified() -> &'static [(Activation, CertifiedConstants)] {
    static CERTS: OnceLock<Vec<(Activation, CertifiedConstants)>> = OnceLock::new();
    CERTS.get_or_init(|| {
        ACTIVATIONS
            .iter()
            .map(|s| {
                let act = parse_activation(s).unwrap();
                let cert = certify(&act, -30.0, 30.0, 200_001).unwrap();
                (act, cert)
            })
            .collect()
    })
}

fn setup_for(data: &Dataset, net: &TwoLayerNet, b: f64, eta: f64) -> Setup {
    Setup {
        n: data.len(),
        m: net.width(),
        d: data.dim(),
        b,
        eta,
        w0_norm: net.weight_norm(),
        gamma: data.separator().map(|s| s.gamma),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potentials_are_ordered(which in 0usize..4, seed in 0u64..1000, n in 2usize..12, d in 2usize..5, m in 2usize..16, sigma in 0.1f64..5.0) {
        let (act, _) = &certified()[which];
        let data = synthetic_separable(n, d, 0.1, seed).unwrap();
        let init = InitSpec { kind: InitKind::Gaussian { sigma: Some(sigma) }, seed, ..InitSpec::default() };
        let net = TwoLayerNet::init(act.clone(), m, d, 1.0, &init).unwrap();
        let s = risk(&net, &data).unwrap();
        let tol = 1e-12 * s.f.max(1e-300);
        prop_assert!(s.g <= s.loss + tol, "G {} > L {}", s.g, s.loss);
        prop_assert!(s.loss <= s.f + tol, "L {} > F {}", s.loss, s.f);
        if s.g <= 1.0 / (2.0 * n as f64) {
            prop_assert!(s.f <= 2.0 * s.g * (1.0 + 1e-12));
        }
    }

    #[test]
    fn homogeneity_gap_is_bounded_by_certified_kappa(which in 0usize..4, seed in 0u64..1000, m in 2usize..16, sigma in 0.1f64..8.0, b in 0.25f64..4.0) {
        let (act, cert) = &certified()[which];
        let data = synthetic_separable(8, 3, 0.1, seed).unwrap();
        let init = InitSpec { kind: InitKind::Gaussian { sigma: Some(sigma) }, seed, ..InitSpec::default() };
        let net = TwoLayerNet::init(act.clone(), m, 3, b, &init).unwrap();
        for i in 0..data.len() {
            let gap = net.homogeneity_gap(data.row(i)).unwrap();
            prop_assert!(gap.abs() <= b * cert.kappa_hat * (1.0 + 1e-9), "gap {gap} vs {}", b * cert.kappa_hat);
        }
    }

    #[test]
    fn gradient_norm_sits_between_margin_and_lipschitz_multiples_of_g(which in 0usize..4, seed in 0u64..1000, m in 2usize..16, sigma in 0.1f64..3.0, b in 0.25f64..4.0) {
        let (act, cert) = &certified()[which];
        let data = synthetic_separable(10, 3, 0.2, seed).unwrap();
        let init = InitSpec { kind: InitKind::Gaussian { sigma: Some(sigma) }, seed, ..InitSpec::default() };
        let net = TwoLayerNet::init(act.clone(), m, 3, b, &init).unwrap();
        let c = TheoryConstants::from_certified(cert, &setup_for(&data, &net, b, 1.0));
        let s = risk(&net, &data).unwrap();
        let rep = grad_norm_sandwich_check(&s, &c, true, 1e-9);
        prop_assert!(rep.upper_ok, "upper slack {}", rep.upper_slack);
        prop_assert_eq!(rep.lower_ok, Some(true));
    }

    #[test]
    fn logistic_weight_and_loss_are_within_a_factor_two_for_nonnegative_margins(q in 0.0f64..700.0) {
        let (l, g) = (logistic_loss(q), gradient_weight(q));
        prop_assert!(g <= l * (1.0 + 1e-15));
        prop_assert!(l <= 2.0 * g * (1.0 + 1e-15));
    }

    #[test]
    fn decrease_lemma_holds_on_short_runs(which in 0usize..4, seed in 0u64..200, eta in 0.05f64..5.0) {
        let (act, cert) = &certified()[which];
        let data = synthetic_separable(6, 3, 0.2, seed).unwrap();
        let init = InitSpec { seed, ..InitSpec::default() };
        let run = common::train(act, cert, &data, 8, &init, eta, 60, Cadence::Every(1));
        let rep = verify_decrease_lemma(&run.records, &run.constants);
        prop_assert!(rep.passed(), "{:?}", rep.violations.first());
    }

    #[test]
    fn modified_margin_stays_below_the_sandwich_top(loss_exp in -300.0f64..-3.0, w in 1e-3f64..1e6, eta_tilde in 0.0f64..1e5) {
        let c = TheoryConstants { n: 4, m: 20, kappa: 0.0866, rho: 0.625 / 20f64.sqrt(), beta: 0.03125 / 20.0, eta_tilde, ..Default::default() };
        let loss = 10f64.powf(loss_exp);
        if let (Some(gc), Some(top)) = (modified_margin(loss, w, &c), sandwich_upper(loss, w, &c)) {
            prop_assert!(gc <= top * (1.0 + 1e-12), "{gc} > {top}");
        }
    }

    #[test]
    fn margin_set_nests_wherever_defined(loss_exp in -200.0f64..0.0, q_shift in 0.0f64..5.0, w in 1e-2f64..1e4) {
        let c = TheoryConstants { n: 4, m: 20, kappa: 0.0866, rho: 0.14, beta: 0.0016, eta_tilde: 10.0, ..Default::default() };
        let loss = 10f64.powf(loss_exp);
        // L ≤ ℓ(q_min) caps q_min at log(1/(e^{nL}−1)); shift below it.
        let q_cap = -(4.0 * loss).exp_m1().ln();
        let m = MarginSet::compute(loss, q_cap - q_shift, w, &c);
        if let (Some(gb), Some(ga)) = (m.gamma_b, m.gamma_a) {
            prop_assert!(gb <= ga);
        }
        if let (Some(gc), Some(gb)) = (m.gamma_c, m.gamma_b) {
            prop_assert!(gc <= gb * (1.0 + 1e-12));
        }
    }

    #[test]
    fn phase_thresholds_are_met_in_order(losses in proptest::collection::vec(1e-6f64..1.0, 2..200), t2 in 1e-6f64..0.5, gap in 1.0f64..4.0) {
        let t1 = t2 * gap;
        let p = phases_from_losses(losses.iter().enumerate().map(|(k, &l)| (k as u64, l)), t1, t2);
        if let Some(s2) = p.s_threshold2 {
            prop_assert!(p.s_threshold1.is_some_and(|s1| s1 <= s2));
        }
        prop_assert!(p.s_empirical as usize <= losses.len());
    }
}

#[test]
fn recorded_trajectories_round_trip_through_csv() {
    let (act, cert) = &certified()[0];
    let data = synthetic_separable(8, 3, 0.2, 7).unwrap();
    let run = common::train(act, cert, &data, 10, &InitSpec::default(), 2.0, 500, Cadence::auto(500));
    let back = parse_trajectory(&trajectory_csv(&run.records), Some(&aux_csv(&run.records))).unwrap();
    assert_eq!(back, run.records);
}
