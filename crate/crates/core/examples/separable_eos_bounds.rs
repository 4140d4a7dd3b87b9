//! Synthetic separable data: holds the running-average risk, weight norm
//! and gradient potential against their early-phase bounds, and compares
//! the detected phase transition with the closed-form τ.

use eoslab::prelude::*;
use eoslab::theory::{tau_phase_transition, verify_eos_bounds, TauForm};

fn main() -> eoslab::Result<()> {
    let data = synthetic_separable(32, 10, 0.2, 7)?;
    let act = parse_activation("leaky_softplus(c=0.5)")?;
    let cert = certify_default(&act)?;
    let (m, steps) = (20, 100_000);

    for eta in [1.0, 10.0, 100.0] {
        let net = TwoLayerNet::init(act.clone(), m, data.dim(), 1.0, &InitSpec::default())?;
        let setup = Setup { n: data.len(), m, d: data.dim(), b: 1.0, eta, w0_norm: net.weight_norm(), gamma: Some(0.2) };
        let c = TheoryConstants::from_certified(&cert, &setup);
        let run = run_gd(net, &data, &GdConfig::new(Stepsize::PerNeuron(eta), steps), &c)?;
        let phases = detect_phases(&run.records, &run.constants)?;
        let tau = tau_phase_transition(&run.constants, TauForm::MarginScaled)?;
        println!("eta {eta}: s_threshold2 = {:?}, tau = {tau:.3e}", phases.s_threshold2);
        for report in verify_eos_bounds(&run.records, &data, &run.constants)? {
            println!(
                "  {:<20} {:>6} points, {} violations, max relative slack {:+.3e}",
                report.name,
                report.points.len(),
                report.violations.len(),
                report.max_rel_slack
            );
        }
    }
    Ok(())
}
