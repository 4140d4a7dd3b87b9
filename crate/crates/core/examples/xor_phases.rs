//! XOR with a leaky softplus network at three stepsizes: detects both
//! stable-phase thresholds and checks every stable-phase claim on the
//! recorded trajectory.
//!
//! `cargo run --release --example xor_phases [steps]`

use eoslab::prelude::*;
use eoslab::trainer::{final_decade_slope, verify_decrease_lemma};

fn main() -> eoslab::Result<()> {
    let steps: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200_000);
    let act = parse_activation("leaky_softplus(c=0.5)")?;
    let cert = certify_default(&act)?;
    let data = xor_dataset(true);
    let m = 20;

    println!("{:>6} {:>10} {:>10} {:>8} {:>8} {:>12} {:>10} {:>6}", "eta", "thresh1", "thresh2", "s_thr1", "s_thr2", "final loss", "slope", "viol");
    for eta in [0.5, 5.0, 50.0] {
        let net = TwoLayerNet::init(act.clone(), m, data.dim(), 1.0, &InitSpec::default())?;
        let setup = Setup { n: data.len(), m, d: data.dim(), b: 1.0, eta, w0_norm: net.weight_norm(), gamma: None };
        let c = TheoryConstants::from_certified(&cert, &setup);
        let cfg = GdConfig { stepsize: Stepsize::PerNeuron(eta), steps, cadence: Cadence::Every(1) };
        let run = run_gd(net, &data, &cfg, &c)?;
        let phases = detect_phases(&run.records, &run.constants)?;
        let stable = verify_stable_phase(&run.records, &phases, &run.constants);
        let decrease = verify_decrease_lemma(&run.records, &run.constants);
        let show = |s: Option<u64>| s.map_or("-".to_string(), |v| v.to_string());
        println!(
            "{:>6} {:>10.3e} {:>10.3e} {:>8} {:>8} {:>12.4e} {:>10.4} {:>6}",
            eta,
            phases.thresh1,
            phases.thresh2,
            show(phases.s_threshold1),
            show(phases.s_threshold2),
            run.final_record().loss,
            final_decade_slope(&run.records).unwrap_or(f64::NAN),
            stable.violations.len() + decrease.violations.len(),
        );
        let last = run.final_record().margins;
        println!(
            "       margins at T: bar {:.5} a {:.5} b {:.5} c {:.5}",
            last.gamma_bar.unwrap_or(f64::NAN),
            last.gamma_a.unwrap_or(f64::NAN),
            last.gamma_b.unwrap_or(f64::NAN),
            last.gamma_c.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
