//! Two-point dataset from zero initialization with small stepsizes: t·L_t
//! stays bounded below, so the risk decays no faster than 1/t.

use eoslab::prelude::*;

fn main() -> eoslab::Result<()> {
    let gamma = 0.05;
    let data = two_point_lower_bound(gamma)?;
    let act = parse_activation("leaky_softplus(c=0.5)")?;
    let cert = certify_default(&act)?;
    let init = InitSpec { kind: InitKind::Zero, ..InitSpec::default() };
    let checkpoints = [100u64, 1_000, 10_000, 100_000];
    println!("{:>6} {}", "eta", checkpoints.map(|t| format!("{:>14}", format!("t·L at {t}"))).join(""));
    for eta in [0.1, 1.0, 10.0] {
        let net = TwoLayerNet::init(act.clone(), 20, 2, 1.0, &init)?;
        let setup = Setup { n: 2, m: 20, d: 2, b: 1.0, eta, w0_norm: 0.0, gamma: Some(gamma) };
        let c = TheoryConstants::from_certified(&cert, &setup);
        let run = run_gd(net, &data, &GdConfig::new(Stepsize::PerNeuron(eta), 100_000), &c)?;
        let row: String = checkpoints
            .iter()
            .map(|&t| {
                let r = run.records.iter().find(|r| r.step == t).expect("checkpoints fall in the dense range or the final step");
                format!("{:>14.4}", t as f64 * r.loss)
            })
            .collect();
        println!("{eta:>6} {row}");
    }
    Ok(())
}
