//! The four margins along a short large-stepsize run, then a snapshot
//! round trip of the trained network.

use eoslab::prelude::*;

fn main() -> eoslab::Result<()> {
    let data = synthetic_separable(16, 4, 0.1, 3)?;
    let act = parse_activation("leaky_tanh(c=0.5)")?;
    let cert = certify_default(&act)?;
    let net = TwoLayerNet::init(act, 8, data.dim(), 1.0, &InitSpec { seed: 11, ..InitSpec::default() })?;
    let eta = 20.0;
    let setup = Setup { n: data.len(), m: 8, d: data.dim(), b: 1.0, eta, w0_norm: net.weight_norm(), gamma: Some(0.1) };
    let c = TheoryConstants::from_certified(&cert, &setup);
    let run = run_gd(net, &data, &GdConfig { stepsize: Stepsize::PerNeuron(eta), steps: 20_000, cadence: Cadence::Every(2_000) }, &c)?;

    let show = |g: Option<f64>| g.map_or("undefined".to_string(), |v| format!("{v:.3e}"));
    println!("{:>6} {:>11} {:>10} {:>10} {:>10} {:>10}", "step", "loss", "bar", "a", "b", "c");
    for r in &run.records {
        let g = r.margins;
        println!(
            "{:>6} {:>11.4e} {:>10} {:>10} {:>10} {:>10}",
            r.step,
            r.loss,
            show(g.gamma_bar),
            show(g.gamma_a),
            show(g.gamma_b),
            show(g.gamma_c)
        );
    }

    let text = run.net.to_snapshot();
    let back = TwoLayerNet::from_snapshot(&text)?;
    assert_eq!(back.weights(), run.net.weights());
    println!("snapshot round trip exact ({} bytes)", text.len());
    Ok(())
}
