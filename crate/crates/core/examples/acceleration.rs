//! Fixed-budget comparison: the budget-tuned stepsize against a decade grid
//! of constant stepsizes, each trained for the same number of steps.

use eoslab::prelude::*;
use eoslab::theory::acceleration_stepsize;

fn final_loss(data: &Dataset, act: &Activation, cert: &CertifiedConstants, eta: f64, steps: u64) -> eoslab::Result<(f64, bool)> {
    let net = TwoLayerNet::init(act.clone(), 20, data.dim(), 1.0, &InitSpec::default())?;
    let setup = Setup { n: data.len(), m: 20, d: data.dim(), b: 1.0, eta, w0_norm: net.weight_norm(), gamma: Some(0.2) };
    let c = TheoryConstants::from_certified(cert, &setup);
    let run = run_gd(net, data, &GdConfig { stepsize: Stepsize::PerNeuron(eta), steps, cadence: Cadence::Every(1) }, &c)?;
    let monotone = run.records.windows(2).all(|w| w[1].loss <= w[0].loss);
    Ok((run.final_record().loss, monotone))
}

fn main() -> eoslab::Result<()> {
    let budget = 50_000u64;
    let data = synthetic_separable(32, 10, 0.2, 7)?;
    let act = parse_activation("leaky_softplus(c=0.5)")?;
    let cert = certify_default(&act)?;
    let w0 = TwoLayerNet::init(act.clone(), 20, data.dim(), 1.0, &InitSpec::default())?.weight_norm();
    let setup = Setup { n: data.len(), m: 20, d: data.dim(), b: 1.0, eta: 0.0, w0_norm: w0, gamma: Some(0.2) };
    let plan = acceleration_stepsize(budget as f64, &TheoryConstants::from_certified(&cert, &setup))?;
    println!(
        "budget-tuned eta {:.4e}; admissible {} (needs T >= {:.3e}); terminal bound {:.3e}",
        plan.eta, plan.admissible, plan.min_budget, plan.terminal_bound
    );
    let (tuned, _) = final_loss(&data, &act, &cert, plan.eta, budget)?;
    println!("{:>10} {:>14} {:>9}", "eta", "final loss", "monotone");
    println!("{:>10.4e} {:>14.4e} {:>9}", plan.eta, tuned, "(tuned)");
    for k in -2..=4 {
        let eta = 10f64.powi(k);
        let (loss, monotone) = final_loss(&data, &act, &cert, eta, budget)?;
        println!("{eta:>10.4e} {loss:>14.4e} {monotone:>9}");
    }
    Ok(())
}
