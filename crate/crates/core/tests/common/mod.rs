#![allow(dead_code)]

use eoslab::prelude::*;

pub fn leaky_softplus() -> Activation {
    parse_activation("leaky_softplus(c=0.5)").unwrap()
}

/// Trains `act` on `data` with per-neuron stepsize `eta`, using constants
/// certified on the default grid.
#[allow(clippy::too_many_arguments)]
pub fn train(act: &Activation, cert: &CertifiedConstants, data: &Dataset, m: usize, init: &InitSpec, eta: f64, steps: u64, cadence: Cadence) -> GdRun {
    let net = TwoLayerNet::init(act.clone(), m, data.dim(), 1.0, init).unwrap();
    let setup = Setup {
        n: data.len(),
        m,
        d: data.dim(),
        b: 1.0,
        eta,
        w0_norm: net.weight_norm(),
        gamma: data.separator().map(|s| s.gamma),
    };
    let c = TheoryConstants::from_certified(cert, &setup);
    run_gd(net, data, &GdConfig { stepsize: Stepsize::PerNeuron(eta), steps, cadence }, &c).unwrap()
}

pub fn xor_config(stepsizes: &[f64], steps: u64) -> String {
    format!(
        "[dataset]\nkind = \"xor\"\n\n[activation]\nname = \"leaky_softplus\"\nc = 0.5\n\n[network]\nm = 20\n\n\
         [training]\nstepsizes = {stepsizes:?}\nsteps = {steps}\ncadence = 1\n"
    )
}
