//! Certifies α, lip, κ and β̃ for every built-in activation on the default
//! grid and prints each report next to the claimed constants.

use eoslab::activation::{certification_report, certify_default, parse_activation};

fn main() -> eoslab::Result<()> {
    let specs = [
        "identity",
        "softplus",
        "gelu",
        "silu",
        "sigmoid",
        "tanh",
        "huberized_relu(h=0.5)",
        "leaky_softplus(c=0.5)",
        "leaky_gelu(c=0.5)",
        "leaky_tanh(c=0.5)",
        "leaky_sigmoid(c=0.5)",
    ];
    for spec in specs {
        let act = parse_activation(spec)?;
        let cert = certify_default(&act)?;
        println!("{}", certification_report(&act, &cert));
    }
    Ok(())
}
