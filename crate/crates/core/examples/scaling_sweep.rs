//! Output-scale sweep: mean-field b = 1, NTK-style b = √m and a small
//! b = 1/4, each with the budget-tuned stepsize rescaled for its b.

use eoslab::experiment::{cmd_scaling_sweep, ExperimentConfig};

const CONFIG: &str = r#"
[dataset]
kind = "synthetic"
n = 32
d = 10
gamma = 0.2
seed = 7

[activation]
name = "leaky_softplus"
c = 0.5

[network]
m = 20

[training]
stepsizes = []
steps = 50000
scales = [0.25, 1.0, 4.47213595499958]
"#;

fn main() -> eoslab::Result<()> {
    let out = std::env::temp_dir().join("eoslab_scaling_sweep");
    let summary = cmd_scaling_sweep(&ExperimentConfig::from_toml(CONFIG)?, Some(&out), 3)?;
    println!("stepsize at b = 1: {:.4e} ({})", summary.eta_one, summary.eta_source);
    println!("{:>8} {:>12} {:>14}", "b", "eta_b", "final loss");
    for c in &summary.sweep.cells {
        println!("{:>8.4} {:>12.4e} {:>14.4e}", c.b, c.stepsize, c.final_loss.unwrap_or(f64::NAN));
    }
    Ok(())
}
