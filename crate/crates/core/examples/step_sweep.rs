//! Stepsize sweep on XOR through the experiment runner, written to a
//! temporary directory: per-cell trajectories, a comparison table and the
//! final-decade rate fits.

use eoslab::experiment::{cmd_report, cmd_sweep, ExperimentConfig};

const CONFIG: &str = r#"
[dataset]
kind = "xor"

[activation]
name = "leaky_softplus"
c = 0.5

[network]
m = 20

[training]
stepsizes = [0.005, 0.05, 0.5, 5.0]
steps = 100000
"#;

fn main() -> eoslab::Result<()> {
    let out = std::env::temp_dir().join("eoslab_step_sweep");
    let config = ExperimentConfig::from_toml(CONFIG)?;
    let summary = cmd_sweep(&config, Some(&out), 4)?;
    print!("{}", cmd_report(&out)?);
    println!("exit status {:?}; outputs in {}", summary.exit_status(), out.display());
    Ok(())
}
