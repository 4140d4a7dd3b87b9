use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eoslab::activation::parse_activation;
use eoslab::experiment::{
    cmd_certify, cmd_report, cmd_run, cmd_scaling_sweep, cmd_sweep, cmd_verify, CertifySpec, ExitStatus, ExperimentConfig,
};
use eoslab::Error;

const CONFIG_HELP: &str = "\
Config files are TOML:

  [dataset]     kind = \"xor\" | \"two_point\" | \"synthetic\" | \"csv\"
                xor: scaled (bool, default true)
                two_point: gamma
                synthetic: n, d, gamma, seed
                csv: path, label_column (default -1)
  [activation]  name = \"leaky_softplus\"; every other key is a parameter (c, h)
  [network]     m; b (default 1); init = \"gaussian\" | \"zero\"; sigma;
                signs = \"alternating\" | \"half_split\"; seed
  [training]    stepsizes = [..]; stepsize_kind = \"per_neuron\" | \"eta_tilde\";
                steps; cadence = k | \"auto\"; scales = [..] (scaling-sweep)
  [certify]     lo, hi, samples
  [output]      dir

Environment variables are not consulted.

Exit codes: 0 success, 1 verification violations, 2 config or I/O error,
3 divergence.";

#[derive(Parser)]
#[command(name = "eoslab", version, about = "Large-stepsize GD on two-layer networks", after_long_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides [output] dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Initialization seed; overrides [network] seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train once with the single configured stepsize.
    Run {
        /// Stepsize override, in the configured stepsize kind.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Train once per configured stepsize and tabulate the results.
    Sweep {
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Train once per output scale b with a budget-tuned stepsize.
    ScalingSweep {
        #[arg(long)]
        steps: Option<u64>,
        /// Comma-separated b values; overrides training.scales.
        #[arg(long, value_delimiter = ',')]
        scales: Option<Vec<f64>>,
    },
    /// Certify an activation's constants on a grid.
    Certify {
        /// Activation such as `leaky_softplus(c=0.5)`; defaults to the config's.
        #[arg(long)]
        activation: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Re-check a recorded run against every applicable bound.
    Verify {
        /// Directory holding trajectory.csv.
        run_dir: PathBuf,
        /// Constants JSON; defaults to RUN_DIR/constants.json.
        #[arg(long)]
        constants: Option<PathBuf>,
    },
    /// Summarize a run or sweep directory.
    Report {
        dir: PathBuf,
    },
}

fn load(common: &Common) -> eoslab::Result<ExperimentConfig> {
    let path = common.config.as_deref().ok_or_else(|| Error::Invalid("--config is required".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        config.network.seed = seed;
    }
    Ok(config)
}

fn jobs(common: &Common) -> usize {
    common.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn dispatch(cli: &Cli) -> eoslab::Result<ExitStatus> {
    let common = &cli.common;
    let out = common.out.as_deref();
    match &cli.command {
        Command::Run { eta, steps } => {
            let mut config = load(common)?;
            if let Some(eta) = eta {
                config.training.stepsizes = vec![*eta];
            }
            if let Some(steps) = steps {
                config.training.steps = *steps;
            }
            let s = cmd_run(&config, out)?;
            println!(
                "status {:?}, final loss {:.6e}, stable-phase violations {}",
                s.status, s.final_state.loss, s.verification.stable_phase.violations
            );
            if let Some(why) = &s.divergence {
                eprintln!("diverged: {why}");
            }
            Ok(s.exit_status())
        }
        Command::Sweep { steps } => {
            let mut config = load(common)?;
            if let Some(steps) = steps {
                config.training.steps = *steps;
            }
            let s = cmd_sweep(&config, out, jobs(common))?;
            print!("{}", s.table_csv());
            Ok(s.exit_status())
        }
        Command::ScalingSweep { steps, scales } => {
            let mut config = load(common)?;
            if let Some(steps) = steps {
                config.training.steps = *steps;
            }
            if let Some(scales) = scales {
                config.training.scales = scales.clone();
            }
            let s = cmd_scaling_sweep(&config, out, jobs(common))?;
            println!("eta at b = 1: {:.6e} ({})", s.eta_one, s.eta_source);
            print!("{}", s.sweep.table_csv());
            Ok(s.sweep.exit_status())
        }
        Command::Certify { activation, samples } => {
            let (act, mut spec) = match activation {
                Some(text) => {
                    let spec = match &common.config {
                        Some(_) => load(common)?.certify,
                        None => CertifySpec::default(),
                    };
                    (parse_activation(text)?, spec)
                }
                None => {
                    let config = load(common)?;
                    (config.activation()?, config.certify)
                }
            };
            if let Some(n) = samples {
                spec.samples = *n;
            }
            let (_, report) = cmd_certify(&act, &spec, out)?;
            print!("{report}");
            Ok(ExitStatus::Success)
        }
        Command::Verify { run_dir, constants } => {
            let s = cmd_verify(run_dir, constants.as_deref(), out)?;
            let v = &s.verification;
            println!(
                "stable phase: {} violations over {} points; decrease lemma: {} violations",
                v.stable_phase.violations, v.stable_phase.checked_points, v.decrease_lemma.violations
            );
            for b in &v.eos_bounds {
                println!("bound {}: {} violations over {} points", b.name, b.violations, b.points);
            }
            Ok(s.exit_status())
        }
        Command::Report { dir } => {
            print!("{}", cmd_report(Path::new(dir))?);
            Ok(ExitStatus::Success)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(ExitStatus::ConfigError.code() as u8)
        }
    }
}
