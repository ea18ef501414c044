use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qwalk_cli::commands::{self, CalibrateArgs, FitArgs, SampleArgs, SimulateOptions};
use qwalk_cli::CliError;

#[derive(Parser)]
#[command(name = "qwalk", version, about = "Coin-walker Dirac walk simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured input and write step distributions.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sample counts with this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Events per step when sampling.
        #[arg(long)]
        counts: Option<u64>,
    },
    /// Fit the oscillating Gaussian to a run directory.
    Fit {
        input: PathBuf,
        #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_negative_numbers = true)]
        window: Option<Vec<i64>>,
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        steps: Option<Vec<usize>>,
        /// Weight residuals by the reported standard errors.
        #[arg(long)]
        weighted: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dispersion, sector weights, oscillation prediction and decomposition.
    Analytics {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a noise model to measured distributions.
    Calibrate {
        measured: PathBuf,
        /// Initial noise model JSON.
        #[arg(long)]
        guess: Option<PathBuf>,
        /// Run configuration giving the input state and nominal settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also free waveplate, axis and generation parameters.
        #[arg(long)]
        all_groups: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw finite-count samples from a run directory.
    Sample {
        input: PathBuf,
        #[arg(long)]
        counts: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn pair<T: Copy>(v: Option<Vec<T>>) -> Option<(T, T)> {
    v.map(|v| (v[0], v[1]))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            counts,
        } => {
            let outcome = commands::simulate(&config, &SimulateOptions { out, seed, counts })?;
            println!(
                "wrote {} steps to {}",
                outcome.distributions.len(),
                outcome.output_dir.display()
            );
            for p in &outcome.means {
                println!("step {:>3}  mean {:+.6}", p.step, p.mean);
            }
        }
        Command::Fit {
            input,
            window,
            steps,
            weighted,
            out,
        } => {
            let result = commands::fit(&FitArgs {
                input,
                window: pair(window),
                steps: pair(steps),
                weighted,
                out,
            })?;
            let (p, e) = (result.params, result.standard_errors);
            println!("omega = {:.4} +- {:.4} rad/step", p.omega, e.omega);
            println!("A     = {:.4} +- {:.4} sites", p.amplitude, e.amplitude);
            if !result.converged {
                eprintln!("warning: fit did not converge");
            }
            if result.covariance_degenerate {
                eprintln!("warning: covariance is degenerate");
            }
        }
        Command::Analytics { config, out } => {
            let report = commands::analytics(&config, out.as_deref())?;
            let p = report.prediction;
            println!(
                "k0 = {:.6}  amplitude = {:.6}  frequency = {:.6}  |f| = {:.6}",
                report.k0, p.amplitude, p.angular_frequency, p.f_magnitude
            );
        }
        Command::Calibrate {
            measured,
            guess,
            config,
            all_groups,
            out,
        } => {
            let report = commands::calibrate(&CalibrateArgs {
                measured,
                guess,
                config,
                all_groups,
                out,
            })?;
            println!("objective = {:.6e} ({})", report.objective, report.termination);
            for (t, f) in report.fidelities.iter().enumerate() {
                println!("step {t:>3}  fidelity {f:.6}");
            }
            if !report.converged {
                eprintln!("warning: calibration did not converge; best model written");
            }
        }
        Command::Sample {
            input,
            counts,
            seed,
            out,
        } => {
            let sampled = commands::sample(&SampleArgs {
                input,
                counts,
                seed,
                out,
            })?;
            println!("sampled {} steps", sampled.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qwalk: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
