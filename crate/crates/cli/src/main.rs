use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cranelab_cli::commands::{cmd_simulate, cmd_spectrum, cmd_sweep, cmd_witness, SimulateOptions, WitnessArgs};
use cranelab_cli::config::config_schema;
use cranelab_cli::presets::{preset, PRESET_NAMES};
use cranelab_cli::{CliError, ScenarioConfig};

/// Simulation and spectral analysis of a cable crane with delayed boundary
/// feedback.
#[derive(Parser)]
#[command(name = "cranelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Scenario configuration (JSON).
    #[arg(required_unless_present = "preset", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario instead of a file.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Source {
    fn load(&self) -> Result<ScenarioConfig, CliError> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ScenarioConfig::load(path),
            (None, Some(name)) => preset(name).ok_or_else(|| {
                CliError::Config(format!("unknown preset {name:?}; known: {}", PRESET_NAMES.join(", ")))
            }),
            (None, None) => Err(CliError::Config("no configuration given".into())),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the closed loop and write trajectory CSV plus summary JSON.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Run even if the regime hypotheses fail.
        #[arg(long)]
        force: bool,
        /// A blow-up is an expected outcome (exit 0).
        #[arg(long)]
        expect_divergence: bool,
    },
    /// Locate characteristic roots and write them as CSV.
    Spectrum {
        #[command(flatten)]
        source: Source,
    },
    /// Spectral abscissa over a two-parameter grid.
    Sweep {
        #[command(flatten)]
        source: Source,
    },
    /// Closed-form parameters with a root at lambda = sigma.
    Witness {
        #[arg(long, allow_negative_numbers = true)]
        sigma: f64,
        #[arg(long, allow_negative_numbers = true)]
        m: f64,
        /// Delayed gain; selects the family with velocity feedback.
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        /// Velocity gain (default 0 when --alpha is given).
        #[arg(long, allow_negative_numbers = true)]
        beta: Option<f64>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Print a built-in scenario as JSON.
    Preset {
        /// One of: convergence, decay-rate, witness-beta0, witness-general.
        name: Option<String>,
    },
    /// Print the JSON schema of scenario files.
    Schema,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            source,
            force,
            expect_divergence,
        } => {
            let config = source.load()?;
            let options = SimulateOptions {
                force,
                expect_divergence,
            };
            let s = cmd_simulate(&config, options, source.out.as_deref())?;
            println!("steps {} dt {:e} samples {}", s.steps, s.dt, s.samples);
            if let (Some(c), Some(p)) = (s.zeta.conservation_derived, s.zeta.closed_form) {
                println!("zeta conservation-derived {c} closed-form {p} (difference {})", p - c);
            }
            match &s.fit {
                Some(f) => println!(
                    "fitted rate on {} over [{}, {}]: {:.6} (r^2 {:.6})",
                    f.quantity, f.fit.window.0, f.fit.window.1, f.fit.rate, f.fit.r_squared
                ),
                None => println!("no rate fit: {}", s.fit_error.as_deref().unwrap_or("")),
            }
            if let Some(d) = s.final_dist_eq {
                println!("dist_eq at t = {}: {d:e}", s.final_t);
            }
            for h in &s.hypotheses {
                println!("hypothesis: {h}");
            }
            println!("wrote {} and {}", s.trajectory_csv.display(), s.summary_json.display());
        }
        Command::Spectrum { source } => {
            let r = cmd_spectrum(&source.load()?, source.out.as_deref())?;
            println!("{} roots in {:?} x {:?}", r.roots.len(), r.region.re, r.region.im);
            match r.abscissa {
                Some(a) => println!("spectral abscissa (equilibrium mode excluded): {a}"),
                None => println!("no roots besides the equilibrium mode"),
            }
            println!("wrote {}", r.roots_csv.display());
        }
        Command::Sweep { source } => {
            let r = cmd_sweep(&source.load()?, source.out.as_deref())?;
            println!("wrote {}", r.matrix_csv.display());
        }
        Command::Witness {
            sigma,
            m,
            alpha,
            beta,
            json,
        } => {
            let result = cmd_witness(WitnessArgs { sigma, m, alpha, beta });
            if let Err(CliError::ResidualCheck { .. }) = &result {
                eprintln!("residual check failed");
            }
            let r = result?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
            } else {
                let p = &r.params;
                println!("regime {:?}", r.regime);
                println!("sigma {}", p.damping);
                println!("m {}", p.platform_mass);
                println!("M {}", p.load_mass);
                println!("tau {}", p.delay);
                println!("alpha {}", p.delay_gain);
                println!("beta {}", p.velocity_gain);
                println!("lambda {}", r.lambda);
                println!("residual {:e} (tol {:e}) ok", r.residual, r.tol);
            }
        }
        Command::Preset { name } => match name {
            None => PRESET_NAMES.iter().for_each(|n| println!("{n}")),
            Some(name) => {
                let config = preset(&name).ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))?;
                println!("{}", config.to_json());
            }
        },
        Command::Schema => println!("{}", config_schema()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
