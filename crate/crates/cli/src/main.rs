use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fracfilm::config::parse_config_text;
use fracfilm::verify::VerifySettings;
use fracfilm::{cmd_run, cmd_sweep, cmd_verify_operator, output, CliError, RunConfig, SweepAxis};
use fracfilm_core::diagnostics::PositivityStatus;

#[derive(Parser)]
#[command(
    name = "fracfilm",
    version,
    about = "Spectral solver for a degenerate thin-film equation with a fractional pressure"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation (an epsilon schedule runs as a continuation).
    Run(ConfigArgs),
    /// Check the operator identities and the kernel representation.
    VerifyOperator(VerifyArgs),
    /// Run a family of simulations along one axis and report convergence.
    Sweep(SweepArgs),
}

/// Flags mirror the configuration keys and override the config file.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<String>,
    /// Mobility exponent.
    #[arg(long)]
    n: Option<String>,
    /// Regularization, or a comma-separated decreasing schedule.
    #[arg(long)]
    epsilon: Option<String>,
    /// Final time.
    #[arg(long = "T", alias = "t-final")]
    t_final: Option<String>,
    #[arg(long)]
    n_steps: Option<String>,
    #[arg(long)]
    n_modes: Option<String>,
    /// constant, bump, cosine_mix or custom.
    #[arg(long)]
    initial_condition: Option<String>,
    #[arg(long)]
    ic_level: Option<String>,
    #[arg(long)]
    ic_amplitude: Option<String>,
    #[arg(long)]
    ic_offset: Option<String>,
    #[arg(long)]
    ic_coefficients: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    output_dir: Option<String>,
    #[arg(long)]
    newton_tol: Option<String>,
    #[arg(long)]
    newton_max_iter: Option<String>,
    #[arg(long)]
    damping_min: Option<String>,
    #[arg(long)]
    positivity_floor: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut pairs = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
                parse_config_text(&text)?
            }
            None => Vec::new(),
        };
        let flags = [
            ("alpha", &self.alpha),
            ("n", &self.n),
            ("epsilon", &self.epsilon),
            ("T", &self.t_final),
            ("n_steps", &self.n_steps),
            ("n_modes", &self.n_modes),
            ("initial_condition", &self.initial_condition),
            ("ic_level", &self.ic_level),
            ("ic_amplitude", &self.ic_amplitude),
            ("ic_offset", &self.ic_offset),
            ("ic_coefficients", &self.ic_coefficients),
            ("seed", &self.seed),
            ("output_dir", &self.output_dir),
            ("newton_tol", &self.newton_tol),
            ("newton_max_iter", &self.newton_max_iter),
            ("damping_min", &self.damping_min),
            ("positivity_floor", &self.positivity_floor),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                pairs.push((key.to_string(), v.clone()));
            }
        }
        RunConfig::from_pairs(pairs)
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 64)]
    n_modes: usize,
    /// Image-sum truncation of the kernel.
    #[arg(long, default_value_t = 10_000)]
    k_max: usize,
    #[arg(long, default_value_t = 10_000)]
    quad_points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write verify_operator.csv here.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Tau,
    Epsilon,
    Modes,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Comma-separated axis values.
    #[arg(long)]
    values: String,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let start = Instant::now();
            let outcome = cmd_run(&cfg)?;
            let report = &outcome.report;
            println!(
                "run complete: {} steps, tau = {:e}, audits {}, positivity {}",
                report.solver.steps,
                report.tau,
                if report.audit.as_ref().is_some_and(|a| a.passed) {
                    "pass"
                } else {
                    "FAIL"
                },
                match report.positivity.map(|p| p.status) {
                    Some(PositivityStatus::Pass) => "pass",
                    Some(PositivityStatus::SuspectedDefect) => "suspected defect",
                    Some(PositivityStatus::Informational) => "informational",
                    None => "n/a",
                },
            );
            eprintln!("wall time: {:.3} s", start.elapsed().as_secs_f64());
            Ok(())
        }
        Command::VerifyOperator(args) => {
            let settings = VerifySettings {
                alpha: args.alpha,
                n_modes: args.n_modes,
                k_max: args.k_max,
                quad_points: args.quad_points,
                seed: args.seed,
            };
            let (rows, breach) = cmd_verify_operator(&settings, args.output_dir.as_deref())?;
            print!("{}", output::check_table_csv(&rows));
            breach.map_or(Ok(()), Err)
        }
        Command::Sweep(args) => {
            let cfg = args.config.resolve()?;
            let values = args
                .values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Config(format!("cannot parse sweep value '{v}'")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let axis = match args.axis {
                AxisArg::Tau => SweepAxis::Tau,
                AxisArg::Epsilon => SweepAxis::Epsilon,
                AxisArg::Modes => SweepAxis::Modes,
            };
            let start = Instant::now();
            let outcome = cmd_sweep(&cfg, axis, &values)?;
            for row in &outcome.rows {
                let show = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4e}"));
                println!(
                    "{} = {:e}: distance {}, order {}",
                    axis.name(),
                    row.value,
                    show(row.distance_to_previous),
                    show(row.observed_order)
                );
            }
            eprintln!("wall time: {:.3} s", start.elapsed().as_secs_f64());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
