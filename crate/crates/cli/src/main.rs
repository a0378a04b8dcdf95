//! `hemiguard`: solve configurations, build barrier and region datasets,
//! and run games of the hemisphere perimeter-defense problem.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hemiguard::GameError;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "hemiguard", version, about = "Perimeter defense on a hemisphere")]
struct Cli {
    /// Output format; records default to JSON and datasets to CSV.
    #[arg(long, global = true, value_enum, default_value_t = Format::Auto)]
    format: Format,

    /// Read and write angles in degrees instead of radians.
    #[arg(long, global = true)]
    degrees: bool,

    /// Worker threads for parallel work.
    #[arg(long, global = true, env = "HEMIGUARD_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Auto,
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal breaching point and payoff for one configuration.
    Solve(SolveArgs),
    /// Barrier (or constant-payoff level set) for a fixed defender.
    Barrier(BarrierArgs),
    /// Winning region of one intruder position, or of a polar grid.
    Classify(ClassifyArgs),
    /// Play one game and write its trace.
    Simulate(SimulateArgs),
    /// Compare terminal payoffs of optimal play against alternative strategies.
    NashCheck(NashArgs),
    /// Barrier datasets for every combination of the given parameters.
    Sweep(SweepArgs),
}

/// An angle given as a plain number or as a multiple of pi (`0.3pi`).
#[derive(Debug, Clone, PartialEq)]
pub struct AngleArg {
    pub value: f64,
    pub pi_multiple: bool,
}

impl AngleArg {
    pub fn radians(&self, degrees: bool) -> f64 {
        if self.pi_multiple {
            self.value * std::f64::consts::PI
        } else if degrees {
            self.value.to_radians()
        } else {
            self.value
        }
    }

    /// Label used in sweep file names.
    pub fn label(&self) -> String {
        if self.pi_multiple {
            format!("{}pi", output::fmt_sig(self.value))
        } else {
            output::fmt_sig(self.value)
        }
    }
}

fn parse_angle(s: &str) -> Result<AngleArg, String> {
    let t = s.trim();
    let (num, pi_multiple) = match t.strip_suffix("pi") {
        Some("") => ("1", true),
        Some(rest) => (rest.trim_end_matches('*'), true),
        None => (t, false),
    };
    let value: f64 = num.parse().map_err(|_| format!("not an angle: '{s}'"))?;
    if !value.is_finite() {
        return Err(format!("angle must be finite: '{s}'"));
    }
    Ok(AngleArg { value, pi_multiple })
}

fn parse_finite(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("not a finite number: '{s}'")),
    }
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Intruder azimuth relative to the defender.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_angle)]
    psi: AngleArg,
    /// Defender elevation.
    #[arg(long = "phi-d", value_parser = parse_angle)]
    phi_d: AngleArg,
    /// Intruder distance from the center.
    #[arg(long, value_parser = parse_finite)]
    r: f64,
    /// Intruder-to-defender speed ratio.
    #[arg(long, value_parser = parse_finite)]
    nu: f64,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Bisection tolerance on the breaching angle.
    #[arg(long, default_value_t = hemiguard::solver::DEFAULT_TOL, value_parser = parse_finite)]
    tol: f64,
}

#[derive(Debug, Args)]
pub struct BarrierArgs {
    #[arg(long = "phi-d", value_parser = parse_angle)]
    phi_d: AngleArg,
    #[arg(long, value_parser = parse_finite)]
    nu: f64,
    /// Number of breaching angles sampled over the full circle.
    #[arg(long, default_value_t = 256)]
    samples: usize,
    /// Payoff level; 0 gives the barrier itself.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_finite)]
    level: Option<f64>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long = "phi-d", value_parser = parse_angle)]
    phi_d: AngleArg,
    #[arg(long, value_parser = parse_finite)]
    nu: f64,
    /// Intruder azimuth (point mode).
    #[arg(long, allow_hyphen_values = true, value_parser = parse_angle, requires = "r", conflicts_with = "grid")]
    psi: Option<AngleArg>,
    /// Intruder distance (point mode).
    #[arg(long, value_parser = parse_finite, requires = "psi")]
    r: Option<f64>,
    /// Grid resolution in both azimuth and distance (grid mode).
    #[arg(long, requires = "r_max")]
    grid: Option<usize>,
    /// Outer radius of the grid.
    #[arg(long = "r-max", value_parser = parse_finite, requires = "grid")]
    r_max: Option<f64>,
    /// Half-width of the payoff band labelled as on the barrier.
    #[arg(long, default_value_t = hemiguard::barrier::DEFAULT_BAND, value_parser = parse_finite)]
    band: f64,
    /// Output file for grid mode (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    BothOptimal,
    DefenderOptimal,
    IntruderOptimal,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    /// Defender strategy: optimal, stationary or random:<stream>.
    #[arg(long)]
    defender: Option<String>,
    /// Intruder strategy: optimal, stationary, fixed:<heading> or random:<stream>.
    #[arg(long, allow_hyphen_values = true)]
    intruder: Option<String>,
    #[arg(long, default_value_t = hemiguard::dynamics::DEFAULT_DT, value_parser = parse_finite)]
    dt: f64,
    /// Defaults to four times the intruder's initial target time.
    #[arg(long, value_parser = parse_finite)]
    timeout: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace output file; only the summary is printed when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary output file (stdout when omitted).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NashArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Random alternative strategies per side.
    #[arg(long, default_value_t = 20)]
    alternates: u64,
    #[arg(long, default_value_t = hemiguard::dynamics::DEFAULT_DT, value_parser = parse_finite)]
    dt: f64,
    #[arg(long, value_parser = parse_finite)]
    timeout: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = hemiguard::simulation::NASH_SLACK, value_parser = parse_finite)]
    slack: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated defender elevations.
    #[arg(long = "phi-d", value_delimiter = ',', value_parser = parse_angle, required = true)]
    phi_d: Vec<AngleArg>,
    /// Comma-separated speed ratios.
    #[arg(long, value_delimiter = ',', value_parser = parse_finite, required = true)]
    nu: Vec<f64>,
    /// Comma-separated payoff levels (barrier only when omitted).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_finite)]
    level: Vec<f64>,
    #[arg(long, default_value_t = 256)]
    samples: usize,
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Game(GameError::InvalidInput(_)) => 1,
            CliError::Game(_) | CliError::Io(_) => 2,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Game(e) => e.code(),
            CliError::Io(_) => "io_error",
        }
    }
}

pub struct Ctx {
    pub format: Format,
    pub degrees: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Ctx {
        format: cli.format,
        degrees: cli.degrees,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Solve(a) => commands::solve(&ctx, a),
        Command::Barrier(a) => commands::barrier(&ctx, a),
        Command::Classify(a) => commands::classify(&ctx, a),
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::NashCheck(a) => commands::nash_check(&ctx, a),
        Command::Sweep(a) => commands::sweep(&ctx, a),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({ "error": e.code(), "message": e.to_string() });
            println!("{record}");
            eprintln!("hemiguard: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
