use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bundlecalc::curvature::curvature;
use bundlecalc::expr::BasePoint;
use bundlecalc::generate::{generate_random, MAX_GEN_DEGREE, MAX_GEN_DIM};
use bundlecalc::runner::{run_checks_with, RunOverrides};
use bundlecalc::scenario::load_scenario;

#[derive(Parser)]
#[command(
    name = "bundlecalc",
    version,
    about = "Connections, curvature and covariant differentials on one chart"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks listed in a scenario file. Exits 1 if any check fails.
    Check {
        file: PathBuf,
        /// Default tolerance for checks without their own.
        #[arg(long)]
        tol: Option<f64>,
        /// Random sample points per check, in addition to the origin.
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Print a random scenario with polynomial coefficients.
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..=MAX_GEN_DIM as u64))]
        m: u64,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..=MAX_GEN_DIM as u64))]
        n: u64,
        #[arg(long, value_parser = clap::value_parser!(u32).range(0..=MAX_GEN_DEGREE as i64))]
        degree: u32,
    },
    /// Print every curvature coefficient of a connection at a point.
    Curvature {
        file: PathBuf,
        #[arg(long)]
        connection: String,
        /// Comma-separated coordinates.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Vec<f64>,
    },
}

/// Exit status for unreadable input, as opposed to a failed check.
const USAGE_ERROR: u8 = 2;

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(USAGE_ERROR)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Check {
            file,
            tol,
            points,
            seed,
            format,
        } => {
            let s = load_scenario(&file).map_err(|e| e.to_string())?;
            let outcome = run_checks_with(&s, RunOverrides { tol, points, seed })
                .map_err(|e| e.to_string())?;
            match format {
                Format::Text => print!("{}", outcome.human_text()),
                Format::Machine => print!("{}", outcome.machine_text()),
            }
            Ok(ExitCode::from(outcome.exit_code() as u8))
        }
        Command::Gen { seed, m, n, degree } => {
            print!(
                "{}",
                generate_random(seed, m as usize, n as usize, degree).to_text()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Curvature {
            file,
            connection,
            at,
        } => {
            let s = load_scenario(&file).map_err(|e| e.to_string())?;
            let model = s.model().map_err(|e| e.to_string())?;
            let k = model
                .connections
                .get(&connection)
                .ok_or_else(|| format!("no connection named {connection}"))?;
            if at.len() != s.base_dim {
                return Err(format!(
                    "--at needs {} coordinates, got {}",
                    s.base_dim,
                    at.len()
                ));
            }
            let p = BasePoint::from(at);
            let r = curvature(k).eval(&p).map_err(|e| e.to_string())?;
            println!("# R[i,j,l,m] = R_j^i_lm of {connection} at {p}");
            for (idx, v) in r.indexed() {
                let one: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
                println!("R[{}] = {v}", one.join(","));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
