use std::f64::consts::TAU;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qlode_cli::commands::{self, Output};
use qlode_cli::error::CliError;

/// Positive periodic solutions of u'' = mu (u - u^q).
#[derive(Parser)]
#[command(name = "qlode", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Degeneracy instants mu_k of the constant solution.
    Instants {
        #[arg(long)]
        q: f64,
        #[arg(long = "T", default_value_t = TAU)]
        period: f64,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        k_max: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve for the solution on branch k and verify it.
    Solve {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long = "T", default_value_t = TAU)]
        period: f64,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        k: u32,
        /// Samples per period (power of two).
        #[arg(long, default_value_t = 1024)]
        grid: usize,
        /// Write the JSON document here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the sampled profile as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Continue branches 1..=branches up to mu_max.
    Diagram {
        #[arg(long)]
        q: f64,
        #[arg(long = "T", default_value_t = TAU)]
        period: f64,
        #[arg(long)]
        mu_max: f64,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        branches: u32,
        #[arg(long, default_value_t = 256)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count distinct positive solutions against the guaranteed lower bound.
    Count {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long = "T", default_value_t = TAU)]
        period: f64,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
        /// Write the summary as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Basic conformal factors on N x S^1 of radius r. Several radii
    /// (comma separated) print a count table instead.
    Yamabe {
        #[arg(long)]
        n: u32,
        #[arg(long = "RN")]
        r_n: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        r: Vec<f64>,
        #[arg(long, default_value_t = 1024)]
        grid: usize,
        /// Directory for one JSON document per factor.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run every check on a solution document.
    Verify {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cmd: Command) -> Result<Output, CliError> {
    match cmd {
        Command::Instants {
            q,
            period,
            k_max,
            out,
        } => commands::instants(q, period, k_max, out.as_deref()),
        Command::Solve {
            q,
            mu,
            period,
            k,
            grid,
            out,
            csv,
        } => commands::solve(q, mu, period, k, grid, out.as_deref(), csv.as_deref()),
        Command::Diagram {
            q,
            period,
            mu_max,
            branches,
            grid,
            out,
        } => commands::diagram(q, period, mu_max, branches, grid, out.as_deref()),
        Command::Count {
            q,
            mu,
            period,
            grid,
            json,
        } => commands::count(q, mu, period, grid, json.as_deref()),
        Command::Yamabe {
            n,
            r_n,
            r,
            grid,
            out,
        } => commands::yamabe(n, r_n, &r, grid, out.as_deref()),
        Command::Verify { input, out } => commands::verify_document(&input, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QLODE_LOG", "warn")).init();
    let cli = Cli::parse();
    let status = run(cli.command).and_then(|out| {
        std::io::stdout().write_all(out.stdout.as_bytes())?;
        eprint!("{}", out.stderr);
        out.status
    });
    match status {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
