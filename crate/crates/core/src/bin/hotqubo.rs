use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hotqubo::cli::{self, CliError};

#[derive(Parser)]
#[command(name = "hotqubo", version, about = "Hot-start QUBOs for discrete mean-variance portfolios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic market (returns.csv, prices.csv).
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 240)]
        periods: usize,
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
    /// Per-asset qubit derivation for the hot-start box.
    Derive(Common),
    /// Hot-start vs baseline qubit totals over universe sizes.
    Scaling {
        #[command(flatten)]
        common: Common,
        /// Comma-separated ascending sizes.
        #[arg(long, value_delimiter = ',', default_values_t = [4usize, 10, 20, 40, 60, 80, 100])]
        sizes: Vec<usize>,
    },
    /// Build the QUBO and solve it.
    Solve(Common),
    /// Build the QUBO and write it in the text exchange format.
    Export(Common),
}

#[derive(Args)]
struct Common {
    /// `key = value` file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    returns: Option<String>,
    #[arg(long)]
    prices: Option<String>,
    #[arg(long)]
    budget: Option<String>,
    #[arg(long = "risk-free")]
    risk_free: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long = "kappa-scale")]
    kappa_scale: Option<String>,
    /// hotstart | baseline
    #[arg(long)]
    mode: Option<String>,
    /// Baseline bits per asset.
    #[arg(long)]
    k: Option<String>,
    /// bruteforce | anneal | random
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    sweeps: Option<String>,
    #[arg(long)]
    restarts: Option<String>,
    #[arg(long = "beta-start")]
    beta_start: Option<String>,
    #[arg(long = "beta-end")]
    beta_end: Option<String>,
    /// Random-search samples.
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Also write qubo.txt when solving.
    #[arg(long)]
    export: bool,
}

impl Common {
    fn resolve(&self) -> Result<cli::RunConfig, CliError> {
        let mut o = BTreeMap::new();
        let pairs = [
            ("returns", &self.returns),
            ("prices", &self.prices),
            ("budget", &self.budget),
            ("risk-free", &self.risk_free),
            ("gamma", &self.gamma),
            ("kappa-scale", &self.kappa_scale),
            ("mode", &self.mode),
            ("k", &self.k),
            ("solver", &self.solver),
            ("sweeps", &self.sweeps),
            ("restarts", &self.restarts),
            ("beta-start", &self.beta_start),
            ("beta-end", &self.beta_end),
            ("samples", &self.samples),
            ("seed", &self.seed),
            ("out", &self.out),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                o.insert(k.to_owned(), v.clone());
            }
        }
        if self.export {
            o.insert("export".into(), "true".into());
        }
        cli::resolve_config(self.config.as_deref(), &o)
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen { seed, n, periods, out } => {
            let (r, p) = cli::cmd_gen(seed, n, periods, &out)?;
            println!("wrote {} and {}", r.display(), p.display());
        }
        Command::Derive(c) => {
            let report = cli::cmd_derive(&c.resolve()?)?;
            cli::print_stdout(&report.to_text());
        }
        Command::Scaling { common, sizes } => {
            let report = cli::cmd_scaling(&common.resolve()?, &sizes)?;
            cli::print_stdout(&report.to_text());
        }
        Command::Solve(c) => {
            let report = cli::cmd_solve(&c.resolve()?)?;
            cli::print_stdout(&report.to_text());
            eprintln!("solver wall time {:.3?}", report.wall_time);
        }
        Command::Export(c) => {
            let (path, q) = cli::cmd_export(&c.resolve()?)?;
            println!("wrote {} ({} bits)", path.display(), q.bits());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
