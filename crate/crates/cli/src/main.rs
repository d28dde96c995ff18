use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fdrstab::cli::{
    cmd_select, cmd_simulate, cmd_stability, parse_config, resolve_threads, with_pool, Aggregator, BaseKind, CliError,
    ExperimentRequest, MethodSpec, SelectRequest, SynthSpec, Threads,
};

#[derive(Parser)]
#[command(name = "fdrstab", version, about = "Stabilized FDR-controlled variable selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Pool {
    /// Worker threads: a positive count or `auto`. Overrides FDRSTAB_THREADS and the config.
    #[arg(long)]
    threads: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Replicated simulation: writes results.csv, summary.csv and timings.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Also write SVG charts of FDR and power.
        #[arg(long)]
        plot: bool,
        #[command(flatten)]
        pool: Pool,
    },
    /// Selection stability on one dataset as the ensemble size grows: writes stability.csv.
    Stability {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        plot: bool,
        #[command(flatten)]
        pool: Pool,
    },
    /// Applies one method to a design and response read from CSV and prints a report.
    Select {
        /// Design CSV with a header row of feature names.
        #[arg(long)]
        x: PathBuf,
        /// Single-column response CSV.
        #[arg(long, required_unless_present = "synthesize_response")]
        y: Option<PathBuf>,
        /// Generate the response instead, e.g. "s=60 sd-num=50".
        #[arg(long, conflicts_with = "y")]
        synthesize_response: Option<String>,
        #[arg(long)]
        base: BaseKind,
        #[arg(long, default_value = "stab:e_avg")]
        agg: Aggregator,
        #[arg(long, default_value_t = 0.1)]
        q: f64,
        #[arg(long = "M", alias = "m", default_value_t = 50)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the report here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        pool: Pool,
    },
}

fn load(path: &Path) -> Result<ExperimentRequest, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.into(), message: e.to_string() })?;
    parse_config(&text)
}

fn threads(pool: &Pool, config: Threads) -> Result<Threads, CliError> {
    let env = std::env::var("FDRSTAB_THREADS").ok();
    resolve_threads(pool.threads.as_deref(), env.as_deref(), config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, plot, pool } => {
            let req = load(&config)?;
            let t = threads(&pool, req.threads)?;
            let out = with_pool(t, |exec| cmd_simulate(&req, plot, exec))?;
            eprintln!("wrote {} result rows to {}", out.results.len(), req.output_dir.display());
        }
        Command::Stability { config, plot, pool } => {
            let req = load(&config)?;
            let t = threads(&pool, req.threads)?;
            let rows = with_pool(t, |exec| cmd_stability(&req, plot, exec))?;
            eprintln!("wrote {} stability rows to {}", rows.len(), req.output_dir.display());
        }
        Command::Select { x, y, synthesize_response, base, agg, q, m, seed, output, pool } => {
            let method = MethodSpec::new(base, agg).map_err(CliError::Usage)?;
            let synthesize = synthesize_response.map(|s| s.parse::<SynthSpec>()).transpose().map_err(CliError::Usage)?;
            let req = SelectRequest { x, y, method, q, m, seed, synthesize };
            let t = threads(&pool, Threads::Auto)?;
            let report = with_pool(t, |exec| cmd_select(&req, exec))?;
            match output {
                Some(path) => std::fs::write(&path, report.to_string())
                    .map_err(|e| CliError::Io { path: path.clone(), message: e.to_string() })?,
                None => print!("{report}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
