use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use edca_cli::{
    cmd_compare, cmd_sim, cmd_solve, cmd_sweep, load_config, parse_value, with_pool, Axis, CliError, Format, Outcome,
    SimSpec, SweepSpec,
};
use edca_core::SolveOptions;

/// Analytic EDCA performance model and slot-level simulator.
#[derive(Parser)]
#[command(name = "edca", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json; `solve` defaults to json, the other commands to csv.
    #[arg(long)]
    format: Option<Format>,
}

impl Common {
    fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

#[derive(Args)]
struct Solver {
    /// Fixed-point iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
}

impl Solver {
    fn options(&self) -> Result<SolveOptions, CliError> {
        let mut opts = SolveOptions::default();
        if let Some(n) = self.max_iters {
            if n == 0 {
                return Err(CliError::Usage("--max-iters: must be at least 1".into()));
            }
            opts.max_iters = n;
        }
        Ok(opts)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the analytic model for one scenario.
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: Solver,
    },
    /// Solve along an axis, optionally with simulator runs at each point.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: Solver,
        #[arg(long)]
        axis: Axis,
        /// Comma-separated, strictly increasing; `k`/`M`/`G` suffixes allowed.
        #[arg(long, value_delimiter = ',', value_parser = parse_value, required = true)]
        values: Vec<f64>,
        /// Simulator seeds per point; no simulation when omitted.
        #[arg(long)]
        seeds: Option<u64>,
        /// Simulated seconds per run.
        #[arg(long, default_value_t = 30.0)]
        duration: f64,
    },
    /// Analytic metrics next to simulator means and confidence half-widths.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: Solver,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 30.0)]
        duration: f64,
    },
    /// Simulator runs, one row per seed.
    Sim {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 30.0)]
        duration: f64,
        /// Event trace of the seed-0 run.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|source| CliError::Write {
            path: p.to_owned(),
            source,
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Solve { common, solver } => {
            let doc = load_config(&common.config)?;
            let opts = solver.options()?;
            let mut out = output(common.out.as_deref())?;
            let outcome = cmd_solve(&doc, &opts, common.format_or(Format::Json), &mut out)?;
            out.flush()?;
            Ok(outcome)
        }
        Command::Sweep {
            common,
            solver,
            axis,
            values,
            seeds,
            duration,
        } => {
            let doc = load_config(&common.config)?;
            let opts = solver.options()?;
            let spec = SweepSpec::new(axis, values)?;
            let sim = seeds.map(|s| SimSpec::new(s, duration)).transpose()?;
            let mut buf = Vec::new();
            let outcome = with_pool(|| cmd_sweep(&doc, &spec, &opts, sim.as_ref(), common.format_or(Format::Csv), &mut buf))??;
            let mut out = output(common.out.as_deref())?;
            out.write_all(&buf)?;
            out.flush()?;
            Ok(outcome)
        }
        Command::Compare {
            common,
            solver,
            seeds,
            duration,
        } => {
            let doc = load_config(&common.config)?;
            let opts = solver.options()?;
            let sim = SimSpec::new(seeds, duration)?;
            let mut buf = Vec::new();
            let outcome = with_pool(|| cmd_compare(&doc, &opts, &sim, common.format_or(Format::Csv), &mut buf))??;
            let mut out = output(common.out.as_deref())?;
            out.write_all(&buf)?;
            out.flush()?;
            Ok(outcome)
        }
        Command::Sim {
            common,
            seeds,
            duration,
            trace,
        } => {
            let doc = load_config(&common.config)?;
            let sim = SimSpec::new(seeds, duration)?;
            let mut buf = Vec::new();
            let outcome = with_pool(|| cmd_sim(&doc, &sim, trace.as_deref(), common.format_or(Format::Csv), &mut buf))??;
            let mut out = output(common.out.as_deref())?;
            out.write_all(&buf)?;
            out.flush()?;
            Ok(outcome)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if outcome.not_converged {
                eprintln!("warning: fixed point not reached; best iterate reported");
            }
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
