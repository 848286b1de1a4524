use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use psitest_core::cli::{
    cmd_analyze, cmd_mc_delta0, cmd_report, cmd_simulate, cmd_verify_nogo, counts_path, distribution_path,
    AnalyzeInputs, EpsilonSource,
};
use psitest_core::config::{RunConfig, NOMINAL_TOML};
use psitest_core::Result;

#[derive(Parser)]
#[command(
    name = "psitest",
    version,
    about = "Simulate and analyze time-bin tests of psi-epistemic models"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; the bundled nominal one when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated dimensions, e.g. 3,10,30.
    #[arg(long, global = true, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the apparatus and write click counts per dimension.
    Simulate {
        /// Also write every trial as a record (large).
        #[arg(long)]
        records: bool,
    },
    /// Monte Carlo distance distributions under phase noise.
    McDelta0,
    /// Epsilon, exclusion, frontier and no-phase-noise tables.
    Analyze {
        /// Counts files; defaults to counts_d<d>.txt in the output directory.
        #[arg(long, value_delimiter = ',')]
        counts: Vec<PathBuf>,
        /// Use a `d,epsilon,err` table instead of counts ("bundled" for the shipped one).
        #[arg(long, conflicts_with = "counts")]
        measured: Option<String>,
        /// Distribution files; defaults to delta0_d<d>.txt in the output
        /// directory, or computed in-process if those are absent.
        #[arg(long, value_delimiter = ',')]
        distributions: Vec<PathBuf>,
    },
    /// Check both overlap bounds on random finite models.
    VerifyNogo {
        /// Number of model pairs.
        #[arg(long)]
        models: Option<usize>,
    },
    /// Concatenate the tables in the output directory.
    Report,
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path, common.seed)?,
        None => RunConfig::from_toml_str(NOMINAL_TOML, common.seed)?,
    };
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(dims) = &common.dims {
        cfg = cfg.with_dims(dims.clone())?;
    }
    Ok(cfg)
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn analyze_inputs(
    cfg: &RunConfig,
    counts: Vec<PathBuf>,
    measured: Option<String>,
    distributions: Vec<PathBuf>,
) -> AnalyzeInputs {
    let epsilon = match measured.as_deref() {
        Some("bundled") => EpsilonSource::BundledMeasured,
        Some(path) => EpsilonSource::Measured(path.into()),
        None if counts.is_empty() => {
            EpsilonSource::Counts(cfg.dims.iter().map(|&d| counts_path(&cfg.output_dir, d)).collect())
        }
        None => EpsilonSource::Counts(counts),
    };
    let distributions = if distributions.is_empty() {
        // Use existing files only when every expected one is present.
        let found: Vec<PathBuf> = cfg
            .dims
            .iter()
            .map(|&d| distribution_path(&cfg.output_dir, d))
            .collect();
        if found.iter().all(|p| p.exists()) {
            found
        } else {
            Vec::new()
        }
    } else {
        distributions
    };
    AnalyzeInputs { epsilon, distributions }
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Simulate { records } => print_paths(&cmd_simulate(&cfg, records)?),
        Command::McDelta0 => print_paths(&cmd_mc_delta0(&cfg)?),
        Command::Analyze {
            counts,
            measured,
            distributions,
        } => {
            let inputs = analyze_inputs(&cfg, counts, measured, distributions);
            let (_, paths) = cmd_analyze(&cfg, &inputs)?;
            print_paths(&paths);
        }
        Command::VerifyNogo { models } => {
            let mut cfg = cfg;
            if let Some(m) = models {
                cfg.verify.models = m;
            }
            let (report, paths) = cmd_verify_nogo(&cfg)?;
            print!("{}", report.to_text());
            print_paths(&paths);
            return Ok(report.passed());
        }
        Command::Report => {
            let (text, _) = cmd_report(&cfg)?;
            print!("{text}");
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
