use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mlsvgd::par::with_threads;
use mlsvgd_cli::bounds_table::{write_bounds, BOUNDS_FILE};
use mlsvgd_cli::compare::{compare_runs, thin_samples};
use mlsvgd_cli::config::{BoundsTableConfig, ExperimentConfig};
use mlsvgd_cli::experiment::run_experiment;
use mlsvgd_cli::reference::{load_reference_samples, make_reference};
use mlsvgd_cli::report::{RunReport, WriteOptions};
use mlsvgd_cli::{CliError, Result};

#[derive(Parser)]
#[command(name = "mlsvgd", version, about = "Single- and multilevel SVGD experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write trace.csv and summary.json.
    Run(RunArgs),
    /// Tabulate the cost bounds over a tolerance grid.
    BoundsTable(BoundsArgs),
    /// Compare finished run directories.
    Compare(CompareArgs),
    /// Run long pCN chains and cache the posterior mean.
    MakeReference(ReferenceArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory in the configuration.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.output {
            cfg.output = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Exit with code 4 if a stopping tolerance was not reached.
    #[arg(long)]
    strict: bool,
    /// Record measured wall time in trace.csv.
    #[arg(long)]
    wall_time: bool,
}

#[derive(Args)]
struct BoundsArgs {
    /// Bounds configuration (TOML); built-in constants if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    output: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Run directories, each holding summary.json and trace.csv.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// reference.json whose samples serve as the MMD reference.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Evenly thin the reference samples to at most this many rows.
    #[arg(long, default_value_t = 2000)]
    max_reference: usize,
    #[arg(long, default_value = "out")]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct ReferenceArgs {
    #[command(flatten)]
    common: Common,
    /// Recompute even if a matching reference exists.
    #[arg(long)]
    force: bool,
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = args.common.load()?;
    let report = with_threads(args.common.threads, || run_experiment(&cfg))?;
    create_dir(&cfg.output)?;
    report.write(
        &cfg.output,
        WriteOptions {
            wall_time: args.wall_time,
        },
    )?;
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    println!(
        "{}: {} iterations, cost {:.6e}, written to {}",
        report.algorithm,
        report.total_iterations,
        report.total_cost,
        cfg.output.display()
    );
    if args.strict && !report.tolerance_met {
        return Err(CliError::ToleranceNotReached(format!(
            "{} stopped at the iteration cap",
            report.algorithm
        )));
    }
    Ok(())
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(p) => BoundsTableConfig::load(p)?,
        None => BoundsTableConfig::default(),
    };
    let rows = write_bounds(&cfg, &args.output)?;
    println!(
        "{} rows written to {}",
        rows.len(),
        args.output.join(BOUNDS_FILE).display()
    );
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let runs = args
        .runs
        .iter()
        .map(|d| RunReport::load(d))
        .collect::<Result<Vec<_>>>()?;
    let reference = match args.reference.as_deref() {
        Some(p) => Some(thin_samples(&load_reference_samples(p)?, args.max_reference)?),
        None => None,
    };
    let table = with_threads(args.threads, || compare_runs(&runs, reference.as_ref()))?;
    table.write(&args.output)?;
    for row in &table.rows {
        println!(
            "{:<12} cost {:>12.4e}  ratio {:>8.4}  rel_error {:>10}",
            row.label,
            row.total_cost,
            row.cost_ratio,
            row.relative_error.map_or("-".into(), |e| format!("{e:.3e}"))
        );
    }
    Ok(())
}

fn reference(args: ReferenceArgs) -> Result<()> {
    let cfg = args.common.load()?;
    let (file, path, cached) = with_threads(args.common.threads, || make_reference(&cfg, &cfg.output, args.force))?;
    println!(
        "{} {} ({} samples, acceptance {:.3})",
        if cached { "reused" } else { "wrote" },
        path.display(),
        file.num_samples,
        file.mean_acceptance
    );
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::BoundsTable(a) => bounds(a),
        Command::Compare(a) => compare(a),
        Command::MakeReference(a) => reference(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
