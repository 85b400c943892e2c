use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dimdist::harness::{run, Experiment, ExperimentConfig, Report};

/// Dimension distortion experiments.
#[derive(Parser)]
#[command(name = "dimdist", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Random Sobolev construction: image dimension and level norms.
    Sharpness(Common),
    /// Image dimension of certified test maps against the universal bound.
    Universal(Common),
    /// Leaf-by-leaf survey of a foliation under a test map.
    Survey(Common),
    /// Covering-regularity table of a foliation chart.
    Regularity(Common),
    /// Quotient coset distances against the Grushin estimate.
    Grushin(Common),
    /// Two-sided mass regularity of a carpet.
    Carpet(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; the built-in reference config when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json and the CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Print the effective config as JSON and exit without running.
    #[arg(long)]
    print_config: bool,
}

impl Command {
    fn split(self) -> (Experiment, Common) {
        match self {
            Command::Sharpness(c) => (Experiment::Sharpness, c),
            Command::Universal(c) => (Experiment::UniversalBound, c),
            Command::Survey(c) => (Experiment::FoliationSurvey, c),
            Command::Regularity(c) => (Experiment::Regularity, c),
            Command::Grushin(c) => (Experiment::GrushinCompare, c),
            Command::Carpet(c) => (Experiment::CarpetRegularity, c),
        }
    }
}

fn load(experiment: Experiment, args: &Common) -> Result<ExperimentConfig, String> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            ExperimentConfig::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => ExperimentConfig::default_for(experiment),
    };
    if config.experiment() != experiment {
        return Err(format!(
            "config describes {}, but the subcommand runs {}",
            config.experiment().label(),
            experiment.label()
        ));
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(k) = args.replicates {
        config.replicates = k;
    }
    if let Some(out) = &args.out {
        config.output_dir = Some(out.display().to_string());
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn print_summary(report: &Report, dir: &std::path::Path) {
    for r in &report.results {
        println!(
            "{} {:<40} value={:<22} target={} tol={} [{:?}]",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.value,
            r.target,
            r.tolerance,
            r.provenance
        );
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    println!(
        "{} in {:.2}s, outputs in {}",
        report.experiment.label(),
        report.wall_clock_seconds,
        dir.display()
    );
}

fn main() -> ExitCode {
    let (experiment, args) = Cli::parse().command.split();
    let config = match load(experiment, &args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if args.print_config {
        match serde_json::to_string_pretty(&config) {
            Ok(json) => {
                println!("{json}");
                return ExitCode::SUCCESS;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        }
    }
    let dir = PathBuf::from(
        config
            .output_dir
            .clone()
            .unwrap_or_else(|| format!("dimdist-out/{}", experiment.label())),
    );
    let output = match run(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = output.write_to(&dir) {
        eprintln!("error writing {}: {e}", dir.display());
        return ExitCode::from(2);
    }
    print_summary(&output.report, &dir);
    if output.report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
