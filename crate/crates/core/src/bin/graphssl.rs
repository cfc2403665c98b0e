use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use graphssl::experiment::{run_experiment, trial_graph, ExperimentConfig};
use graphssl::{accuracy, load_dataset, DataFormat, GraphSslError, Result};

#[derive(Parser)]
#[command(name = "graphssl", about = "Semi-supervised representation learning with learned affinity graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the repeated-trial clustering protocol and write per-run CSV rows.
    Run {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the configured affinity graph and write it as triplets.
    Graph {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Clustering accuracy of a predicted labeling against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
}

fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| GraphSslError::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::parse(&text)
}

/// Integer labels separated by commas and/or newlines.
fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(i, t)| {
            t.parse().map_err(|e| GraphSslError::Parse {
                line: i + 1,
                msg: format!("label {t:?}: {e}"),
            })
        })
        .collect()
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { data, config, out } => {
            let cfg = read_config(&config)?;
            let ds = load_dataset(&data, DataFormat::from_path(&data))?;
            let report = run_experiment(&ds, &cfg)?;
            fs::write(&out, report.to_csv())?;
            let (mean, std) = report.mean_std();
            eprintln!(
                "{} on {}: mean AC {:.4} (std {:.4}) over {} runs, {} failed",
                cfg.algorithm,
                ds.name,
                mean,
                std,
                report.successes().len(),
                report.failures()
            );
        }
        Command::Graph { data, config, out } => {
            let cfg = read_config(&config)?;
            let mut ds = load_dataset(&data, DataFormat::from_path(&data))?;
            if cfg.normalize {
                ds.normalize_by_max()?;
            }
            let prefix = match cfg.labeled_prefix {
                Some(l) => l,
                None => ds.labels().map_or(0, <[usize]>::len),
            };
            ds.set_labeled_prefix(prefix)?;
            let graph = trial_graph(&ds, &cfg)?.ok_or_else(|| {
                GraphSslError::Config(format!("algorithm {} does not use a graph", cfg.algorithm))
            })?;
            graph.save(&out)?;
        }
        Command::Eval { pred, truth } => {
            let report = accuracy(&read_labels(&pred)?, &read_labels(&truth)?)?;
            println!("ac={}", report.ac);
            println!("matched={}/{}", report.matched, report.confusion.sum());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
