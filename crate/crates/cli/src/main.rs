use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use codesign_cli::{cmd_analyze, cmd_plot, cmd_run, AnalysisKind, ExperimentConfig, PlotKind, RunOptions};
use codesign_core::{AnalysisConfig, ConditionTag, DeltaMetric, Protocol};

#[derive(Parser)]
#[command(name = "codesign", version, about = "Morphology-control co-design experiments for a planar two-link arm")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (target, seed, condition) work item of a config.
    Run {
        config: PathBuf,
        /// Only run these layouts (repeatable).
        #[arg(long)]
        layout: Vec<String>,
        /// Only run one condition: co_design or control_only.
        #[arg(long)]
        condition: Option<ConditionTag>,
        /// Override the config's protocol: equal_width or equal_params.
        #[arg(long)]
        protocol: Option<Protocol>,
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        /// Output directory; falls back to the config's output_dir, then ./out.
        #[arg(long, env = "CODESIGN_OUT")]
        out: Option<PathBuf>,
    },
    /// Compute an analysis table from a records file.
    Analyze {
        records: PathBuf,
        /// delta, sector, ring, hist, ecdf or winrate.
        #[arg(long)]
        analysis: AnalysisKind,
        /// final_error, trajectory_error or success.
        #[arg(long, default_value = "final_error")]
        metric: DeltaMetric,
        /// Config whose analysis section (tolerance, edges, sectors) is used.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render an analysis table as SVG, one file per layout.
    Plot {
        table: PathBuf,
        /// delta, sector, ring, hist or ecdf.
        #[arg(long)]
        kind: PlotKind,
        /// Config used for obstacle outlines and workspace reach.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "figures")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<bool> {
    match Cli::parse().command {
        Command::Run { config, layout, condition, protocol, seed_offset, out } => {
            let out = match out {
                Some(o) => o,
                None => ExperimentConfig::load(&config)?.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            };
            let opts = RunOptions { layouts: layout, condition, protocol, seed_offset, out };
            let summary = cmd_run(&config, &opts)?;
            let failed = summary.records.iter().filter(|r| !r.is_ok()).count();
            eprintln!(
                "wrote {} records ({} failed) to {}",
                summary.records.len(),
                failed,
                summary.out_dir.join("records.csv").display()
            );
            Ok(summary.all_ok())
        }
        Command::Analyze { records, analysis, metric, config, out } => {
            let cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?.analysis,
                None => AnalysisConfig::default(),
            };
            cmd_analyze(&records, analysis, metric, &cfg, out.as_deref()).context("analysis failed")?;
            Ok(true)
        }
        Command::Plot { table, kind, config, out } => {
            for p in cmd_plot(&table, kind, config.as_deref(), &out)? {
                println!("{}", p.display());
            }
            Ok(true)
        }
    }
}
