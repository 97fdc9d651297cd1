//! `run`: execute a config's layouts and write records, traces and champions.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use codesign_core::experiment::{run_layout_suite, RunOutcome};
use codesign_core::records::{write_genome, write_records, write_trace};
use codesign_core::{ConditionTag, EvalRecord, Protocol, Vec2};
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Layout names to run; empty means all.
    pub layouts: Vec<String>,
    /// Restrict to one condition; `None` runs both.
    pub condition: Option<ConditionTag>,
    pub protocol: Option<Protocol>,
    /// Added to every configured seed.
    pub seed_offset: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct LayoutSummary {
    pub name: String,
    pub n_targets: usize,
    pub n_records: usize,
    pub n_failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NetSummary {
    pub condition: ConditionTag,
    pub input_dim: usize,
    pub hidden: usize,
    pub param_count: usize,
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: String,
    pub config_hash: String,
    pub protocol: Protocol,
    pub conditions: Vec<ConditionTag>,
    pub seeds: Vec<u64>,
    pub networks: Vec<NetSummary>,
    pub layouts: Vec<LayoutSummary>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub records: Vec<EvalRecord>,
    pub manifest: Manifest,
}

impl RunSummary {
    /// True when every layout was set up and every record succeeded.
    pub fn all_ok(&self) -> bool {
        self.manifest.layouts.iter().all(|l| l.error.is_none() && l.n_failed == 0)
    }
}

pub fn cmd_run(config_path: &Path, opts: &RunOptions) -> Result<RunSummary> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(p) = opts.protocol {
        cfg.protocol = p;
    }
    for name in &opts.layouts {
        if cfg.layout(name).is_none() {
            let known: Vec<&str> = cfg.layouts.iter().map(|l| l.name.as_str()).collect();
            bail!("unknown layout {name:?} (config has: {})", known.join(", "));
        }
    }
    let layouts: Vec<_> =
        cfg.layouts.iter().filter(|l| opts.layouts.is_empty() || opts.layouts.contains(&l.name)).cloned().collect();
    let conditions: Vec<ConditionTag> = match opts.condition {
        Some(c) => vec![c],
        None => ConditionTag::ALL.to_vec(),
    };
    let mut settings = cfg.settings();
    settings.seeds = settings.seeds.iter().map(|s| s.wrapping_add(opts.seed_offset)).collect();

    let networks = conditions
        .iter()
        .map(|&c| {
            let layout = settings.protocol.layout_for(c, settings.hidden)?;
            Ok(NetSummary { condition: c, input_dim: layout.d_in, hidden: layout.hidden, param_count: layout.param_count() })
        })
        .collect::<Result<Vec<_>>>()?;

    let results = run_layout_suite(&layouts, &cfg.template(), cfg.grid_spacing, &conditions, &settings);

    let out = &opts.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let hash = cfg.hash();
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for res in &results {
        match &res.outcome {
            Ok(outcomes) => {
                let n_targets = write_artifacts(out, &res.layout, outcomes)?;
                let n_failed = outcomes.iter().filter(|o| !o.record.is_ok()).count();
                for o in outcomes.iter().filter(|o| !o.record.is_ok()) {
                    eprintln!(
                        "warning: layout {} target ({}, {}) seed {} {}: {}",
                        res.layout,
                        o.record.target.x,
                        o.record.target.y,
                        o.record.seed,
                        o.record.condition,
                        o.record.error.as_deref().unwrap_or_default()
                    );
                }
                summaries.push(LayoutSummary {
                    name: res.layout.clone(),
                    n_targets,
                    n_records: outcomes.len(),
                    n_failed,
                    error: None,
                });
                records.extend(outcomes.iter().map(|o| o.record.clone()));
            }
            Err(e) => {
                eprintln!("error: layout {}: {e}", res.layout);
                summaries.push(LayoutSummary {
                    name: res.layout.clone(),
                    n_targets: 0,
                    n_records: 0,
                    n_failed: 0,
                    error: Some(e.to_string()),
                });
            }
        }
    }

    let records_path = out.join("records.csv");
    let f = File::create(&records_path).with_context(|| format!("creating {}", records_path.display()))?;
    write_records(BufWriter::new(f), &records, &hash)?;

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: config_path.display().to_string(),
        config_hash: hash,
        protocol: settings.protocol,
        conditions,
        seeds: settings.seeds.clone(),
        networks,
        layouts: summaries,
    };
    let mpath = out.join("manifest.json");
    let f = File::create(&mpath).with_context(|| format!("creating {}", mpath.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &manifest)?;

    Ok(RunSummary { out_dir: out.clone(), records, manifest })
}

/// Writes per-run trace and champion files for one layout; returns its target count.
fn write_artifacts(out: &Path, layout: &str, outcomes: &[RunOutcome]) -> Result<usize> {
    let traces = out.join("traces").join(layout);
    let champions = out.join("champions").join(layout);
    fs::create_dir_all(&traces)?;
    fs::create_dir_all(&champions)?;
    // Outcomes arrive grouped by target, so first appearance gives the target index.
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    for o in outcomes {
        let r = &o.record;
        let key = |t: Vec2| (t.x.to_bits(), t.y.to_bits());
        let next = index.len();
        let ti = *index.entry(key(r.target)).or_insert(next);
        let stem = format!("{}_t{:03}_s{}", r.condition, ti, r.seed);
        if let Some(trace) = &o.trace {
            let p = traces.join(format!("{stem}.csv"));
            write_trace(BufWriter::new(File::create(&p)?), trace).with_context(|| format!("writing {}", p.display()))?;
        }
        if let Some(genome) = o.champion() {
            let p = champions.join(format!("{stem}.json"));
            write_genome(BufWriter::new(File::create(&p)?), genome).with_context(|| format!("writing {}", p.display()))?;
        }
    }
    Ok(index.len())
}
