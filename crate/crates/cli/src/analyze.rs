//! `analyze`: paired and per-condition tables from a records file.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use codesign_core::analysis::{
    delta_map, ecdf, histogram, pair_records, ring_stats, sector_stats, win_rate_from_pairs, GroupedStats,
};
use codesign_core::records::{read_records, StoredRecord};
use codesign_core::{AnalysisConfig, ConditionTag, DeltaMetric, EvalRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisKind {
    Delta,
    Sector,
    Ring,
    Hist,
    Ecdf,
    Winrate,
}

impl AnalysisKind {
    pub const ALL: [AnalysisKind; 6] =
        [AnalysisKind::Delta, AnalysisKind::Sector, AnalysisKind::Ring, AnalysisKind::Hist, AnalysisKind::Ecdf, AnalysisKind::Winrate];

    pub fn as_str(&self) -> &'static str {
        match self {
            AnalysisKind::Delta => "delta",
            AnalysisKind::Sector => "sector",
            AnalysisKind::Ring => "ring",
            AnalysisKind::Hist => "hist",
            AnalysisKind::Ecdf => "ecdf",
            AnalysisKind::Winrate => "winrate",
        }
    }

    fn paired(&self) -> bool {
        !matches!(self, AnalysisKind::Hist | AnalysisKind::Ecdf)
    }
}

impl fmt::Display for AnalysisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnalysisKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        AnalysisKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            let valid: Vec<&str> = AnalysisKind::ALL.iter().map(|k| k.as_str()).collect();
            format!("unknown analysis {s:?} (valid: {})", valid.join(", "))
        })
    }
}

/// A string table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr.records().map(|r| Ok(r?.iter().map(str::to_string).collect())).collect::<Result<_>>()?;
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).with_context(|| format!("table has no {name:?} column"))
    }
}

/// Records of one layout split by condition.
struct LayoutRecords<'a> {
    name: &'a str,
    co: Vec<EvalRecord>,
    ctrl: Vec<EvalRecord>,
}

fn by_layout(records: &[StoredRecord]) -> Vec<LayoutRecords<'_>> {
    let mut out: Vec<LayoutRecords> = Vec::new();
    for s in records {
        let r = &s.record;
        let pos = match out.iter().position(|l| l.name == r.layout) {
            Some(p) => p,
            None => {
                out.push(LayoutRecords { name: &r.layout, co: Vec::new(), ctrl: Vec::new() });
                out.len() - 1
            }
        };
        match r.condition {
            ConditionTag::CoDesign => out[pos].co.push(r.clone()),
            ConditionTag::ControlOnly => out[pos].ctrl.push(r.clone()),
        }
    }
    out
}

/// Distinct config hashes in first-appearance order, joined by `+`.
fn config_hash(records: &[StoredRecord]) -> String {
    let mut seen: Vec<&str> = Vec::new();
    for r in records {
        if !seen.contains(&r.config_hash.as_str()) {
            seen.push(&r.config_hash);
        }
    }
    seen.join("+")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "missing".to_string(), |x| x.to_string())
}

fn metric_values(records: &[EvalRecord], metric: DeltaMetric) -> Result<Vec<f64>> {
    let ok = records.iter().filter(|r| r.is_ok());
    Ok(match metric {
        DeltaMetric::FinalError => ok.map(|r| r.final_error).collect(),
        DeltaMetric::TrajectoryError => ok.map(|r| r.trajectory_error).collect(),
        DeltaMetric::Success => bail!("metric success has no value distribution; use final_error or trajectory_error"),
    })
}

fn check_paired(layout: &LayoutRecords, metric: DeltaMetric, tolerance: f64) -> Result<()> {
    let pairing = pair_records(&layout.co, &layout.ctrl, metric, tolerance);
    if pairing.unpaired == 0 && !pairing.targets.is_empty() {
        return Ok(());
    }
    if pairing.targets.is_empty() && pairing.missing.is_empty() {
        bail!("layout {}: no successful records to pair", layout.name);
    }
    let shown: Vec<String> = pairing.missing.iter().take(10).map(|(t, s)| format!("({}, {}) seed {}", t.x, t.y, s)).collect();
    let more = pairing.missing.len().saturating_sub(shown.len());
    bail!(
        "layout {}: {} record(s) lack a counterpart in the other condition: {}{}",
        layout.name,
        pairing.missing.len(),
        shown.join("; "),
        if more > 0 { format!("; and {more} more") } else { String::new() }
    )
}

fn grouped_rows(table: &mut Table, layout: &str, stats: &GroupedStats, hash: &str) {
    for g in &stats.groups {
        table.rows.push(vec![
            layout.to_string(),
            g.index.to_string(),
            g.lo.to_string(),
            g.hi.to_string(),
            g.n_targets.to_string(),
            fmt_opt(g.mean_delta),
            stats.metric.to_string(),
            stats.convention.to_string(),
            hash.to_string(),
        ]);
    }
}

/// Builds the requested table over every layout in `records`.
pub fn analyze(records: &[StoredRecord], kind: AnalysisKind, metric: DeltaMetric, cfg: &AnalysisConfig) -> Result<Table> {
    if records.is_empty() {
        bail!("records file holds no rows");
    }
    let hash = config_hash(records);
    let layouts = by_layout(records);
    if kind.paired() {
        for l in &layouts {
            check_paired(l, metric, cfg.tolerance)?;
        }
    }
    let mut table = match kind {
        AnalysisKind::Delta => Table::new(&["layout", "target_x", "target_y", "delta", "n_pairs", "metric", "convention", "config_hash"]),
        AnalysisKind::Sector => Table::new(&["layout", "sector", "lo_deg", "hi_deg", "n_targets", "mean_delta", "metric", "convention", "config_hash"]),
        AnalysisKind::Ring => Table::new(&["layout", "ring", "lo", "hi", "n_targets", "mean_delta", "metric", "convention", "config_hash"]),
        AnalysisKind::Hist => Table::new(&["layout", "condition", "bin_lo", "bin_hi", "count", "metric", "config_hash"]),
        AnalysisKind::Ecdf => Table::new(&["layout", "condition", "value", "fraction", "metric", "config_hash"]),
        AnalysisKind::Winrate => Table::new(&[
            "layout", "wins_co", "wins_ctrl", "ties", "n_targets", "co_rate", "ctrl_rate", "tie_rate", "metric", "convention", "config_hash",
        ]),
    };
    for l in &layouts {
        let name = l.name;
        match kind {
            AnalysisKind::Delta => {
                let d = delta_map(&l.co, &l.ctrl, metric, cfg.tolerance);
                for e in &d.entries {
                    table.rows.push(vec![
                        name.to_string(),
                        e.target.x.to_string(),
                        e.target.y.to_string(),
                        e.delta.to_string(),
                        e.n_pairs.to_string(),
                        metric.to_string(),
                        d.convention.to_string(),
                        hash.clone(),
                    ]);
                }
            }
            AnalysisKind::Sector => grouped_rows(&mut table, name, &sector_stats(&l.co, &l.ctrl, metric, cfg.n_sectors)?, &hash),
            AnalysisKind::Ring => grouped_rows(&mut table, name, &ring_stats(&l.co, &l.ctrl, metric, &cfg.ring_edges)?, &hash),
            AnalysisKind::Hist => {
                for (tag, recs) in [(ConditionTag::ControlOnly, &l.ctrl), (ConditionTag::CoDesign, &l.co)] {
                    if recs.is_empty() {
                        continue;
                    }
                    let h = histogram(&metric_values(recs, metric)?, &cfg.histogram_edges)?;
                    let first = h.edges[0];
                    let last = h.edges[h.edges.len() - 1];
                    let mut push = |lo: String, hi: String, count: usize| {
                        table.rows.push(vec![name.to_string(), tag.to_string(), lo, hi, count.to_string(), metric.to_string(), hash.clone()]);
                    };
                    push("-inf".into(), first.to_string(), h.underflow);
                    for (w, c) in h.edges.windows(2).zip(&h.counts) {
                        push(w[0].to_string(), w[1].to_string(), *c);
                    }
                    push(last.to_string(), "inf".into(), h.overflow);
                }
            }
            AnalysisKind::Ecdf => {
                for (tag, recs) in [(ConditionTag::ControlOnly, &l.ctrl), (ConditionTag::CoDesign, &l.co)] {
                    let values = metric_values(recs, metric)?;
                    if values.is_empty() {
                        continue;
                    }
                    for (v, f) in ecdf(&values)? {
                        table.rows.push(vec![name.to_string(), tag.to_string(), v.to_string(), f.to_string(), metric.to_string(), hash.clone()]);
                    }
                }
            }
            AnalysisKind::Winrate => {
                let pairing = pair_records(&l.co, &l.ctrl, metric, cfg.tolerance);
                let w = win_rate_from_pairs(&pairing.targets, metric)?;
                table.rows.push(vec![
                    name.to_string(),
                    w.wins_co.to_string(),
                    w.wins_ctrl.to_string(),
                    w.ties.to_string(),
                    w.n_targets().to_string(),
                    w.co_rate().to_string(),
                    w.ctrl_rate().to_string(),
                    w.tie_rate().to_string(),
                    metric.to_string(),
                    "wins = strictly better seed-mean per target".to_string(),
                    hash.clone(),
                ]);
            }
        }
    }
    Ok(table)
}

/// Reads `records_path`, builds the table and writes it to `out` (or stdout).
pub fn cmd_analyze(
    records_path: &Path,
    kind: AnalysisKind,
    metric: DeltaMetric,
    cfg: &AnalysisConfig,
    out: Option<&Path>,
) -> Result<Table> {
    cfg.validate()?;
    let f = File::open(records_path).with_context(|| format!("opening {}", records_path.display()))?;
    let records = read_records(f).with_context(|| format!("reading {}", records_path.display()))?;
    let table = analyze(&records, kind, metric, cfg)?;
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            table.write_csv(BufWriter::new(f))?;
        }
        None => table.write_csv(std::io::stdout().lock())?,
    }
    Ok(table)
}
