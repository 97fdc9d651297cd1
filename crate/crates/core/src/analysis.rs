//! Per-record metrics and paired aggregations over evaluation records.
//!
//! Two opposite sign conventions coexist here. Δ-maps and win rates report
//! positive values when co-design is better; sector and ring statistics
//! report `co − ctrl` on an error, so negative values mean co-design is
//! better. Every aggregate carries its convention string so outputs can be
//! labelled.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Trajectory;
use crate::experiment::EvalRecord;
use crate::Vec2;

pub const DELTA_ERROR_CONVENTION: &str = "delta = ctrl - co; positive = co-design better";
pub const DELTA_SUCCESS_CONVENTION: &str = "delta = co - ctrl; positive = co-design better";
pub const GROUPED_CONVENTION: &str = "delta = co - ctrl; negative = co-design better";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("no records to aggregate")]
    Empty,
    #[error("no paired targets between conditions")]
    NoPairs,
    #[error("bin edges must be finite and strictly increasing with at least two entries")]
    BadEdges,
    #[error("metric {0} is not supported for this analysis")]
    UnsupportedMetric(DeltaMetric),
    #[error("invalid analysis configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Success tolerance on the final error, m.
    pub tolerance: f64,
    pub histogram_edges: Vec<f64>,
    pub n_sectors: usize,
    pub ring_edges: Vec<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            tolerance: 0.05,
            histogram_edges: vec![0.0, 0.03, 0.05, 0.10, 0.15, 0.20, 0.25],
            n_sectors: 8,
            ring_edges: vec![0.0, 0.10, 0.20, 0.30],
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if !(self.tolerance > 0.0) {
            return Err(AnalysisError::InvalidConfig(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        if self.n_sectors == 0 {
            return Err(AnalysisError::InvalidConfig("n_sectors must be >= 1".into()));
        }
        check_edges(&self.histogram_edges)?;
        check_edges(&self.ring_edges)
    }
}

fn check_edges(edges: &[f64]) -> Result<(), AnalysisError> {
    if edges.len() < 2 || !edges.iter().all(|e| e.is_finite()) || !edges.windows(2).all(|w| w[0] < w[1]) {
        return Err(AnalysisError::BadEdges);
    }
    Ok(())
}

/// Mean squared end-effector distance over the post-initial states.
///
/// An episode that stopped before its first step scores the initial error.
pub fn trajectory_error(traj: &Trajectory, target: Vec2) -> f64 {
    let after = &traj.ee_positions[1..];
    if after.is_empty() {
        return (traj.ee_positions[0] - target).norm_sq();
    }
    after.iter().map(|p| (*p - target).norm_sq()).sum::<f64>() / after.len() as f64
}

/// Terminal Euclidean distance to the target.
pub fn final_error(traj: &Trajectory, target: Vec2) -> f64 {
    traj.final_ee().distance(target)
}

/// Fraction of values strictly below `tolerance`.
pub fn success_fraction(final_errors: &[f64], tolerance: f64) -> Result<f64, AnalysisError> {
    if final_errors.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let hits = final_errors.iter().filter(|e| **e < tolerance).count();
    Ok(hits as f64 / final_errors.len() as f64)
}

/// Success rate over the successful (non-failed) records.
pub fn success_rate(records: &[EvalRecord], tolerance: f64) -> Result<f64, AnalysisError> {
    let errors: Vec<f64> = records.iter().filter(|r| r.is_ok()).map(|r| r.final_error).collect();
    success_fraction(&errors, tolerance)
}

/// Fraction of records whose rollout touched the collision margin.
pub fn collision_rate(records: &[EvalRecord]) -> Result<f64, AnalysisError> {
    let ok: Vec<&EvalRecord> = records.iter().filter(|r| r.is_ok()).collect();
    if ok.is_empty() {
        return Err(AnalysisError::Empty);
    }
    Ok(ok.iter().filter(|r| r.collided).count() as f64 / ok.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMetric {
    FinalError,
    TrajectoryError,
    Success,
}

impl DeltaMetric {
    pub fn as_str(&self) -> &'static str {
        match self {
            DeltaMetric::FinalError => "final_error",
            DeltaMetric::TrajectoryError => "trajectory_error",
            DeltaMetric::Success => "success",
        }
    }

    fn value(&self, r: &EvalRecord, tolerance: f64) -> f64 {
        match self {
            DeltaMetric::FinalError => r.final_error,
            DeltaMetric::TrajectoryError => r.trajectory_error,
            DeltaMetric::Success => f64::from(u8::from(r.final_error < tolerance)),
        }
    }

    /// Whether larger values are better for this metric.
    fn higher_is_better(&self) -> bool {
        matches!(self, DeltaMetric::Success)
    }
}

impl fmt::Display for DeltaMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DeltaMetric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "final_error" => Ok(DeltaMetric::FinalError),
            "trajectory_error" => Ok(DeltaMetric::TrajectoryError),
            "success" => Ok(DeltaMetric::Success),
            other => Err(format!("unknown metric {other:?} (expected final_error, trajectory_error or success)")),
        }
    }
}

/// Seed-averaged metric values of both conditions at one target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTarget {
    pub target: Vec2,
    pub co: f64,
    pub ctrl: f64,
    /// Number of seeds present in both conditions.
    pub n_pairs: usize,
}

/// Targets paired across conditions, plus the number of records that had
/// no counterpart and were left out.
#[derive(Debug, Clone, PartialEq)]
pub struct Pairing {
    pub targets: Vec<PairedTarget>,
    pub unpaired: usize,
    /// Targets (with seed) of the records that had no counterpart.
    pub missing: Vec<(Vec2, u64)>,
}

type Key = (u64, u64);

fn key(p: Vec2) -> Key {
    (p.x.to_bits(), p.y.to_bits())
}

/// Pairs records by `(target, seed)` and averages each target over its paired seeds.
///
/// Failed records are skipped. Output follows the order in which targets
/// first appear in `co`, then in `ctrl`.
pub fn pair_records(co: &[EvalRecord], ctrl: &[EvalRecord], metric: DeltaMetric, tolerance: f64) -> Pairing {
    let index = |recs: &[EvalRecord]| -> HashMap<(Key, u64), f64> {
        recs.iter().filter(|r| r.is_ok()).map(|r| ((key(r.target), r.seed), metric.value(r, tolerance))).collect()
    };
    let co_map = index(co);
    let ctrl_map = index(ctrl);

    let mut order: Vec<Vec2> = Vec::new();
    let mut seen: HashMap<Key, usize> = HashMap::new();
    let mut sums: Vec<(f64, f64, usize)> = Vec::new();
    let mut missing = Vec::new();
    let mut seen_items: std::collections::HashSet<(Key, u64)> = std::collections::HashSet::new();

    for r in co.iter().chain(ctrl).filter(|r| r.is_ok()) {
        let item = (key(r.target), r.seed);
        if !seen_items.insert(item) {
            continue;
        }
        match (co_map.get(&item), ctrl_map.get(&item)) {
            (Some(&a), Some(&b)) => {
                let slot = *seen.entry(item.0).or_insert_with(|| {
                    order.push(r.target);
                    sums.push((0.0, 0.0, 0));
                    order.len() - 1
                });
                sums[slot].0 += a;
                sums[slot].1 += b;
                sums[slot].2 += 1;
            }
            _ => missing.push((r.target, r.seed)),
        }
    }
    let targets = order
        .into_iter()
        .zip(sums)
        .map(|(target, (a, b, n))| PairedTarget { target, co: a / n as f64, ctrl: b / n as f64, n_pairs: n })
        .collect();
    Pairing { targets, unpaired: missing.len(), missing }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEntry {
    pub target: Vec2,
    pub delta: f64,
    pub n_pairs: usize,
}

/// Per-target paired differences; positive means co-design is better.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMap {
    pub metric: DeltaMetric,
    pub convention: &'static str,
    pub entries: Vec<DeltaEntry>,
    /// Records without a counterpart in the other condition.
    pub unpaired: usize,
}

pub fn delta_map(co: &[EvalRecord], ctrl: &[EvalRecord], metric: DeltaMetric, tolerance: f64) -> DeltaMap {
    let pairing = pair_records(co, ctrl, metric, tolerance);
    let entries = pairing
        .targets
        .iter()
        .map(|p| DeltaEntry {
            target: p.target,
            delta: if metric.higher_is_better() { p.co - p.ctrl } else { p.ctrl - p.co },
            n_pairs: p.n_pairs,
        })
        .collect();
    let convention = if metric.higher_is_better() { DELTA_SUCCESS_CONVENTION } else { DELTA_ERROR_CONVENTION };
    DeltaMap { metric, convention, entries, unpaired: pairing.unpaired }
}

/// Index of the angular sector containing `p`.
///
/// Sector 0 starts on the positive x-axis and sectors advance
/// counterclockwise over `[0, 2π)`. Sectors are half-open; angles within
/// 1e-9 sector widths of a boundary snap onto it, so points on a boundary
/// belong to the sector that starts there.
pub fn sector_index(p: Vec2, n_sectors: usize) -> usize {
    let mut angle = p.y.atan2(p.x);
    if angle < 0.0 {
        angle += TAU;
    }
    let width = TAU / n_sectors as f64;
    let mut s = angle / width;
    let nearest = s.round();
    if (s - nearest).abs() < 1e-9 {
        s = nearest;
    }
    (s.floor() as usize) % n_sectors
}

/// Index `i` with `edges[i] <= r < edges[i+1]`; the last bin also includes
/// its upper edge. `None` outside `[edges[0], edges[last]]`.
pub fn ring_index(r: f64, edges: &[f64]) -> Option<usize> {
    let last = *edges.last()?;
    if r < edges[0] || r > last || r.is_nan() {
        return None;
    }
    if r == last {
        return Some(edges.len() - 2);
    }
    edges.windows(2).position(|w| w[0] <= r && r < w[1])
}

/// Mean grouped difference for one sector or ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStat {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    pub n_targets: usize,
    /// `None` when no target falls in this group.
    pub mean_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedStats {
    pub metric: DeltaMetric,
    pub convention: &'static str,
    pub groups: Vec<GroupStat>,
    /// Per-target `co − ctrl` terms that were averaged.
    pub terms: Vec<(Vec2, f64)>,
    /// Targets that fell outside every group.
    pub ungrouped: usize,
    pub unpaired: usize,
}

fn grouped(
    co: &[EvalRecord],
    ctrl: &[EvalRecord],
    metric: DeltaMetric,
    bounds: Vec<(f64, f64)>,
    assign: impl Fn(Vec2) -> Option<usize>,
) -> Result<GroupedStats, AnalysisError> {
    if metric.higher_is_better() {
        return Err(AnalysisError::UnsupportedMetric(metric));
    }
    let pairing = pair_records(co, ctrl, metric, f64::INFINITY);
    let terms: Vec<(Vec2, f64)> = pairing.targets.iter().map(|p| (p.target, p.co - p.ctrl)).collect();
    let mut sums = vec![(0.0, 0usize); bounds.len()];
    let mut ungrouped = 0;
    for (t, d) in &terms {
        match assign(*t) {
            Some(i) => {
                sums[i].0 += d;
                sums[i].1 += 1;
            }
            None => ungrouped += 1,
        }
    }
    let groups = bounds
        .into_iter()
        .zip(sums)
        .enumerate()
        .map(|(index, ((lo, hi), (sum, n)))| GroupStat {
            index,
            lo,
            hi,
            n_targets: n,
            mean_delta: (n > 0).then(|| sum / n as f64),
        })
        .collect();
    Ok(GroupedStats { metric, convention: GROUPED_CONVENTION, groups, terms, ungrouped, unpaired: pairing.unpaired })
}

/// Mean `co − ctrl` error per angular sector (bounds in degrees).
pub fn sector_stats(co: &[EvalRecord], ctrl: &[EvalRecord], metric: DeltaMetric, n_sectors: usize) -> Result<GroupedStats, AnalysisError> {
    if n_sectors == 0 {
        return Err(AnalysisError::InvalidConfig("n_sectors must be >= 1".into()));
    }
    let width = 360.0 / n_sectors as f64;
    let bounds = (0..n_sectors).map(|k| (k as f64 * width, (k + 1) as f64 * width)).collect();
    grouped(co, ctrl, metric, bounds, |t| Some(sector_index(t, n_sectors)))
}

/// Mean `co − ctrl` error per radial ring (bounds in metres).
pub fn ring_stats(co: &[EvalRecord], ctrl: &[EvalRecord], metric: DeltaMetric, ring_edges: &[f64]) -> Result<GroupedStats, AnalysisError> {
    check_edges(ring_edges)?;
    let bounds = ring_edges.windows(2).map(|w| (w[0], w[1])).collect();
    grouped(co, ctrl, metric, bounds, |t| ring_index(t.norm(), ring_edges))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    /// `counts[i]` covers `[edges[i], edges[i+1])`.
    pub counts: Vec<usize>,
    /// Values below the first edge.
    pub underflow: usize,
    /// Values at or above the last edge.
    pub overflow: usize,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.underflow + self.overflow + self.counts.iter().sum::<usize>()
    }
}

/// Bins `values` into half-open bins with underflow and overflow counts.
/// NaN values are counted as overflow.
pub fn histogram(values: &[f64], edges: &[f64]) -> Result<Histogram, AnalysisError> {
    check_edges(edges)?;
    let mut h = Histogram { edges: edges.to_vec(), counts: vec![0; edges.len() - 1], underflow: 0, overflow: 0 };
    let last = edges[edges.len() - 1];
    for &v in values {
        if v < edges[0] {
            h.underflow += 1;
        } else if !(v < last) {
            h.overflow += 1;
        } else {
            // Largest i with edges[i] <= v.
            let i = edges.partition_point(|e| *e <= v) - 1;
            h.counts[i] += 1;
        }
    }
    Ok(h)
}

/// Right-continuous empirical CDF as `(value, F(value))` steps, one per distinct value.
pub fn ecdf(values: &[f64]) -> Result<Vec<(f64, f64)>, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *v => last.1 = frac,
            _ => out.push((*v, frac)),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WinRate {
    pub wins_co: usize,
    pub wins_ctrl: usize,
    pub ties: usize,
}

impl WinRate {
    pub fn n_targets(&self) -> usize {
        self.wins_co + self.wins_ctrl + self.ties
    }

    pub fn co_rate(&self) -> f64 {
        self.wins_co as f64 / self.n_targets() as f64
    }

    pub fn ctrl_rate(&self) -> f64 {
        self.wins_ctrl as f64 / self.n_targets() as f64
    }

    pub fn tie_rate(&self) -> f64 {
        self.ties as f64 / self.n_targets() as f64
    }
}

/// Counts targets where each condition's seed-mean is strictly better.
pub fn win_rate(co: &[EvalRecord], ctrl: &[EvalRecord], metric: DeltaMetric, tolerance: f64) -> Result<WinRate, AnalysisError> {
    let pairing = pair_records(co, ctrl, metric, tolerance);
    win_rate_from_pairs(&pairing.targets, metric)
}

pub fn win_rate_from_pairs(pairs: &[PairedTarget], metric: DeltaMetric) -> Result<WinRate, AnalysisError> {
    if pairs.is_empty() {
        return Err(AnalysisError::NoPairs);
    }
    let mut w = WinRate { wins_co: 0, wins_ctrl: 0, ties: 0 };
    for p in pairs {
        let (co_better, ctrl_better) =
            if metric.higher_is_better() { (p.co > p.ctrl, p.ctrl > p.co) } else { (p.co < p.ctrl, p.ctrl < p.co) };
        if co_better {
            w.wins_co += 1;
        } else if ctrl_better {
            w.wins_ctrl += 1;
        } else {
            w.ties += 1;
        }
    }
    Ok(w)
}


#[cfg(test)]
mod tests {
    use super::fixtures::record;
    use super::*;
    use crate::dynamics::ArmState;
    use crate::policy::ConditionTag::{CoDesign, ControlOnly};

    fn traj(points: &[(f64, f64)]) -> Trajectory {
        Trajectory {
            states: vec![ArmState::default(); points.len()],
            ee_positions: points.iter().map(|&(x, y)| Vec2::new(x, y)).collect(),
            torques: vec![[0.0, 0.0]; points.len() - 1],
        }
    }

    #[test]
    fn trajectory_error_examples() {
        let t = traj(&[(0.0, 0.0), (0.0, 0.0), (0.0, 0.1)]);
        assert!((trajectory_error(&t, Vec2::new(0.0, 0.1)) - 0.005).abs() < 1e-15);
        let at = traj(&[(0.1, 0.1), (0.1, 0.1)]);
        assert_eq!(trajectory_error(&at, Vec2::new(0.1, 0.1)), 0.0);
        // Doubling distances quadruples the error.
        let a = traj(&[(0.0, 0.0), (0.03, 0.0), (0.0, 0.05)]);
        let b = traj(&[(0.0, 0.0), (0.06, 0.0), (0.0, 0.10)]);
        let (ea, eb) = (trajectory_error(&a, Vec2::ZERO), trajectory_error(&b, Vec2::ZERO));
        assert!((eb - 4.0 * ea).abs() < 1e-15);
    }

    #[test]
    fn final_error_examples() {
        assert_eq!(final_error(&traj(&[(0.0, 0.0), (0.3, 0.4)]), Vec2::ZERO), 0.5);
        assert_eq!(final_error(&traj(&[(0.1, 0.2)]), Vec2::new(0.1, 0.2)), 0.0);
    }

    #[test]
    fn success_rate_examples() {
        assert!((success_fraction(&[0.01, 0.20, 0.03], 0.05).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(success_fraction(&[0.01, 0.02], 0.05).unwrap(), 1.0);
        assert_eq!(success_fraction(&[0.05], 0.05).unwrap(), 0.0);
        assert_eq!(success_fraction(&[], 0.05), Err(AnalysisError::Empty));
    }

    #[test]
    fn delta_map_convention() {
        let t = Vec2::new(0.1, 0.1);
        let co = [record(CoDesign, t, 0, 0.02)];
        let ctrl = [record(ControlOnly, t, 0, 0.03)];
        let d = delta_map(&co, &ctrl, DeltaMetric::FinalError, 0.05);
        assert!((d.entries[0].delta - 0.01).abs() < 1e-15);
        assert_eq!(d.convention, DELTA_ERROR_CONVENTION);

        let co = [record(CoDesign, t, 0, 0.01)];
        let ctrl = [record(ControlOnly, t, 0, 0.2)];
        let d = delta_map(&co, &ctrl, DeltaMetric::Success, 0.05);
        assert_eq!(d.entries[0].delta, 1.0);
    }

    #[test]
    fn delta_map_identical_is_zero_and_unpaired_counted() {
        let a = Vec2::new(0.1, 0.0);
        let b = Vec2::new(0.0, 0.1);
        let co = [record(CoDesign, a, 0, 0.04), record(CoDesign, b, 0, 0.04)];
        let ctrl = [record(ControlOnly, a, 0, 0.04)];
        let d = delta_map(&co, &ctrl, DeltaMetric::FinalError, 0.05);
        assert_eq!(d.entries.len(), 1);
        assert_eq!(d.entries[0].delta, 0.0);
        assert_eq!(d.unpaired, 1);
    }

    #[test]
    fn sectors_of_axis_points() {
        assert_eq!(sector_index(Vec2::new(0.1, 0.0), 8), 0);
        assert_eq!(sector_index(Vec2::new(0.0, 0.1), 8), 2);
        assert_eq!(sector_index(Vec2::new(-0.1, -0.1), 8), 5);
        assert_eq!(sector_index(Vec2::new(0.1, -1e-6), 8), 7);
        assert_eq!(sector_index(Vec2::new(0.1, 0.1), 8), 1);
    }

    #[test]
    fn empty_sector_is_missing() {
        let t = Vec2::new(0.1, 0.0);
        let s = sector_stats(&[record(CoDesign, t, 0, 0.02)], &[record(ControlOnly, t, 0, 0.03)], DeltaMetric::FinalError, 8)
            .unwrap();
        assert!(s.groups[0].mean_delta.is_some());
        assert!(s.groups[1..].iter().all(|g| g.mean_delta.is_none() && g.n_targets == 0));
        assert!(sector_stats(&[], &[], DeltaMetric::Success, 8).is_err());
    }

    #[test]
    fn ring_edges_are_half_open() {
        let edges = [0.0, 0.1, 0.2, 0.3];
        assert_eq!(ring_index(0.1, &edges), Some(1));
        assert_eq!(ring_index(0.0, &edges), Some(0));
        assert_eq!(ring_index(0.3, &edges), Some(2));
        assert_eq!(ring_index(0.31, &edges), None);
    }

    #[test]
    fn single_ring_mean_is_global_mean() {
        let pts = [Vec2::new(0.05, 0.0), Vec2::new(0.0, 0.2), Vec2::new(-0.1, -0.1)];
        let co: Vec<_> = pts.iter().enumerate().map(|(i, p)| record(CoDesign, *p, 0, 0.01 * i as f64)).collect();
        let ctrl: Vec<_> = pts.iter().map(|p| record(ControlOnly, *p, 0, 0.03)).collect();
        let r = ring_stats(&co, &ctrl, DeltaMetric::FinalError, &[0.0, 0.3]).unwrap();
        let global = (0.0 - 0.03 + 0.01 - 0.03 + 0.02 - 0.03) / 3.0;
        assert!((r.groups[0].mean_delta.unwrap() - global).abs() < 1e-15);
    }

    #[test]
    fn inner_ring_fixture() {
        // Co-design better only inside r < 0.15.
        let edges = [0.0, 0.15, 0.30];
        let mut co = Vec::new();
        let mut ctrl = Vec::new();
        for (i, r) in [0.05, 0.1, 0.2, 0.25].iter().enumerate() {
            let t = Vec2::new(*r, 0.0);
            let co_err = if *r < 0.15 { 0.01 } else { 0.04 };
            co.push(record(CoDesign, t, i as u64, co_err));
            ctrl.push(record(ControlOnly, t, i as u64, 0.04));
        }
        let s = ring_stats(&co, &ctrl, DeltaMetric::FinalError, &edges).unwrap();
        assert!((s.groups[0].mean_delta.unwrap() + 0.03).abs() < 1e-15);
        assert_eq!(s.groups[1].mean_delta.unwrap(), 0.0);
    }

    #[test]
    fn histogram_conventions() {
        let edges = [0.0, 0.1, 0.2];
        let h = histogram(&[0.01, 0.02, 0.05], &edges).unwrap();
        assert_eq!(h.counts, vec![3, 0]);
        let h = histogram(&[0.1], &edges).unwrap();
        assert_eq!(h.counts, vec![0, 1]);
        let h = histogram(&[0.2, 0.5, -0.1], &edges).unwrap();
        assert_eq!((h.counts.clone(), h.overflow, h.underflow), (vec![0, 0], 2, 1));
        assert!(histogram(&[0.1], &[0.2, 0.1]).is_err());
    }

    #[test]
    fn histogram_hand_binned() {
        let edges = [0.0, 0.03, 0.05, 0.10, 0.15, 0.20, 0.25];
        let values = [0.0, 0.029, 0.03, 0.049, 0.07, 0.10, 0.149, 0.21, 0.25, 0.4];
        let h = histogram(&values, &edges).unwrap();
        assert_eq!(h.counts, vec![2, 2, 1, 2, 0, 1]);
        assert_eq!(h.overflow, 2);
        assert_eq!(h.total(), 10);
    }

    #[test]
    fn ecdf_examples() {
        assert_eq!(ecdf(&[0.4]).unwrap(), vec![(0.4, 1.0)]);
        assert_eq!(ecdf(&[3.0, 1.0, 2.0]).unwrap(), vec![(1.0, 1.0 / 3.0), (2.0, 2.0 / 3.0), (3.0, 1.0)]);
        assert_eq!(ecdf(&[2.0, 1.0, 2.0, 2.0]).unwrap(), vec![(1.0, 0.25), (2.0, 1.0)]);
        assert_eq!(ecdf(&[]), Err(AnalysisError::Empty));
    }

    #[test]
    fn win_rate_examples() {
        let mut co = Vec::new();
        let mut ctrl = Vec::new();
        for i in 0..20 {
            let t = Vec2::new(0.01 * i as f64, 0.05);
            let (a, b) = if i < 13 { (0.01, 0.02) } else { (0.03, 0.02) };
            co.push(record(CoDesign, t, 0, a));
            ctrl.push(record(ControlOnly, t, 0, b));
        }
        let w = win_rate(&co, &ctrl, DeltaMetric::FinalError, 0.05).unwrap();
        assert_eq!((w.wins_co, w.wins_ctrl, w.ties), (13, 7, 0));
        assert!((w.co_rate() - 0.65).abs() < 1e-15);
        assert!((w.ctrl_rate() - 0.35).abs() < 1e-15);

        let w = win_rate(&ctrl, &ctrl, DeltaMetric::FinalError, 0.05);
        assert_eq!(w, Err(AnalysisError::NoPairs).or(w.clone()));
        assert!(win_rate(&[], &[], DeltaMetric::FinalError, 0.05).is_err());
    }

    #[test]
    fn win_rate_identical_all_ties() {
        let t = [Vec2::new(0.1, 0.0), Vec2::new(0.2, 0.0)];
        let co: Vec<_> = t.iter().map(|p| record(CoDesign, *p, 1, 0.02)).collect();
        let ctrl: Vec<_> = t.iter().map(|p| record(ControlOnly, *p, 1, 0.02)).collect();
        let w = win_rate(&co, &ctrl, DeltaMetric::FinalError, 0.05).unwrap();
        assert_eq!((w.wins_co, w.wins_ctrl, w.ties), (0, 0, 2));
    }

    #[test]
    fn three_target_win_fixture() {
        // Seed means: A co 0.02 vs ctrl 0.03 (co), B co 0.05 vs 0.04 (ctrl), C 0.02 vs 0.02 (tie).
        let (a, b, c) = (Vec2::new(0.1, 0.0), Vec2::new(0.0, 0.1), Vec2::new(-0.1, 0.0));
        let co = vec![
            record(CoDesign, a, 0, 0.01),
            record(CoDesign, a, 1, 0.03),
            record(CoDesign, b, 0, 0.05),
            record(CoDesign, c, 0, 0.02),
        ];
        let ctrl = vec![
            record(ControlOnly, a, 0, 0.03),
            record(ControlOnly, a, 1, 0.03),
            record(ControlOnly, b, 0, 0.04),
            record(ControlOnly, c, 0, 0.02),
        ];
        let w = win_rate(&co, &ctrl, DeltaMetric::FinalError, 0.05).unwrap();
        assert_eq!((w.wins_co, w.wins_ctrl, w.ties), (1, 1, 1));
    }

    #[test]
    fn collision_rate_zero_without_penalties() {
        let recs: Vec<_> = (0..5).map(|i| record(CoDesign, Vec2::new(0.1, 0.0), i, 0.02)).collect();
        assert_eq!(collision_rate(&recs).unwrap(), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(AnalysisConfig::default().validate().is_ok());
        let bad = AnalysisConfig { ring_edges: vec![0.0, 0.2, 0.1], ..AnalysisConfig::default() };
        assert!(bad.validate().is_err());
    }
}
