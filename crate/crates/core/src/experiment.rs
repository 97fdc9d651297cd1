//! Scenarios, target grids and paired runs of both conditions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{final_error, trajectory_error};
use crate::dynamics::{rollout, DynamicsError, EpisodeSpec, Morphology, PhysicalParams};
use crate::evolve::{evolve_with, Codec, EvolveError, GaConfig, GenerationTrace, Genome, ReachingObjective};
use crate::geometry::{collision_penalty, min_clearance, target_feasible, CollisionConfig, Obstacle};
use crate::policy::{ConditionTag, NeuralController, PolicyError, Protocol};
use crate::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("no feasible targets in layout {layout:?}")]
    NoFeasibleTargets { layout: String },
    #[error("grid spacing must be finite and > 0, got {0}")]
    InvalidSpacing(f64),
    #[error("target ({}, {}) is not feasible", .0.x, .0.y)]
    InfeasibleTarget(Vec2),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// One static reaching environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub obstacles: Vec<Obstacle>,
    /// Baseline arm; fixes the control-only morphology, the gene bounds and
    /// the reach used for target generation.
    pub baseline: Morphology,
    pub initial_pose: [f64; 2],
    pub horizon: usize,
    pub physical: PhysicalParams,
    pub collision: CollisionConfig,
    /// Minimum distance between a target and any obstacle, m.
    pub safety_margin: f64,
    pub early_exit_tolerance: Option<f64>,
}

impl Scenario {
    /// Validates every component. The baseline arm at the initial pose must
    /// clear all obstacles by at least the collision margin.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let invalid = |m: String| Err(ExperimentError::InvalidScenario(m));
        if self.horizon == 0 {
            return invalid("horizon must be >= 1".into());
        }
        if !(self.safety_margin >= 0.0 && self.safety_margin.is_finite()) {
            return invalid(format!("safety margin must be finite and >= 0, got {}", self.safety_margin));
        }
        if !self.initial_pose.iter().all(|q| q.is_finite()) {
            return invalid("initial pose must be finite".into());
        }
        if let Some(tol) = self.early_exit_tolerance {
            if !(tol > 0.0) {
                return invalid(format!("early exit tolerance must be > 0, got {tol}"));
            }
        }
        self.baseline.validate()?;
        self.physical.validate()?;
        self.collision.validate().map_err(ExperimentError::InvalidScenario)?;
        for o in &self.obstacles {
            o.validate().map_err(ExperimentError::InvalidScenario)?;
        }
        let start = crate::dynamics::ArmState::at_rest(self.initial_pose);
        let clearance = min_clearance(&start, &self.baseline, &self.obstacles);
        if clearance < self.collision.margin {
            return invalid(format!(
                "initial pose clears the obstacles by {clearance:.4} m, less than the collision margin {}",
                self.collision.margin
            ));
        }
        Ok(())
    }

    pub fn episode(&self) -> EpisodeSpec {
        EpisodeSpec {
            initial_pose: self.initial_pose,
            horizon: self.horizon,
            physical: self.physical,
            early_exit_tolerance: self.early_exit_tolerance,
        }
    }

    pub fn target_is_feasible(&self, x: Vec2) -> bool {
        target_feasible(x, &self.obstacles, &self.baseline, self.safety_margin)
    }
}

/// Feasible targets on a square lattice through the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetGrid {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub spacing: f64,
    pub targets: Vec<Vec2>,
}

/// Lattice coordinates are snapped to 1e-9 m so that decimal spacings land on
/// the nearest representable decimal (e.g. `6 × 0.05` becomes `0.3`).
fn lattice_coord(i: i64, spacing: f64) -> f64 {
    let v = i as f64 * spacing;
    (v * 1e9).round() / 1e9
}

pub fn generate_target_grid(scenario: &Scenario, baseline: &Morphology, spacing: f64) -> Result<TargetGrid, ExperimentError> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(ExperimentError::InvalidSpacing(spacing));
    }
    let reach = baseline.reach();
    let n = (reach / spacing + 1e-9).floor() as i64;
    let mut targets = Vec::new();
    // Row-major from the bottom row upward, left to right.
    for j in -n..=n {
        for i in -n..=n {
            let p = Vec2::new(lattice_coord(i, spacing), lattice_coord(j, spacing));
            if target_feasible(p, &scenario.obstacles, baseline, scenario.safety_margin) {
                targets.push(p);
            }
        }
    }
    if targets.is_empty() {
        return Err(ExperimentError::NoFeasibleTargets { layout: String::new() });
    }
    Ok(TargetGrid { x_range: [-reach, reach], y_range: [-reach, reach], spacing, targets })
}

/// Outcome of one (target, seed, condition) evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub layout: String,
    pub condition: ConditionTag,
    pub target: Vec2,
    pub seed: u64,
    pub hidden: usize,
    pub param_count: usize,
    /// Champion link lengths.
    pub l1: f64,
    pub l2: f64,
    /// Mean squared end-effector error over the episode, m².
    pub trajectory_error: f64,
    /// Terminal end-effector distance, m.
    pub final_error: f64,
    pub success: bool,
    pub collision_penalty: f64,
    pub collision_steps: usize,
    pub collided: bool,
    /// Final best fitness of the GA run.
    pub best_loss: f64,
    pub best_loss_trace: Vec<f64>,
    /// Set when this work item failed; metric fields are then NaN.
    pub error: Option<String>,
}

impl EvalRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    fn failed(layout: &str, condition: ConditionTag, target: Vec2, seed: u64, err: impl ToString) -> Self {
        // An empty message would read back as a successful record.
        let mut message = err.to_string();
        if message.is_empty() {
            message = "unspecified failure".into();
        }
        EvalRecord {
            layout: layout.to_string(),
            condition,
            target,
            seed,
            hidden: 0,
            param_count: 0,
            l1: f64::NAN,
            l2: f64::NAN,
            trajectory_error: f64::NAN,
            final_error: f64::NAN,
            success: false,
            collision_penalty: f64::NAN,
            collision_steps: 0,
            collided: false,
            best_loss: f64::NAN,
            best_loss_trace: Vec::new(),
            error: Some(message),
        }
    }
}

/// Whether each GA run specialises on one target or trains one controller
/// across all of a layout's targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    #[default]
    Specialist,
    Generalist,
}

/// Everything a batch of runs shares apart from the scenario and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub ga: GaConfig,
    pub protocol: Protocol,
    /// Hidden width of the control-only network; co-design follows the protocol.
    pub hidden: usize,
    pub seeds: Vec<u64>,
    /// Success tolerance on the final error, m.
    pub tolerance: f64,
    pub training: TrainingMode,
}

/// A finished evaluation together with its GA trace and champion.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: EvalRecord,
    pub trace: Option<GenerationTrace>,
}

impl RunOutcome {
    pub fn champion(&self) -> Option<&Genome> {
        self.trace.as_ref().map(|t| &t.best_genome)
    }
}

/// Seed for the GA run of `(seed, target)`; identical across conditions so runs stay paired.
pub fn work_item_seed(seed: u64, target: Vec2) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(seed) ^ splitmix(target.x.to_bits()) ^ splitmix(target.y.to_bits()).rotate_left(23))
}

pub fn codec_for(tag: ConditionTag, scenario: &Scenario, settings: &RunSettings) -> Result<Codec, ExperimentError> {
    let layout = settings.protocol.layout_for(tag, settings.hidden)?;
    Ok(Codec::new(tag.with_baseline(scenario.baseline), scenario.baseline.bounds, layout, scenario.physical.torque_limit)?)
}

/// Rolls out a champion on `target` and computes every per-record metric.
pub fn evaluate_champion(
    layout: &str,
    genome: &Genome,
    scenario: &Scenario,
    target: Vec2,
    seed: u64,
    tolerance: f64,
    trace: &GenerationTrace,
) -> Result<EvalRecord, ExperimentError> {
    let (morph, net) = genome.decode()?;
    let codec = genome.codec;
    let controller = NeuralController { net, tag: codec.tag() };
    let traj = rollout(&controller, &morph, &scenario.episode(), target)?;
    let coll = collision_penalty(&traj, &morph, &scenario.obstacles, &scenario.collision);
    let fe = final_error(&traj, target);
    Ok(EvalRecord {
        layout: layout.to_string(),
        condition: codec.tag(),
        target,
        seed,
        hidden: codec.layout.hidden,
        param_count: codec.layout.param_count(),
        l1: morph.l1,
        l2: morph.l2,
        trajectory_error: trajectory_error(&traj, target),
        final_error: fe,
        success: fe < tolerance,
        collision_penalty: coll.penalty,
        collision_steps: coll.violating_states,
        collided: coll.collided(),
        best_loss: trace.final_loss(),
        best_loss_trace: trace.best_loss.clone(),
        error: None,
    })
}

fn ga_for(settings: &RunSettings, seed: u64) -> GaConfig {
    GaConfig { seed, ..settings.ga.clone() }
}

fn run_specialist(
    layout: &str,
    tag: ConditionTag,
    scenario: &Scenario,
    target: Vec2,
    seed: u64,
    settings: &RunSettings,
) -> RunOutcome {
    let attempt = || -> Result<RunOutcome, ExperimentError> {
        if !scenario.target_is_feasible(target) {
            return Err(ExperimentError::InfeasibleTarget(target));
        }
        let codec = codec_for(tag, scenario, settings)?;
        let ga = ga_for(settings, work_item_seed(seed, target));
        let objective = ReachingObjective::new(codec, scenario, vec![target], ga.length_sum_weight)?;
        let trace = evolve_with(&ga, &codec, &objective)?;
        let record = evaluate_champion(layout, &trace.best_genome, scenario, target, seed, settings.tolerance, &trace)?;
        Ok(RunOutcome { record, trace: Some(trace) })
    };
    attempt().unwrap_or_else(|e| RunOutcome { record: EvalRecord::failed(layout, tag, target, seed, e), trace: None })
}

fn run_generalist(
    layout: &str,
    tag: ConditionTag,
    scenario: &Scenario,
    targets: &[Vec2],
    seed: u64,
    settings: &RunSettings,
) -> Vec<RunOutcome> {
    let trained = (|| -> Result<GenerationTrace, ExperimentError> {
        let codec = codec_for(tag, scenario, settings)?;
        let ga = ga_for(settings, work_item_seed(seed, Vec2::ZERO));
        let objective = ReachingObjective::new(codec, scenario, targets.to_vec(), ga.length_sum_weight)?;
        Ok(evolve_with(&ga, &codec, &objective)?)
    })();
    targets
        .iter()
        .map(|&target| {
            let result = trained.clone().and_then(|trace| {
                let record = evaluate_champion(layout, &trace.best_genome, scenario, target, seed, settings.tolerance, &trace)?;
                Ok(RunOutcome { record, trace: Some(trace) })
            });
            result.unwrap_or_else(|e| RunOutcome { record: EvalRecord::failed(layout, tag, target, seed, e), trace: None })
        })
        .collect()
}

/// Runs the selected conditions on every `(target, seed)` pair.
///
/// Outcomes are ordered by target, then seed, then condition (in the order
/// given). Failures become records with the `error` field set; the batch is
/// never aborted.
pub fn run_conditions(
    layout: &str,
    conditions: &[ConditionTag],
    scenario: &Scenario,
    targets: &[Vec2],
    settings: &RunSettings,
) -> Vec<RunOutcome> {
    match settings.training {
        TrainingMode::Specialist => {
            let items: Vec<(Vec2, u64, ConditionTag)> = targets
                .iter()
                .flat_map(|&t| settings.seeds.iter().flat_map(move |&s| conditions.iter().map(move |&c| (t, s, c))))
                .collect();
            items
                .par_iter()
                .map(|&(target, seed, tag)| run_specialist(layout, tag, scenario, target, seed, settings))
                .collect()
        }
        TrainingMode::Generalist => {
            let items: Vec<(u64, ConditionTag)> =
                settings.seeds.iter().flat_map(|&s| conditions.iter().map(move |&c| (s, c))).collect();
            let per_run: Vec<Vec<RunOutcome>> = items
                .par_iter()
                .map(|&(seed, tag)| run_generalist(layout, tag, scenario, targets, seed, settings))
                .collect();
            // Re-key into (target, seed, condition) order.
            let mut out = Vec::with_capacity(targets.len() * items.len());
            for ti in 0..targets.len() {
                for run in &per_run {
                    out.push(run[ti].clone());
                }
            }
            out
        }
    }
}

/// Records for a single condition, ordered by target then seed.
pub fn run_condition(
    tag: ConditionTag,
    scenario: &Scenario,
    targets: &[Vec2],
    settings: &RunSettings,
) -> Vec<EvalRecord> {
    run_conditions("", &[tag], scenario, targets, settings).into_iter().map(|o| o.record).collect()
}

/// A named obstacle layout, optionally with an explicit target list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layout {
    pub name: String,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    /// Explicit targets; when absent the layout's lattice is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<Vec2>>,
}

impl Layout {
    pub fn scenario(&self, template: &Scenario) -> Scenario {
        Scenario { obstacles: self.obstacles.clone(), ..template.clone() }
    }

    /// Targets for this layout: the explicit list (each checked for
    /// feasibility) or the filtered lattice.
    pub fn targets(&self, scenario: &Scenario, spacing: f64) -> Result<Vec<Vec2>, ExperimentError> {
        let targets = match &self.targets {
            Some(list) => {
                if let Some(bad) = list.iter().find(|t| !scenario.target_is_feasible(**t)) {
                    return Err(ExperimentError::InfeasibleTarget(*bad));
                }
                list.clone()
            }
            None => generate_target_grid(scenario, &scenario.baseline, spacing)
                .map_err(|e| match e {
                    ExperimentError::NoFeasibleTargets { .. } => ExperimentError::NoFeasibleTargets { layout: self.name.clone() },
                    other => other,
                })?
                .targets,
        };
        if targets.is_empty() {
            return Err(ExperimentError::NoFeasibleTargets { layout: self.name.clone() });
        }
        Ok(targets)
    }
}

/// Per-layout outcome of a suite run.
#[derive(Debug, Clone)]
pub struct LayoutResult {
    pub layout: String,
    pub outcome: Result<Vec<RunOutcome>, ExperimentError>,
}

/// Runs the selected conditions on every layout. A layout that cannot be set
/// up (invalid scenario, no feasible targets) reports its error and the
/// others proceed.
pub fn run_layout_suite(
    layouts: &[Layout],
    template: &Scenario,
    spacing: f64,
    conditions: &[ConditionTag],
    settings: &RunSettings,
) -> Vec<LayoutResult> {
    layouts
        .iter()
        .map(|layout| {
            let outcome = (|| {
                let scenario = layout.scenario(template);
                scenario.validate()?;
                let targets = layout.targets(&scenario, spacing)?;
                Ok(run_conditions(&layout.name, conditions, &scenario, &targets, settings))
            })();
            LayoutResult { layout: layout.name.clone(), outcome }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    pub(crate) fn open_scenario() -> Scenario {
        Scenario {
            obstacles: vec![],
            baseline: Morphology::baseline(),
            initial_pose: [FRAC_PI_2, 0.0],
            horizon: 300,
            physical: PhysicalParams::default(),
            collision: CollisionConfig::default(),
            safety_margin: 0.02,
            early_exit_tolerance: None,
        }
    }

    #[test]
    fn empty_grid_matches_lattice_count() {
        // Oracle: integer lattice points (i, j) with i² + j² <= 36.
        let mut expected = 0;
        for i in -6i32..=6 {
            for j in -6i32..=6 {
                if i * i + j * j <= 36 {
                    expected += 1;
                }
            }
        }
        let s = open_scenario();
        let grid = generate_target_grid(&s, &s.baseline, 0.05).unwrap();
        assert_eq!(grid.targets.len(), expected);
        assert_eq!(expected, 113);
        assert!(grid.targets.contains(&Vec2::new(0.3, 0.0)));
        assert!(grid.targets.contains(&Vec2::new(0.1, 0.05)));
    }

    #[test]
    fn grid_excludes_disk_neighbourhood() {
        let mut s = open_scenario();
        let c = Obstacle::circle(Vec2::new(0.15, -0.1), 0.08);
        s.obstacles.push(c);
        let grid = generate_target_grid(&s, &s.baseline, 0.05).unwrap();
        for t in &grid.targets {
            assert!(crate::geometry::signed_distance(*t, &c) > 0.02);
        }
        assert!(grid.targets.len() < 113);
    }

    #[test]
    fn huge_spacing_leaves_origin() {
        let s = open_scenario();
        let grid = generate_target_grid(&s, &s.baseline, 1.0).unwrap();
        assert_eq!(grid.targets, vec![Vec2::ZERO]);
    }

    #[test]
    fn fully_blocked_grid_errors() {
        let mut s = open_scenario();
        s.obstacles.push(Obstacle::circle(Vec2::ZERO, 1.0));
        assert!(matches!(
            generate_target_grid(&s, &s.baseline, 0.05),
            Err(ExperimentError::NoFeasibleTargets { .. })
        ));
        assert!(generate_target_grid(&s, &s.baseline, 0.0).is_err());
    }

    #[test]
    fn scenario_rejects_blocked_start() {
        let mut s = open_scenario();
        assert!(s.validate().is_ok());
        s.obstacles.push(Obstacle::circle(Vec2::new(0.0, 0.2), 0.03));
        assert!(s.validate().is_err());
    }

    #[test]
    fn work_item_seed_depends_on_both_inputs() {
        let a = work_item_seed(1, Vec2::new(0.1, 0.0));
        assert_eq!(a, work_item_seed(1, Vec2::new(0.1, 0.0)));
        assert_ne!(a, work_item_seed(2, Vec2::new(0.1, 0.0)));
        assert_ne!(a, work_item_seed(1, Vec2::new(0.0, 0.1)));
    }
}
