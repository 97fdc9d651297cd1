//! Planar revolute-revolute arm: kinematics, dynamics and rollouts.
//!
//! The arm moves in the horizontal plane (no gravity) with its base at the
//! origin. Each link is a uniform rod whose mass scales with its length, so
//! morphology changes feed straight into the inertia matrix.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite arm state or torque at step {step}")]
    NonFinite { step: usize },
    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),
    #[error("invalid morphology: {0}")]
    InvalidMorphology(String),
}

/// Closed interval of admissible lengths for one link, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBounds {
    pub min: f64,
    pub max: f64,
}

impl LinkBounds {
    pub const fn new(min: f64, max: f64) -> Self {
        LinkBounds { min, max }
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.min, self.max)
    }

    pub fn contains(&self, value: f64) -> bool {
        (self.min..=self.max).contains(&value)
    }
}

impl Default for LinkBounds {
    fn default() -> Self {
        LinkBounds::new(0.05, 0.30)
    }
}

/// Link lengths together with their box bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Morphology {
    pub l1: f64,
    pub l2: f64,
    #[serde(default = "default_bounds")]
    pub bounds: [LinkBounds; 2],
}

fn default_bounds() -> [LinkBounds; 2] {
    [LinkBounds::default(); 2]
}

impl Morphology {
    /// Builds a morphology, checking the bounds and that both lengths lie in them.
    pub fn new(l1: f64, l2: f64, bounds: [LinkBounds; 2]) -> Result<Self, DynamicsError> {
        let m = Morphology { l1, l2, bounds };
        m.validate()?;
        Ok(m)
    }

    /// The default baseline arm: two 0.15 m links, each bounded to [0.05, 0.30] m.
    pub fn baseline() -> Self {
        Morphology { l1: 0.15, l2: 0.15, bounds: default_bounds() }
    }

    /// Component-wise clamp of `raw` into `bounds`.
    pub fn projected(raw: [f64; 2], bounds: [LinkBounds; 2]) -> Self {
        Morphology { l1: bounds[0].clamp(raw[0]), l2: bounds[1].clamp(raw[1]), bounds }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        for (i, b) in self.bounds.iter().enumerate() {
            if !(b.min > 0.0 && b.min <= b.max && b.max.is_finite()) {
                return Err(DynamicsError::InvalidMorphology(format!(
                    "link {} bounds [{}, {}] must satisfy 0 < min <= max",
                    i + 1,
                    b.min,
                    b.max
                )));
            }
        }
        for (i, (l, b)) in [self.l1, self.l2].iter().zip(&self.bounds).enumerate() {
            if !b.contains(*l) {
                return Err(DynamicsError::InvalidMorphology(format!(
                    "link {} length {} outside [{}, {}]",
                    i + 1,
                    l,
                    b.min,
                    b.max
                )));
            }
        }
        Ok(())
    }

    pub fn lengths(&self) -> [f64; 2] {
        [self.l1, self.l2]
    }

    pub fn reach(&self) -> f64 {
        self.l1 + self.l2
    }
}

/// Joint angles (rad) and joint velocities (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmState {
    pub q1: f64,
    pub q2: f64,
    pub dq1: f64,
    pub dq2: f64,
}

impl ArmState {
    pub fn at_rest(q: [f64; 2]) -> Self {
        ArmState { q1: q[0], q2: q[1], dq1: 0.0, dq2: 0.0 }
    }

    pub fn q(&self) -> [f64; 2] {
        [self.q1, self.q2]
    }

    pub fn is_finite(&self) -> bool {
        self.q1.is_finite() && self.q2.is_finite() && self.dq1.is_finite() && self.dq2.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalParams {
    /// Viscous joint damping, N·m·s/rad (same for both joints).
    pub damping: f64,
    /// Linear mass density of the links, kg/m.
    pub density: f64,
    /// Per-joint torque bound, N·m.
    pub torque_limit: f64,
    /// Control period, s.
    pub dt: f64,
    /// Integration sub-intervals per control period.
    pub substeps: usize,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams { damping: 0.05, density: 1.0, torque_limit: 1.0, dt: 0.01, substeps: 1 }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |msg: &str| Err(DynamicsError::InvalidParams(msg.to_string()));
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return bad("damping must be finite and >= 0");
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return bad("density must be finite and > 0");
        }
        if !(self.torque_limit > 0.0 && self.torque_limit.is_finite()) {
            return bad("torque_limit must be finite and > 0");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be finite and > 0");
        }
        if self.substeps == 0 {
            return bad("substeps must be >= 1");
        }
        Ok(())
    }

    pub fn clamp_torque(&self, tau: [f64; 2]) -> [f64; 2] {
        let lim = self.torque_limit;
        [tau[0].clamp(-lim, lim), tau[1].clamp(-lim, lim)]
    }
}

/// Elbow and end-effector positions for joint angles `q`.
pub fn forward_kinematics(morph: &Morphology, q: [f64; 2]) -> (Vec2, Vec2) {
    let (s1, c1) = q[0].sin_cos();
    let (s12, c12) = (q[0] + q[1]).sin_cos();
    let elbow = Vec2::new(morph.l1 * c1, morph.l1 * s1);
    let ee = elbow + Vec2::new(morph.l2 * c12, morph.l2 * s12);
    (elbow, ee)
}

/// Symmetric 2×2 joint-space inertia matrix stored as `[m11, m12, m22]`.
pub fn mass_matrix(morph: &Morphology, density: f64, q2: f64) -> [f64; 3] {
    let (l1, l2) = (morph.l1, morph.l2);
    let (m1, m2) = (density * l1, density * l2);
    let c2 = q2.cos();
    let m22 = m2 * l2 * l2 / 3.0;
    let m12 = m22 + 0.5 * m2 * l1 * l2 * c2;
    let m11 = m1 * l1 * l1 / 3.0 + m2 * l1 * l1 + m22 + m2 * l1 * l2 * c2;
    [m11, m12, m22]
}

/// Kinetic energy `½ q̇ᵀ M(q) q̇`.
pub fn kinetic_energy(morph: &Morphology, density: f64, state: &ArmState) -> f64 {
    let [m11, m12, m22] = mass_matrix(morph, density, state.q2);
    let (v1, v2) = (state.dq1, state.dq2);
    0.5 * (m11 * v1 * v1 + 2.0 * m12 * v1 * v2 + m22 * v2 * v2)
}

/// Advances the arm by one control period.
///
/// Each sub-interval `h` performs a semi-implicit Euler update with the
/// viscous damping taken implicitly:
///
/// `(M + h B) q̇' = M q̇ + h (τ − C(q, q̇) q̇)`, then `q' = q + h q̇'`.
///
/// The caller is expected to pass a torque already clamped to the limit.
pub fn step(
    state: &ArmState,
    torque: [f64; 2],
    morph: &Morphology,
    params: &PhysicalParams,
) -> Result<ArmState, DynamicsError> {
    if !state.is_finite() || !torque[0].is_finite() || !torque[1].is_finite() {
        return Err(DynamicsError::NonFinite { step: 0 });
    }
    let h = params.dt / params.substeps as f64;
    let b = params.damping;
    let mut s = *state;
    for _ in 0..params.substeps {
        let [m11, m12, m22] = mass_matrix(morph, params.density, s.q2);
        let coriolis = 0.5 * params.density * morph.l2 * morph.l1 * morph.l2 * s.q2.sin();
        let c1 = -coriolis * (2.0 * s.dq1 * s.dq2 + s.dq2 * s.dq2);
        let c2 = coriolis * s.dq1 * s.dq1;

        let r1 = m11 * s.dq1 + m12 * s.dq2 + h * (torque[0] - c1);
        let r2 = m12 * s.dq1 + m22 * s.dq2 + h * (torque[1] - c2);

        let a11 = m11 + h * b;
        let a22 = m22 + h * b;
        let det = a11 * a22 - m12 * m12;
        let dq1 = (a22 * r1 - m12 * r2) / det;
        let dq2 = (a11 * r2 - m12 * r1) / det;

        s = ArmState { q1: s.q1 + h * dq1, q2: s.q2 + h * dq2, dq1, dq2 };
        if !s.is_finite() {
            return Err(DynamicsError::NonFinite { step: 0 });
        }
    }
    Ok(s)
}

/// What a controller sees at each control step.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub state: &'a ArmState,
    pub ee: Vec2,
    pub target: Vec2,
    pub morph: &'a Morphology,
    pub step: usize,
    pub horizon: usize,
}

/// Anything that maps an observation to a pair of joint torques.
pub trait Controller {
    fn act(&self, obs: &Observation<'_>) -> [f64; 2];
}

/// Always outputs zero torque.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroController;

impl Controller for ZeroController {
    fn act(&self, _obs: &Observation<'_>) -> [f64; 2] {
        [0.0, 0.0]
    }
}

impl<F> Controller for F
where
    F: Fn(&Observation<'_>) -> [f64; 2],
{
    fn act(&self, obs: &Observation<'_>) -> [f64; 2] {
        self(obs)
    }
}

/// Episode settings shared by every rollout of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSpec {
    pub initial_pose: [f64; 2],
    pub horizon: usize,
    pub physical: PhysicalParams,
    /// When set, the episode stops as soon as the end effector is strictly
    /// closer than this to the target.
    pub early_exit_tolerance: Option<f64>,
}

/// States, end-effector positions and applied torques of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<ArmState>,
    pub ee_positions: Vec<Vec2>,
    pub torques: Vec<[f64; 2]>,
}

impl Trajectory {
    /// Number of control steps taken.
    pub fn steps(&self) -> usize {
        self.torques.len()
    }

    pub fn final_ee(&self) -> Vec2 {
        *self.ee_positions.last().expect("trajectory holds the initial state")
    }
}

/// Simulates one episode from the fixed initial pose at rest.
pub fn rollout<C: Controller + ?Sized>(
    controller: &C,
    morph: &Morphology,
    episode: &EpisodeSpec,
    target: Vec2,
) -> Result<Trajectory, DynamicsError> {
    let params = &episode.physical;
    let horizon = episode.horizon;
    let mut states = Vec::with_capacity(horizon + 1);
    let mut ee_positions = Vec::with_capacity(horizon + 1);
    let mut torques = Vec::with_capacity(horizon);

    let mut state = ArmState::at_rest(episode.initial_pose);
    let mut ee = forward_kinematics(morph, state.q()).1;
    states.push(state);
    ee_positions.push(ee);

    for t in 0..horizon {
        if let Some(tol) = episode.early_exit_tolerance {
            if ee.distance(target) < tol {
                break;
            }
        }
        let obs = Observation { state: &state, ee, target, morph, step: t, horizon };
        let raw = controller.act(&obs);
        if !raw[0].is_finite() || !raw[1].is_finite() {
            return Err(DynamicsError::NonFinite { step: t });
        }
        let tau = params.clamp_torque(raw);
        state = step(&state, tau, morph, params).map_err(|_| DynamicsError::NonFinite { step: t })?;
        ee = forward_kinematics(morph, state.q()).1;
        states.push(state);
        ee_positions.push(ee);
        torques.push(tau);
    }
    Ok(Trajectory { states, ee_positions, torques })
}
