//! Obstacles, signed distances and the clearance-hinge collision cost.

use serde::{Deserialize, Serialize};

use crate::dynamics::{forward_kinematics, ArmState, Morphology, Trajectory};
use crate::Vec2;

/// Sample count along a link when measuring clearance to a rectangle.
pub const RECT_SEGMENT_SAMPLES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Obstacle {
    Circle { center: Vec2, radius: f64 },
    /// Axis-aligned rectangle given by its lower-left and upper-right corners.
    Rect { min: Vec2, max: Vec2 },
}

impl Obstacle {
    pub fn circle(center: Vec2, radius: f64) -> Self {
        Obstacle::Circle { center, radius }
    }

    pub fn rect(min: Vec2, max: Vec2) -> Self {
        Obstacle::Rect { min, max }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            Obstacle::Circle { center, radius } => {
                if !center.is_finite() || !(radius > 0.0 && radius.is_finite()) {
                    return Err(format!("circle at {center:?} needs a finite radius > 0, got {radius}"));
                }
            }
            Obstacle::Rect { min, max } => {
                if !min.is_finite() || !max.is_finite() || !(min.x < max.x && min.y < max.y) {
                    return Err(format!("rectangle {min:?}..{max:?} needs min < max component-wise"));
                }
            }
        }
        Ok(())
    }
}

/// Exact Euclidean signed distance: positive outside, negative inside.
pub fn signed_distance(p: Vec2, obs: &Obstacle) -> f64 {
    match *obs {
        Obstacle::Circle { center, radius } => p.distance(center) - radius,
        Obstacle::Rect { min, max } => {
            let center = (min + max) * 0.5;
            let half = (max - min) * 0.5;
            let dx = (p.x - center.x).abs() - half.x;
            let dy = (p.y - center.y).abs() - half.y;
            let outside = Vec2::new(dx.max(0.0), dy.max(0.0)).norm();
            let inside = dx.max(dy).min(0.0);
            outside + inside
        }
    }
}

/// Closest point to `p` on the segment `ab`.
pub fn closest_point_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return a;
    }
    let s = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    a.lerp(b, s)
}

/// Minimum signed distance from any point of segment `ab` to `obs`.
///
/// Circles are handled analytically. Rectangles use
/// [`RECT_SEGMENT_SAMPLES`] evenly spaced samples including both endpoints,
/// so the result may overestimate the true clearance by up to `|ab| / 31`.
pub fn segment_clearance(a: Vec2, b: Vec2, obs: &Obstacle) -> f64 {
    match *obs {
        Obstacle::Circle { center, .. } => {
            // The closest point is symmetric in (a, b) only up to rounding of
            // the projection parameter, so always project from the same end.
            let (a, b) = ordered(a, b);
            signed_distance(closest_point_on_segment(center, a, b), obs)
        }
        Obstacle::Rect { .. } => {
            let (a, b) = ordered(a, b);
            let n = RECT_SEGMENT_SAMPLES - 1;
            (0..=n)
                .map(|i| signed_distance(a.lerp(b, i as f64 / n as f64), obs))
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// Orders endpoints lexicographically so clearance is exactly symmetric.
fn ordered(a: Vec2, b: Vec2) -> (Vec2, Vec2) {
    if (a.x, a.y) <= (b.x, b.y) {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollisionConfig {
    /// Clearance below which the hinge becomes active, m.
    pub margin: f64,
    /// Hinge exponent, 1 or 2.
    pub exponent: u32,
    /// Weight of the accumulated cost in the fitness.
    pub lambda_coll: f64,
}

impl Default for CollisionConfig {
    fn default() -> Self {
        CollisionConfig { margin: 0.01, exponent: 2, lambda_coll: 10.0 }
    }
}

impl CollisionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(format!("collision margin must be finite and >= 0, got {}", self.margin));
        }
        if !(self.lambda_coll >= 0.0 && self.lambda_coll.is_finite()) {
            return Err(format!("lambda_coll must be finite and >= 0, got {}", self.lambda_coll));
        }
        if !matches!(self.exponent, 1 | 2) {
            return Err(format!("collision exponent must be 1 or 2, got {}", self.exponent));
        }
        Ok(())
    }

    fn hinge(&self, clearance: f64) -> f64 {
        let v = (self.margin - clearance).max(0.0);
        match self.exponent {
            1 => v,
            _ => v * v,
        }
    }
}

/// The two link segments `(base, elbow)` and `(elbow, ee)` for a pose.
pub fn link_segments(state: &ArmState, morph: &Morphology) -> [(Vec2, Vec2); 2] {
    let (elbow, ee) = forward_kinematics(morph, state.q());
    [(Vec2::ZERO, elbow), (elbow, ee)]
}

/// Smallest clearance between any link and any obstacle (`+∞` when there are none).
pub fn min_clearance(state: &ArmState, morph: &Morphology, obstacles: &[Obstacle]) -> f64 {
    let links = link_segments(state, morph);
    obstacles
        .iter()
        .flat_map(|o| links.iter().map(move |&(a, b)| segment_clearance(a, b, o)))
        .fold(f64::INFINITY, f64::min)
}

/// Per-step cost: hinge on `margin − clearance` summed over links × obstacles.
pub fn step_cost(state: &ArmState, morph: &Morphology, obstacles: &[Obstacle], cfg: &CollisionConfig) -> f64 {
    let links = link_segments(state, morph);
    let mut cost = 0.0;
    for obs in obstacles {
        for &(a, b) in &links {
            cost += cfg.hinge(segment_clearance(a, b, obs));
        }
    }
    cost
}

/// Accumulated collision cost of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CollisionSummary {
    /// Sum of step costs over every recorded state (initial state included).
    pub penalty: f64,
    /// Number of states with a positive step cost.
    pub violating_states: usize,
}

impl CollisionSummary {
    pub fn collided(&self) -> bool {
        self.violating_states > 0
    }
}

pub fn collision_penalty(
    traj: &Trajectory,
    morph: &Morphology,
    obstacles: &[Obstacle],
    cfg: &CollisionConfig,
) -> CollisionSummary {
    let mut summary = CollisionSummary::default();
    for state in &traj.states {
        let c = step_cost(state, morph, obstacles, cfg);
        if c > 0.0 {
            summary.penalty += c;
            summary.violating_states += 1;
        }
    }
    summary
}

/// Whether `x` is a valid reaching target: within the baseline reach and
/// strictly further than `safety` from every obstacle.
pub fn target_feasible(x: Vec2, obstacles: &[Obstacle], morph: &Morphology, safety: f64) -> bool {
    x.norm() <= morph.reach() && obstacles.iter().all(|o| signed_distance(x, o) > safety)
}
