//! Morphology-control co-design workbench for a planar two-link arm.
//!
//! The crate is organised bottom-up:
//!
//! - [`dynamics`]: forward kinematics and torque-driven RR arm dynamics.
//! - [`geometry`]: obstacles, signed distances and clearance-hinge costs.
//! - [`policy`]: feature construction, the single-hidden-layer controller and
//!   the two capacity-matching protocols.
//! - [`evolve`]: genome codec and the genetic algorithm.
//! - [`experiment`]: scenarios, target grids and paired condition runs.
//! - [`analysis`]: per-record metrics and paired aggregations.
//! - [`records`]: CSV/JSON persistence of evaluation records and genomes.

// Negated comparisons such as `!(x > 0.0)` are how validation rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod evolve;
pub mod experiment;
pub mod geometry;
pub mod policy;
pub mod records;
mod vec2;

pub use analysis::{AnalysisConfig, AnalysisError, DeltaMap, DeltaMetric};
pub use dynamics::{ArmState, DynamicsError, LinkBounds, Morphology, PhysicalParams, Trajectory};
pub use evolve::{Codec, EvolveError, GaConfig, Genome, GenerationTrace};
pub use experiment::{EvalRecord, ExperimentError, Scenario, TargetGrid};
pub use geometry::{CollisionConfig, Obstacle};
pub use policy::{Condition, ConditionTag, NetLayout, PolicyError, PolicyNet, Protocol};
pub use vec2::Vec2;
