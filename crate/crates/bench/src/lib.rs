//! Fixtures shared by the benchmarks.

use std::f64::consts::FRAC_PI_2;

use codesign_core::*;

/// A one-obstacle scenario with the default horizon.
pub fn scenario() -> Scenario {
    Scenario {
        obstacles: vec![Obstacle::circle(Vec2::new(-0.12, 0.18), 0.05), Obstacle::rect(Vec2::new(0.1, -0.05), Vec2::new(0.16, 0.1))],
        baseline: Morphology::baseline(),
        initial_pose: [FRAC_PI_2, 0.0],
        horizon: 300,
        physical: PhysicalParams::default(),
        collision: CollisionConfig::default(),
        safety_margin: 0.02,
        early_exit_tolerance: None,
    }
}

/// Co-design codec with the default hidden width.
pub fn codec(hidden: usize) -> Codec {
    Codec::new(Condition::CoDesign, Morphology::baseline().bounds, NetLayout::new(9, hidden).unwrap(), 1.0).unwrap()
}

/// A deterministic genome with small weights.
pub fn genome(codec: Codec) -> Genome {
    let genes = (0..codec.gene_len()).map(|i| 0.15 + 0.1 * ((i as f64) * 0.7).sin()).collect();
    Genome::new(codec, genes).unwrap()
}
