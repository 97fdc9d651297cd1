use std::f64::consts::PI;

use codesign_core::dynamics::{rollout, EpisodeSpec};
use codesign_core::geometry::{collision_penalty, segment_clearance, signed_distance, step_cost, target_feasible};
use codesign_core::*;
use proptest::prelude::*;

fn pt() -> impl Strategy<Value = Vec2> {
    (-0.4..0.4f64, -0.4..0.4f64).prop_map(|(x, y)| Vec2::new(x, y))
}

fn obstacle() -> impl Strategy<Value = Obstacle> {
    prop_oneof![
        (pt(), 0.01..0.1f64).prop_map(|(c, r)| Obstacle::circle(c, r)),
        (pt(), 0.01..0.1f64, 0.01..0.1f64).prop_map(|(c, w, h)| Obstacle::rect(c - Vec2::new(w, h), c + Vec2::new(w, h))),
    ]
}

#[test]
fn signed_distance_examples() {
    let c = Obstacle::circle(Vec2::new(0.0, 0.0), 0.1);
    assert!((signed_distance(Vec2::new(0.3, 0.0), &c) - 0.2).abs() < 1e-15);
    assert!((signed_distance(Vec2::ZERO, &c) + 0.1).abs() < 1e-15);
    let r = Obstacle::rect(Vec2::new(-0.1, -0.05), Vec2::new(0.1, 0.05));
    assert!((signed_distance(Vec2::new(0.0, 0.0), &r) + 0.05).abs() < 1e-15);
    assert!((signed_distance(Vec2::new(0.4, 0.45), &r) - 0.5).abs() < 1e-12);
}

#[test]
fn segment_through_circle_is_negative() {
    let c = Obstacle::circle(Vec2::new(0.1, 0.0), 0.02);
    assert!(segment_clearance(Vec2::ZERO, Vec2::new(0.2, 0.0), &c) < 0.0);
    assert!((segment_clearance(Vec2::new(0.0, 0.05), Vec2::new(0.2, 0.05), &c) - 0.03).abs() < 1e-12);
}

#[test]
fn arm_in_free_space_has_zero_penalty() {
    let m = Morphology::baseline();
    let spec = EpisodeSpec { initial_pose: [PI / 2.0, 0.0], horizon: 20, physical: PhysicalParams::default(), early_exit_tolerance: None };
    let traj = rollout(&|_: &codesign_core::dynamics::Observation<'_>| [0.5, -0.5], &m, &spec, Vec2::ZERO).unwrap();
    let far = [Obstacle::circle(Vec2::new(5.0, 5.0), 0.1)];
    let s = collision_penalty(&traj, &m, &far, &CollisionConfig::default());
    assert_eq!(s.penalty, 0.0);
    assert!(!s.collided());
    let none = collision_penalty(&traj, &m, &[], &CollisionConfig::default());
    assert_eq!(none.penalty, 0.0);
}

#[test]
fn penalty_counts_initial_state() {
    let m = Morphology::baseline();
    // Arm starts along +y and touches a circle sitting on the link.
    let obs = [Obstacle::circle(Vec2::new(0.0, 0.1), 0.02)];
    let spec = EpisodeSpec { initial_pose: [PI / 2.0, 0.0], horizon: 0, physical: PhysicalParams::default(), early_exit_tolerance: None };
    let traj = rollout(&codesign_core::dynamics::ZeroController, &m, &spec, Vec2::ZERO).unwrap();
    let cfg = CollisionConfig::default();
    let s = collision_penalty(&traj, &m, &obs, &cfg);
    assert_eq!(s.violating_states, 1);
    assert_eq!(s.penalty, step_cost(&traj.states[0], &m, &obs, &cfg));
}

#[test]
fn targets_near_obstacles_are_infeasible() {
    let m = Morphology::baseline();
    let obs = [Obstacle::circle(Vec2::new(0.1, 0.1), 0.05)];
    assert!(!target_feasible(Vec2::new(0.1, 0.16), &obs, &m, 0.02));
    assert!(target_feasible(Vec2::new(0.1, 0.18), &obs, &m, 0.02));
    assert!(!target_feasible(Vec2::new(0.4, 0.0), &obs, &m, 0.02));
}

proptest! {
    #[test]
    fn clearance_is_symmetric(a in pt(), b in pt(), o in obstacle()) {
        prop_assert_eq!(segment_clearance(a, b, &o), segment_clearance(b, a, &o));
    }

    #[test]
    fn clearance_bounded_by_endpoints(a in pt(), b in pt(), o in obstacle()) {
        let c = segment_clearance(a, b, &o);
        prop_assert!(c <= signed_distance(a, &o) + 1e-12);
        prop_assert!(c <= signed_distance(b, &o) + 1e-12);
    }

    #[test]
    fn cost_grows_with_margin(
        q in (-PI..PI, -PI..PI),
        obs in prop::collection::vec(obstacle(), 1..4),
        m1 in 0.0..0.05f64,
        extra in 0.0..0.05f64,
    ) {
        let morph = Morphology::baseline();
        let s = ArmState::at_rest([q.0, q.1]);
        let lo = CollisionConfig { margin: m1, ..CollisionConfig::default() };
        let hi = CollisionConfig { margin: m1 + extra, ..CollisionConfig::default() };
        prop_assert!(step_cost(&s, &morph, &obs, &lo) <= step_cost(&s, &morph, &obs, &hi));
    }

    #[test]
    fn cost_zero_iff_clear(q in (-PI..PI, -PI..PI), obs in prop::collection::vec(obstacle(), 1..4)) {
        let morph = Morphology::baseline();
        let s = ArmState::at_rest([q.0, q.1]);
        let cfg = CollisionConfig::default();
        let clear = codesign_core::geometry::min_clearance(&s, &morph, &obs);
        prop_assert_eq!(step_cost(&s, &morph, &obs, &cfg) == 0.0, clear >= cfg.margin);
    }
}
