use codesign_core::records::{read_genome, read_records, read_trace, write_genome, write_records, write_trace};
use codesign_core::*;
use proptest::prelude::*;

fn value() -> impl Strategy<Value = f64> {
    prop_oneof![any::<f64>(), Just(f64::NAN), Just(f64::INFINITY), Just(-0.0), 0.0..1.0f64]
}

fn record() -> impl Strategy<Value = EvalRecord> {
    (
        "[a-z_]{1,8}",
        prop::bool::ANY,
        (value(), value(), any::<u64>()),
        (value(), value(), value(), value(), value(), value()),
        (any::<bool>(), 0usize..500, prop::collection::vec(value(), 0..6)),
        prop::option::of("[ -~]{1,20}"),
    )
        .prop_map(|(layout, co, (x, y, seed), (l1, l2, te, fe, cp, bl), (success, steps, trace), error)| EvalRecord {
            layout,
            condition: if co { ConditionTag::CoDesign } else { ConditionTag::ControlOnly },
            target: Vec2::new(x, y),
            seed,
            hidden: 16,
            param_count: 162,
            l1,
            l2,
            trajectory_error: te,
            final_error: fe,
            success,
            collision_penalty: cp,
            collision_steps: steps,
            collided: steps > 0,
            best_loss: bl,
            best_loss_trace: trace,
            error,
        })
}

/// NaN-aware equality on the float fields.
fn same(a: &EvalRecord, b: &EvalRecord) -> bool {
    let f = |x: f64, y: f64| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan());
    a.layout == b.layout
        && a.condition == b.condition
        && f(a.target.x, b.target.x)
        && f(a.target.y, b.target.y)
        && a.seed == b.seed
        && (a.hidden, a.param_count) == (b.hidden, b.param_count)
        && f(a.l1, b.l1)
        && f(a.l2, b.l2)
        && f(a.trajectory_error, b.trajectory_error)
        && f(a.final_error, b.final_error)
        && a.success == b.success
        && f(a.collision_penalty, b.collision_penalty)
        && (a.collision_steps, a.collided) == (b.collision_steps, b.collided)
        && f(a.best_loss, b.best_loss)
        && a.best_loss_trace.len() == b.best_loss_trace.len()
        && a.best_loss_trace.iter().zip(&b.best_loss_trace).all(|(x, y)| f(*x, *y))
        && a.error == b.error
}

proptest! {
    #[test]
    fn records_round_trip(records in prop::collection::vec(record(), 0..8)) {
        let mut buf = Vec::new();
        write_records(&mut buf, &records, "abc123").unwrap();
        let back = read_records(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), records.len());
        for (a, b) in records.iter().zip(&back) {
            prop_assert!(same(a, &b.record), "{:?} != {:?}", a, b.record);
            prop_assert_eq!(&b.config_hash, "abc123");
        }
    }
}

#[test]
fn trace_and_genome_round_trip() {
    let codec = Codec::new(Condition::CoDesign, [LinkBounds::default(); 2], NetLayout::new(9, 2).unwrap(), 1.0).unwrap();
    let cfg = GaConfig { population: 6, generations: 3, seed: 2, ..GaConfig::default() };
    let trace = codesign_core::evolve::evolve_with(&cfg, &codec, &codesign_core::evolve::QuadraticSurrogate).unwrap();

    let mut buf = Vec::new();
    write_trace(&mut buf, &trace).unwrap();
    let rows = read_trace(buf.as_slice()).unwrap();
    assert_eq!(rows.len(), 4);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.generation, i);
        assert_eq!(r.best_loss, trace.best_loss[i]);
        assert_eq!(r.champion_l1, trace.champion_morphology[i].l1);
    }

    let mut buf = Vec::new();
    write_genome(&mut buf, &trace.best_genome).unwrap();
    assert_eq!(read_genome(buf.as_slice()).unwrap(), trace.best_genome);
}

#[test]
fn foreign_header_is_rejected() {
    assert!(read_records("a,b,c\n1,2,3\n".as_bytes()).is_err());
}
