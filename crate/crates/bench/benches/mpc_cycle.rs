use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use triwalk_core::dynamics::{step_plant, AxisState};
use triwalk_core::engine::{Engine, StepSource};
use triwalk_core::harness::Scenario;

/// Engine warmed up to `cycles` ticks of the tracking scenario, with the
/// plant state to feed next.
fn warmed(cycles: usize) -> (Engine, [AxisState; 2]) {
    let s = Scenario::tracking();
    let plan = s.plan().unwrap().unwrap();
    let mut engine = Engine::new(s.engine.clone(), StepSource::Plan(plan)).unwrap();
    engine.start_walking(0.0).unwrap();
    let mut x = engine.initial_state();
    for _ in 0..cycles {
        let y = [engine.model().output(&x[0]), engine.model().output(&x[1])];
        let out = engine.tick(&y).unwrap();
        for a in 0..2 {
            x[a] = step_plant(engine.model(), &x[a], &out.input[a], [0.0; 3]).unwrap();
        }
    }
    (engine, x)
}

fn mpc_cycle(c: &mut Criterion) {
    let mut group = c.benchmark_group("mpc_cycle");
    for (label, cycles) in [("single_support", 20), ("double_support", 50)] {
        let (engine, x) = warmed(cycles);
        let y = [engine.model().output(&x[0]), engine.model().output(&x[1])];
        group.bench_function(label, |b| {
            b.iter_batched(
                || engine.clone(),
                |mut e| e.tick(&y).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, mpc_cycle);
criterion_main!(benches);
