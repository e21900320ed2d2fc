use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use unirec::constrained::{sgm_configure, sgm_run};
use unirec::oracle::{ConstrainedLinear, NoisyQuadratic};
use unirec::{
    estimator_init, estimator_step, BoundEnvelope, Case, ConstrainedSetup, EstimatorConfig, Family, GeometrySpec, OutputNorm, Schedule,
    StochasticOracle, StreamKey,
};

fn estimator(c: &mut Criterion) {
    let oracle = NoisyQuadratic::diagonal(&[1.0; 16], 0.1, 0.05, 4.0, 1.0).unwrap();
    let w = vec![0.2; 16];
    let mut group = c.benchmark_group("estimator_step");
    for family in [Family::ZerothOrder, Family::FirstOrder, Family::SecondOrder] {
        let config = EstimatorConfig {
            family,
            beta: 0.9,
            schedule: Schedule::Never,
            batch_size: 1,
            step_size: 0.01,
            horizon: 1 << 20,
            norm: OutputNorm::Euclidean,
        };
        let key = StreamKey::new(1, 0);
        let (mut state, _) = estimator_init(&config, &oracle, &w, &key).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(family.index()), &config, |b, cfg| {
            b.iter(|| estimator_step(&mut state, black_box(&w), cfg, &oracle, &key).unwrap())
        });
    }
    group.finish();
}

fn prox(c: &mut Criterion) {
    let d = 64;
    let u: Vec<f64> = (0..d).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut group = c.benchmark_group("prox_step");
    for (name, g) in [
        ("euclidean", GeometrySpec::euclidean(d).unwrap()),
        ("box", GeometrySpec::cube(d, -1.0, 1.0).unwrap()),
        ("simplex", GeometrySpec::simplex(d).unwrap()),
    ] {
        let w = g.center();
        group.bench_function(name, |b| b.iter(|| g.prox_step(black_box(&w), black_box(&u), 0.1).unwrap()));
    }
    group.finish();
}

fn envelope(c: &mut Criterion) {
    let oracle = NoisyQuadratic::diagonal(&[1.0; 8], 0.1, 0.05, 2.0, 1.0).unwrap();
    let config = EstimatorConfig {
        family: Family::SecondOrder,
        beta: 1.0,
        schedule: Schedule::Probabilistic { p: 0.01 },
        batch_size: 100,
        step_size: 0.01,
        horizon: 10_000,
        norm: OutputNorm::Euclidean,
    };
    c.bench_function("envelope_build_and_eval", |b| {
        b.iter(|| {
            let env = BoundEnvelope::for_config(black_box(&config), oracle.constants(), 0.1, 1.0).unwrap();
            env.eval(black_box(5000))
        })
    });
}

fn switching(c: &mut Criterion) {
    let geometry = GeometrySpec::cube(4, -1.0, 1.0).unwrap();
    let problem = ConstrainedLinear::new(vec![1.0, -0.5, 0.3, 0.2], vec![1.0, 1.0, 0.0, -0.5], -0.3, 0.2, 0.05, geometry).unwrap();
    let setup = ConstrainedSetup::new(problem).unwrap();
    let plan = sgm_configure(Case::Probabilistic, Family::FirstOrder, &setup.constants(), 1000, 0.05).unwrap();
    let mut group = c.benchmark_group("sgm_run");
    group.sample_size(20);
    group.bench_function("case2_family2_T1000", |b| {
        b.iter(|| sgm_run(&setup, &plan.config, plan.eta, 0.05, black_box(&StreamKey::new(2, 0))).unwrap())
    });
    group.finish();
}

criterion_group!(benches, estimator, prox, envelope, switching);
criterion_main!(benches);
