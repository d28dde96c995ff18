use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fdrstab::exec::{with_threads, Execution};
use fdrstab::numerics::CovarianceSpec;
use fdrstab::procedures::BaseProcedure;
use fdrstab::simulation::{ScenarioConfig, SignalLaw, Simulator};
use fdrstab::stabilizer::{run_ensemble, stabilize, AggregationKind};

fn scenario() -> Simulator {
    Simulator::new(&ScenarioConfig {
        name: "bench".into(),
        n: 300,
        p: 100,
        s: 10,
        signal: SignalLaw::UniformTwoSided { lo: 0.3, hi: 1.0 },
        covariance: CovarianceSpec::CompoundSymmetry { rho: 0.5 },
        q: 0.1,
        m: 16,
        reps: 1,
        master_seed: 1,
    })
    .unwrap()
}

fn ensembles(c: &mut Criterion) {
    let sim = scenario();
    let data = sim.dataset(0);
    let bases = [
        BaseProcedure::data_splitting(),
        BaseProcedure::split_bh(),
        BaseProcedure::knockoff(sim.sigma()).unwrap(),
    ];
    let mut group = c.benchmark_group("ensemble_m16");
    group.sample_size(10);
    for base in &bases {
        for (label, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(base.name(), label), &exec, |b, &exec| {
                b.iter(|| with_threads(0, || run_ensemble(base, &data.x, &data.y, 0.1, 16, 7, exec).unwrap()))
            });
        }
    }
    group.finish();
}

fn aggregation(c: &mut Criterion) {
    let sim = scenario();
    let data = sim.dataset(0);
    let ens = run_ensemble(&BaseProcedure::data_splitting(), &data.x, &data.y, 0.1, 16, 7, Execution::default()).unwrap();
    let mut group = c.benchmark_group("stabilize");
    for kind in AggregationKind::ALL {
        group.bench_function(kind.name(), |b| b.iter(|| stabilize(&ens, kind).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, ensembles, aggregation);
criterion_main!(benches);
