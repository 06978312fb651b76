use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use pisd_core::sllg::{Integrator, NoiseSettings, SimState};
use pisd_core::{BlochVector, CoherentConfiguration, EffectiveFieldModel, ModelKind, SpinSystemSpec, Vec3};

const STEPS: u64 = 1000;

fn heun_steps(c: &mut Criterion) {
    let spec = SpinSystemSpec::along_z(1.0, 1.0, 1.0, 0.5).unwrap();
    let start = CoherentConfiguration::new(
        BlochVector::new(Vec3::new(0.0, 0.6, 0.8)).unwrap(),
        BlochVector::new(Vec3::new(0.6, 0.0, 0.8)).unwrap(),
    );
    let mut group = c.benchmark_group("heun");
    group.throughput(Throughput::Elements(STEPS));
    for kind in [ModelKind::Classical, ModelKind::EigenOverlap, ModelKind::SeriesExact(4)] {
        let model = EffectiveFieldModel::for_spec(kind, &spec, 5.0).unwrap();
        let noise = NoiseSettings { temperature: 5.0, seed: 1, realization: 0, enabled: true };
        group.bench_function(BenchmarkId::from_parameter(kind), |b| {
            b.iter(|| {
                let mut it = Integrator::new(&model, 5e-15, noise).unwrap();
                let mut state = SimState::new(&start);
                it.run(&mut state, STEPS).unwrap();
                state
            })
        });
    }
    group.finish();
}

criterion_group!(benches, heun_steps);
criterion_main!(benches);
