use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rectikernel_core::statistics::{
    permutation_and_curvature_sums, triple_sum, triple_sum_montecarlo, TripleSumOptions,
};
use rectikernel_core::{DiscreteMeasure, GeneratorKind, GeneratorSpec, KernelId, Point2};

fn cloud(n: usize) -> DiscreteMeasure {
    GeneratorSpec {
        kind: GeneratorKind::LipschitzGraph {
            u0: 0.0,
            u1: 1.0,
            slope: 0.4,
            frequency: 2.0,
            amplitude: 0.01,
        },
        n_points: n,
        seed: 3,
        weight_rule: None,
        total_mass: 1.0,
    }
    .generate()
    .unwrap()
}

fn bench_sums(c: &mut Criterion) {
    let k1 = KernelId::coordinate_power(1).unwrap();
    let mut group = c.benchmark_group("exact_triple_sum");
    group.sample_size(10);
    for n in [128usize, 256, 512] {
        let mu = cloud(n);
        group.bench_with_input(BenchmarkId::new("p1", n), &mu, |b, mu| {
            b.iter(|| triple_sum(k1, mu, &TripleSumOptions::default()).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("fused_p1_c2", n), &mu, |b, mu| {
            b.iter(|| {
                permutation_and_curvature_sums(k1, mu, &TripleSumOptions::default()).unwrap()
            })
        });
    }
    group.finish();

    let mu = cloud(2048);
    let mut group = c.benchmark_group("montecarlo");
    group.sample_size(10);
    group.bench_function("mc_100k_samples", |b| {
        b.iter(|| triple_sum_montecarlo(k1, &mu, &TripleSumOptions::default(), 100_000, 7).unwrap())
    });
    group.finish();

    let mut group = c.benchmark_group("spatial_index");
    let mu = cloud(4096);
    let ball = rectikernel_core::Ball {
        center: Point2::new(0.5, 0.2),
        radius: 0.1,
    };
    group.bench_function("mass_in_ball_4096", |b| b.iter(|| mu.mass_in_ball(&ball)));
    group.finish();
}

criterion_group!(benches, bench_sums);
criterion_main!(benches);
