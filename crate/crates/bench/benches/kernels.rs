use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use randmoll_core::maximal::maximal_operator;
use randmoll_core::transport::{mollify, test_function_catalog};
use randmoll_core::{AveragedKernel, FamilyKind, FamilySpec, MollifyPath, Profile, ProfileKind};

fn uniform_family(horizon: u32) -> FamilySpec {
    FamilySpec::new(FamilyKind::UniformVariance { s_max: 1.0 }, 1, horizon).unwrap()
}

fn kernel_eval(c: &mut Criterion) {
    let profile = Profile::normalized(ProfileKind::PowerTail { delta: 1.0 }, 1).unwrap();
    let k = AveragedKernel::auto(profile, uniform_family(1).member(1).unwrap()).unwrap();
    c.bench_function("kernel/eval-quadrature", |b| b.iter(|| k.eval(black_box(&[0.37])).unwrap()));
    c.bench_function("kernel/cumulative-1d", |b| b.iter(|| k.cumulative_1d(black_box(0.37)).unwrap()));
}

fn mollify_paths(c: &mut Criterion) {
    let profile = Profile::normalized(ProfileKind::Indicator, 1).unwrap();
    let family = uniform_family(4);
    let mut group = c.benchmark_group("mollify");
    group.sample_size(10);
    for res in [1024usize, 4096] {
        let f = test_function_catalog("cosine-packet", 1, &[-6.0], &[6.0], &[res]).unwrap();
        let k = AveragedKernel::auto(profile.clone(), family.member(1).unwrap()).unwrap();
        for path in [MollifyPath::Direct, MollifyPath::FastConvolution] {
            group.bench_with_input(BenchmarkId::new(path.name(), res), &f, |b, f| {
                b.iter(|| mollify(&k, f, path).unwrap())
            });
        }
    }
    group.finish();
}

fn maximal(c: &mut Criterion) {
    let profile = Profile::normalized(ProfileKind::Indicator, 1).unwrap();
    let family = uniform_family(16);
    let f = test_function_catalog("spike", 1, &[-4.0], &[4.0], &[2048]).unwrap();
    let mut group = c.benchmark_group("maximal");
    group.sample_size(10);
    group.bench_function("operator-J16", |b| {
        b.iter(|| maximal_operator(&family, &profile, &f, 16, MollifyPath::FastConvolution).unwrap())
    });
    group.finish();
}

criterion_group!(benches, kernel_eval, mollify_paths, maximal);
criterion_main!(benches);
