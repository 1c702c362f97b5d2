use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lemnis::kernels::KernelHandle;
use lemnis::sampler::{default_region, sample_projection_dpp, sample_radial};
use lemnis::EnsembleParams;

fn sampler(c: &mut Criterion) {
    let h = KernelHandle::hat(&EnsembleParams::new(0.5, 1.0, 30).unwrap()).unwrap();
    let region = default_region(&h);
    let mut g = c.benchmark_group("sampler");
    g.sample_size(20);
    g.bench_function("projection N=30", |b| b.iter(|| sample_projection_dpp(&h, black_box(7), region)));
    g.bench_function("radial N=200", |b| b.iter(|| sample_radial(black_box(0.5), 200, 1, 7)));
    g.finish();
}

criterion_group!(benches, sampler);
criterion_main!(benches);
