use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

use uhs_bench::{bump_model, grid, seed, wave_packet};
use uhs_core::fft::transform;
use uhs_core::solver::{apply_L, viscosity_semigroup};
use uhs_core::symbols::{FnSymbol, SymbolRef};
use uhs_core::{integrate_ray, ApplyMode, QuantizationPlan, SymbolClass};

fn fft(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft_2d");
    for m in [64, 128, 256] {
        let data = wave_packet(grid(m)).into_values();
        group.bench_with_input(BenchmarkId::from_parameter(m), &data, |b, data| {
            let mut buf = data.clone();
            b.iter(|| {
                transform(&mut buf, 2, m, false);
                transform(&mut buf, 2, m, true);
            })
        });
    }
    group.finish();
}

fn operator(c: &mut Criterion) {
    let model = bump_model();
    let mut group = c.benchmark_group("apply_L");
    for m in [64, 128] {
        let u = wave_packet(grid(m));
        group.bench_with_input(BenchmarkId::from_parameter(m), &u, |b, u| b.iter(|| apply_L(&model, 0.0, u, None).unwrap()));
    }
    group.finish();
    let u = wave_packet(grid(128));
    c.bench_function("viscosity_semigroup/128", |b| b.iter(|| viscosity_semigroup(&u, 1e-3, 1e-3)));
}

fn quantization(c: &mut Criterion) {
    let symbol: SymbolRef = Arc::new(FnSymbol::new(0.0, SymbolClass::Classical, |x, xi| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        Complex64::new((-r2 / 8.0).exp(), xi[0] / (1.0 + xi[0] * xi[0] + xi[1] * xi[1]).sqrt())
    }));
    let mut group = c.benchmark_group("quantized_apply");
    group.sample_size(10);
    for m in [16, 32] {
        let g = grid(m);
        let plan = QuantizationPlan::new(g, symbol.clone(), ApplyMode::Dense).unwrap();
        let fields = vec![wave_packet(g); 8];
        group.bench_with_input(BenchmarkId::new("batch8", m), &fields, |b, f| b.iter(|| plan.apply_many(f).unwrap()));
    }
    group.finish();
}

fn rays(c: &mut Criterion) {
    let model = bump_model();
    let start = seed();
    c.bench_function("integrate_ray/bump", |b| b.iter(|| integrate_ray(&model, &start, 200.0, 9.0, 1e-10).unwrap()));
}

criterion_group!(benches, fft, operator, quantization, rays);
criterion_main!(benches);
