use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eisen_bench::gaussian_key;
use eisen_core::cocycle::{dedekind_sum, DedekindKey};
use eisen_core::field::{QuadField, QuadIdeal};
use eisen_core::kronecker::{ke_accel, ke_direct, Evaluator};
use eisen_core::Tolerance;

fn series(c: &mut Criterion) {
    let mut g = c.benchmark_group("ke_accel_s0");
    for prec in [128u32, 256, 512] {
        let t = Tolerance::new(2f64.powi(24 - prec as i32), prec).unwrap();
        let key = gaussian_key(3, 1, 0, prec);
        g.bench_with_input(BenchmarkId::from_parameter(prec), &key, |b, k| b.iter(|| ke_accel(k, &t).unwrap()));
    }
    g.finish();

    let t = Tolerance::new(1e-60, 256).unwrap();
    let key = gaussian_key(3, 1, 2, 256);
    c.bench_function("ke_accel_s2_256", |b| b.iter(|| ke_accel(&key, &t).unwrap()));
    c.bench_function("ke_direct_s2_256", |b| b.iter(|| ke_direct(&key, &t).unwrap()));
}

fn dedekind(c: &mut Criterion) {
    let k = QuadField::new(-1).unwrap();
    let key = DedekindKey {
        i: vec![2, 0],
        j: vec![0, 1],
        z: vec![k.elem((1, 3), (1, 5)), k.elem((2, 7), 0)],
        a: vec![vec![k.one(), k.elem(1, 1)], vec![k.zero(), k.elem(2, 1)]],
        base: QuadIdeal::unit(k),
        smooth: Some(QuadIdeal::new(k.elem(1, 1)).unwrap()),
    };
    let mut g = c.benchmark_group("dedekind_sum_n2");
    g.sample_size(10);
    // a fresh evaluator per iteration so the memo does not hide the work
    g.bench_function("cold", |b| b.iter(|| dedekind_sum(&key, &Evaluator::new(128, 1e-30).unwrap()).unwrap()));
    g.finish();
}

criterion_group!(benches, series, dedekind);
criterion_main!(benches);
