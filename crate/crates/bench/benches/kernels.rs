use criterion::{black_box, criterion_group, criterion_main, Criterion};
use mobius_core::explicit::{contour_integral, residue_quadrature, Integrand, ResidueKind};
use mobius_core::lfunc::{hardy_z, l_eval};
use mobius_core::sieve::{mobius_sieve, segmented_mertens};
use mobius_core::zeros::scan_zeros;
use mobius_core::{build_group, build_product, Complex64, DirichletCharacter, PrecisionPolicy};

fn odd_mod_4() -> DirichletCharacter {
    build_group(4).unwrap().characters()[1].clone()
}

fn evaluation(c: &mut Criterion) {
    let chi = odd_mod_4();
    let policy = PrecisionPolicy::default();
    c.bench_function("l_eval t=100", |b| b.iter(|| l_eval(black_box(Complex64::new(0.5, 100.0)), &chi, &policy).unwrap()));
    c.bench_function("l_eval t=1000", |b| b.iter(|| l_eval(black_box(Complex64::new(0.5, 1000.0)), &chi, &policy).unwrap()));
    c.bench_function("hardy_z t=100", |b| b.iter(|| hardy_z(black_box(100.0), &chi, &policy).unwrap()));
    let f = build_product(&build_group(6).unwrap().characters()[1]);
    c.bench_function("finite product eval", |b| b.iter(|| f.eval(black_box(Complex64::new(-0.3, 17.0)))));
}

fn sieves(c: &mut Criterion) {
    c.bench_function("mobius_sieve 1e6", |b| b.iter(|| mobius_sieve(black_box(1_000_000)).unwrap()));
    c.bench_function("segmented_mertens 1e6", |b| b.iter(|| segmented_mertens(black_box(1_000_000))));
}

fn scans(c: &mut Criterion) {
    let chi = odd_mod_4();
    let policy = PrecisionPolicy::default();
    let mut g = c.benchmark_group("scan");
    g.sample_size(10);
    g.bench_function("scan_zeros T=50", |b| b.iter(|| scan_zeros(&chi, black_box(50.0), &policy).unwrap()));
    g.finish();
}

fn quadrature(c: &mut Criterion) {
    let chi = odd_mod_4();
    let policy = PrecisionPolicy::default();
    let origin = Complex64::new(0.0, 0.0);
    c.bench_function("contour_integral exp(s)/s", |b| b.iter(|| contour_integral(|s| Ok(s.exp() / s), origin, 0.25).unwrap()));
    let mut g = c.benchmark_group("residue");
    g.sample_size(20);
    g.bench_function("s=0 residue of x^s/(s L)", |b| {
        b.iter(|| residue_quadrature(black_box(100.5), origin, 0.2, Integrand::Character(&chi), ResidueKind::SZero, &policy).unwrap())
    });
    g.finish();
}

criterion_group!(benches, evaluation, sieves, scans, quadrature);
criterion_main!(benches);
