use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mcm_bench::{random_homogeneous, random_matrix, tight, MERSENNE31};
use mcm_core::codim_oracle::{count_points, RankVarietySpec};
use mcm_core::hypersurfaces::all_rewrites;
use mcm_core::linalg::rank_of;
use mcm_core::polyring::PrimeField;
use mcm_core::symforms::{pointed_sample, EvaluatedSystem, PointSpec, Target};
use mcm_core::Selection;
use std::hint::black_box;

fn poly_mul(c: &mut Criterion) {
    let f = PrimeField::new(10007).unwrap();
    let mut g = c.benchmark_group("poly_mul");
    for terms in [10, 40, 160] {
        let a = random_homogeneous(f, 5, 6, terms, 1);
        let b = random_homogeneous(f, 5, 6, terms, 2);
        g.bench_with_input(BenchmarkId::from_parameter(terms), &terms, |bch, _| bch.iter(|| black_box(&a) * black_box(&b)));
    }
    g.finish();
}

fn rank(c: &mut Criterion) {
    let f = PrimeField::new(MERSENNE31).unwrap();
    let mut g = c.benchmark_group("rank");
    for n in [4, 8, 16] {
        let m = random_matrix(f, n, 2 * n, 3);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |bch, _| bch.iter(|| rank_of(&f, black_box(&m))));
    }
    g.finish();
}

fn points(c: &mut Criterion) {
    let mut g = c.benchmark_group("count_points");
    g.sample_size(10);
    for q in [3, 5, 7] {
        let f = PrimeField::new(q).unwrap();
        let spec = RankVarietySpec::X { p: 2, l: 1 };
        g.bench_with_input(BenchmarkId::new("X(2,1)", q), &q, |bch, _| bch.iter(|| count_points(&spec, &f, 1 << 30, 0).unwrap()));
    }
    g.finish();
}

fn omega_hat(c: &mut Criterion) {
    let f = PrimeField::new(MERSENNE31).unwrap();
    let s = tight(3, 2, 0);
    let ps = pointed_sample(&s, f, 5, 0, &PointSpec::new(vec![], Target::Natural)).unwrap();
    let rws = all_rewrites(&ps.system, &[]).unwrap();
    let fs = rws[1].fermat().unwrap();
    let ev = EvaluatedSystem::new(f, &fs, &ps.jet);
    let sel = Selection::standard(s.config().e(), vec![0]);
    c.bench_function("omega_hat(3,2,0)", |bch| bch.iter(|| ev.omega_hat(black_box(&sel), 1).unwrap()));
}

criterion_group!(benches, poly_mul, rank, points, omega_hat);
criterion_main!(benches);
