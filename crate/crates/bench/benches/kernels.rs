use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lochier_core::bell::build_imix3;
use lochier_core::experiment::{Caps, DatasetSpec};
use lochier_core::linalg::{eigh, project_psd, SymMatrix};
use lochier_core::localset::{local_bound, lp_membership, DEFAULT_ENUM_CAP, DEFAULT_LP_CAP};
use lochier_core::moment::build;
use lochier_core::sdp::solve;
use lochier_core::{CorrelationTable, CorrelatorKey, GeneratingSet, Scenario, SolverConfig};

fn test_matrix(n: usize) -> SymMatrix {
    SymMatrix::from_fn(n, |i, j| {
        let (a, b) = (i.min(j) as f64, i.max(j) as f64);
        ((a + 1.0) * (b + 2.0)).sin() + if i == j { 0.5 } else { 0.0 }
    })
}

fn chsh() -> CorrelationTable {
    let mut t = CorrelationTable::new(Scenario::new(2, 2).unwrap());
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for (a, b, v) in [(0, 0, h), (0, 1, h), (1, 0, h), (1, 1, -h)] {
        t.insert(CorrelatorKey::new(vec![0, 1], vec![a, b]).unwrap(), v).unwrap();
    }
    t
}

fn eigen(c: &mut Criterion) {
    let mut g = c.benchmark_group("eigh");
    for n in [22, 56, 137] {
        let m = test_matrix(n);
        g.bench_with_input(BenchmarkId::new("full", n), &m, |b, m| b.iter(|| eigh(black_box(m)).unwrap()));
        g.bench_with_input(BenchmarkId::new("project_psd", n), &m, |b, m| {
            b.iter(|| project_psd(black_box(m)).unwrap())
        });
    }
    g.finish();
}

fn solves(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    let cfg = SolverConfig::default();

    let table = chsh();
    let gset = GeneratingSet::level(*table.scenario(), 2, 100).unwrap();
    let (_, inst) = build(&gset, &table).unwrap();
    g.bench_function("chsh_level2", |b| b.iter(|| solve(black_box(&inst), &cfg).unwrap()));

    let table = DatasetSpec::w(5).generate(&Caps::default()).unwrap();
    let gset = GeneratingSet::level(*table.scenario(), 2, 1000).unwrap();
    let (_, inst) = build(&gset, &table).unwrap();
    g.bench_function("w5_level2", |b| b.iter(|| solve(black_box(&inst), &cfg).unwrap()));
    g.bench_function("w5_build", |b| b.iter(|| build(black_box(&gset), &table).unwrap()));
    g.finish();
}

fn local(c: &mut Criterion) {
    let mut g = c.benchmark_group("local");
    for n in [4, 6, 8] {
        let f = build_imix3(n).unwrap();
        g.bench_with_input(BenchmarkId::new("imix3_bound", n), &f, |b, f| {
            b.iter(|| local_bound(black_box(f), DEFAULT_ENUM_CAP).unwrap())
        });
    }
    let table = DatasetSpec::w(4).generate(&Caps::default()).unwrap();
    g.bench_function("lp_membership_w4", |b| {
        b.iter(|| lp_membership(black_box(&table), DEFAULT_LP_CAP).unwrap())
    });
    g.finish();
}

criterion_group!(benches, eigen, solves, local);
criterion_main!(benches);
