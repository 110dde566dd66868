//! Sequential versus rayon-parallel execution of the fan-out workloads.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qcwp::bundles::{basis_state, majsat_table_row};
use qcwp::lang::parse;
use qcwp::linalg::Predicate;
use qcwp::opsem::{explore, simulate, ExploreConfig};
use qcwp::par::Exec;
use qcwp::propcheck::{run_suite_with, Suite};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

// Three independent coins, each flipped until it lands on 0, so the
// exploration frontier branches at every guard.
const COINS: &str = "\
bool a, b, c;
a := H a; b := H b; c := H c;
while {P0, P1}[a] = 1 do { a := H a };
while {P0, P1}[b] = 1 do { b := H b };
while {P0, P1}[c] = 1 do { c := H c }
";

fn majsat(c: &mut Criterion) {
    let mut g = c.benchmark_group("majsat_row_n4_s3");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| majsat_table_row(4, 3, black_box(exec)).unwrap()));
    }
    g.finish();
}

fn suites(c: &mut Criterion) {
    let mut g = c.benchmark_group("suites");
    g.sample_size(10);
    for suite in [Suite::Duality, Suite::Equivalence] {
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(suite.name(), name), &exec, |b, &exec| {
                b.iter(|| run_suite_with(suite, 40, 7, exec))
            });
        }
    }
    g.finish();
}

fn opsem(c: &mut Criterion) {
    let p = parse(COINS).unwrap();
    let rho = basis_state("000").unwrap();
    let post = Predicate::identity(8);
    let mut g = c.benchmark_group("opsem");
    g.sample_size(10);
    for (name, exec) in MODES {
        let cfg = ExploreConfig { depth_cap: 60, exec, ..ExploreConfig::default() };
        g.bench_with_input(BenchmarkId::new("explore", name), &cfg, |b, cfg| {
            b.iter(|| explore(&p, &rho, cfg).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("simulate", name), &exec, |b, &exec| {
            b.iter(|| simulate(&p, &rho, Some(&post), 2000, 3, 200, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, majsat, suites, opsem);
criterion_main!(benches);
