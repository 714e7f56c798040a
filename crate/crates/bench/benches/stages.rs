use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use tree_gopt::backend::solve_milp;
use tree_gopt::encoder::{assemble, encode_inequality, EncoderMode};
use tree_gopt::problem::Objective;
use tree_gopt::repair::{expr_gradient, repair, PgdParams};
use tree_gopt::sampler::{olh_design, GaParams};
use tree_gopt::tree::{train_classifier, TreeParams};
use tree_gopt_bench::{problem, surrogate, DEMO_MIO_POINT};

fn sampling(c: &mut Criterion) {
    c.bench_function("olh 400x3", |b| b.iter(|| olh_design(black_box(400), 3, 1, GaParams::default())));
    c.bench_function("olh 700x7", |b| b.iter(|| olh_design(black_box(700), 7, 1, GaParams::default())));
}

fn training(c: &mut Criterion) {
    let p = problem("demo");
    let s = surrogate(&p, 1);
    let data = &s.models[0].data;
    let params = TreeParams::classifier();
    c.bench_function("train g1 classifier", |b| b.iter(|| train_classifier(black_box(data), &params, 2).unwrap()));
}

fn encoding(c: &mut Criterion) {
    let p = problem("demo");
    let s = surrogate(&p, 1);
    let trees: Vec<_> = s.models.iter().map(|m| (m.tree.clone().unwrap(), m.scope.clone())).collect();
    for (name, mode) in [("bigm-free", EncoderMode::BigMFree), ("bigm", EncoderMode::BigM)] {
        c.bench_function(&format!("encode and assemble demo ({name})"), |b| {
            b.iter(|| {
                let frags: Vec<_> = trees.iter().map(|(t, sc)| encode_inequality(t, sc, mode).unwrap()).collect();
                assemble(&s.bounded, &s.bounded.lower(), &s.bounded.upper(), &frags, &[]).unwrap()
            })
        });
    }
    c.bench_function("solve demo surrogate milp", |b| {
        b.iter(|| solve_milp(black_box(&s.assembly.milp), Default::default()))
    });
}

fn repairing(c: &mut Criterion) {
    let p = problem("demo");
    c.bench_function("repair demo from mio point", |b| {
        b.iter(|| repair(&p, black_box(&DEMO_MIO_POINT), &PgdParams::default()).unwrap())
    });
    let sr = problem("speed_reducer");
    let Objective::Nonlinear { expr, active } = &sr.objective else {
        unreachable!("speed reducer objective is nonlinear")
    };
    let x = [3.5, 0.7, 17.0, 7.3, 7.71532, 3.35021, 5.28665];
    c.bench_function("speed reducer objective gradient", |b| {
        b.iter(|| expr_gradient(expr, black_box(&x), active).unwrap())
    });
}

criterion_group!(benches, sampling, training, encoding, repairing);
criterion_main!(benches);
