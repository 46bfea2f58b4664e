use std::hint::black_box;

use bfisense::bfi::{csi_to_bfi, givens_decompose, givens_reconstruct, resize, rotate_real_last_row};
use bfisense::crb::{element_scores, CrbConfig};
use bfisense::numerics::{random_complex_gaussian, random_unitary, svd};
use bfisense::{PositionParams, Scenario};
use criterion::{criterion_group, criterion_main, Criterion};

fn transforms(c: &mut Criterion) {
    let h = random_complex_gaussian(4, 4, 1);
    c.bench_function("svd_4x4", |b| b.iter(|| svd(black_box(&h)).unwrap()));
    c.bench_function("csi_to_bfi_4x4", |b| b.iter(|| csi_to_bfi(black_box(&h)).unwrap()));

    let v = rotate_real_last_row(&resize(&random_unitary(4, 2).unwrap(), 4).unwrap());
    let theta = givens_decompose(&v).unwrap();
    c.bench_function("givens_decompose_4x4", |b| b.iter(|| givens_decompose(black_box(&v)).unwrap()));
    c.bench_function("givens_reconstruct_4x4", |b| b.iter(|| givens_reconstruct(black_box(&theta)).unwrap()));
}

fn scores(c: &mut Criterion) {
    let s = Scenario::default_multipath(2, 4).unwrap();
    let x = PositionParams::cartesian(3.0, 6.0);
    let cfg = CrbConfig { n_mc: 200, ..Default::default() };
    c.bench_function("element_scores_2x4_mc200", |b| {
        b.iter(|| element_scores(black_box(&x), &s, 1, &cfg).unwrap())
    });
}

criterion_group!(benches, transforms, scores);
criterion_main!(benches);
