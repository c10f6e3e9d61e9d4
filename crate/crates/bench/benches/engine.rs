use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use pai_core::mnist::{abstract_image, ImageAbstractionConfig};
use pai_core::{
    build_A, discretize, lift_function, sign_partition, zonotope_points, AxisSpec, GridSpec,
    Partition, Rational, Role, StateSpace, Zonotope,
};

fn q(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

fn grid(low: i128, high: i128, step: Rational) -> StateSpace {
    discretize(&GridSpec::cube(
        AxisSpec::range(q(low, 1), q(high, 1), step),
        2,
    ))
    .unwrap()
    .into()
}

fn lifting(c: &mut Criterion) {
    let dom_in = grid(-3, 3, q(1, 20));
    let dom_out = grid(-6, 6, q(1, 20));
    let f = |x: &[f64]| Ok(vec![x[0] + x[1], x[0] + x[1]]);
    c.bench_function("lift dense layer, 0.05 grid", |b| {
        b.iter(|| lift_function::<f64, _>(f, black_box(&dom_in), &dom_out).unwrap())
    });
}

fn operators(c: &mut Criterion) {
    let dom_in = grid(-3, 3, q(1, 20));
    let dom_out = grid(-6, 6, q(1, 20));
    let f = lift_function::<f64, _>(
        |x: &[f64]| Ok(vec![x[0] + x[1], x[0] + x[1]]),
        &dom_in,
        &dom_out,
    )
    .unwrap();
    let a = build_A::<f64>(&sign_partition(&dom_out)).unwrap();
    c.bench_function("A x F sparse product", |b| {
        b.iter(|| a.matmul(black_box(&f), Role::General).unwrap())
    });
    let p = Arc::new(Partition::identity(dom_in.len()).unwrap());
    c.bench_function("build A, identity partition", |b| {
        b.iter(|| build_A::<f64>(black_box(&p)).unwrap())
    });
}

fn zonotopes(c: &mut Criterion) {
    let z = Zonotope::new(
        vec![q(1, 1), q(2, 1)],
        vec![
            vec![q(1, 2), q(1, 2)],
            vec![q(1, 2), q(0, 1)],
            vec![q(0, 1), q(1, 2)],
        ],
    )
    .unwrap();
    c.bench_function("zonotope lattice points, 0.01", |b| {
        b.iter(|| zonotope_points(black_box(&z), q(1, 100)).unwrap())
    });
}

fn images(c: &mut Criterion) {
    let cfg = ImageAbstractionConfig::new([28, 28], [7, 7], 127).unwrap();
    let img: Vec<u8> = (0..784).map(|i| ((i * 37) % 256) as u8).collect();
    c.bench_function("abstract 28x28 image", |b| {
        b.iter(|| abstract_image(black_box(&img), &cfg).unwrap())
    });
}

criterion_group!(benches, lifting, operators, zonotopes, images);
criterion_main!(benches);
