use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use halfflow::checks::sphere_crossform_datum;
use halfflow::exec::set_parallel;
use halfflow::field::GridFunction;
use halfflow::flow::{rhs_divergence_form, rhs_projection_form};
use halfflow::frac::{frac_gradient, frac_laplacian_singular, od_pairing};
use halfflow::grid::CircleGrid;
use halfflow::manifold::{ManifoldDescriptor, DEFAULT_GAUSS_ORDER};

fn modes() -> [(&'static str, bool); 2] {
    [("sequential", false), ("parallel", true)]
}

fn singular_laplacian(c: &mut Criterion) {
    let mut group = c.benchmark_group("singular_half_laplacian");
    for m in [256usize, 1024] {
        let f = GridFunction::scalar_from_fn(CircleGrid::new(m).unwrap(), |x| x.cos().exp());
        for (name, par) in modes() {
            group.bench_with_input(BenchmarkId::new(name, m), &f, |b, f| {
                set_parallel(par);
                b.iter(|| frac_laplacian_singular(black_box(f), 0.5).unwrap());
            });
        }
    }
    group.finish();
}

fn gradient_pairing(c: &mut Criterion) {
    let mut group = c.benchmark_group("gradient_pairing");
    for m in [256usize, 512] {
        let u = GridFunction::from_fn(CircleGrid::new(m).unwrap(), 3, |x, o| {
            o[0] = x.cos();
            o[1] = x.sin();
            o[2] = (2.0 * x).cos();
        });
        for (name, par) in modes() {
            group.bench_with_input(BenchmarkId::new(name, m), &u, |b, u| {
                set_parallel(par);
                b.iter(|| {
                    let du = frac_gradient(black_box(u), 0.5).unwrap();
                    od_pairing(&du, &du).unwrap()
                });
            });
        }
    }
    group.finish();
}

fn flow_rhs(c: &mut Criterion) {
    let mut group = c.benchmark_group("sphere_rhs_M256");
    group.sample_size(10);
    let s2 = ManifoldDescriptor::sphere(3).unwrap();
    let u = sphere_crossform_datum(1).generate(CircleGrid::new(256).unwrap(), &s2).unwrap();
    for (name, par) in modes() {
        group.bench_function(BenchmarkId::new("projection", name), |b| {
            set_parallel(par);
            b.iter(|| rhs_projection_form(&s2, black_box(&u)).unwrap());
        });
        group.bench_function(BenchmarkId::new("divergence", name), |b| {
            set_parallel(par);
            b.iter(|| rhs_divergence_form(&s2, black_box(&u), DEFAULT_GAUSS_ORDER).unwrap());
        });
    }
    set_parallel(true);
    group.finish();
}

criterion_group!(benches, singular_laplacian, gradient_pairing, flow_rhs);
criterion_main!(benches);
