//! Benchmarks for the hot kernels: conjugate solves, one Bellman step and
//! the Lipschitz sweep.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use hjlab_core::grid::{TorusGrid, ValueFunction};
use hjlab_core::hamiltonian::{build_modified, HamiltonianModel, PotentialKind, Preset};
use hjlab_core::lax_oleinik::StepKernel;
use hjlab_core::legendre::LagrangianEvaluator;
use hjlab_core::regularity::lipschitz_estimate;

fn pendulum_evaluator(r_cut: f64) -> LagrangianEvaluator {
    let model = HamiltonianModel::new(Preset::Mechanical, PotentialKind::Cosine, 1).unwrap();
    LagrangianEvaluator::new(build_modified(model, r_cut).unwrap())
}

fn bench_conjugate(c: &mut Criterion) {
    let le = pendulum_evaluator(8.0);
    let rel = {
        let model =
            HamiltonianModel::new(Preset::CoerciveNonsuperlinear, PotentialKind::Cosine, 1)
                .unwrap();
        LagrangianEvaluator::new(build_modified(model, 8.0).unwrap())
    };
    c.bench_function("legendre_mechanical", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for k in 0..64 {
                let v = [-4.0 + 8.0 * k as f64 / 63.0, 0.0];
                acc += le.legendre(black_box(&[0.3, 0.0]), black_box(&v)).unwrap().0;
            }
            acc
        })
    });
    c.bench_function("legendre_relativistic", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for k in 0..64 {
                let v = [-1.2 + 2.4 * k as f64 / 63.0, 0.0];
                acc += rel.legendre(black_box(&[0.3, 0.0]), black_box(&v)).unwrap().0;
            }
            acc
        })
    });
}

fn bench_step(c: &mut Criterion) {
    let le = pendulum_evaluator(8.0);
    let grid = TorusGrid::new(1, 512).unwrap();
    let kernel = StepKernel::new(&le, grid, 0.01, 4.5).unwrap();
    let phi =
        ValueFunction::from_fn(grid, 0.0, |x| (std::f64::consts::TAU * x[0]).cos()).unwrap();
    c.bench_function("bellman_step_n512", |b| {
        b.iter(|| kernel.apply(black_box(&phi)).unwrap())
    });
    c.bench_function("kernel_build_n512", |b| {
        b.iter(|| StepKernel::new(black_box(&le), grid, 0.01, 4.5).unwrap())
    });
}

fn bench_estimators(c: &mut Criterion) {
    let grid = TorusGrid::new(1, 1024).unwrap();
    let u = ValueFunction::from_fn(grid, 0.0, |x| {
        (std::f64::consts::TAU * x[0]).cos() + 0.3 * (2.0 * std::f64::consts::TAU * x[0]).sin()
    })
    .unwrap();
    c.bench_function("lipschitz_estimate_n1024", |b| {
        b.iter(|| lipschitz_estimate(black_box(&u)))
    });
}

criterion_group!(benches, bench_conjugate, bench_step, bench_estimators);
criterion_main!(benches);
