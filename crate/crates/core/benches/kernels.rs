//! Hot-kernel benchmarks. Run under the default (rayon) feature and again
//! with `--no-default-features` to compare the data-parallel and sequential
//! builds:
//!
//! ```text
//! cargo bench -p truncstable
//! cargo bench -p truncstable --no-default-features
//! ```

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};

use truncstable::density::{build_density, DensityOptions};
use truncstable::fields::HolderCusp;
use truncstable::geom::Point;
use truncstable::grid::{Grid, GridData};
use truncstable::levy_model::{CharExponent, LevyModel};
use truncstable::semigroup::apply_semigroup;
use truncstable::simulate::{
    euler_solve, sample_noise, strong_convergence_study, MollifierFamily, NoiseSpec,
};

fn bench_density(c: &mut Criterion) {
    let ce = CharExponent::new(LevyModel::new(1, 1.8).unwrap());
    let grid = Grid::new(1, 4096, 8.0).unwrap();
    let opts = DensityOptions::default();
    // Prime the Ψ table so the benchmark isolates the transform work.
    let _ = build_density(&ce, 0.5, grid, &opts).unwrap();
    c.bench_function("density_build_1d_n4096", |b| {
        b.iter(|| build_density(&ce, 0.5, grid, &opts).unwrap())
    });

    let ce2 = CharExponent::new(LevyModel::new(2, 1.5).unwrap());
    let grid2 = Grid::new(2, 128, 8.0).unwrap();
    let _ = build_density(&ce2, 0.8, grid2, &opts).unwrap();
    c.bench_function("density_build_2d_n128", |b| {
        b.iter(|| build_density(&ce2, 0.8, grid2, &opts).unwrap())
    });
}

fn bench_psi_table(c: &mut Criterion) {
    let model = LevyModel::new(1, 1.8).unwrap();
    let grid = Grid::new(1, 8192, 8.0).unwrap();
    c.bench_function("psi_table_1d_n8192", |b| {
        b.iter(|| {
            // Fresh evaluator each pass so the memo cache cannot short-circuit.
            let ce = CharExponent::new(model);
            ce.psi_table(grid)
        })
    });
}

fn bench_semigroup(c: &mut Criterion) {
    let ce = CharExponent::new(LevyModel::new(1, 1.8).unwrap());
    let grid = Grid::new(1, 4096, 8.0).unwrap();
    let phi = GridData::from_fn(grid, |p| (-p.norm_sq()).exp());
    let _ = apply_semigroup(&ce, 0.3, &phi).unwrap();
    c.bench_function("semigroup_apply_1d_n4096", |b| {
        b.iter(|| apply_semigroup(&ce, 0.3, &phi).unwrap())
    });
}

fn bench_paths(c: &mut Criterion) {
    let model = LevyModel::new(1, 1.8).unwrap();
    let spec = NoiseSpec::new(&model, 0.1, 0.1 / 256.0, 3e-3).unwrap();
    let drift = HolderCusp { dim: 1, amplitude: 0.5, beta: 0.7 };
    c.bench_function("euler_single_path", |b| {
        let noise = sample_noise(&spec, 7);
        b.iter(|| euler_solve(&drift, Point::ZERO, &noise).unwrap())
    });

    let family = MollifierFamily::new(
        Arc::new(HolderCusp { dim: 1, amplitude: 0.5, beta: 0.7 }),
        vec![4, 16],
    );
    c.bench_function("coupled_levels_64_paths", |b| {
        b.iter(|| {
            strong_convergence_study(&family, &spec, Point::ZERO, 64, 11, &[0.05, 0.1]).unwrap()
        })
    });
}

fn config() -> Criterion {
    Criterion::default().sample_size(10)
}

criterion_group! {
    name = benches;
    config = config();
    targets = bench_density, bench_psi_table, bench_semigroup, bench_paths
}
criterion_main!(benches);
