// Temporary: decompose zvonkin residual error sources (removed before release).
use truncstable::fields::HolderCusp;
use truncstable::geom::Point;
use truncstable::grid::Grid;
use truncstable::kolmogorov::SolveOptions;
use truncstable::levy_model::{CharExponent, LevyModel};
use truncstable::quad::mix_seed;
use truncstable::simulate::{euler_solve, sample_noise, NoiseSpec};
use truncstable::stats::rms;
use truncstable::zvonkin_malliavin::{solve_zvonkin, zvonkin_residual};

fn main() {
    let alpha = 1.8;
    let beta = 0.7;
    let horizon = 0.3;
    let model = LevyModel::new(1, alpha).unwrap();
    let ce = CharExponent::new(model);
    let drift = HolderCusp { dim: 1, amplitude: 0.5, beta };
    let n_paths = 100;
    let eps = 1e-3;

    for &(n_grid, steps, slices) in &[
        (1024usize, 256usize, 25usize),
        (2048, 256, 25),
        (1024, 512, 25),
        (1024, 256, 49),
        (2048, 512, 25),
        (2048, 256, 49),
        (4096, 256, 49),
        (2048, 512, 49),
    ] {
        let grid = Grid::new(1, n_grid, 8.0).unwrap();
        let mut opts = SolveOptions::new(beta);
        opts.n_slices = slices;
        let sol = solve_zvonkin(&ce, &drift, horizon, grid, &opts).unwrap();
        let spec = NoiseSpec::new(&model, horizon, horizon / steps as f64, eps).unwrap();
        let res: Vec<f64> = truncstable::par::map_range(n_paths, |p| {
            let noise = sample_noise(&spec, mix_seed(777, p as u64));
            let path = euler_solve(&drift, Point::ZERO, &noise).unwrap();
            zvonkin_residual(&sol, &drift, &noise, &path).unwrap()
        });
        println!("n={n_grid} steps={steps} slices={slices}: rms={:.4e}", rms(&res));
    }
}
