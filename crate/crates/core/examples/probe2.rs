// Temporary calibration probe for the Picard certificate and the
// Zvonkin residual refinement study (removed before release).
use truncstable::fields::{HolderCusp, ScalarFn};
use truncstable::geom::Point;
use truncstable::grid::Grid;
use truncstable::kolmogorov::{solve_backward, SolveOptions, Source};
use truncstable::levy_model::{CharExponent, LevyModel};
use truncstable::quad::mix_seed;
use truncstable::simulate::{euler_solve, sample_noise, NoiseSpec};
use truncstable::stats::rms;
use truncstable::zvonkin_malliavin::{solve_zvonkin, zvonkin_residual};

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());
    let alpha = 1.8;
    let beta = 0.7;
    let horizon = 0.3;
    let model = LevyModel::new(1, alpha).unwrap();
    let ce = CharExponent::new(model);
    let drift = HolderCusp { dim: 1, amplitude: 0.5, beta };

    if which == "picard" || which == "all" {
        let grid = Grid::new(1, 2048, 8.0).unwrap();
        let phi = ScalarFn::gauss_bump(1.0).sample(grid);
        let mut opts = SolveOptions::new(beta);
        opts.n_slices = 8;
        let t0 = std::time::Instant::now();
        let sol = solve_backward(&ce, &drift, &Source::Static(&phi), horizon, &opts).unwrap();
        println!(
            "picard: C(T)={:.4} product={:.4} iters={} ratios_max={:?} resid={:.3e} [{:?}]",
            sol.ct_estimate,
            sol.contraction_product,
            sol.picard_diffs.len(),
            sol.max_diff_ratio(),
            sol.residual,
            t0.elapsed()
        );
        println!("  diffs: {:?}", sol.picard_diffs);
        println!("  terminal max: {:.3e}", sol.u.last().unwrap().max_abs());
    }

    if which == "zvonkin" || which == "all" {
        let n_paths = 200;
        let run = |n_grid: usize, steps: usize, slices: usize, eps: f64| -> (f64, f64) {
            let grid = Grid::new(1, n_grid, 8.0).unwrap();
            let mut opts = SolveOptions::new(beta);
            opts.n_slices = slices;
            let t0 = std::time::Instant::now();
            let sol = solve_zvonkin(&ce, &drift, horizon, grid, &opts).unwrap();
            let spec = NoiseSpec::new(&model, horizon, horizon / steps as f64, eps).unwrap();
            let residuals: Vec<f64> = truncstable::par::map_range(n_paths, |p| {
                let noise = sample_noise(&spec, mix_seed(777, p as u64));
                let path = euler_solve(&drift, Point::ZERO, &noise).unwrap();
                zvonkin_residual(&sol, &drift, &noise, &path).unwrap_or(f64::NAN)
            });
            let ok: Vec<f64> = residuals.iter().cloned().filter(|r| r.is_finite()).collect();
            println!(
                "  n={n_grid} steps={steps} slices={slices} eps={eps}: rms={:.4e} kept {}/{} [{:?}]",
                rms(&ok),
                ok.len(),
                n_paths,
                t0.elapsed()
            );
            (rms(&ok), ok.len() as f64)
        };
        for &eps in &[1e-3, 3e-3] {
            println!("zvonkin eps={eps}");
            let (r1, _) = run(1024, 256, 25, eps);
            let (r2, _) = run(2048, 512, 49, eps);
            println!("  halving factor: {:.3}", r1 / r2);
        }
    }
}
