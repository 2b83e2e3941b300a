// Temporary exploration driver used while calibrating experiment defaults.
use truncstable::density::{build_density, DensityOptions};
use truncstable::fields::ScalarFn;
use truncstable::geom::Point;
use truncstable::grid::Grid;
use truncstable::kolmogorov::{estimate_ct, SolveOptions};
use truncstable::levy_model::{CharExponent, LevyModel};
use truncstable::quad::linear_fit;
use truncstable::semigroup::derivative_scaling_report;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());

    if which == "psi" || which == "all" {
        // Growth: slope of log Ψ̃ vs log |u| on [1e2, 1e4].
        for &alpha in &[1.2, 1.5, 1.8] {
            let ce = CharExponent::new(LevyModel::new(1, alpha).unwrap());
            let mut lx = vec![];
            let mut ly = vec![];
            for k in 0..25 {
                let u = 100.0 * (10000.0f64 / 100.0).powf(k as f64 / 24.0);
                lx.push(u.ln());
                ly.push(ce.psi_tilde(1.0, Point::x(u)).unwrap().ln());
            }
            let (slope, _, se) = linear_fit(&lx, &ly).unwrap();
            println!("psi_tilde slope alpha={alpha}: {slope:.4} (se {se:.1e})");
        }
    }

    if which == "l1" || which == "all" {
        // Density derivative L¹ slopes over t in [0.05, 1].
        let alpha = 1.8;
        let ce = CharExponent::new(LevyModel::new(1, alpha).unwrap());
        let grid = Grid::new(1, 4096, 8.0).unwrap();
        let opts = DensityOptions::default();
        let mut lt = vec![];
        let mut l1 = vec![];
        let mut l2 = vec![];
        for k in 0..9 {
            let t = 0.05 * (1.0f64 / 0.05).powf(k as f64 / 8.0);
            let dg = build_density(&ce, t, grid, &opts).unwrap();
            lt.push(t.ln());
            l1.push(dg.derivative_l1_norm(1, (0, 0)).unwrap().ln());
            l2.push(dg.derivative_l1_norm(2, (0, 0)).unwrap().ln());
        }
        let (s1, _, _) = linear_fit(&lt, &l1).unwrap();
        let (s2, _, _) = linear_fit(&lt, &l2).unwrap();
        println!(
            "L1 slopes alpha={alpha}: D1 {s1:.4} (want {:.4}), D2 {s2:.4} (want {:.4})",
            -1.0 / alpha,
            -2.0 / alpha
        );
    }

    if which == "scaling" || which == "all" {
        // Criterion-5 style scaling report.
        let alpha = 1.8;
        let beta = 0.5;
        let ce = CharExponent::new(LevyModel::new(1, alpha).unwrap());
        let grid = Grid::new(1, 4096, 8.0).unwrap();
        let fams = vec![
            ScalarFn::smoothed_step(0.01),
            ScalarFn::gauss_bump(2.0),
            ScalarFn::holder_cusp(beta, Point::ZERO),
        ];
        let ts: Vec<f64> =
            (0..9).map(|k| 0.05 * (1.0f64 / 0.05).powf(k as f64 / 8.0)).collect();
        let rep = derivative_scaling_report(&ce, &fams, &ts, grid).unwrap();
        for row in &rep.rows {
            println!(
                "scaling {} {}: slope {:.4} (se {:.1e})",
                row.family, row.norm, row.slope, row.stderr
            );
        }
        println!(
            "targets: step D1 {:.4}, step D2 {:.4}, gauss D2 {:.4}, cusp D2 {:.4}",
            -1.0 / alpha,
            -2.0 / alpha,
            -1.0 / alpha,
            -(2.0 - beta) / alpha
        );
    }

    if which == "ct" || which == "all" {
        let alpha = 1.8;
        let ce = CharExponent::new(LevyModel::new(1, alpha).unwrap());
        let grid = Grid::new(1, 2048, 8.0).unwrap();
        let opts = SolveOptions::new(0.7);
        let horizons = [0.01, 0.02, 0.04, 0.08, 0.16, 0.32];
        let table = estimate_ct(&ce, &horizons, grid, &opts).unwrap();
        let mut lx = vec![];
        let mut ly = vec![];
        for (t, c) in &table {
            println!("C({t:.3}) = {c:.4}   2C||b|| = {:.4} at ||b||=1", 2.0 * c);
            lx.push(t.ln());
            ly.push(c.ln());
        }
        let (s, _, _) = linear_fit(&lx, &ly).unwrap();
        println!("C(T) slope {s:.4} want {:.4}", (alpha - 1.0) / alpha);
    }
}

#[allow(dead_code)]
fn extra() {}
