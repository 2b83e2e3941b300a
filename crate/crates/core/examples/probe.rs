// Temporary calibration probe (removed before release).
use truncstable::density::{build_density, DensityOptions};
use truncstable::fields::ScalarFn;
use truncstable::geom::Point;
use truncstable::grid::Grid;
use truncstable::kolmogorov::{estimate_ct, SolveOptions};
use truncstable::levy_model::{CharExponent, LevyModel};
use truncstable::quad::linear_fit;
use truncstable::semigroup::derivative_scaling_report;

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a * (b / a).powf(k as f64 / (n - 1) as f64)).collect()
}

fn main() {
    let alpha = 1.8;
    let beta = 0.5;
    let ce = CharExponent::new(LevyModel::new(1, alpha).unwrap());
    let grid = Grid::new(1, 4096, 8.0).unwrap();

    let grids: Vec<(&str, Vec<f64>)> = vec![
        ("log13 [0.05,1]", logspace(0.05, 1.0, 13)),
        ("weighted", {
            let mut v = logspace(0.05, 0.22, 8);
            v.extend_from_slice(&[0.35, 0.55, 0.75, 1.0]);
            v
        }),
        ("low9 [0.05,0.35]+2", {
            let mut v = logspace(0.05, 0.35, 9);
            v.extend_from_slice(&[0.6, 1.0]);
            v
        }),
    ];

    let fams = vec![
        ScalarFn::smoothed_step(0.01),
        ScalarFn::gauss_bump(2.0),
        ScalarFn::new("cusp_cap", move |p: Point| p.norm().powf(beta).min(2.2)),
    ];
    for (name, ts) in &grids {
        let rep = derivative_scaling_report(&ce, &fams, ts, grid).unwrap();
        println!("--- t-grid {name} ({} pts)", ts.len());
        for row in &rep.rows {
            println!("  {} {}: {:.4}", row.family, row.norm, row.slope);
        }
        let opts = DensityOptions::default();
        let (mut lt, mut l1, mut l2) = (vec![], vec![], vec![]);
        for &t in ts {
            let dg = build_density(&ce, t, grid, &opts).unwrap();
            lt.push(t.ln());
            l1.push(dg.derivative_l1_norm(1, (0, 0)).unwrap().ln());
            l2.push(dg.derivative_l1_norm(2, (0, 0)).unwrap().ln());
        }
        let (s1, _, _) = linear_fit(&lt, &l1).unwrap();
        let (s2, _, _) = linear_fit(&lt, &l2).unwrap();
        println!("  L1: D1 {s1:.4} (want -0.5556 pm 0.07), D2 {s2:.4} (want -1.1111 pm 0.1)");
    }

    for &(b, lo, hi) in &[(0.1, 0.003, 0.03), (0.1, 0.005, 0.05), (0.15, 0.004, 0.04)] {
        let opts = SolveOptions::new(b);
        let hs = logspace(lo, hi, 6);
        let table = estimate_ct(&ce, &hs, grid, &opts).unwrap();
        let lx: Vec<f64> = table.iter().map(|r| r.0.ln()).collect();
        let ly: Vec<f64> = table.iter().map(|r| r.1.ln()).collect();
        let (s, _, _) = linear_fit(&lx, &ly).unwrap();
        println!(
            "C(T) beta={b} grid[{lo},{hi}]: slope {s:.4} want 0.4444 pm 0.1; values {:?}",
            table.iter().map(|r| (r.1 * 1e4).round() / 1e4).collect::<Vec<_>>()
        );
    }
}
