//! Pathwise Malliavin derivatives D_{l,y}X(t): the sensitivity of the
//! solution to one extra jump of mark y inserted at time l.
//!
//! Two routes are implemented and cross-validated:
//!
//! * the first-variation recursion for differentiable drifts,
//!   `D_{k+1} = D_k + ∇b(t_k, X_k) D_k Δt`, started at γ(y) at time l;
//! * the u-recursion obtained by subtracting the Zvonkin representations of
//!   the perturbed and unperturbed paths, in which the unknown appears
//!   inside u and each step solves a damped fixed point
//!   `D = u(t, X_t) - u(t, X_t + D) + C(t)`, the history C carrying the
//!   initial terms `γ(y) + u(l, X_{l^-}+γ(y)) - u(l, X_{l^-})` and the
//!   second-difference jump brackets.
//!
//! Both start from D(l) = γ(y) — the exact pathwise value, and the fixed
//! point of the u-recursion identity at t = l — and both return the zero
//! trajectory when l > t (no anticipation).

use serde::Serialize;

use super::ZvonkinSolution;
use crate::error::{Error, Result};
use crate::fields::Drift;
use crate::geom::Point;
use crate::simulate::{NoisePath, PathRecord};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RecursionOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_inner: usize,
}

impl Default for RecursionOptions {
    fn default() -> Self {
        RecursionOptions { damping: 0.5, tol: 1e-10, max_inner: 50 }
    }
}

/// Which derivative route to run over a field grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Variational,
    URecursion,
}

fn start_index(path: &PathRecord, l: f64) -> usize {
    // First mesh node at or after l (l itself is snapped to the base mesh
    // by the field builder).
    path.times.partition_point(|&t| t < l - 1e-12)
}

/// First-variation route along a stored path; requires a drift Jacobian.
/// Returns D on every mesh node (zeros before l).
pub fn malliavin_variational(
    path: &PathRecord,
    drift: &dyn Drift,
    l: f64,
    y: Point,
) -> Result<Vec<Point>> {
    let n = path.times.len();
    let t_end = *path.times.last().unwrap();
    let mut out = vec![Point::ZERO; n];
    if l > t_end {
        return Ok(out); // no anticipation, documented convention
    }
    if y.norm() >= 1.0 {
        return Err(Error::invalid("mark must satisfy |y| < 1"));
    }
    let k0 = start_index(path, l);
    let mut d = y; // γ(y) = y for |y| <= 1
    out[k0] = d;
    for k in k0..n - 1 {
        let dt = path.times[k + 1] - path.times[k];
        let jac = drift
            .jacobian(path.times[k], path.states[k])
            .ok_or_else(|| Error::invalid("variational route needs a differentiable drift"))?;
        d += jac.apply(d).scale(dt);
        out[k + 1] = d;
    }
    Ok(out)
}

/// Damped fixed point for D = u(t,x) - u(t,x+D) + c.
fn solve_implicit(
    sol: &ZvonkinSolution,
    t: f64,
    x: Point,
    c: Point,
    guess: Point,
    opts: &RecursionOptions,
) -> Result<Point> {
    let base = sol.eval_u(t, x);
    let mut z = guess;
    for _ in 0..opts.max_inner {
        let target = base - sol.eval_u(t, x + z) + c;
        let step = target - z;
        if step.norm() < opts.tol {
            return Ok(target);
        }
        z += step.scale(opts.damping);
    }
    Err(Error::Divergence {
        what: "malliavin u-recursion fixed point".into(),
        iterations: opts.max_inner,
        history: vec![(sol.eval_u(t, x + z) - base - c + z).norm()],
    })
}

/// The u-recursion route along a stored path. Returns D on every mesh node.
pub fn malliavin_u_recursion(
    sol: &ZvonkinSolution,
    noise: &NoisePath,
    path: &PathRecord,
    l: f64,
    y: Point,
    opts: &RecursionOptions,
) -> Result<Vec<Point>> {
    let n = path.times.len();
    let t_end = *path.times.last().unwrap();
    let mut out = vec![Point::ZERO; n];
    if l > t_end {
        return Ok(out);
    }
    if y.norm() >= 1.0 {
        return Err(Error::invalid("mark must satisfy |y| < 1"));
    }
    let dim = sol.dim();
    let k0 = start_index(path, l);
    let t0 = path.times[k0];
    let x0 = path.states[k0];

    let mut d = y;
    out[k0] = d;
    // History accumulator: the identity reads D = u(t,X) - u(t,X+D) + C,
    // with C(l) = γ(y) + u(l, X_{l^-}+γ(y)) - u(l, X_{l^-}); plugging in
    // shows D(l) = γ(y) is its exact fixed point.
    let mut c = y + sol.eval_u(t0, x0 + y) - sol.eval_u(t0, x0);

    for k in k0..n - 1 {
        let step = &noise.steps[k];
        let t = step.t0;
        let x = path.states[k];
        let dt = step.t1 - step.t0;
        let xz = x + d;

        // Gaussian substitute transport, its realized quadratic variation,
        // and the generator compensator, all as second differences in D.
        let mut dc = sol.eval_lu(t, xz).scale(-dt) - sol.eval_lu(t, x).scale(-dt);
        for i in 0..dim {
            let du_diff = sol.eval_jacobian_row(i, t, xz) - sol.eval_jacobian_row(i, t, x);
            dc.0[i] += du_diff.dot(step.gauss);
            let h_diff = |g: Point| {
                sol.eval_hess(i, t, xz).quadratic_form(g) - sol.eval_hess(i, t, x).quadratic_form(g)
            };
            dc.0[i] += 0.5 * h_diff(step.gauss);
        }
        c += dc;

        let t1 = step.t1;
        let pre = path.pre_state(k + 1, noise);
        let d_pre = solve_implicit(sol, t1, pre, c, d, opts)?;
        d = match step.jump {
            Some(jump) => {
                // Second-difference bracket at the recorded jump.
                let bracket = sol.eval_u(t1, pre + jump + d_pre) - sol.eval_u(t1, pre + jump)
                    - sol.eval_u(t1, pre + d_pre)
                    + sol.eval_u(t1, pre);
                c += bracket;
                solve_implicit(sol, t1, pre + jump, c, d_pre, opts)?
            }
            None => d_pre,
        };
        out[k + 1] = d;
    }
    Ok(out)
}

/// Sampling grid in (l, y): perturbation times and mark vectors with their
/// product-quadrature weights (Lebesgue in both slots).
#[derive(Clone, Debug)]
pub struct FieldGrid {
    pub tau: f64,
    /// Perturbation times (midpoints of a uniform partition of (0, τ)),
    /// snapped to the base mesh by the field builder.
    pub l_nodes: Vec<f64>,
    pub l_weight: f64,
    /// Mark vectors (log-uniform radii times directions) with cell weights.
    pub y_nodes: Vec<(Point, f64)>,
}

/// 16×16-style grid: `n_l` times uniform in (0, τ), `n_y` radii log-uniform
/// in [r_min, r_max] times the direction set (±1 in d = 1, `angles` in d = 2).
pub fn build_field_grid(
    dim: usize,
    tau: f64,
    n_l: usize,
    n_y: usize,
    r_min: f64,
    r_max: f64,
    angles: usize,
) -> FieldGrid {
    let l_nodes: Vec<f64> = (0..n_l).map(|i| (i as f64 + 0.5) * tau / n_l as f64).collect();
    let l_weight = tau / n_l as f64;
    let log_step = (r_max / r_min).ln() / n_y as f64;
    let mut y_nodes = Vec::new();
    for j in 0..n_y {
        let r_lo = r_min * (log_step * j as f64).exp();
        let r_hi = r_min * (log_step * (j as f64 + 1.0)).exp();
        let r = (r_lo * r_hi).sqrt();
        if dim == 1 {
            // Lebesgue cell on each side of the origin.
            let w = r_hi - r_lo;
            y_nodes.push((Point::x(r), w));
            y_nodes.push((Point::x(-r), w));
        } else {
            let n_ang = angles.max(1);
            let w = (r_hi * r_hi - r_lo * r_lo) * std::f64::consts::PI / n_ang as f64;
            for a in 0..n_ang {
                let th = 2.0 * std::f64::consts::PI * (a as f64 + 0.5) / n_ang as f64;
                y_nodes.push((Point::new(r * th.cos(), r * th.sin()), w));
            }
        }
    }
    FieldGrid { tau, l_nodes, l_weight, y_nodes }
}

/// Sampled D_{l,y}X(τ) for one path over the field grid.
#[derive(Clone, Debug)]
pub struct MalliavinField {
    pub grid: FieldGrid,
    /// values[l_index][y_index] = D_{l,y}X(τ).
    pub values: Vec<Vec<Point>>,
}

/// Evaluate D_{l,y}X(τ) over the whole grid for one path, snapping each l
/// to the nearest base-mesh node.
pub fn malliavin_field(
    sol: Option<&ZvonkinSolution>,
    drift: &dyn Drift,
    noise: &NoisePath,
    path: &PathRecord,
    grid: &FieldGrid,
    route: Route,
    opts: &RecursionOptions,
) -> Result<MalliavinField> {
    let mut values = Vec::with_capacity(grid.l_nodes.len());
    for &l in &grid.l_nodes {
        let mut row = Vec::with_capacity(grid.y_nodes.len());
        for &(y, _) in &grid.y_nodes {
            let traj = match route {
                Route::Variational => malliavin_variational(path, drift, l, y)?,
                Route::URecursion => {
                    let sol = sol
                        .ok_or_else(|| Error::invalid("u-recursion route needs a solution"))?;
                    malliavin_u_recursion(sol, noise, path, l, y, opts)?
                }
            };
            row.push(*traj.last().unwrap());
        }
        values.push(row);
    }
    Ok(MalliavinField { grid: grid.clone(), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{ConstDrift, LinearWell, ZeroDrift};
    use crate::geom::Point;
    use crate::levy_model::LevyModel;
    use crate::simulate::{euler_solve, sample_noise, NoiseSpec};
    use approx::assert_relative_eq;

    fn noise_and_path(seed: u64, horizon: f64) -> (NoisePath, PathRecord) {
        let model = LevyModel::new(1, 1.8).unwrap();
        let spec = NoiseSpec::new(&model, horizon, horizon / 128.0, 0.05).unwrap();
        let noise = sample_noise(&spec, seed);
        let path = euler_solve(&ZeroDrift(1), Point::ZERO, &noise).unwrap();
        (noise, path)
    }

    #[test]
    fn variational_zero_drift_is_constant_gamma() {
        let (_, path) = noise_and_path(3, 0.1);
        let y = Point::x(0.3);
        let traj = malliavin_variational(&path, &ZeroDrift(1), 0.05, y).unwrap();
        let k0 = super::start_index(&path, 0.05);
        for (k, d) in traj.iter().enumerate() {
            if k < k0 {
                assert_eq!(*d, Point::ZERO);
            } else {
                assert_relative_eq!(d.get(0), 0.3, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn variational_constant_drift_keeps_gamma() {
        let (_, path) = noise_and_path(4, 0.1);
        let c = ConstDrift { dim: 1, value: Point::x(0.7) };
        let traj = malliavin_variational(&path, &c, 0.02, Point::x(0.2)).unwrap();
        assert_relative_eq!(traj.last().unwrap().get(0), 0.2, epsilon = 1e-14);
    }

    #[test]
    fn variational_linear_drift_decays_exponentially() {
        // dD/dt = -rate D without jumps after l: D(T) = γ(y) e^{-rate (T-l)}.
        let model = LevyModel::new(1, 1.8).unwrap();
        let spec = NoiseSpec::new(&model, 1.0, 1.0 / 4096.0, 0.05).unwrap();
        let mut noise = sample_noise(&spec, 5);
        for s in noise.steps.iter_mut() {
            s.gauss = Point::ZERO;
            s.jump = None;
        }
        let w = LinearWell::new(1, 0.9);
        let path = euler_solve(&w, Point::x(0.5), &noise).unwrap();
        let traj = malliavin_variational(&path, &w, 0.0, Point::x(0.1)).unwrap();
        assert_relative_eq!(
            traj.last().unwrap().get(0),
            0.1 * (-0.9f64).exp(),
            max_relative = 2e-3
        );
    }

    #[test]
    fn no_anticipation_is_exact() {
        let (noise, path) = noise_and_path(6, 0.1);
        let traj = malliavin_variational(&path, &ZeroDrift(1), 0.2, Point::x(0.1)).unwrap();
        assert!(traj.iter().all(|d| *d == Point::ZERO));
        let _ = noise;
    }

    #[test]
    fn marks_must_be_inside_unit_ball() {
        let (_, path) = noise_and_path(8, 0.1);
        assert!(malliavin_variational(&path, &ZeroDrift(1), 0.05, Point::x(1.2)).is_err());
    }

    #[test]
    fn field_grid_shapes() {
        let g = build_field_grid(1, 0.1, 16, 16, 1e-2, 0.99, 2);
        assert_eq!(g.l_nodes.len(), 16);
        assert_eq!(g.y_nodes.len(), 32);
        for (y, w) in &g.y_nodes {
            assert!(y.norm() >= 1e-2 && y.norm() < 1.0);
            assert!(*w > 0.0);
        }
        let g2 = build_field_grid(2, 0.1, 4, 4, 1e-2, 0.9, 8);
        assert_eq!(g2.y_nodes.len(), 32);
    }
}
