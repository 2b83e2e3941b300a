//! Drift fields and closed-form test functions.
//!
//! Drifts are accepted either as closed-form callables (with analytic
//! Jacobians where they exist) or as sampled grids with multilinear
//! interpolation. Interpolated drifts perturb the effective Hölder norm at
//! the grid scale, so norm checks are always done with the same grid
//! estimator used everywhere else.

use std::sync::Arc;

use crate::geom::{Mat2, Point, SymMat};
use crate::grid::{Grid, GridData};

/// Vector drift field b(t, x).
pub trait Drift: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, x: Point) -> Point;
    /// Jacobian ∂b_i/∂x_j, when the field is differentiable.
    fn jacobian(&self, _t: f64, _x: Point) -> Option<Mat2> {
        None
    }
}

/// b ≡ 0.
pub struct ZeroDrift(pub usize);

impl Drift for ZeroDrift {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, _t: f64, _x: Point) -> Point {
        Point::ZERO
    }
    fn jacobian(&self, _t: f64, _x: Point) -> Option<Mat2> {
        Some(Mat2::default())
    }
}

/// Constant drift.
pub struct ConstDrift {
    pub dim: usize,
    pub value: Point,
}

impl Drift for ConstDrift {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, _t: f64, _x: Point) -> Point {
        self.value
    }
    fn jacobian(&self, _t: f64, _x: Point) -> Option<Mat2> {
        Some(Mat2::default())
    }
}

/// Smooth cutoff: 1 on [0, r0], C² monotone to 0 on [r0, r1].
fn cutoff(r: f64, r0: f64, r1: f64) -> (f64, f64) {
    if r <= r0 {
        (1.0, 0.0)
    } else if r >= r1 {
        (0.0, 0.0)
    } else {
        let s = (r - r0) / (r1 - r0);
        // 1 - s³(10 - 15s + 6s²): quintic smoothstep complement.
        let w = 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
        let dw = -30.0 * s * s * (1.0 - s) * (1.0 - s) / (r1 - r0);
        (w, dw)
    }
}

/// b(x) = -rate · x inside |x| <= plateau, smoothly cut to zero by
/// |x| = fade. Exactly linear (constant Jacobian) on the plateau.
pub struct LinearWell {
    pub dim: usize,
    pub rate: f64,
    pub plateau: f64,
    pub fade: f64,
}

impl LinearWell {
    pub fn new(dim: usize, rate: f64) -> Self {
        LinearWell { dim, rate, plateau: 6.0, fade: 7.5 }
    }
}

impl Drift for LinearWell {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, _t: f64, x: Point) -> Point {
        let r = x.norm();
        let (w, _) = cutoff(r, self.plateau, self.fade);
        x.scale(-self.rate * w)
    }
    fn jacobian(&self, _t: f64, x: Point) -> Option<Mat2> {
        let r = x.norm();
        let (w, dw) = cutoff(r, self.plateau, self.fade);
        // J = -rate (w I + (dw/r) x xᵀ); dw = 0 on the plateau.
        let mut j = Mat2([-self.rate * w, 0.0, 0.0, -self.rate * w]);
        if dw != 0.0 && r > 0.0 {
            let c = -self.rate * dw / r;
            j.0[0] += c * x.get(0) * x.get(0);
            j.0[1] += c * x.get(0) * x.get(1);
            j.0[2] += c * x.get(1) * x.get(0);
            j.0[3] += c * x.get(1) * x.get(1);
        }
        Some(j)
    }
}

/// b(x) = -amplitude · x · exp(-|x|²/(2 width²)); smooth and bounded.
pub struct GaussWell {
    pub dim: usize,
    pub amplitude: f64,
    pub width: f64,
}

impl Drift for GaussWell {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, _t: f64, x: Point) -> Point {
        let e = (-x.norm_sq() / (2.0 * self.width * self.width)).exp();
        x.scale(-self.amplitude * e)
    }
    fn jacobian(&self, _t: f64, x: Point) -> Option<Mat2> {
        let w2 = self.width * self.width;
        let e = (-x.norm_sq() / (2.0 * w2)).exp();
        let a = -self.amplitude * e;
        Some(Mat2([
            a * (1.0 - x.get(0) * x.get(0) / w2),
            a * (-x.get(0) * x.get(1) / w2),
            a * (-x.get(1) * x.get(0) / w2),
            a * (1.0 - x.get(1) * x.get(1) / w2),
        ]))
    }
}

/// The Hölder-only benchmark drift: every component equals
/// `amplitude · min(|x|^beta, 1) / sqrt(d)`. Bounded, β-Hölder, with a cusp
/// at the origin; not differentiable.
pub struct HolderCusp {
    pub dim: usize,
    pub amplitude: f64,
    pub beta: f64,
}

impl Drift for HolderCusp {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, _t: f64, x: Point) -> Point {
        let v = self.amplitude * x.norm().powf(self.beta).min(1.0)
            / (self.dim as f64).sqrt();
        if self.dim == 1 {
            Point::x(v)
        } else {
            Point::new(v, v)
        }
    }
}

/// Drift sampled on a grid, one component per axis, evaluated by
/// multilinear interpolation.
pub struct GridDrift {
    pub components: Vec<GridData>,
}

impl GridDrift {
    pub fn new(components: Vec<GridData>) -> Self {
        assert!(!components.is_empty());
        GridDrift { components }
    }
}

impl Drift for GridDrift {
    fn dim(&self) -> usize {
        self.components[0].grid.dim
    }
    fn eval(&self, _t: f64, x: Point) -> Point {
        match self.components.len() {
            1 => Point::x(self.components[0].interp_linear(x)),
            _ => Point::new(
                self.components[0].interp_linear(x),
                self.components[1].interp_linear(x),
            ),
        }
    }
}

/// Sample a drift on a grid, one GridData per component.
pub fn sample_drift(grid: Grid, drift: &dyn Drift, t: f64) -> Vec<GridData> {
    (0..grid.dim)
        .map(|axis| GridData::from_fn(grid, |p| drift.eval(t, p).get(axis)))
        .collect()
}

/// Named scalar test function with a closure body; used for semigroup
/// scaling families and Kolmogorov sources.
#[derive(Clone)]
pub struct ScalarFn {
    pub name: String,
    f: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
}

impl ScalarFn {
    pub fn new(name: impl Into<String>, f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFn { name: name.into(), f: Arc::new(f) }
    }

    pub fn eval(&self, x: Point) -> f64 {
        (self.f)(x)
    }

    pub fn sample(&self, grid: Grid) -> GridData {
        GridData::from_fn(grid, |p| self.eval(p))
    }

    /// Steep tanh step along the first axis; bounded with a near-jump at 0.
    pub fn smoothed_step(ell: f64) -> ScalarFn {
        ScalarFn::new(format!("step_{ell}"), move |p| 0.5 * (1.0 + (p.get(0) / ell).tanh()))
    }

    /// Gaussian bump of the given width.
    pub fn gauss_bump(sigma: f64) -> ScalarFn {
        ScalarFn::new(format!("gauss_{sigma}"), move |p| {
            (-p.norm_sq() / (2.0 * sigma * sigma)).exp()
        })
    }

    /// β-Hölder cusp min(|x - x0|^β, 1).
    pub fn holder_cusp(beta: f64, x0: Point) -> ScalarFn {
        ScalarFn::new(format!("cusp_{beta}"), move |p| (p - x0).norm().powf(beta).min(1.0))
    }

    /// Oscillation-modulated bump, smooth and sign-changing.
    pub fn wavy_bump(freq: f64, sigma: f64) -> ScalarFn {
        ScalarFn::new(format!("wavy_{freq}"), move |p| {
            (freq * p.get(0)).sin() * (-p.norm_sq() / (2.0 * sigma * sigma)).exp()
        })
    }
}

/// What the nonlocal generator needs from a function: point values plus a
/// Hessian at the expansion point for the small-jump Taylor ball.
pub trait GeneratorField: Sync {
    fn value(&self, x: Point) -> f64;
    fn hessian(&self, x: Point) -> SymMat;
}

/// Closed-form field with analytic Hessian.
pub struct ClosedFormField<F, H> {
    pub f: F,
    pub hess: H,
}

impl<F, H> GeneratorField for ClosedFormField<F, H>
where
    F: Fn(Point) -> f64 + Sync,
    H: Fn(Point) -> SymMat + Sync,
{
    fn value(&self, x: Point) -> f64 {
        (self.f)(x)
    }
    fn hessian(&self, x: Point) -> SymMat {
        (self.hess)(x)
    }
}

/// Plane-wave test field cos(u·x); the generator acts on it as
/// multiplication by -Ψ(u).
pub fn cosine_field(u: Point) -> impl GeneratorField {
    ClosedFormField {
        f: move |x: Point| u.dot(x).cos(),
        hess: move |x: Point| {
            let c = -u.dot(x).cos();
            SymMat([c * u.get(0) * u.get(0), c * u.get(1) * u.get(1), c * u.get(0) * u.get(1)])
        },
    }
}

/// Grid-backed field; values by cubic interpolation, Hessian by centered
/// finite differences of the sampled values.
pub struct GriddedField<'a> {
    pub data: &'a GridData,
}

impl GeneratorField for GriddedField<'_> {
    fn value(&self, x: Point) -> f64 {
        self.data.interp_cubic(x)
    }
    fn hessian(&self, x: Point) -> SymMat {
        let h = self.data.grid.h();
        let f = |p: Point| self.data.interp_cubic(p);
        let e0 = Point::new(h, 0.0);
        let fxx = (f(x + e0) - 2.0 * f(x) + f(x - e0)) / (h * h);
        if self.data.grid.dim == 1 {
            return SymMat([fxx, 0.0, 0.0]);
        }
        let e1 = Point::new(0.0, h);
        let fyy = (f(x + e1) - 2.0 * f(x) + f(x - e1)) / (h * h);
        let fxy = (f(x + e0 + e1) - f(x + e0 - e1) - f(x - e0 + e1) + f(x - e0 - e1))
            / (4.0 * h * h);
        SymMat([fxx, fyy, fxy])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn linear_well_is_linear_on_plateau() {
        let b = LinearWell::new(1, 0.4);
        let x = Point::x(1.7);
        assert_relative_eq!(b.eval(0.0, x).get(0), -0.4 * 1.7);
        let j = b.jacobian(0.0, x).unwrap();
        assert_relative_eq!(j.0[0], -0.4);
    }

    #[test]
    fn linear_well_vanishes_outside_fade() {
        let b = LinearWell::new(1, 0.4);
        assert_eq!(b.eval(0.0, Point::x(9.0)), Point::ZERO);
    }

    #[test]
    fn gauss_well_jacobian_matches_fd() {
        let b = GaussWell { dim: 2, amplitude: 0.7, width: 1.3 };
        let x = Point::new(0.4, -0.9);
        let j = b.jacobian(0.0, x).unwrap();
        let h = 1e-6;
        for a in 0..2 {
            for c in 0..2 {
                let mut dx = Point::ZERO;
                dx.0[c] = h;
                let fd = (b.eval(0.0, x + dx).get(a) - b.eval(0.0, x - dx).get(a)) / (2.0 * h);
                assert_relative_eq!(j.0[a * 2 + c], fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn cusp_drift_is_bounded() {
        let b = HolderCusp { dim: 1, amplitude: 0.5, beta: 0.7 };
        assert_relative_eq!(b.eval(0.0, Point::x(100.0)).get(0), 0.5);
        assert_relative_eq!(b.eval(0.0, Point::ZERO).get(0), 0.0);
    }

    #[test]
    fn gridded_field_hessian_of_quadratic() {
        let g = Grid::new(1, 128, 4.0).unwrap();
        let data = GridData::from_fn(g, |p| 1.5 * p.get(0) * p.get(0));
        let f = GriddedField { data: &data };
        let h = f.hessian(Point::x(0.5));
        assert_relative_eq!(h.0[0], 3.0, max_relative = 1e-6);
    }
}
