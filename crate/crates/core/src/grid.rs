//! Uniform box grids over [-half, half)^d and sampled fields on them.
//!
//! Grids use the half-open FFT convention: node i of an n-point axis sits at
//! `x_i = -half + i * h` with `h = 2 half / n`, so `x = -half` is a node and
//! `x = +half` is identified with it periodically. Evaluation outside the box
//! clamps to the boundary value (constant extension).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    /// Points per axis.
    pub n: usize,
    /// Box half-width.
    pub half: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, half: f64) -> Result<Grid> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid("grid dimension must be 1 or 2"));
        }
        if n < 4 || !half.is_finite() || half <= 0.0 {
            return Err(Error::invalid("grid needs n >= 4 and a positive box half-width"));
        }
        Ok(Grid { dim, n, half })
    }

    /// Axis spacing.
    pub fn h(&self) -> f64 {
        2.0 * self.half / self.n as f64
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume of one cell, h^d.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Axis coordinate of node index i.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half + i as f64 * self.h()
    }

    /// Spatial point of flat node index (row-major in d = 2).
    pub fn point(&self, idx: usize) -> Point {
        match self.dim {
            1 => Point::x(self.coord(idx)),
            _ => {
                let ix = idx / self.n;
                let iy = idx % self.n;
                Point::new(self.coord(ix), self.coord(iy))
            }
        }
    }

    /// Flat index of the node obtained by x -> -x (periodic reflection).
    pub fn reflect_index(&self, idx: usize) -> usize {
        let refl = |i: usize| (self.n - i) % self.n;
        match self.dim {
            1 => refl(idx),
            _ => {
                let ix = idx / self.n;
                let iy = idx % self.n;
                refl(ix) * self.n + refl(iy)
            }
        }
    }

    /// True if `x` lies at least `margin` inside the box on every axis.
    pub fn contains_with_margin(&self, x: Point, margin: f64) -> bool {
        let ok = |v: f64| v >= -self.half + margin && v <= self.half - margin;
        match self.dim {
            1 => ok(x.get(0)),
            _ => ok(x.get(0)) && ok(x.get(1)),
        }
    }
}

/// Scalar field sampled on a [`Grid`] (row-major in d = 2).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridData {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridData {
    pub fn zeros(grid: Grid) -> GridData {
        GridData { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> GridData {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        GridData { grid, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Riemann box integral h^d Σ values (trapezoid on the periodic lattice).
    pub fn box_integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// h^d Σ |values|.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    /// h^d Σ values².
    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()
    }

    /// Largest relative asymmetry |f(x) - f(-x)| / max|f|.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.values.len() {
            let j = self.grid.reflect_index(i);
            worst = worst.max((self.values[i] - self.values[j]).abs());
        }
        worst / scale
    }

    fn axis_locate(&self, x: f64) -> (usize, f64) {
        // Fractional node coordinate, clamped to the box for constant extension.
        let h = self.grid.h();
        let u = (x + self.grid.half) / h;
        let max = (self.grid.n - 1) as f64;
        let u = u.clamp(0.0, max);
        let i0 = (u.floor() as usize).min(self.grid.n - 2);
        (i0, u - i0 as f64)
    }

    /// Multilinear interpolation with constant extension outside the box.
    pub fn interp_linear(&self, p: Point) -> f64 {
        match self.grid.dim {
            1 => {
                let (i, s) = self.axis_locate(p.get(0));
                (1.0 - s) * self.values[i] + s * self.values[i + 1]
            }
            _ => {
                let n = self.grid.n;
                let (ix, sx) = self.axis_locate(p.get(0));
                let (iy, sy) = self.axis_locate(p.get(1));
                let v00 = self.values[ix * n + iy];
                let v01 = self.values[ix * n + iy + 1];
                let v10 = self.values[(ix + 1) * n + iy];
                let v11 = self.values[(ix + 1) * n + iy + 1];
                (1.0 - sx) * ((1.0 - sy) * v00 + sy * v01) + sx * ((1.0 - sy) * v10 + sy * v11)
            }
        }
    }

    fn axis_cubic(&self, i0: usize, s: f64, fetch: impl Fn(usize) -> f64) -> f64 {
        // Catmull-Rom through nodes i0-1 .. i0+2, edge nodes repeated.
        let n = self.grid.n;
        let im = i0.saturating_sub(1);
        let i1 = i0 + 1;
        let i2 = (i0 + 2).min(n - 1);
        let (p0, p1, p2, p3) = (fetch(im), fetch(i0), fetch(i1), fetch(i2));
        let s2 = s * s;
        let s3 = s2 * s;
        0.5 * ((2.0 * p1)
            + (-p0 + p2) * s
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s2
            + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * s3)
    }

    /// Cubic (Catmull-Rom) interpolation; C¹ inside the box, constant-extended
    /// outside.
    pub fn interp_cubic(&self, p: Point) -> f64 {
        match self.grid.dim {
            1 => {
                let (i0, s) = self.axis_locate(p.get(0));
                self.axis_cubic(i0, s, |i| self.values[i])
            }
            _ => {
                let n = self.grid.n;
                let (ix, sx) = self.axis_locate(p.get(0));
                let (iy, sy) = self.axis_locate(p.get(1));
                self.axis_cubic(ix, sx, |i| {
                    self.axis_cubic(iy, sy, |j| self.values[i * n + j])
                })
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Time-indexed family of slices sharing one grid geometry.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridFunction {
    pub times: Vec<f64>,
    pub slices: Vec<GridData>,
}

impl GridFunction {
    pub fn new(times: Vec<f64>, slices: Vec<GridData>) -> Result<GridFunction> {
        if times.len() != slices.len() || times.is_empty() {
            return Err(Error::invalid("grid function needs matched, nonempty times/slices"));
        }
        let g = slices[0].grid;
        if !slices.iter().all(|s| s.grid == g) {
            return Err(Error::invalid("grid function slices must share one grid"));
        }
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("grid function times must be strictly increasing"));
        }
        Ok(GridFunction { times, slices })
    }

    pub fn grid(&self) -> Grid {
        self.slices[0].grid
    }

    /// Bracketing slice indices and interpolation weight for time `t`
    /// (clamped to the covered range).
    pub fn time_locate(&self, t: f64) -> (usize, usize, f64) {
        let times = &self.times;
        if t <= times[0] {
            return (0, 0, 0.0);
        }
        if t >= *times.last().unwrap() {
            let k = times.len() - 1;
            return (k, k, 0.0);
        }
        let k = times.partition_point(|&s| s <= t) - 1;
        let w = (t - times[k]) / (times[k + 1] - times[k]);
        (k, k + 1, w)
    }

    /// Space-cubic, time-linear evaluation.
    pub fn eval(&self, t: f64, x: Point) -> f64 {
        let (k0, k1, w) = self.time_locate(t);
        let a = self.slices[k0].interp_cubic(x);
        if k0 == k1 {
            return a;
        }
        let b = self.slices[k1].interp_cubic(x);
        (1.0 - w) * a + w * b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_dims() {
        assert!(Grid::new(3, 64, 8.0).is_err());
        assert!(Grid::new(1, 2, 8.0).is_err());
        assert!(Grid::new(1, 64, -1.0).is_err());
    }

    #[test]
    fn reflect_is_involution() {
        let g = Grid::new(2, 8, 4.0).unwrap();
        for idx in 0..g.len() {
            assert_eq!(g.reflect_index(g.reflect_index(idx)), idx);
        }
    }

    #[test]
    fn linear_interp_reproduces_linear_functions() {
        let g = Grid::new(1, 64, 4.0).unwrap();
        let f = GridData::from_fn(g, |p| 2.0 * p.get(0) + 1.0);
        assert_relative_eq!(f.interp_linear(Point::x(0.33)), 1.66, max_relative = 1e-12);
    }

    #[test]
    fn cubic_interp_smooth_function() {
        let g = Grid::new(1, 256, 4.0).unwrap();
        let f = GridData::from_fn(g, |p| (p.get(0)).sin());
        let x = 0.7321;
        assert_relative_eq!(f.interp_cubic(Point::x(x)), x.sin(), epsilon = 1e-6);
    }

    #[test]
    fn constant_extension_outside_box() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let f = GridData::from_fn(g, |p| p.get(0));
        // Left edge node value is -1, clamped beyond the box.
        assert_relative_eq!(f.interp_linear(Point::x(-5.0)), -1.0);
        assert_relative_eq!(f.interp_cubic(Point::x(5.0)), f.values[15]);
    }

    #[test]
    fn bilinear_reproduces_bilinear() {
        let g = Grid::new(2, 32, 2.0).unwrap();
        let f = GridData::from_fn(g, |p| 1.0 + p.get(0) - 0.5 * p.get(1));
        let p = Point::new(0.37, -0.81);
        assert_relative_eq!(f.interp_linear(p), 1.0 + 0.37 + 0.5 * 0.81, max_relative = 1e-12);
    }

    #[test]
    fn time_interp_clamps() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let gf = GridFunction::new(
            vec![0.0, 1.0],
            vec![GridData::zeros(g), GridData::from_fn(g, |_| 2.0)],
        )
        .unwrap();
        assert_relative_eq!(gf.eval(-1.0, Point::x(0.0)), 0.0);
        assert_relative_eq!(gf.eval(0.5, Point::x(0.0)), 1.0);
        assert_relative_eq!(gf.eval(9.0, Point::x(0.0)), 2.0);
    }
}
