//! The Markov semigroup `P_t φ(x) = E[φ(x + L_t)]` on grid functions, the
//! grid Hölder-norm estimator, and derivative scaling-law fits.
//!
//! Convolution runs in the frequency domain on a zero-padded (factor two)
//! copy of the grid with constant extension of φ beyond the box, reusing the
//! density engine's spectrum `e^{-tΨ}`; a direct spatial-domain convolution
//! is kept as an independent cross-check route.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::density::DensityGrid;
use crate::error::{Error, Result};
use crate::fields::ScalarFn;
use crate::fourier;
use crate::grid::{Grid, GridData};
use crate::levy_model::CharExponent;
use crate::quad::linear_fit;

/// Padded companion grid (twice the box, twice the nodes per axis).
pub fn padded_grid(grid: Grid) -> Grid {
    Grid { dim: grid.dim, n: 2 * grid.n, half: 2.0 * grid.half }
}

/// Embed with constant extension into the padded grid.
pub fn pad_constant(data: &GridData) -> GridData {
    let g = data.grid;
    let pg = padded_grid(g);
    let n = g.n;
    let clamp = |i: i64| -> usize { i.clamp(0, n as i64 - 1) as usize };
    let values = match g.dim {
        1 => (0..pg.n)
            .map(|i| data.values[clamp(i as i64 - (n / 2) as i64)])
            .collect(),
        _ => {
            let mut v = Vec::with_capacity(pg.len());
            for ix in 0..pg.n {
                let jx = clamp(ix as i64 - (n / 2) as i64);
                for iy in 0..pg.n {
                    let jy = clamp(iy as i64 - (n / 2) as i64);
                    v.push(data.values[jx * n + jy]);
                }
            }
            v
        }
    };
    GridData { grid: pg, values }
}

/// Crop the centered region back to the original grid.
pub fn crop_center(data: &GridData, grid: Grid) -> GridData {
    let pg = data.grid;
    let n = grid.n;
    let off = n / 2;
    let values = match grid.dim {
        1 => (0..n).map(|i| data.values[i + off]).collect(),
        _ => {
            let mut v = Vec::with_capacity(grid.len());
            for ix in 0..n {
                for iy in 0..n {
                    v.push(data.values[(ix + off) * pg.n + (iy + off)]);
                }
            }
            v
        }
    };
    GridData { grid, values }
}

/// Derivative order applied in frequency space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Multiplier {
    Identity,
    /// i u_a
    Grad(usize),
    /// (i u_a)(i u_b) = -u_a u_b
    Hess(usize, usize),
}

impl Multiplier {
    fn apply(self, u: crate::geom::Point, v: Complex64) -> Complex64 {
        match self {
            Multiplier::Identity => v,
            Multiplier::Grad(a) => Complex64::new(0.0, u.get(a)) * v,
            Multiplier::Hess(a, b) => v * (-u.get(a) * u.get(b)),
        }
    }
}

/// Apply `P_t` (optionally composed with spatial derivatives) to φ via the
/// padded frequency route. Returns one grid per requested multiplier.
pub fn semigroup_apply_multi(
    ce: &CharExponent,
    t: f64,
    phi: &GridData,
    mults: &[Multiplier],
) -> Result<Vec<GridData>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid("apply_semigroup requires t >= 0"));
    }
    if phi.grid.dim != ce.model.dim {
        return Err(Error::invalid("phi grid dimension does not match the model"));
    }
    let grid = phi.grid;
    let pg = padded_grid(grid);
    let padded = pad_constant(phi);
    let mut spec = fourier::forward(&padded);
    if t > 0.0 {
        let psi = ce.psi_table(pg);
        for (s, &p) in spec.iter_mut().zip(psi.iter()) {
            *s *= (-t * p).exp();
        }
    }
    let mut out = Vec::with_capacity(mults.len());
    for &m in mults {
        let modulated: Vec<Complex64> = spec
            .iter()
            .enumerate()
            .map(|(idx, &v)| m.apply(fourier::freq_of(pg, idx), v))
            .collect();
        let full = fourier::inverse_real(&modulated, pg);
        out.push(crop_center(&full, grid));
    }
    Ok(out)
}

/// `P_t φ`; at t = 0 this is the identity.
pub fn apply_semigroup(ce: &CharExponent, t: f64, phi: &GridData) -> Result<GridData> {
    if t == 0.0 {
        if phi.grid.dim != ce.model.dim {
            return Err(Error::invalid("phi grid dimension does not match the model"));
        }
        return Ok(phi.clone());
    }
    Ok(semigroup_apply_multi(ce, t, phi, &[Multiplier::Identity])?.pop().unwrap())
}

/// Spatial-domain cross-check: direct convolution with a prebuilt density
/// grid, with constant extension of φ. O(n²) per node set; evaluate at every
/// `stride`-th node and return (result values, node indices).
pub fn apply_semigroup_spatial(
    phi: &GridData,
    density: &DensityGrid,
    stride: usize,
) -> (Vec<f64>, Vec<usize>) {
    let g = phi.grid;
    let n = g.n as i64;
    let vol = g.cell_volume();
    let clamp = |i: i64| -> usize { i.clamp(0, n - 1) as usize };
    let indices: Vec<usize> = (0..g.len()).step_by(stride.max(1)).collect();
    let values = crate::par::map_slice(&indices, |&flat| match g.dim {
        1 => {
            let i = flat as i64;
            let mut acc = 0.0;
            for j in 0..n {
                // y_j = coord(j) needs node i + (j - n/2) for x + y.
                let k = clamp(i + j - n / 2);
                acc += phi.values[k] * density.values.values[j as usize];
            }
            acc * vol
        }
        _ => {
            let ix = flat as i64 / n;
            let iy = flat as i64 % n;
            let mut acc = 0.0;
            for jx in 0..n {
                let kx = clamp(ix + jx - n / 2);
                for jy in 0..n {
                    let ky = clamp(iy + jy - n / 2);
                    acc += phi.values[kx * n as usize + ky]
                        * density.values.values[(jx * n + jy) as usize];
                }
            }
            acc * vol
        }
    });
    (values, indices)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HolderOptions {
    pub beta: f64,
    pub seed: u64,
    pub random_pairs: usize,
}

impl HolderOptions {
    pub fn new(beta: f64) -> Self {
        HolderOptions { beta, seed: 0x5eed_401d, random_pairs: 10_000 }
    }
}

/// Grid Hölder norm ‖φ‖_∞ + sup |φ(x)-φ(y)| / |x-y|^β, the semi-norm
/// estimated over all adjacent node pairs plus seeded random pairs.
/// Deterministic for a fixed seed.
pub fn holder_norm(data: &GridData, opts: &HolderOptions) -> Result<f64> {
    holder_norm_components(std::slice::from_ref(data), opts)
}

/// Same estimator for a vector field given per-component grids
/// (Euclidean norm of value differences).
pub fn holder_norm_components(comps: &[GridData], opts: &HolderOptions) -> Result<f64> {
    if !(opts.beta > 0.0 && opts.beta < 1.0) {
        return Err(Error::invalid("holder exponent must lie in (0, 1)"));
    }
    let g = comps[0].grid;
    let diff = |a: usize, b: usize| -> f64 {
        comps
            .iter()
            .map(|c| {
                let d = c.values[a] - c.values[b];
                d * d
            })
            .sum::<f64>()
            .sqrt()
    };
    let sup = (0..g.len())
        .map(|i| comps.iter().map(|c| c.values[i] * c.values[i]).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);

    let h = g.h();
    let hb = h.powf(opts.beta);
    let mut semi = 0.0f64;
    match g.dim {
        1 => {
            for i in 0..g.len() - 1 {
                semi = semi.max(diff(i, i + 1) / hb);
            }
        }
        _ => {
            let n = g.n;
            for ix in 0..n {
                for iy in 0..n {
                    let a = ix * n + iy;
                    if iy + 1 < n {
                        semi = semi.max(diff(a, a + 1) / hb);
                    }
                    if ix + 1 < n {
                        semi = semi.max(diff(a, a + n) / hb);
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_pairs {
        let a = rng.gen_range(0..g.len());
        let b = rng.gen_range(0..g.len());
        if a == b {
            continue;
        }
        let dist = (g.point(a) - g.point(b)).norm();
        semi = semi.max(diff(a, b) / dist.powf(opts.beta));
    }
    Ok(sup + semi)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingRow {
    pub family: String,
    pub norm: String,
    pub slope: f64,
    pub stderr: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize, Default)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
}

impl ScalingReport {
    pub fn slope(&self, family: &str, norm: &str) -> Option<&ScalingRow> {
        self.rows.iter().find(|r| r.family == family && r.norm == norm)
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.family.clone(),
                    r.norm.clone(),
                    crate::io::fmt(r.slope),
                    crate::io::fmt(r.stderr),
                    r.points.to_string(),
                ]
            })
            .collect();
        crate::io::write_csv(path, &["family", "norm", "slope", "stderr", "points"], &rows)
    }
}

/// Fit log‖D P_t φ‖_∞ and log‖D² P_t φ‖_∞ against log t for each family
/// member. Needs at least 4 points spanning a decent range.
pub fn derivative_scaling_report(
    ce: &CharExponent,
    families: &[ScalarFn],
    t_grid: &[f64],
    grid: Grid,
) -> Result<ScalingReport> {
    if t_grid.len() < 4 {
        return Err(Error::invalid("scaling report needs at least 4 time points"));
    }
    let dim = grid.dim;
    let mut mults = vec![Multiplier::Grad(0)];
    if dim == 2 {
        mults.push(Multiplier::Grad(1));
    }
    mults.push(Multiplier::Hess(0, 0));
    if dim == 2 {
        mults.push(Multiplier::Hess(1, 1));
        mults.push(Multiplier::Hess(0, 1));
    }

    let log_t: Vec<f64> = t_grid.iter().map(|t| t.ln()).collect();
    let mut report = ScalingReport::default();
    for fam in families {
        let phi = fam.sample(grid);
        let norms = crate::par::map_slice(t_grid, |&t| {
            let outs = semigroup_apply_multi(ce, t, &phi, &mults).expect("semigroup apply");
            let grad_sup = outs[..dim].iter().map(|g| g.max_abs()).fold(0.0f64, f64::max);
            let hess_sup = outs[dim..].iter().map(|g| g.max_abs()).fold(0.0f64, f64::max);
            (grad_sup, hess_sup)
        });
        for (label, pick) in [("D1", 0usize), ("D2", 1usize)] {
            let logs: Vec<f64> = norms
                .iter()
                .map(|&(g, h)| if pick == 0 { g.ln() } else { h.ln() })
                .collect();
            let (slope, _icept, se) = linear_fit(&log_t, &logs)?;
            report.rows.push(ScalingRow {
                family: fam.name.clone(),
                norm: label.to_string(),
                slope,
                stderr: se,
                points: t_grid.len(),
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;
    use crate::levy_model::LevyModel;
    use approx::assert_relative_eq;

    fn engine(alpha: f64) -> CharExponent {
        CharExponent::new(LevyModel::new(1, alpha).unwrap())
    }

    #[test]
    fn identity_at_zero_and_constants() {
        let ce = engine(1.5);
        let grid = Grid::new(1, 256, 8.0).unwrap();
        let phi = GridData::from_fn(grid, |p| (0.5 * p.get(0)).cos());
        let same = apply_semigroup(&ce, 0.0, &phi).unwrap();
        assert_eq!(same.values, phi.values);

        let c = GridData::from_fn(grid, |_| 3.25);
        let out = apply_semigroup(&ce, 0.4, &c).unwrap();
        for v in &out.values {
            assert_relative_eq!(*v, 3.25, max_relative = 1e-10);
        }
    }

    #[test]
    fn grid_mismatch_rejected() {
        let ce = engine(1.5);
        let grid = Grid::new(2, 32, 8.0).unwrap();
        let phi = GridData::zeros(grid);
        assert!(apply_semigroup(&ce, 0.1, &phi).is_err());
        assert!(apply_semigroup(&ce, -0.1, &phi).is_err());
    }

    #[test]
    fn contraction_and_positivity() {
        let ce = engine(1.6);
        let grid = Grid::new(1, 512, 8.0).unwrap();
        let phi = GridData::from_fn(grid, |p| (-(p.get(0) - 1.0).powi(2)).exp());
        let out = apply_semigroup(&ce, 0.5, &phi).unwrap();
        assert!(out.max_abs() <= phi.max_abs() * (1.0 + 1e-4));
        assert!(out.min() >= -1e-6 * phi.max_abs());
    }

    #[test]
    fn holder_norm_basics() {
        let grid = Grid::new(1, 512, 4.0).unwrap();
        let opts = HolderOptions::new(0.5);
        let zero = GridData::zeros(grid);
        assert_eq!(holder_norm(&zero, &opts).unwrap(), 0.0);
        let c = GridData::from_fn(grid, |_| -2.0);
        assert_relative_eq!(holder_norm(&c, &opts).unwrap(), 2.0);
        assert!(holder_norm(&c, &HolderOptions::new(1.5)).is_err());
    }

    #[test]
    fn holder_norm_of_cusp() {
        // φ(x) = min(|x|^β, 1): sup = 1, semi-norm = 1 realized at the cusp.
        let grid = Grid::new(1, 4096, 4.0).unwrap();
        let beta = 0.5;
        let phi = GridData::from_fn(grid, |p| p.get(0).abs().powf(beta).min(1.0));
        let norm = holder_norm(&phi, &HolderOptions::new(beta)).unwrap();
        assert_relative_eq!(norm, 2.0, max_relative = 0.05);
    }

    #[test]
    fn holder_norm_deterministic() {
        let grid = Grid::new(1, 256, 4.0).unwrap();
        let phi = GridData::from_fn(grid, |p| (p.get(0)).sin());
        let opts = HolderOptions::new(0.7);
        let a = holder_norm(&phi, &opts).unwrap();
        let b = holder_norm(&phi, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn semigroup_law() {
        let ce = engine(1.5);
        let grid = Grid::new(1, 1024, 8.0).unwrap();
        let phi = GridData::from_fn(grid, |p| (-(p.norm_sq())).exp());
        let one = apply_semigroup(&ce, 0.5, &phi).unwrap();
        let two_a = apply_semigroup(&ce, 0.25, &phi).unwrap();
        let two = apply_semigroup(&ce, 0.25, &two_a).unwrap();
        let sup_diff = one
            .values
            .iter()
            .zip(&two.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(sup_diff <= 1e-3 * phi.max_abs(), "semigroup law defect {sup_diff}");
    }

    #[test]
    fn spatial_route_matches_frequency_route() {
        let ce = engine(1.5);
        let grid = Grid::new(1, 512, 8.0).unwrap();
        let phi = GridData::from_fn(grid, |p| (-(p.get(0) * p.get(0))).exp());
        let freq = apply_semigroup(&ce, 0.4, &phi).unwrap();
        let dens = crate::density::build_density(
            &ce,
            0.4,
            grid,
            &crate::density::DensityOptions::default(),
        )
        .unwrap();
        let (vals, idxs) = apply_semigroup_spatial(&phi, &dens, 31);
        for (v, i) in vals.iter().zip(&idxs) {
            // Interior nodes only; the clamped extension differs near edges.
            let x = grid.point(*i).get(0).abs();
            if x < 4.0 {
                assert_relative_eq!(*v, freq.values[*i], epsilon = 2e-4);
            }
        }
    }

    #[test]
    fn scaling_report_shape_and_errors() {
        let ce = engine(1.8);
        let grid = Grid::new(1, 256, 8.0).unwrap();
        let fams = vec![ScalarFn::gauss_bump(2.0)];
        assert!(derivative_scaling_report(&ce, &fams, &[0.3, 0.5, 1.0], grid).is_err());
        let ts = [0.2, 0.3, 0.45, 0.7, 1.0];
        let rep = derivative_scaling_report(&ce, &fams, &ts, grid).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert!(rep.slope("gauss_2", "D1").is_some());
    }

    #[test]
    fn gradient_multiplier_is_a_derivative() {
        let ce = engine(1.5);
        let grid = Grid::new(1, 1024, 8.0).unwrap();
        let phi = GridData::from_fn(grid, |p| (-(p.norm_sq())).exp());
        let outs =
            semigroup_apply_multi(&ce, 0.3, &phi, &[Multiplier::Identity, Multiplier::Grad(0)])
                .unwrap();
        // Compare spectral gradient with finite differences of the value grid.
        let h = grid.h();
        let mid = grid.n / 2 + 37;
        let fd = (outs[0].values[mid + 1] - outs[0].values[mid - 1]) / (2.0 * h);
        assert_relative_eq!(outs[1].values[mid], fd, epsilon = 1e-4);
    }

    #[test]
    fn vector_holder_norm() {
        let grid = Grid::new(1, 256, 4.0).unwrap();
        let a = GridData::from_fn(grid, |p| p.get(0).sin());
        let b = GridData::zeros(grid);
        let opts = HolderOptions::new(0.5);
        let v = holder_norm_components(&[a.clone(), b], &opts).unwrap();
        let s = holder_norm(&a, &opts).unwrap();
        assert_relative_eq!(v, s, max_relative = 1e-12);
        let _ = Point::ZERO;
    }
}
