//! Transition densities of the driving process by Fourier inversion.
//!
//! For each time t the density and its first two spatial derivatives come
//! from inverting `e^{-tΨ(u)}`, `(-i u_j) e^{-tΨ(u)}` and `(-u_j u_k) e^{-tΨ(u)}`
//! on dual uniform grids. The frequency cutoff is validated against the
//! spectrum decay before any transform: the tail beyond the lattice must be
//! below 1e-12, otherwise the build refuses and names the cutoff (and grid
//! size) that would suffice. Mass deficits are measured and reported, never
//! renormalized away.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier;
use crate::grid::{Grid, GridData};
use crate::levy_model::CharExponent;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DensityOptions {
    /// Allowed deviation of the box mass from 1.
    pub mass_tol: f64,
    /// Negative excursions below -neg_tol_factor · max abort the build.
    pub neg_tol_factor: f64,
    /// Allowed relative asymmetry under x -> -x.
    pub symmetry_tol: f64,
    /// Spectrum decay required at the lattice edge: e^{-tΨ} < exp(-ln_decay).
    pub ln_decay: f64,
    /// Largest supported time.
    pub t_max: f64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        DensityOptions {
            mass_tol: 1e-4,
            neg_tol_factor: 1e-6,
            symmetry_tol: 1e-8,
            ln_decay: 12.0 * std::f64::consts::LN_10,
            t_max: 4.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DensityDiagnostics {
    /// Trapezoid box mass (deficit is 1 - mass).
    pub mass: f64,
    pub min_value: f64,
    pub max_value: f64,
    /// Max |p(x) - p(-x)| relative to the peak.
    pub symmetry_defect: f64,
    /// Relative mismatch between grid L² of p and Parseval's value.
    pub parseval_defect: f64,
    /// t·Ψ at the lattice edge (decay certificate).
    pub edge_exponent: f64,
}

/// Density p_t with gradient and Hessian grids.
#[derive(Clone, Debug)]
pub struct DensityGrid {
    pub t: f64,
    pub values: GridData,
    /// One grid per axis.
    pub grad: Vec<GridData>,
    /// d = 1: [xx]; d = 2: [xx, yy, xy].
    pub hess: Vec<GridData>,
    pub diagnostics: DensityDiagnostics,
}

/// Largest frequency magnitude representable on the lattice (corner mode).
fn lattice_edge(grid: Grid) -> f64 {
    let du = std::f64::consts::PI / grid.half;
    let nyquist = (grid.n / 2) as f64 * du;
    nyquist * (grid.dim as f64).sqrt()
}

/// Build p_t, Dp_t and D²p_t on `grid`.
pub fn build_density(
    ce: &CharExponent,
    t: f64,
    grid: Grid,
    opts: &DensityOptions,
) -> Result<DensityGrid> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid("build_density requires t > 0"));
    }
    if t > opts.t_max {
        return Err(Error::invalid(format!(
            "build_density supports t <= {}, got {t}",
            opts.t_max
        )));
    }
    if grid.dim != ce.model.dim {
        return Err(Error::invalid("grid dimension does not match the model"));
    }

    let edge = lattice_edge(grid);
    let edge_exponent = t * ce.psi_radius(edge, 1.0);
    if edge_exponent < opts.ln_decay {
        let needed = required_cutoff(ce, t, opts.ln_decay, edge);
        let axis_needed = needed / (grid.dim as f64).sqrt();
        let needed_n = 2 * (axis_needed * grid.half / std::f64::consts::PI).ceil() as usize;
        return Err(Error::Resolution { have: edge, needed, needed_n });
    }

    let psi = ce.psi_table(grid);
    let spectrum: Vec<f64> = crate::par::map_slice(&psi, |&p| (-t * p).exp());

    let complex: Vec<Complex64> = spectrum.iter().map(|&g| Complex64::new(g, 0.0)).collect();
    let values = fourier::centered_inverse(&complex, grid);

    let mut grad = Vec::with_capacity(grid.dim);
    for axis in 0..grid.dim {
        let spec: Vec<Complex64> = (0..grid.len())
            .map(|idx| {
                let u = fourier::freq_of(grid, idx).get(axis);
                Complex64::new(0.0, -u) * spectrum[idx]
            })
            .collect();
        grad.push(fourier::centered_inverse(&spec, grid));
    }

    let pairs: &[(usize, usize)] = if grid.dim == 1 { &[(0, 0)] } else { &[(0, 0), (1, 1), (0, 1)] };
    let mut hess = Vec::with_capacity(pairs.len());
    for &(a, b) in pairs {
        let spec: Vec<Complex64> = (0..grid.len())
            .map(|idx| {
                let u = fourier::freq_of(grid, idx);
                Complex64::new(-u.get(a) * u.get(b), 0.0) * spectrum[idx]
            })
            .collect();
        hess.push(fourier::centered_inverse(&spec, grid));
    }

    let mass = values.box_integral();
    let min_value = values.min();
    let max_value = values.max_abs();
    let symmetry_defect = values.symmetry_defect();
    let du = std::f64::consts::PI / grid.half;
    let spec_l2 = spectrum.iter().map(|g| g * g).sum::<f64>() * du.powi(grid.dim as i32)
        / (2.0 * std::f64::consts::PI).powi(grid.dim as i32);
    let grid_l2 = values.l2_norm_sq();
    let parseval_defect = (grid_l2 - spec_l2).abs() / spec_l2.max(f64::MIN_POSITIVE);

    let diagnostics = DensityDiagnostics {
        mass,
        min_value,
        max_value,
        symmetry_defect,
        parseval_defect,
        edge_exponent,
    };

    if (mass - 1.0).abs() > opts.mass_tol {
        return Err(Error::Accuracy {
            what: format!("density mass at t = {t}"),
            measured: (mass - 1.0).abs(),
            tol: opts.mass_tol,
        });
    }
    if min_value < -opts.neg_tol_factor * max_value {
        return Err(Error::Accuracy {
            what: format!("density negativity at t = {t} (min {min_value:.3e})"),
            measured: -min_value,
            tol: opts.neg_tol_factor * max_value,
        });
    }
    if symmetry_defect > opts.symmetry_tol {
        return Err(Error::Accuracy {
            what: format!("density symmetry at t = {t}"),
            measured: symmetry_defect,
            tol: opts.symmetry_tol,
        });
    }

    Ok(DensityGrid { t, values, grad, hess, diagnostics })
}

fn required_cutoff(ce: &CharExponent, t: f64, ln_decay: f64, start: f64) -> f64 {
    let mut hi = start.max(1.0);
    for _ in 0..60 {
        if t * ce.psi_radius(hi, 1.0) >= ln_decay {
            break;
        }
        hi *= 2.0;
    }
    let mut lo = hi / 2.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if t * ce.psi_radius(mid, 1.0) >= ln_decay {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

impl DensityGrid {
    /// Trapezoid L¹ norm of a derivative grid: order 1 takes one axis,
    /// order 2 takes an axis pair.
    pub fn derivative_l1_norm(&self, order: usize, axes: (usize, usize)) -> Result<f64> {
        let dim = self.values.grid.dim;
        match order {
            1 => {
                if axes.0 >= dim {
                    return Err(Error::invalid("axis out of range"));
                }
                Ok(self.grad[axes.0].l1_norm())
            }
            2 => {
                let idx = match (dim, axes) {
                    (1, (0, 0)) => 0,
                    (2, (0, 0)) => 0,
                    (2, (1, 1)) => 1,
                    (2, (0, 1)) | (2, (1, 0)) => 2,
                    _ => return Err(Error::invalid("axis pair out of range")),
                };
                Ok(self.hess[idx].l1_norm())
            }
            _ => Err(Error::invalid("derivative order must be 1 or 2")),
        }
    }

    /// Dump the density values as CSV.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        crate::io::grid_csv(path, &self.values)
    }

    /// Dump the density values as a float64 blob with a JSON sidecar.
    pub fn write_blob(&self, prefix: &std::path::Path, alpha: f64) -> Result<()> {
        crate::io::grid_blob(prefix, &self.values, self.t, alpha)
    }
}

/// Sup distance between the spatial self-convolution of p_t and p_{2t},
/// evaluated at every `stride`-th node by direct summation. The convolution
/// route shares no Fourier data with the p_{2t} build.
pub fn chapman_kolmogorov_defect(
    ce: &CharExponent,
    t: f64,
    grid: Grid,
    stride: usize,
    opts: &DensityOptions,
) -> Result<f64> {
    let p_t = build_density(ce, t, grid, opts)?;
    let p_2t = build_density(ce, 2.0 * t, grid, opts)?;
    let n = grid.n;
    let half_n = n as i64 / 2;
    let vol = grid.cell_volume();
    let targets: Vec<usize> = (0..grid.len()).step_by(stride.max(1)).collect();
    let defects = crate::par::map_slice(&targets, |&i| {
        let conv = match grid.dim {
            1 => {
                let i = i as i64;
                let mut acc = 0.0;
                for j in 0..n as i64 {
                    let k = i - j + half_n;
                    if (0..n as i64).contains(&k) {
                        acc += p_t.values.values[j as usize] * p_t.values.values[k as usize];
                    }
                }
                acc * vol
            }
            _ => {
                let ix = (i / n) as i64;
                let iy = (i % n) as i64;
                let mut acc = 0.0;
                for jx in 0..n as i64 {
                    let kx = ix - jx + half_n;
                    if !(0..n as i64).contains(&kx) {
                        continue;
                    }
                    for jy in 0..n as i64 {
                        let ky = iy - jy + half_n;
                        if (0..n as i64).contains(&ky) {
                            acc += p_t.values.values[(jx * n as i64 + jy) as usize]
                                * p_t.values.values[(kx * n as i64 + ky) as usize];
                        }
                    }
                }
                acc * vol
            }
        };
        (conv - p_2t.values.values[i]).abs()
    });
    Ok(defects.into_iter().fold(0.0f64, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::LevyModel;

    fn engine(dim: usize, alpha: f64) -> CharExponent {
        CharExponent::new(LevyModel::new(dim, alpha).unwrap())
    }

    #[test]
    fn mass_and_symmetry_1d() {
        let ce = engine(1, 1.5);
        let grid = Grid::new(1, 1024, 8.0).unwrap();
        let dg = build_density(&ce, 0.5, grid, &DensityOptions::default()).unwrap();
        assert!((dg.diagnostics.mass - 1.0).abs() < 1e-4);
        assert!(dg.diagnostics.symmetry_defect < 1e-8);
        // Gradient vanishes at the origin by symmetry.
        let mid = grid.n / 2;
        assert!(dg.grad[0].values[mid].abs() < 1e-8 * dg.diagnostics.max_value);
    }

    #[test]
    fn refuses_insufficient_cutoff() {
        let ce = engine(1, 1.5);
        let grid = Grid::new(1, 64, 8.0).unwrap();
        // Small t concentrates the spectrum; 64 modes cannot decay enough.
        let err = build_density(&ce, 0.02, grid, &DensityOptions::default()).unwrap_err();
        match err {
            Error::Resolution { needed, needed_n, .. } => {
                assert!(needed > lattice_edge(grid));
                assert!(needed_n > 64);
            }
            other => panic!("expected Resolution error, got {other}"),
        }
    }

    #[test]
    fn refuses_t_beyond_supported_range() {
        let ce = engine(1, 1.5);
        let grid = Grid::new(1, 512, 8.0).unwrap();
        assert!(build_density(&ce, 5.0, grid, &DensityOptions::default()).is_err());
        assert!(build_density(&ce, -0.5, grid, &DensityOptions::default()).is_err());
    }

    #[test]
    fn parseval_holds() {
        let ce = engine(1, 1.8);
        let grid = Grid::new(1, 1024, 8.0).unwrap();
        let dg = build_density(&ce, 0.3, grid, &DensityOptions::default()).unwrap();
        assert!(dg.diagnostics.parseval_defect < 1e-4);
    }

    #[test]
    fn l1_norm_api() {
        let ce = engine(1, 1.5);
        let grid = Grid::new(1, 1024, 8.0).unwrap();
        let dg = build_density(&ce, 0.5, grid, &DensityOptions::default()).unwrap();
        assert!(dg.derivative_l1_norm(1, (0, 0)).unwrap() > 0.0);
        assert!(dg.derivative_l1_norm(2, (0, 0)).unwrap() > 0.0);
        assert!(dg.derivative_l1_norm(3, (0, 0)).is_err());
        assert!(dg.derivative_l1_norm(1, (1, 0)).is_err());
    }

    #[test]
    fn chapman_kolmogorov_1d() {
        let ce = engine(1, 1.5);
        let grid = Grid::new(1, 512, 8.0).unwrap();
        let defect =
            chapman_kolmogorov_defect(&ce, 0.5, grid, 7, &DensityOptions::default()).unwrap();
        assert!(defect < 1e-3, "CK defect {defect}");
    }
}
