//! Forward and backward Kolmogorov equations for the truncated α-stable
//! generator.
//!
//! Forward: `u(t,x) = ∫₀ᵗ (P_{t-s} φ(s,·))(x) ds` solves
//! `∂u/∂t = Lu + φ`, `u(0,·) = 0`.
//!
//! Backward (drifted): `∂u/∂t + b·∇u + Lu = -φ`, `u(T,·) = 0`, solved by the
//! substitution `v(r,·) = u(T-r,·)` and Picard iteration
//! `v^{n+1}(r) = ∫₀^r P_{r-s}[b̃·∇v^n + φ̃](s) ds`, which is a ½-contraction
//! in `‖∇·‖_{C_b^β}` once `2 C(T) ‖b‖_{C_b^β} <= 1/2`; the factor C(T) is
//! measured, not assumed, and the solver refuses horizons that fail the test.
//!
//! Time integration uses the panel mesh prescribed for the problem (uniform
//! midpoint panels with geometric end refinement), but inside each panel the
//! semigroup kernel `e^{-(r-s)Ψ}` is integrated in closed form per frequency
//! mode against the midpoint-sampled source spectrum. This product form
//! keeps the `(t-s)^{-2/α}` derivative singularity exact, so Hessian slices
//! converge at the same rate as the solution itself. Gradients and Hessians
//! come from frequency-domain multipliers, not finite differences.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{sample_drift, Drift, ScalarFn};
use crate::fourier;
use crate::geom::{Point, SymMat};
use crate::grid::{Grid, GridData, GridFunction};
use crate::levy_model::CharExponent;
use crate::semigroup::{crop_center, pad_constant, HolderOptions};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolveOptions {
    /// Stored time slices (node count, both endpoints included).
    pub n_slices: usize,
    /// Slice grading exponent toward the rough end (> 1 refines it).
    pub slice_grading: f64,
    /// Midpoint panels per slice interval.
    pub panels_per_interval: usize,
    /// Geometric halving levels on the last 10% of each Duhamel window.
    pub end_grading_levels: usize,
    /// Geometric halving levels near s = 0 (iterated-source roughness).
    pub start_grading_levels: usize,
    /// Picard stop: ‖∇u^{n+1} - ∇u^n‖ < picard_tol_factor · ‖φ‖.
    pub picard_tol_factor: f64,
    pub max_iter: usize,
    /// Hölder exponent β used by every norm in the certificate.
    pub beta: f64,
    pub holder_seed: u64,
    /// Refuse (instead of warn) when α + β <= 2.
    pub refuse_alpha_beta: bool,
    /// Integral-identity residual tolerance, relative to T · ‖φ‖_∞.
    pub resid_tol: f64,
}

impl SolveOptions {
    pub fn new(beta: f64) -> Self {
        SolveOptions {
            n_slices: 16,
            slice_grading: 1.5,
            panels_per_interval: 4,
            end_grading_levels: 8,
            start_grading_levels: 4,
            picard_tol_factor: 1e-6,
            max_iter: 60,
            beta,
            holder_seed: 0x517e_ed,
            refuse_alpha_beta: false,
            resid_tol: 1e-2,
        }
    }

    fn holder(&self) -> HolderOptions {
        HolderOptions { beta: self.beta, seed: self.holder_seed, random_pairs: 10_000 }
    }
}

/// Source term φ(s, ·), time-constant or sliced.
pub enum Source<'a> {
    Static(&'a GridData),
    Slices(&'a GridFunction),
}

impl Source<'_> {
    fn grid(&self) -> Grid {
        match self {
            Source::Static(g) => g.grid,
            Source::Slices(f) => f.grid(),
        }
    }

    fn at(&self, t: f64) -> GridData {
        match self {
            Source::Static(g) => (*g).clone(),
            Source::Slices(f) => {
                let (k0, k1, w) = f.time_locate(t);
                if k0 == k1 {
                    f.slices[k0].clone()
                } else {
                    let mut out = f.slices[k0].clone();
                    for (o, v) in out.values.iter_mut().zip(&f.slices[k1].values) {
                        *o = (1.0 - w) * *o + w * v;
                    }
                    out
                }
            }
        }
    }

    fn sup(&self) -> f64 {
        match self {
            Source::Static(g) => g.max_abs(),
            Source::Slices(f) => f.slices.iter().map(|s| s.max_abs()).fold(0.0, f64::max),
        }
    }
}

/// One midpoint panel of the Duhamel mesh, with the source-slice bracket for
/// spectrum interpolation at its midpoint.
#[derive(Clone, Copy, Debug)]
struct Panel {
    width: f64,
    lo: usize,
    hi: usize,
    lerp: f64,
}

/// Midpoint panels covering [0, r_target] over the slice nodes, uniform per
/// interval with geometric halving toward both window ends.
fn build_panels(nodes: &[f64], k_target: usize, opts: &SolveOptions) -> Vec<Panel> {
    let r_target = nodes[k_target];
    let mut bounds: Vec<f64> = Vec::new();
    for j in 0..k_target {
        let (a, b) = (nodes[j], nodes[j + 1]);
        let m = opts.panels_per_interval.max(1);
        for p in 0..m {
            bounds.push(a + (b - a) * p as f64 / m as f64);
        }
    }
    bounds.push(r_target);

    // Geometric refinement of the final sub-panel toward s = r_target.
    let mut refined = bounds.clone();
    refined.pop();
    if let Some(&last) = refined.last() {
        let mut w = r_target - last;
        for _ in 0..opts.end_grading_levels {
            w *= 0.5;
            refined.push(r_target - w);
        }
    }
    refined.push(r_target);
    // And of the first sub-panel toward s = 0.
    if refined.len() > 2 {
        let first = refined[1];
        let mut extra = Vec::new();
        let mut w = first;
        for _ in 0..opts.start_grading_levels {
            w *= 0.5;
            extra.push(w);
        }
        extra.reverse();
        let mut all = vec![0.0];
        all.extend(extra);
        all.extend_from_slice(&refined[1..]);
        refined = all;
    }

    let locate = |s: f64| -> (usize, usize, f64) {
        let j = nodes[..=k_target].partition_point(|&r| r <= s).saturating_sub(1);
        let j = j.min(k_target - 1);
        let w = (s - nodes[j]) / (nodes[j + 1] - nodes[j]);
        (j, j + 1, w.clamp(0.0, 1.0))
    };

    refined
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let (lo, hi, lerp) = locate(mid);
            Panel { width: w[1] - w[0], lo, hi, lerp }
        })
        .collect()
}

/// Per-mode Duhamel accumulation over the panels (top end first):
/// Σ σ̂(mid) · e^{-(r-b)Ψ} · (1 - e^{-wΨ})/Ψ.
fn accumulate_mode(psi: f64, panels: &[Panel], spectra: &[Vec<Complex64>], mode: usize) -> Complex64 {
    let mut decay = 1.0f64;
    let mut acc = Complex64::default();
    for p in panels.iter().rev() {
        let kernel = if psi == 0.0 {
            p.width
        } else {
            -(-p.width * psi).exp_m1() / psi
        };
        let sig = spectra[p.lo][mode] * (1.0 - p.lerp) + spectra[p.hi][mode] * p.lerp;
        acc += sig * (decay * kernel);
        decay *= (-p.width * psi).exp();
    }
    acc
}

struct SliceSet {
    u: Vec<GridData>,
    grad: Vec<Vec<GridData>>,
}

/// Invert an accumulated padded spectrum into value/gradient (and optionally
/// Hessian and Lu) grids on the original grid.
struct Inverter {
    grid: Grid,
    padded: Grid,
}

impl Inverter {
    fn new(grid: Grid) -> Self {
        Inverter { grid, padded: crate::semigroup::padded_grid(grid) }
    }

    fn value(&self, spec: &[Complex64]) -> GridData {
        crop_center(&fourier::inverse_real(spec, self.padded), self.grid)
    }

    fn modulated(&self, spec: &[Complex64], f: impl Fn(Point) -> Complex64) -> GridData {
        let m: Vec<Complex64> = spec
            .iter()
            .enumerate()
            .map(|(idx, &v)| f(fourier::freq_of(self.padded, idx)) * v)
            .collect();
        self.value(&m)
    }

    fn gradient(&self, spec: &[Complex64]) -> Vec<GridData> {
        (0..self.grid.dim)
            .map(|a| self.modulated(spec, |u| Complex64::new(0.0, u.get(a))))
            .collect()
    }

    fn hessian(&self, spec: &[Complex64]) -> Vec<GridData> {
        let pairs: &[(usize, usize)] =
            if self.grid.dim == 1 { &[(0, 0)] } else { &[(0, 0), (1, 1), (0, 1)] };
        pairs
            .iter()
            .map(|&(a, b)| self.modulated(spec, |u| Complex64::new(-u.get(a) * u.get(b), 0.0)))
            .collect()
    }

    fn generator(&self, spec: &[Complex64], psi: &[f64]) -> GridData {
        let m: Vec<Complex64> = spec.iter().zip(psi).map(|(&v, &p)| v * (-p)).collect();
        self.value(&m)
    }
}

fn forward_spectrum(phi: &GridData) -> Vec<Complex64> {
    fourier::forward(&pad_constant(phi))
}

/// Forward solution snapshot at one time.
#[derive(Clone, Debug)]
pub struct ForwardSolve {
    pub t: f64,
    pub u: GridData,
    pub grad: Vec<GridData>,
    pub hess: Vec<GridData>,
}

/// Solve `∂u/∂t = Lu + φ`, `u(0) = 0`, returning the slice at time `t`.
pub fn solve_forward(
    ce: &CharExponent,
    source: &Source,
    t: f64,
    opts: &SolveOptions,
) -> Result<ForwardSolve> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid("solve_forward requires t > 0"));
    }
    let grid = source.grid();
    if grid.dim != ce.model.dim {
        return Err(Error::invalid("source grid dimension does not match the model"));
    }
    let inv = Inverter::new(grid);
    let psi = ce.psi_table(inv.padded);

    // Source spectra at the internal nodes (two nodes suffice for a static
    // source; sliced sources get one node per slice time).
    let nodes: Vec<f64> = match source {
        Source::Static(_) => vec![0.0, t],
        Source::Slices(f) => {
            let mut v: Vec<f64> = f.times.iter().copied().filter(|&s| s < t).collect();
            if v.first().copied() != Some(0.0) {
                v.insert(0, 0.0);
            }
            v.push(t);
            v
        }
    };
    let spectra: Vec<Vec<Complex64>> =
        nodes.iter().map(|&s| forward_spectrum(&source.at(s))).collect();

    let k_target = nodes.len() - 1;
    let mut popts = *opts;
    popts.panels_per_interval = match source {
        Source::Static(_) => 64,
        Source::Slices(_) => opts.panels_per_interval.max(4),
    };
    let panels = build_panels(&nodes, k_target, &popts);

    let acc: Vec<Complex64> =
        crate::par::map_range(psi.len(), |m| accumulate_mode(psi[m], &panels, &spectra, m));

    Ok(ForwardSolve { t, u: inv.value(&acc), grad: inv.gradient(&acc), hess: inv.hessian(&acc) })
}

/// Independent residual probe for the forward equation: center finite
/// differences in t against generator quadrature at sampled interior points.
/// Returns the sup over samples of |∂u/∂t - Lu - φ(t)|.
pub fn forward_residual(
    ce: &CharExponent,
    source: &Source,
    t: f64,
    dt: f64,
    opts: &SolveOptions,
    samples: usize,
) -> Result<f64> {
    let minus = solve_forward(ce, source, t - dt, opts)?;
    let plus = solve_forward(ce, source, t + dt, opts)?;
    let mid = solve_forward(ce, source, t, opts)?;
    let grid = mid.u.grid;
    let phi_t = source.at(t);
    let field = crate::fields::GriddedField { data: &mid.u };
    let mut worst = 0.0f64;
    let step = (grid.len() / samples.max(1)).max(1);
    for idx in (0..grid.len()).step_by(step) {
        let x = grid.point(idx);
        if !grid.contains_with_margin(x, 1.0 + 2.0 * grid.h()) {
            continue;
        }
        let dudt = (plus.u.values[idx] - minus.u.values[idx]) / (2.0 * dt);
        let lu = ce.apply_generator(&field, x)?;
        worst = worst.max((dudt - lu - phi_t.values[idx]).abs());
    }
    Ok(worst)
}

/// Diagnostics-rich backward solution (original t orientation, `u(T) = 0`).
#[derive(Clone, Debug)]
pub struct KolmogorovSolution {
    pub horizon: f64,
    pub beta: f64,
    pub times: Vec<f64>,
    pub u: Vec<GridData>,
    pub grad: Vec<Vec<GridData>>,
    pub hess: Vec<Vec<GridData>>,
    /// Generator action Lu per slice (spectral route).
    pub lu: Vec<GridData>,
    pub picard_diffs: Vec<f64>,
    pub ct_estimate: f64,
    pub b_norm: f64,
    /// 2 C(T) ‖b‖_{C_b^β}.
    pub contraction_product: f64,
    pub contraction_ok: bool,
    /// Sup over interior slices of the integral-identity defect,
    /// relative to T · ‖φ‖_∞.
    pub residual: f64,
    pub warning: Option<String>,
}

#[derive(Serialize)]
pub struct SolverDiagnostics {
    pub horizon: f64,
    pub beta: f64,
    pub picard_diffs: Vec<f64>,
    pub ct_estimate: f64,
    pub b_norm: f64,
    pub contraction_product: f64,
    pub contraction_ok: bool,
    pub residual: f64,
    pub warning: Option<String>,
}

impl KolmogorovSolution {
    pub fn diagnostics(&self) -> SolverDiagnostics {
        SolverDiagnostics {
            horizon: self.horizon,
            beta: self.beta,
            picard_diffs: self.picard_diffs.clone(),
            ct_estimate: self.ct_estimate,
            b_norm: self.b_norm,
            contraction_product: self.contraction_product,
            contraction_ok: self.contraction_ok,
            residual: self.residual,
            warning: self.warning.clone(),
        }
    }

    /// Largest successive-difference ratio of the Picard iteration.
    pub fn max_diff_ratio(&self) -> Option<f64> {
        if self.picard_diffs.len() < 2 {
            return None;
        }
        self.picard_diffs
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .fold(None, |m, r| Some(m.map_or(r, |v: f64| v.max(r))))
    }

    fn locate(&self, t: f64) -> (usize, usize, f64) {
        if t <= self.times[0] {
            return (0, 0, 0.0);
        }
        if t >= *self.times.last().unwrap() {
            let k = self.times.len() - 1;
            return (k, k, 0.0);
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        (k, k + 1, w)
    }

    fn blend(&self, grids: &[GridData], k0: usize, k1: usize, w: f64, x: Point) -> f64 {
        let a = grids[k0].interp_cubic(x);
        if k0 == k1 {
            a
        } else {
            (1.0 - w) * a + w * grids[k1].interp_cubic(x)
        }
    }

    pub fn eval_u(&self, t: f64, x: Point) -> f64 {
        let (k0, k1, w) = self.locate(t);
        self.blend(&self.u, k0, k1, w, x)
    }

    pub fn eval_grad(&self, t: f64, x: Point) -> Point {
        let (k0, k1, w) = self.locate(t);
        let dim = self.u[0].grid.dim;
        let mut out = Point::ZERO;
        for a in 0..dim {
            let v0 = self.grad[k0][a].interp_cubic(x);
            out.0[a] = if k0 == k1 {
                v0
            } else {
                (1.0 - w) * v0 + w * self.grad[k1][a].interp_cubic(x)
            };
        }
        out
    }

    pub fn eval_hess(&self, t: f64, x: Point) -> SymMat {
        let (k0, k1, w) = self.locate(t);
        let pick = |comp: usize| {
            let a0 = self.hess[k0][comp].interp_cubic(x);
            if k0 == k1 {
                a0
            } else {
                (1.0 - w) * a0 + w * self.hess[k1][comp].interp_cubic(x)
            }
        };
        if self.u[0].grid.dim == 1 {
            SymMat([pick(0), 0.0, 0.0])
        } else {
            SymMat([pick(0), pick(1), pick(2)])
        }
    }

    pub fn eval_lu(&self, t: f64, x: Point) -> f64 {
        let (k0, k1, w) = self.locate(t);
        self.blend(&self.lu, k0, k1, w, x)
    }

    pub fn grid(&self) -> Grid {
        self.u[0].grid
    }
}

/// Internal calibration family for C(T): smooth shapes whose measured
/// ratios track the kernel bound; the steep step realizes the sup-part
/// constant ‖Dp‖_{L¹}.
fn ct_family() -> Vec<ScalarFn> {
    vec![ScalarFn::smoothed_step(0.01), ScalarFn::gauss_bump(1.0), ScalarFn::gauss_bump(2.0)]
}

/// Measured C(T): max over the calibration family of
/// ‖Du(T)‖_{C_b^β} / ‖φ‖_{C_b^β} for the forward solve at horizon T.
pub fn estimate_ct(
    ce: &CharExponent,
    horizons: &[f64],
    grid: Grid,
    opts: &SolveOptions,
) -> Result<Vec<(f64, f64)>> {
    let family = ct_family();
    let hopts = opts.holder();
    let mut out = Vec::with_capacity(horizons.len());
    for &horizon in horizons {
        if !(horizon > 0.0) {
            return Err(Error::invalid("estimate_ct: horizons must be positive"));
        }
        let mut worst = 0.0f64;
        for phi in &family {
            let data = phi.sample(grid);
            let phi_norm = crate::semigroup::holder_norm(&data, &hopts)?;
            let sol = solve_forward(ce, &Source::Static(&data), horizon, opts)?;
            let du_norm = crate::semigroup::holder_norm_components(&sol.grad, &hopts)?;
            worst = worst.max(du_norm / phi_norm);
        }
        out.push((horizon, worst));
    }
    Ok(out)
}

/// Solve the backward equation by Picard iteration. The source φ is given in
/// the original t orientation; the drift may be time-dependent.
pub fn solve_backward(
    ce: &CharExponent,
    drift: &dyn Drift,
    phi: &Source,
    horizon: f64,
    opts: &SolveOptions,
) -> Result<KolmogorovSolution> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid("solve_backward requires T > 0"));
    }
    let grid = phi.grid();
    if grid.dim != ce.model.dim {
        return Err(Error::invalid("phi grid dimension does not match the model"));
    }
    let alpha = ce.model.alpha;
    let mut warning = None;
    if alpha + opts.beta <= 2.0 {
        let msg = format!(
            "alpha + beta = {:.3} <= 2: derivative estimates degrade at this index",
            alpha + opts.beta
        );
        if opts.refuse_alpha_beta {
            return Err(Error::invalid(msg));
        }
        warning = Some(msg);
    }
    let hopts = opts.holder();

    // Contraction certificate: measured C(T) and grid-estimated ‖b‖.
    let b_slices_t0 = sample_drift(grid, drift, 0.0);
    let b_norm = crate::semigroup::holder_norm_components(&b_slices_t0, &hopts)?;
    let ct = estimate_ct(ce, &[horizon], grid, opts)?[0].1;
    let product = 2.0 * ct * b_norm;
    if product > 0.5 {
        let max_admissible = bisect_horizon(ce, grid, b_norm, horizon, opts)?;
        return Err(Error::HorizonTooLarge { horizon, product, max_admissible });
    }

    // Reversed-time slice nodes r_k = T (k/K)^q, dense near r = 0 (t = T).
    let k_slices = opts.n_slices.max(3) - 1;
    let r_nodes: Vec<f64> = (0..=k_slices)
        .map(|k| horizon * ((k as f64) / k_slices as f64).powf(opts.slice_grading))
        .collect();

    let inv = Inverter::new(grid);
    let psi = ce.psi_table(inv.padded);

    // Time-reversed data per slice: φ̃(r) = φ(T - r), b̃(r) = b(T - r).
    let phi_slices: Vec<GridData> = r_nodes.iter().map(|&r| phi.at(horizon - r)).collect();
    let b_slices: Vec<Vec<GridData>> =
        r_nodes.iter().map(|&r| sample_drift(grid, drift, horizon - r)).collect();
    let phi_sup = phi.sup();
    let phi_norm = {
        let per: Result<Vec<f64>> =
            phi_slices.iter().map(|s| crate::semigroup::holder_norm(s, &hopts)).collect();
        per?.into_iter().fold(0.0f64, f64::max)
    };

    let n_nodes = r_nodes.len();
    let zero_set = SliceSet {
        u: vec![GridData::zeros(grid); n_nodes],
        grad: vec![vec![GridData::zeros(grid); grid.dim]; n_nodes],
    };

    // φ ≡ 0 fixes the zero solution immediately.
    if phi_sup == 0.0 {
        return Ok(finish_solution(
            ce, grid, &inv, &psi, &r_nodes, horizon, zero_set, Vec::new(), ct, b_norm, product,
            &phi_slices, &b_slices, opts, warning,
        ));
    }

    let picard_tol = opts.picard_tol_factor * phi_norm;
    let mut current = zero_set;
    let mut diffs: Vec<f64> = Vec::new();
    let panels_per_target: Vec<Vec<Panel>> =
        (0..n_nodes).map(|k| build_panels(&r_nodes, k.max(1).min(n_nodes - 1), opts)).collect();

    for _iter in 0..opts.max_iter {
        // Source slices: b̃·∇v^n + φ̃.
        let spectra: Vec<Vec<Complex64>> = crate::par::map_range(n_nodes, |j| {
            let mut src = phi_slices[j].clone();
            for a in 0..grid.dim {
                for (s, (bv, gv)) in src
                    .values
                    .iter_mut()
                    .zip(b_slices[j][a].values.iter().zip(&current.grad[j][a].values))
                {
                    *s += bv * gv;
                }
            }
            forward_spectrum(&src)
        });

        // New iterate per slice.
        let next: Vec<(GridData, Vec<GridData>)> = crate::par::map_range(n_nodes, |k| {
            if k == 0 {
                return (GridData::zeros(grid), vec![GridData::zeros(grid); grid.dim]);
            }
            let acc: Vec<Complex64> = (0..psi.len())
                .map(|m| accumulate_mode(psi[m], &panels_per_target[k], &spectra, m))
                .collect();
            (inv.value(&acc), inv.gradient(&acc))
        });
        let next = SliceSet {
            u: next.iter().map(|(u, _)| u.clone()).collect(),
            grad: next.into_iter().map(|(_, g)| g).collect(),
        };

        // ‖∇v^{n+1} - ∇v^n‖_{C_b^β}: sup over slices.
        let mut diff = 0.0f64;
        for j in 0..n_nodes {
            let comps: Vec<GridData> = (0..grid.dim)
                .map(|a| {
                    let mut d = next.grad[j][a].clone();
                    for (dv, ov) in d.values.iter_mut().zip(&current.grad[j][a].values) {
                        *dv -= ov;
                    }
                    d
                })
                .collect();
            diff = diff.max(crate::semigroup::holder_norm_components(&comps, &hopts)?);
        }
        diffs.push(diff);
        current = next;
        if diff < picard_tol {
            return Ok(finish_solution(
                ce, grid, &inv, &psi, &r_nodes, horizon, current, diffs, ct, b_norm, product,
                &phi_slices, &b_slices, opts, warning,
            ));
        }
    }

    Err(Error::Divergence {
        what: "backward Picard iteration".into(),
        iterations: opts.max_iter,
        history: diffs,
    })
}

#[allow(clippy::too_many_arguments)]
fn finish_solution(
    ce: &CharExponent,
    grid: Grid,
    inv: &Inverter,
    psi: &[f64],
    r_nodes: &[f64],
    horizon: f64,
    fin: SliceSet,
    diffs: Vec<f64>,
    ct: f64,
    b_norm: f64,
    product: f64,
    phi_slices: &[GridData],
    b_slices: &[Vec<GridData>],
    opts: &SolveOptions,
    warning: Option<String>,
) -> KolmogorovSolution {
    let n_nodes = r_nodes.len();
    // Hessian and Lu per slice from the final iterate's spectra.
    let final_specs: Vec<Vec<Complex64>> =
        crate::par::map_range(n_nodes, |j| forward_spectrum(&fin.u[j]));
    let hess: Vec<Vec<GridData>> =
        crate::par::map_range(n_nodes, |j| inv.hessian(&final_specs[j]));
    let lu: Vec<GridData> =
        crate::par::map_range(n_nodes, |j| inv.generator(&final_specs[j], psi));

    // Reverse into original orientation t = T - r (ascending t).
    let times: Vec<f64> = r_nodes.iter().rev().map(|&r| horizon - r).collect();
    let rev = |k: usize| n_nodes - 1 - k;
    let u_t: Vec<GridData> = (0..n_nodes).map(|k| fin.u[rev(k)].clone()).collect();
    let grad_t: Vec<Vec<GridData>> = (0..n_nodes).map(|k| fin.grad[rev(k)].clone()).collect();
    let hess_t: Vec<Vec<GridData>> = (0..n_nodes).map(|k| hess[rev(k)].clone()).collect();
    let lu_t: Vec<GridData> = (0..n_nodes).map(|k| lu[rev(k)].clone()).collect();
    let phi_t: Vec<GridData> = (0..n_nodes).map(|k| phi_slices[rev(k)].clone()).collect();
    let b_t: Vec<Vec<GridData>> = (0..n_nodes).map(|k| b_slices[rev(k)].clone()).collect();

    // Integral identity u(t) = ∫_t^T (Lu + b·∇u + φ)(s) ds, trapezoid over
    // the stored slices; defect relative to T‖φ‖_∞.
    let phi_sup = phi_t.iter().map(|s| s.max_abs()).fold(0.0f64, f64::max);
    let scale = (horizon * phi_sup).max(f64::MIN_POSITIVE);
    let integrand: Vec<Vec<f64>> = (0..n_nodes)
        .map(|k| {
            (0..grid.len())
                .map(|i| {
                    let mut v = lu_t[k].values[i] + phi_t[k].values[i];
                    for a in 0..grid.dim {
                        v += b_t[k][a].values[i] * grad_t[k][a].values[i];
                    }
                    v
                })
                .collect()
        })
        .collect();
    let mut residual = 0.0f64;
    let mut tail = vec![0.0f64; grid.len()];
    for k in (0..n_nodes - 1).rev() {
        let dt = times[k + 1] - times[k];
        for i in 0..grid.len() {
            tail[i] += 0.5 * dt * (integrand[k][i] + integrand[k + 1][i]);
        }
        if k > 0 {
            let defect = (0..grid.len())
                .map(|i| (u_t[k].values[i] - tail[i]).abs())
                .fold(0.0f64, f64::max);
            residual = residual.max(defect / scale);
        }
    }

    let _ = ce;
    KolmogorovSolution {
        horizon,
        beta: opts.beta,
        times,
        u: u_t,
        grad: grad_t,
        hess: hess_t,
        lu: lu_t,
        picard_diffs: diffs,
        ct_estimate: ct,
        b_norm,
        contraction_product: product,
        contraction_ok: product <= 0.5,
        residual,
        warning,
    }
}

/// Largest horizon with 2 C(T) ‖b‖ <= 1/2, located by bisection on the
/// measured C(T) (monotone in T).
fn bisect_horizon(
    ce: &CharExponent,
    grid: Grid,
    b_norm: f64,
    horizon: f64,
    opts: &SolveOptions,
) -> Result<f64> {
    let target = 0.5;
    let mut lo = horizon * 1e-3;
    let mut hi = horizon;
    // Ensure the lower end is admissible; otherwise keep shrinking.
    for _ in 0..8 {
        let p = 2.0 * estimate_ct(ce, &[lo], grid, opts)?[0].1 * b_norm;
        if p <= target {
            break;
        }
        lo *= 0.25;
    }
    for _ in 0..12 {
        let mid = 0.5 * (lo + hi);
        let p = 2.0 * estimate_ct(ce, &[mid], grid, opts)?[0].1 * b_norm;
        if p <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{HolderCusp, ZeroDrift};
    use crate::levy_model::LevyModel;
    use approx::assert_relative_eq;

    fn engine(alpha: f64) -> CharExponent {
        CharExponent::new(LevyModel::new(1, alpha).unwrap())
    }

    #[test]
    fn forward_constant_source_grows_linearly() {
        // φ ≡ c in x and s gives u(t,·) ≡ c·t (P_s preserves constants).
        let ce = engine(1.6);
        let grid = Grid::new(1, 256, 8.0).unwrap();
        let phi = GridData::from_fn(grid, |_| 2.0);
        let opts = SolveOptions::new(0.7);
        let sol = solve_forward(&ce, &Source::Static(&phi), 0.5, &opts).unwrap();
        for v in &sol.u.values {
            assert_relative_eq!(*v, 1.0, max_relative = 1e-8);
        }
    }

    #[test]
    fn forward_zero_source_is_zero() {
        let ce = engine(1.6);
        let grid = Grid::new(1, 128, 8.0).unwrap();
        let phi = GridData::zeros(grid);
        let opts = SolveOptions::new(0.7);
        let sol = solve_forward(&ce, &Source::Static(&phi), 0.3, &opts).unwrap();
        assert_eq!(sol.u.max_abs(), 0.0);
        assert!(solve_forward(&ce, &Source::Static(&phi), -0.3, &opts).is_err());
    }

    #[test]
    fn backward_zero_source_returns_immediately() {
        let ce = engine(1.8);
        let grid = Grid::new(1, 256, 8.0).unwrap();
        let phi = GridData::zeros(grid);
        let drift = HolderCusp { dim: 1, amplitude: 0.5, beta: 0.7 };
        let opts = SolveOptions::new(0.7);
        let sol = solve_backward(&ce, &drift, &Source::Static(&phi), 0.05, &opts).unwrap();
        assert!(sol.picard_diffs.is_empty());
        for s in &sol.u {
            assert_eq!(s.max_abs(), 0.0);
        }
    }

    #[test]
    fn backward_without_drift_matches_reversed_forward() {
        let ce = engine(1.8);
        let grid = Grid::new(1, 512, 8.0).unwrap();
        let phi = ScalarFn::gauss_bump(1.0).sample(grid);
        let mut opts = SolveOptions::new(0.7);
        opts.n_slices = 9;
        let horizon = 0.05;
        let drift = ZeroDrift(1);
        let sol = solve_backward(&ce, &drift, &Source::Static(&phi), horizon, &opts).unwrap();
        // Terminal slice exactly zero.
        assert_eq!(sol.u.last().unwrap().max_abs(), 0.0);
        // u(0,·) equals the forward solve at the full horizon.
        let fwd = solve_forward(&ce, &Source::Static(&phi), horizon, &opts).unwrap();
        let sup_diff = sol.u[0]
            .values
            .iter()
            .zip(&fwd.u.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(sup_diff <= 1e-8, "sup diff {sup_diff}");
        // With b = 0 the iteration converges in one step.
        assert!(sol.picard_diffs.len() <= 2);
    }

    #[test]
    fn ct_estimates_decrease_toward_zero_horizon() {
        let ce = engine(1.8);
        let grid = Grid::new(1, 512, 8.0).unwrap();
        let opts = SolveOptions::new(0.5);
        let table = estimate_ct(&ce, &[0.02, 0.08, 0.3], grid, &opts).unwrap();
        assert!(table[0].1 < table[1].1);
        assert!(table[1].1 < table[2].1);
    }

    #[test]
    fn backward_contraction_certificate() {
        let ce = engine(1.8);
        let grid = Grid::new(1, 512, 8.0).unwrap();
        let phi = ScalarFn::gauss_bump(1.0).sample(grid);
        let drift = HolderCusp { dim: 1, amplitude: 0.5, beta: 0.7 };
        let mut opts = SolveOptions::new(0.7);
        opts.n_slices = 8;
        let sol = solve_backward(&ce, &drift, &Source::Static(&phi), 0.04, &opts).unwrap();
        assert!(sol.contraction_ok, "product {}", sol.contraction_product);
        if let Some(r) = sol.max_diff_ratio() {
            assert!(r <= 0.55, "picard ratio {r}");
        }
        assert!(sol.residual <= opts.resid_tol, "residual {}", sol.residual);
    }

    #[test]
    fn backward_refuses_large_horizon() {
        let ce = engine(1.8);
        let grid = Grid::new(1, 256, 8.0).unwrap();
        let phi = ScalarFn::gauss_bump(1.0).sample(grid);
        let drift = HolderCusp { dim: 1, amplitude: 3.0, beta: 0.7 };
        let opts = SolveOptions::new(0.7);
        match solve_backward(&ce, &drift, &Source::Static(&phi), 1.5, &opts) {
            Err(Error::HorizonTooLarge { max_admissible, product, .. }) => {
                assert!(max_admissible < 1.5);
                assert!(product > 0.5);
            }
            other => panic!("expected HorizonTooLarge, got {other:?}"),
        }
    }
}
