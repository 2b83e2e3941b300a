//! Path simulation of the driven SDE `X_t = x + ∫ b(s,X_s) ds + L_t`.
//!
//! The driver is decomposed at a cutoff ε: jumps with ε < |y| <= 1 are drawn
//! from a compound Poisson process with the ν-shell intensity (their
//! compensator vanishes by symmetry), while jumps below ε are replaced per
//! step by centered Gaussian increments with the exact small-jump covariance
//! σ²(ε) = ∫_{|y|<=ε} y yᵀ ν(dy). Everything derives deterministically from
//! a per-path seed, and the jump component never depends on the mesh, so
//! drift levels and step sizes can be coupled exactly (same seed, same
//! noise, bitwise).
//!
//! Euler stepping inserts every jump time as a mesh node, so each jump lands
//! exactly once.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::Drift;
use crate::geom::{Mat2, Point};
use crate::levy_model::LevyModel;
use crate::quad::{mix_seed, GaussRule};
use crate::stats;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NoiseSpec {
    pub dim: usize,
    pub alpha: f64,
    pub horizon: f64,
    /// Base mesh step (jump times are inserted on top).
    pub dt: f64,
    /// Shell cutoff ε; jumps below it become Gaussian increments.
    pub eps_cut: f64,
}

impl NoiseSpec {
    pub fn new(model: &LevyModel, horizon: f64, dt: f64, eps_cut: f64) -> Result<NoiseSpec> {
        if !(eps_cut > 0.0 && eps_cut < 1.0) {
            return Err(Error::invalid("eps_cut must lie in (0, 1)"));
        }
        if !(horizon > 0.0) || !(dt > 0.0) || dt > horizon {
            return Err(Error::invalid("need 0 < dt <= horizon"));
        }
        Ok(NoiseSpec { dim: model.dim, alpha: model.alpha, horizon, dt, eps_cut })
    }

    fn model(&self) -> LevyModel {
        LevyModel::new(self.dim, self.alpha).expect("validated spec")
    }
}

/// One mesh step (t0, t1]: Gaussian increment over the interval plus an
/// optional jump landing exactly at t1.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Step {
    pub t0: f64,
    pub t1: f64,
    pub gauss: Point,
    pub jump: Option<Point>,
}

/// Driving-noise path on its event-augmented mesh.
#[derive(Clone, Debug)]
pub struct NoisePath {
    pub seed: u64,
    pub spec: NoiseSpec,
    pub steps: Vec<Step>,
    /// Per-axis variance rate of the Gaussian substitute, σ²(ε).
    pub sigma2_axis: f64,
}

impl NoisePath {
    pub fn node_times(&self) -> Vec<f64> {
        let mut t = Vec::with_capacity(self.steps.len() + 1);
        t.push(0.0);
        t.extend(self.steps.iter().map(|s| s.t1));
        t
    }

    pub fn jumps(&self) -> impl Iterator<Item = (usize, f64, Point)> + '_ {
        self.steps
            .iter()
            .enumerate()
            .filter_map(|(k, s)| s.jump.map(|y| (k, s.t1, y)))
    }

    /// Total driver increment Σ (gauss + jump).
    pub fn total_increment(&self) -> Point {
        let mut acc = Point::ZERO;
        for s in &self.steps {
            acc += s.gauss;
            if let Some(y) = s.jump {
                acc += y;
            }
        }
        acc
    }

    /// Merge consecutive base intervals into a coarser mesh (factor steps per
    /// coarse step) while keeping every jump node. Gaussian increments add
    /// exactly, so the coarse path is the same noise realization.
    pub fn coarsen(&self, factor: usize) -> NoisePath {
        assert!(factor >= 1);
        let coarse_dt = self.spec.dt * factor as f64;
        let is_coarse_node = |t: f64| -> bool {
            if (t - self.spec.horizon).abs() < 1e-12 {
                return true;
            }
            let k = (t / coarse_dt).round();
            (t - k * coarse_dt).abs() < 1e-9 * self.spec.horizon
        };
        let mut steps = Vec::new();
        let mut t0 = 0.0;
        let mut gauss = Point::ZERO;
        for s in &self.steps {
            gauss += s.gauss;
            let close = s.jump.is_some() || is_coarse_node(s.t1);
            if close {
                steps.push(Step { t0, t1: s.t1, gauss, jump: s.jump });
                t0 = s.t1;
                gauss = Point::ZERO;
            }
        }
        let mut spec = self.spec;
        spec.dt = coarse_dt;
        NoisePath { seed: self.seed, spec, steps, sigma2_axis: self.sigma2_axis }
    }
}

/// Draw the shell-jump events (times ascending, marks with ε < |y| <= 1).
fn draw_jumps(spec: &NoiseSpec, rng: &mut ChaCha8Rng) -> Vec<(f64, Point)> {
    let model = spec.model();
    let rate = model.shell_rate(spec.eps_cut) * spec.horizon;
    let count = if rate > 0.0 {
        Poisson::new(rate).map(|p| p.sample(rng) as usize).unwrap_or(0)
    } else {
        0
    };
    let mut times: Vec<f64> = (0..count).map(|_| rng.gen::<f64>() * spec.horizon).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let eps_a = spec.eps_cut.powf(-spec.alpha);
    times
        .into_iter()
        .map(|t| {
            // Radial inverse CDF of r^{-1-α} on (ε, 1].
            let u: f64 = rng.gen();
            let r = (eps_a - u * (eps_a - 1.0)).powf(-1.0 / spec.alpha);
            let dir = if spec.dim == 1 {
                if rng.gen::<bool>() {
                    Point::x(1.0)
                } else {
                    Point::x(-1.0)
                }
            } else {
                let th = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
                Point::new(th.cos(), th.sin())
            };
            (t, dir.scale(r))
        })
        .collect()
}

/// Generate the driving noise on the event-augmented mesh, reproducibly
/// from `seed`.
pub fn sample_noise(spec: &NoiseSpec, seed: u64) -> NoisePath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jumps = draw_jumps(spec, &mut rng);
    let model = spec.model();
    let sigma2 = model.ball_variance(spec.eps_cut);

    // Mesh nodes: base lattice plus jump times.
    let k_base = (spec.horizon / spec.dt).round().max(1.0) as usize;
    let mut nodes: Vec<(f64, Option<Point>)> =
        (1..=k_base).map(|k| (k as f64 * spec.horizon / k_base as f64, None)).collect();
    for &(t, y) in &jumps {
        nodes.push((t, Some(y)));
    }
    nodes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Collapse coinciding nodes, keeping any jump mark.
    nodes.dedup_by(|removed, kept| {
        if (removed.0 - kept.0).abs() < 1e-14 * spec.horizon {
            if kept.1.is_none() {
                kept.1 = removed.1;
            }
            true
        } else {
            false
        }
    });

    let mut steps = Vec::with_capacity(nodes.len());
    let mut t0 = 0.0;
    for (t1, jump) in nodes {
        let dt = t1 - t0;
        let sd = (sigma2 * dt).sqrt();
        let gx: f64 = StandardNormal.sample(&mut rng);
        let gy: f64 = if spec.dim == 2 { StandardNormal.sample(&mut rng) } else { 0.0 };
        steps.push(Step { t0, t1, gauss: Point::new(gx * sd, gy * sd), jump });
        t0 = t1;
    }
    NoisePath { seed, spec: *spec, steps, sigma2_axis: sigma2 }
}

/// Driver endpoint L_T alone (law checks): shell jumps summed plus a single
/// Gaussian with the aggregate substitute variance.
pub fn sample_endpoint(spec: &NoiseSpec, seed: u64) -> Point {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jumps = draw_jumps(spec, &mut rng);
    let model = spec.model();
    let sd = (model.ball_variance(spec.eps_cut) * spec.horizon).sqrt();
    let mut acc = Point::ZERO;
    for (_, y) in jumps {
        acc += y;
    }
    let gx: f64 = StandardNormal.sample(&mut rng);
    let gy: f64 = if spec.dim == 2 { StandardNormal.sample(&mut rng) } else { 0.0 };
    acc + Point::new(gx * sd, gy * sd)
}

/// One simulated trajectory: mesh times and post-jump states.
#[derive(Clone, Debug)]
pub struct PathRecord {
    pub seed: u64,
    pub x0: Point,
    pub times: Vec<f64>,
    pub states: Vec<Point>,
}

impl PathRecord {
    /// State just before the node (jump excluded when one lands there).
    pub fn pre_state(&self, node: usize, noise: &NoisePath) -> Point {
        if node == 0 {
            return self.states[0];
        }
        match noise.steps[node - 1].jump {
            Some(y) => self.states[node] - y,
            None => self.states[node],
        }
    }

    pub fn terminal(&self) -> Point {
        *self.states.last().unwrap()
    }

    /// State at a checkpoint time (must be a mesh node up to rounding).
    pub fn state_at(&self, t: f64) -> Point {
        let idx = self
            .times
            .iter()
            .position(|&s| (s - t).abs() < 1e-9 * self.times.last().unwrap().max(1.0))
            .unwrap_or(self.times.len() - 1);
        self.states[idx]
    }
}

/// Euler scheme on the noise mesh:
/// `X_{k+1} = X_k + b(t_k, X_k) Δt + ΔL_k`, jumps landing at their node.
pub fn euler_solve(drift: &dyn Drift, x0: Point, noise: &NoisePath) -> Result<PathRecord> {
    let mut states = Vec::with_capacity(noise.steps.len() + 1);
    let mut times = Vec::with_capacity(noise.steps.len() + 1);
    states.push(x0);
    times.push(0.0);
    let mut x = x0;
    for (k, s) in noise.steps.iter().enumerate() {
        let dt = s.t1 - s.t0;
        x += drift.eval(s.t0, x).scale(dt);
        x += s.gauss;
        if let Some(y) = s.jump {
            x += y;
        }
        if !x.is_finite() {
            return Err(Error::BlowUp { step: k });
        }
        states.push(x);
        times.push(s.t1);
    }
    Ok(PathRecord { seed: noise.seed, x0, times, states })
}

/// Mollifier family b_n = b * ϕ_n with the standard bump
/// ϕ(x) ∝ exp(-1/(1-|x|²)) on |x| < 1, discretized on Gauss nodes whose
/// weights are normalized to unit mass; the discrete mollifier is then a
/// convex combination of translates, so ‖b_n‖_{C_b^β} <= ‖b‖_{C_b^β}
/// holds exactly for the sampled values.
pub struct MollifierFamily {
    pub base: Arc<dyn Drift>,
    pub levels: Vec<u32>,
    dim: usize,
    /// (node, weight, derivative-weight) on (-1, 1).
    nodes: Vec<(f64, f64, f64)>,
}

fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

fn bump_deriv(x: f64) -> f64 {
    if x.abs() < 1.0 {
        let d = 1.0 - x * x;
        bump(x) * (-2.0 * x / (d * d))
    } else {
        0.0
    }
}

impl MollifierFamily {
    pub fn new(base: Arc<dyn Drift>, levels: Vec<u32>) -> MollifierFamily {
        let dim = base.dim();
        let rule = GaussRule::new(48);
        let raw: Vec<(f64, f64, f64)> = rule
            .mapped(-1.0, 1.0)
            .map(|(x, w)| (x, w * bump(x), w * bump_deriv(x)))
            .collect();
        let mass: f64 = raw.iter().map(|r| r.1).sum();
        let dmean: f64 = raw.iter().map(|r| r.2).sum::<f64>() / raw.len() as f64;
        let nodes = raw
            .into_iter()
            .map(|(x, w, d)| (x, w / mass, (d - dmean) / mass))
            .collect();
        MollifierFamily { base, levels, dim, nodes }
    }

    /// The level-n smooth drift b_n.
    pub fn mollify(&self, level: u32) -> Result<MollifiedDrift> {
        if level == 0 {
            return Err(Error::invalid("mollification level must be >= 1"));
        }
        Ok(MollifiedDrift {
            base: self.base.clone(),
            dim: self.dim,
            level,
            nodes: self.nodes.clone(),
        })
    }
}

/// b_n(x) = Σ w_i b(x - z_i / n); gradient via the kernel-derivative weights.
pub struct MollifiedDrift {
    base: Arc<dyn Drift>,
    dim: usize,
    pub level: u32,
    nodes: Vec<(f64, f64, f64)>,
}

impl Drift for MollifiedDrift {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, x: Point) -> Point {
        let n = self.level as f64;
        let mut acc = Point::ZERO;
        if self.dim == 1 {
            for &(z, w, _) in &self.nodes {
                acc += self.base.eval(t, x - Point::x(z / n)).scale(w);
            }
        } else {
            for &(zx, wx, _) in &self.nodes {
                for &(zy, wy, _) in &self.nodes {
                    let shift = Point::new(zx / n, zy / n);
                    acc += self.base.eval(t, x - shift).scale(wx * wy);
                }
            }
        }
        acc
    }

    fn jacobian(&self, t: f64, x: Point) -> Option<Mat2> {
        let n = self.level as f64;
        let mut j = [0.0f64; 4];
        if self.dim == 1 {
            for &(z, _, d) in &self.nodes {
                let b = self.base.eval(t, x - Point::x(z / n));
                j[0] += n * d * b.get(0);
            }
        } else {
            for &(zx, wx, dx) in &self.nodes {
                for &(zy, wy, dy) in &self.nodes {
                    let b = self.base.eval(t, x - Point::new(zx / n, zy / n));
                    for c in 0..2 {
                        j[c * 2] += n * dx * wy * b.get(c);
                        j[c * 2 + 1] += n * wx * dy * b.get(c);
                    }
                }
            }
        }
        Some(Mat2(j))
    }
}

/// Pairwise coupled L² distances between consecutive mollification levels.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub level_lo: u32,
    pub level_hi: u32,
    pub checkpoint: f64,
    /// E[|X^{lo} - X^{hi}|²]^{1/2} with shared noise.
    pub distance: f64,
    pub se: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceStudy {
    pub levels: Vec<u32>,
    pub checkpoints: Vec<f64>,
    pub n_paths: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceStudy {
    pub fn row(&self, lo: u32, hi: u32, checkpoint: f64) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| {
            r.level_lo == lo && r.level_hi == hi && (r.checkpoint - checkpoint).abs() < 1e-12
        })
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.level_lo.to_string(),
                    r.level_hi.to_string(),
                    crate::io::fmt(r.checkpoint),
                    crate::io::fmt(r.distance),
                    crate::io::fmt(r.se),
                ]
            })
            .collect();
        crate::io::write_csv(
            path,
            &["level_lo", "level_hi", "checkpoint", "distance", "se"],
            &rows,
        )
    }
}

/// Simulate all levels on identical noise per path and return the coupled
/// distances at the checkpoints. Checkpoint times must sit on the base mesh.
pub fn strong_convergence_study(
    family: &MollifierFamily,
    spec: &NoiseSpec,
    x0: Point,
    n_paths: usize,
    master_seed: u64,
    checkpoints: &[f64],
) -> Result<ConvergenceStudy> {
    let levels = family.levels.clone();
    if levels.len() < 2 {
        return Err(Error::invalid("convergence study needs at least two levels"));
    }
    let drifts: Vec<MollifiedDrift> =
        levels.iter().map(|&n| family.mollify(n)).collect::<Result<_>>()?;

    // Per-path squared distances, paths mapped in parallel, reduced in order.
    let per_path: Vec<Vec<f64>> = crate::par::map_range(n_paths, |p| {
        let noise = sample_noise(spec, mix_seed(master_seed, p as u64));
        let paths: Vec<PathRecord> = drifts
            .iter()
            .map(|d| euler_solve(d, x0, &noise).expect("bounded drift cannot blow up"))
            .collect();
        let mut sq = Vec::with_capacity((levels.len() - 1) * checkpoints.len());
        for li in 0..levels.len() - 1 {
            for &cp in checkpoints {
                let d = paths[li].state_at(cp) - paths[li + 1].state_at(cp);
                sq.push(d.norm_sq());
            }
        }
        sq
    });

    let mut rows = Vec::new();
    let mut slot = 0usize;
    for li in 0..levels.len() - 1 {
        for &cp in checkpoints {
            let samples: Vec<f64> = per_path.iter().map(|v| v[slot]).collect();
            let (dist, se) = stats::sqrt_mean_se(&samples);
            rows.push(ConvergenceRow {
                level_lo: levels[li],
                level_hi: levels[li + 1],
                checkpoint: cp,
                distance: dist,
                se,
            });
            slot += 1;
        }
    }
    Ok(ConvergenceStudy { levels, checkpoints: checkpoints.to_vec(), n_paths, rows })
}

/// Monte Carlo law check of the driver: mean, per-axis variance rate, and
/// the empirical characteristic function against exp(-TΨ(u)).
#[derive(Clone, Debug, Serialize)]
pub struct LawCheck {
    pub n_paths: usize,
    pub horizon: f64,
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    /// Var(L_T per axis) / (T ∫ y_i² ν(dy)) with standard errors.
    pub variance_ratio: Vec<f64>,
    pub variance_ratio_se: Vec<f64>,
    pub cf_rows: Vec<CfRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CfRow {
    pub freq: f64,
    pub empirical: f64,
    pub expected: f64,
    pub se: f64,
}

pub fn law_check(
    ce: &crate::levy_model::CharExponent,
    spec: &NoiseSpec,
    n_paths: usize,
    master_seed: u64,
    freqs: &[f64],
) -> Result<LawCheck> {
    let endpoints: Vec<Point> =
        crate::par::map_range(n_paths, |p| sample_endpoint(spec, mix_seed(master_seed, p as u64)));
    let model = spec.model();
    let dim = spec.dim;

    let mut mean = Vec::new();
    let mut mean_se = Vec::new();
    let mut vr = Vec::new();
    let mut vr_se = Vec::new();
    let var_rate = model.ball_variance(1.0);
    for a in 0..dim {
        let xs: Vec<f64> = endpoints.iter().map(|p| p.get(a)).collect();
        let (m, se) = stats::mean_se(&xs);
        mean.push(m);
        mean_se.push(se);
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (msq, sesq) = stats::mean_se(&sq);
        let denom = spec.horizon * var_rate;
        vr.push(msq / denom);
        vr_se.push(sesq / denom);
    }

    let mut cf_rows = Vec::new();
    for &f in freqs {
        let u = Point::x(f);
        let cos_vals: Vec<f64> = endpoints.iter().map(|p| (u.dot(*p)).cos()).collect();
        let (emp, se) = stats::mean_se(&cos_vals);
        let expected = (-spec.horizon * ce.psi(u)?).exp();
        cf_rows.push(CfRow { freq: f, empirical: emp, expected, se });
    }

    Ok(LawCheck {
        n_paths,
        horizon: spec.horizon,
        mean,
        mean_se,
        variance_ratio: vr,
        variance_ratio_se: vr_se,
        cf_rows,
    })
}

/// JSON-lines export of path records (seed, jumps, checkpoint states).
pub fn export_paths_jsonl(
    path: &std::path::Path,
    noises: &[NoisePath],
    records: &[PathRecord],
    checkpoints: &[f64],
) -> Result<()> {
    use std::io::Write;
    #[derive(Serialize)]
    struct Line<'a> {
        seed: u64,
        jumps: Vec<(f64, [f64; 2])>,
        checkpoints: &'a [f64],
        states: Vec<[f64; 2]>,
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (noise, rec) in noises.iter().zip(records) {
        let line = Line {
            seed: rec.seed,
            jumps: noise.jumps().map(|(_, t, y)| (t, y.0)).collect(),
            checkpoints,
            states: checkpoints.iter().map(|&t| rec.state_at(t).0).collect(),
        };
        serde_json::to_writer(&mut out, &line)?;
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{ConstDrift, LinearWell, ZeroDrift};
    use approx::assert_relative_eq;

    fn spec_1d() -> NoiseSpec {
        let model = LevyModel::new(1, 1.5).unwrap();
        NoiseSpec::new(&model, 0.5, 0.5 / 64.0, 0.05).unwrap()
    }

    #[test]
    fn spec_validation() {
        let model = LevyModel::new(1, 1.5).unwrap();
        assert!(NoiseSpec::new(&model, 0.5, 0.01, 0.0).is_err());
        assert!(NoiseSpec::new(&model, 0.5, 0.01, 1.5).is_err());
        assert!(NoiseSpec::new(&model, 0.5, 0.9, 0.1).is_err());
    }

    #[test]
    fn noise_is_reproducible() {
        let spec = spec_1d();
        let a = sample_noise(&spec, 42);
        let b = sample_noise(&spec, 42);
        assert_eq!(a.steps.len(), b.steps.len());
        for (x, y) in a.steps.iter().zip(&b.steps) {
            assert_eq!(x.gauss, y.gauss);
            assert_eq!(x.jump, y.jump);
        }
        let c = sample_noise(&spec, 43);
        assert_ne!(
            a.total_increment(),
            c.total_increment(),
            "different seeds should differ"
        );
    }

    #[test]
    fn jump_marks_stay_in_shell() {
        let spec = spec_1d();
        for seed in 0..20 {
            let noise = sample_noise(&spec, seed);
            for (_, _, y) in noise.jumps() {
                let r = y.norm();
                assert!(r > spec.eps_cut && r <= 1.0, "mark radius {r}");
            }
        }
    }

    #[test]
    fn euler_zero_drift_reproduces_driver() {
        let spec = spec_1d();
        let noise = sample_noise(&spec, 7);
        let path = euler_solve(&ZeroDrift(1), Point::x(0.3), &noise).unwrap();
        let expect = Point::x(0.3) + noise.total_increment();
        assert_relative_eq!(path.terminal().get(0), expect.get(0), epsilon = 1e-12);
    }

    #[test]
    fn euler_constant_drift_shifts_linearly() {
        let spec = spec_1d();
        let noise = sample_noise(&spec, 11);
        let c = ConstDrift { dim: 1, value: Point::x(2.0) };
        let path = euler_solve(&c, Point::ZERO, &noise).unwrap();
        let expect = 2.0 * spec.horizon + noise.total_increment().get(0);
        assert_relative_eq!(path.terminal().get(0), expect, epsilon = 1e-10);
    }

    #[test]
    fn euler_linear_drift_without_noise_matches_ode() {
        // Zeroed noise: X' = -x, X_T = x0 e^{-T} with first-order step error.
        let spec = {
            let model = LevyModel::new(1, 1.5).unwrap();
            NoiseSpec::new(&model, 1.0, 1.0 / 2048.0, 0.05).unwrap()
        };
        let mut noise = sample_noise(&spec, 3);
        for s in noise.steps.iter_mut() {
            s.gauss = Point::ZERO;
            s.jump = None;
        }
        let w = LinearWell::new(1, 1.0);
        let path = euler_solve(&w, Point::x(1.0), &noise).unwrap();
        assert_relative_eq!(path.terminal().get(0), (-1.0f64).exp(), epsilon = 1e-3);
    }

    #[test]
    fn coarsen_preserves_total_increment_and_jumps() {
        let spec = spec_1d();
        let noise = sample_noise(&spec, 5);
        let coarse = noise.coarsen(4);
        assert_relative_eq!(
            noise.total_increment().get(0),
            coarse.total_increment().get(0),
            epsilon = 1e-12
        );
        assert_eq!(noise.jumps().count(), coarse.jumps().count());
        assert!(coarse.steps.len() < noise.steps.len());
    }

    #[test]
    fn mollified_constant_is_exact() {
        let base = Arc::new(ConstDrift { dim: 1, value: Point::x(1.25) });
        let fam = MollifierFamily::new(base, vec![4]);
        let b4 = fam.mollify(4).unwrap();
        assert_relative_eq!(b4.eval(0.0, Point::x(0.7)).get(0), 1.25, epsilon = 1e-12);
        assert!(fam.mollify(0).is_err());
    }

    #[test]
    fn mollified_linear_is_exact_on_plateau() {
        let base = Arc::new(LinearWell::new(1, 0.4));
        let fam = MollifierFamily::new(base, vec![8]);
        let b8 = fam.mollify(8).unwrap();
        let x = Point::x(1.3);
        assert_relative_eq!(b8.eval(0.0, x).get(0), -0.4 * 1.3, epsilon = 1e-10);
        let j = b8.jacobian(0.0, x).unwrap();
        assert_relative_eq!(j.0[0], -0.4, epsilon = 1e-6);
    }

    #[test]
    fn mollified_cusp_sup_error_rate() {
        // sup_{|x|<=1} |b_n - b| <= ‖b‖ (support/n)^β.
        let beta = 0.7;
        let base = Arc::new(crate::fields::HolderCusp { dim: 1, amplitude: 1.0, beta });
        let fam = MollifierFamily::new(base.clone(), vec![4, 16, 64]);
        for &n in &[4u32, 16, 64] {
            let bn = fam.mollify(n).unwrap();
            let mut worst = 0.0f64;
            for k in 0..400 {
                let x = Point::x(-1.0 + 2.0 * k as f64 / 399.0);
                worst = worst.max((bn.eval(0.0, x) - base.eval(0.0, x)).norm());
            }
            let bound = 2.0 * (1.0 / n as f64).powf(beta);
            assert!(worst <= bound, "n = {n}: err {worst} > bound {bound}");
        }
    }

    #[test]
    fn convergence_identical_levels_distance_zero() {
        let base = Arc::new(crate::fields::HolderCusp { dim: 1, amplitude: 0.5, beta: 0.7 });
        let fam = MollifierFamily::new(base, vec![8, 8]);
        let spec = spec_1d();
        let study =
            strong_convergence_study(&fam, &spec, Point::ZERO, 16, 9, &[0.25, 0.5]).unwrap();
        for row in &study.rows {
            assert_eq!(row.distance, 0.0);
        }
    }

    #[test]
    fn law_check_smoke() {
        let model = LevyModel::new(1, 1.5).unwrap();
        let ce = crate::levy_model::CharExponent::new(model);
        let spec = NoiseSpec::new(&model, 0.5, 0.01, 0.02).unwrap();
        let law = law_check(&ce, &spec, 2000, 123, &[0.5, 1.0]).unwrap();
        assert!(law.mean[0].abs() <= 4.0 * law.mean_se[0].max(1e-3));
        assert!((law.variance_ratio[0] - 1.0).abs() <= 4.0 * law.variance_ratio_se[0]);
        for row in &law.cf_rows {
            assert!((row.empirical - row.expected).abs() <= 4.0 * row.se.max(1e-3));
        }
    }
}
