//! Discrete Fourier transforms on box grids (rustfft-backed) and the
//! centered inversion used by the density engine.
//!
//! A grid with n points per axis on [-half, half) pairs with the dual
//! frequency lattice u_k = k̃ · du, du = π / half, where k̃ is the usual
//! signed FFT index. For a real, even spectrum g the centered inversion
//!
//! ```text
//! p(x_i) = (du / 2π)^d Σ_k (-1)^{k₁+…+k_d} g_k exp(-2πi i·k / n)
//! ```
//!
//! recovers `(2π)^{-d} ∫ e^{-i x·u} g(u) du` sampled at the grid nodes.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{Grid, GridData};

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

fn fft_axis_0(buf: &mut [Complex64], n: usize, inverse: bool) {
    // Row-major layout: axis 0 has stride n. Transpose, transform rows,
    // transpose back.
    let mut scratch = vec![Complex64::default(); buf.len()];
    for i in 0..n {
        for j in 0..n {
            scratch[j * n + i] = buf[i * n + j];
        }
    }
    let fft = plan(n, inverse);
    for row in scratch.chunks_exact_mut(n) {
        fft.process(row);
    }
    for i in 0..n {
        for j in 0..n {
            buf[i * n + j] = scratch[j * n + i];
        }
    }
}

/// In-place DFT over all axes of a row-major d-dimensional buffer.
pub fn fft_nd(buf: &mut [Complex64], dim: usize, n: usize, inverse: bool) {
    debug_assert_eq!(buf.len(), n.pow(dim as u32));
    let fft = plan(n, inverse);
    match dim {
        1 => fft.process(buf),
        _ => {
            for row in buf.chunks_exact_mut(n) {
                fft.process(row);
            }
            fft_axis_0(buf, n, inverse);
        }
    }
}

/// Signed FFT frequency index for slot k of an n-point axis.
pub fn signed_index(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Frequency lattice values u_k in FFT slot order for one axis.
pub fn axis_freqs(grid: Grid) -> Vec<f64> {
    let du = std::f64::consts::PI / grid.half;
    (0..grid.n).map(|k| signed_index(k, grid.n) as f64 * du).collect()
}

/// Frequency vector of the flat FFT slot `idx`.
pub fn freq_of(grid: Grid, idx: usize) -> crate::geom::Point {
    let du = std::f64::consts::PI / grid.half;
    match grid.dim {
        1 => crate::geom::Point::x(signed_index(idx, grid.n) as f64 * du),
        _ => {
            let kx = idx / grid.n;
            let ky = idx % grid.n;
            crate::geom::Point::new(
                signed_index(kx, grid.n) as f64 * du,
                signed_index(ky, grid.n) as f64 * du,
            )
        }
    }
}

/// Forward DFT of a real grid field (unnormalized: Σ f e^{-2πi jk/n}).
pub fn forward(data: &GridData) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> =
        data.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut buf, data.grid.dim, data.grid.n, false);
    buf
}

/// Inverse DFT (normalized by n^d); returns the real part.
pub fn inverse_real(spectrum: &[Complex64], grid: Grid) -> GridData {
    let mut buf = spectrum.to_vec();
    fft_nd(&mut buf, grid.dim, grid.n, true);
    let scale = 1.0 / grid.len() as f64;
    GridData { grid, values: buf.iter().map(|c| c.re * scale).collect() }
}

/// Parity (-1)^{k₁+…} of the flat FFT slot, for the centered inversion.
fn slot_parity(grid: Grid, idx: usize) -> f64 {
    let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    match grid.dim {
        1 => sign(idx),
        _ => sign(idx / grid.n) * sign(idx % grid.n),
    }
}

/// Centered Fourier inversion of a spectrum given in FFT slot order:
/// `(2π)^{-d} ∫ e^{-i x u} g(u) du` sampled on the grid nodes.
pub fn centered_inverse(spectrum: &[Complex64], grid: Grid) -> GridData {
    let du = std::f64::consts::PI / grid.half;
    let scale = (du / (2.0 * std::f64::consts::PI)).powi(grid.dim as i32);
    let mut buf: Vec<Complex64> = spectrum
        .iter()
        .enumerate()
        .map(|(idx, &g)| g * slot_parity(grid, idx))
        .collect();
    fft_nd(&mut buf, grid.dim, grid.n, false);
    GridData { grid, values: buf.iter().map(|c| c.re * scale).collect() }
}
