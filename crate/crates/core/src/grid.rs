//! Periodic sample grids and Fourier spectral calculus.
//!
//! A grid in complex dimension `n` samples the box `[0, L)^{2n}` at `N`
//! points per real axis. Real axes are ordered `x1, y1, x2, y2` and values
//! are stored row-major, so the last axis is contiguous. Complex coordinates
//! are measured from the box centre: `z_j = (x_j - L/2) + i (y_j - L/2)`.
//!
//! Derivatives are Fourier multipliers with wavenumber `2πm/L`; the Nyquist
//! wavenumber is zeroed, which keeps `∂̄_j` and `-∂_j` exact discrete adjoints.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::par;

/// Shape of a periodic grid: complex dimension, samples per axis, box side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    n: usize,
    samples: usize,
    side: f64,
}

impl GridSpec {
    /// `n ∈ {1, 2}`, `samples` even and at least 4, `side > 0`.
    pub fn new(n: usize, samples: usize, side: f64) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::InvalidGrid(format!("complex dimension {n} not in {{1, 2}}")));
        }
        if samples < 4 || samples % 2 != 0 {
            return Err(Error::InvalidGrid(format!("samples per axis {samples} must be even and >= 4")));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidGrid(format!("side length {side} must be positive")));
        }
        Ok(Self { n, samples, side })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn spacing(&self) -> f64 {
        self.side / self.samples as f64
    }

    pub fn real_axes(&self) -> usize {
        2 * self.n
    }

    pub fn num_points(&self) -> usize {
        self.samples.pow(self.real_axes() as u32)
    }

    /// Volume of one grid cell, `(L/N)^{2n}`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.real_axes() as i32)
    }

    /// Distance in the flat array between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.samples.pow((self.real_axes() - 1 - axis) as u32)
    }

    /// Sample index of `point` along `axis`.
    pub fn axis_index(&self, point: usize, axis: usize) -> usize {
        (point / self.stride(axis)) % self.samples
    }

    /// Coordinate along `axis` measured from the box centre.
    pub fn centered(&self, point: usize, axis: usize) -> f64 {
        self.axis_index(point, axis) as f64 * self.spacing() - 0.5 * self.side
    }

    /// Complex coordinate `z_j` (0-based `j`) measured from the box centre.
    pub fn z(&self, point: usize, j: usize) -> Complex64 {
        Complex64::new(self.centered(point, 2 * j), self.centered(point, 2 * j + 1))
    }

    /// Signed angular wavenumber of sample index `m`; Nyquist maps to zero.
    pub fn wavenumber(&self, m: usize) -> f64 {
        let n = self.samples;
        let signed = if m < n / 2 {
            m as f64
        } else if m == n / 2 {
            0.0
        } else {
            m as f64 - n as f64
        };
        2.0 * std::f64::consts::PI * signed / self.side
    }

    /// Points whose centred coordinates all satisfy `|x| <= fraction * L / 2`.
    pub fn interior_mask(&self, fraction: f64) -> Vec<bool> {
        let half = fraction * 0.5 * self.side + 1e-12 * self.side;
        (0..self.num_points())
            .map(|pt| (0..self.real_axes()).all(|a| self.centered(pt, a).abs() <= half))
            .collect()
    }

    /// Flat index of the grid point nearest to the complex point `z`.
    pub fn nearest_point(&self, z: &[Complex64]) -> usize {
        let mut idx = 0;
        for (j, zj) in z.iter().enumerate().take(self.n) {
            for (a, c) in [(2 * j, zj.re), (2 * j + 1, zj.im)] {
                let m = ((c + 0.5 * self.side) / self.spacing()).round() as i64;
                let m = m.rem_euclid(self.samples as i64) as usize;
                idx += m * self.stride(a);
            }
        }
        idx
    }
}

/// Complex samples of a function on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.num_points() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.num_points()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, Complex64::new(0.0, 0.0))
    }

    pub fn constant(grid: GridSpec, c: Complex64) -> Self {
        Self { grid, values: vec![c; grid.num_points()] }
    }

    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn(usize) -> Complex64 + Sync + Send,
    {
        Self { grid, values: par::map_range(grid.num_points(), f) }
    }

    pub fn from_real(grid: GridSpec, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    fn check_same(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.check_same(other)?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.check_same(other)?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.check_same(other)?;
        Ok(self.zip_map(other, |a, b| a * b))
    }

    pub fn scale(&self, c: Complex64) -> ScalarField {
        self.map(|v| v * c)
    }

    pub fn conj(&self) -> ScalarField {
        self.map(|v| v.conj())
    }

    pub fn map<F: Fn(Complex64) -> Complex64 + Sync + Send>(&self, f: F) -> ScalarField {
        let values = par::map_range(self.values.len(), |i| f(self.values[i]));
        ScalarField { grid: self.grid, values }
    }

    fn zip_map<F>(&self, other: &ScalarField, f: F) -> ScalarField
    where
        F: Fn(Complex64, Complex64) -> Complex64 + Sync + Send,
    {
        let values = par::map_range(self.values.len(), |i| f(self.values[i], other.values[i]));
        ScalarField { grid: self.grid, values }
    }
}

pub(crate) fn max_abs(values: &[Complex64]) -> f64 {
    par::max_by(values.len(), |i| values[i].norm()).unwrap_or(0.0)
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    type PlanCache = Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;
    static PLANS: OnceLock<PlanCache> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry((len, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

/// In-place FFT along the listed axes. The inverse transform is normalized,
/// so forward followed by inverse is the identity.
pub(crate) fn transform_axes(grid: &GridSpec, data: &mut [Complex64], axes: &[usize], inverse: bool) {
    let n = grid.samples();
    let fft = plan(n, inverse);
    for &axis in axes {
        let stride = grid.stride(axis);
        if stride == 1 {
            par::for_each_chunk_mut(data, n * 64, |_, chunk| fft.process(chunk));
            continue;
        }
        let block = n * stride;
        par::for_each_chunk_mut(data, block, |_, blk| {
            let mut lines = vec![Complex64::new(0.0, 0.0); block];
            for m in 0..n {
                for c in 0..stride {
                    lines[c * n + m] = blk[m * stride + c];
                }
            }
            par::for_each_chunk_mut(&mut lines, n * 64, |_, chunk| fft.process(chunk));
            for m in 0..n {
                for c in 0..stride {
                    blk[m * stride + c] = lines[c * n + m];
                }
            }
        });
    }
    if inverse {
        let scale = 1.0 / (n as f64).powi(axes.len() as i32);
        par::for_each_chunk_mut(data, par::REDUCE_CHUNK, |_, chunk| {
            for v in chunk {
                *v *= scale;
            }
        });
    }
}

/// Multiplies Fourier data (already transformed along `axes`) by
/// `symbol(k)`, where `k` holds the wavenumbers along `axes` in order.
pub(crate) fn apply_symbol<S>(grid: &GridSpec, data: &mut [Complex64], axes: &[usize], symbol: S)
where
    S: Fn(&[f64]) -> Complex64 + Sync + Send,
{
    let g = *grid;
    par::for_each_chunk_mut(data, par::REDUCE_CHUNK, |ci, chunk| {
        let mut k = vec![0.0; axes.len()];
        for (off, v) in chunk.iter_mut().enumerate() {
            let pt = ci * par::REDUCE_CHUNK + off;
            for (slot, &a) in k.iter_mut().zip(axes) {
                *slot = g.wavenumber(g.axis_index(pt, a));
            }
            *v *= symbol(&k);
        }
    });
}

/// Applies a Fourier multiplier acting on `axes` to raw samples.
pub(crate) fn spectral_apply<S>(grid: &GridSpec, values: &[Complex64], axes: &[usize], symbol: S) -> Vec<Complex64>
where
    S: Fn(&[f64]) -> Complex64 + Sync + Send,
{
    let mut data = values.to_vec();
    transform_axes(grid, &mut data, axes, false);
    apply_symbol(grid, &mut data, axes, symbol);
    transform_axes(grid, &mut data, axes, true);
    data
}

/// Symbol of `∂/∂z` (or `∂/∂z̄` when `conjugate`) in the wavenumbers `(kx, ky)`.
pub(crate) fn dz_symbol(kx: f64, ky: f64, conjugate: bool) -> Complex64 {
    if conjugate {
        Complex64::new(-0.5 * ky, 0.5 * kx)
    } else {
        Complex64::new(0.5 * ky, 0.5 * kx)
    }
}

pub(crate) fn partial_z_raw(grid: &GridSpec, values: &[Complex64], j: usize, conjugate: bool) -> Vec<Complex64> {
    spectral_apply(grid, values, &[2 * j, 2 * j + 1], |k| dz_symbol(k[0], k[1], conjugate))
}

/// Spectral `∂f/∂z_j`, or `∂f/∂z̄_j` when `conjugate` (`j` is 0-based).
pub fn partial_z(f: &ScalarField, j: usize, conjugate: bool) -> Result<ScalarField> {
    if j >= f.grid.dim() {
        return Err(Error::DimensionMismatch(format!("direction {j} on a grid of dimension {}", f.grid.dim())));
    }
    Ok(ScalarField { grid: f.grid, values: partial_z_raw(&f.grid, &f.values, j, conjugate) })
}

/// Spectral `∂²f/∂z_j∂z̄_k` evaluated as a single multiplier.
pub fn partial_z_zbar(f: &ScalarField, j: usize, k: usize) -> Result<ScalarField> {
    let n = f.grid.dim();
    if j >= n || k >= n {
        return Err(Error::DimensionMismatch(format!("directions ({j}, {k}) on a grid of dimension {n}")));
    }
    let values = if j == k {
        spectral_apply(&f.grid, &f.values, &[2 * j, 2 * j + 1], |w| {
            dz_symbol(w[0], w[1], false) * dz_symbol(w[0], w[1], true)
        })
    } else {
        spectral_apply(&f.grid, &f.values, &[2 * j, 2 * j + 1, 2 * k, 2 * k + 1], |w| {
            dz_symbol(w[0], w[1], false) * dz_symbol(w[2], w[3], true)
        })
    };
    Ok(ScalarField { grid: f.grid, values })
}

/// Periodic quadrature `Σ f · (L/N)^{2n}`.
pub fn integrate(f: &ScalarField) -> Complex64 {
    integrate_raw(&f.grid, &f.values)
}

pub(crate) fn integrate_raw(grid: &GridSpec, values: &[Complex64]) -> Complex64 {
    par::sum_by(values.len(), |i| values[i]) * grid.cell_volume()
}

/// Periodic convolution `(f * k)(x) = Σ_y f(y) k(x - y) dA`.
///
/// The kernel must be real, nonnegative and of unit discrete mass. The
/// result is real whenever `f` is.
pub fn convolve(f: &ScalarField, kernel: &ScalarField) -> Result<ScalarField> {
    if f.grid != kernel.grid {
        return Err(Error::DimensionMismatch("field and kernel live on different grids".into()));
    }
    validate_kernel(kernel)?;
    let values = convolve_raw(&f.grid, &f.values, &kernel.values);
    Ok(ScalarField { grid: f.grid, values })
}

pub(crate) fn validate_kernel(kernel: &ScalarField) -> Result<()> {
    let scale = kernel.max_abs();
    if scale == 0.0 {
        return Err(Error::InvalidKernel("kernel vanishes identically".into()));
    }
    let tol = 1e-14 * scale;
    if kernel.values.iter().any(|v| v.im.abs() > tol) {
        return Err(Error::InvalidKernel("kernel has nonzero imaginary part".into()));
    }
    if kernel.values.iter().any(|v| v.re < -tol) {
        return Err(Error::InvalidKernel("kernel takes negative values".into()));
    }
    let mass = integrate(kernel).re;
    if (mass - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidKernel(format!("kernel mass {mass} differs from 1")));
    }
    Ok(())
}

pub(crate) fn convolve_raw(grid: &GridSpec, f: &[Complex64], kernel: &[Complex64]) -> Vec<Complex64> {
    let axes: Vec<usize> = (0..grid.real_axes()).collect();
    let mut a = f.to_vec();
    let mut b = kernel.to_vec();
    transform_axes(grid, &mut a, &axes, false);
    transform_axes(grid, &mut b, &axes, false);
    let dv = grid.cell_volume();
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y * dv;
    }
    transform_axes(grid, &mut a, &axes, true);
    if f.iter().all(|v| v.im == 0.0) {
        for v in &mut a {
            v.im = 0.0;
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::new(3, 8, 1.0).is_err());
        assert!(GridSpec::new(1, 7, 1.0).is_err());
        assert!(GridSpec::new(1, 8, 0.0).is_err());
    }

    #[test]
    fn layout_is_row_major() {
        let g = GridSpec::new(2, 4, 4.0).unwrap();
        assert_eq!(g.num_points(), 256);
        assert_eq!(g.stride(3), 1);
        assert_eq!(g.stride(0), 64);
        let pt = 2 * 64 + 3;
        assert_eq!(g.axis_index(pt, 0), 2);
        assert_eq!(g.axis_index(pt, 3), 3);
        assert_eq!(g.z(pt, 0), c(0.0, -2.0));
        assert_eq!(g.nearest_point(&g_z(&g, pt)), pt);
    }

    fn g_z(g: &GridSpec, pt: usize) -> Vec<Complex64> {
        (0..g.dim()).map(|j| g.z(pt, j)).collect()
    }

    #[test]
    fn trig_polynomial_derivatives_are_exact() {
        let g = GridSpec::new(1, 16, 2.0 * std::f64::consts::PI).unwrap();
        // f = e^{i(2x + 3y)} gives ∂_z f = ½(2i + 3) f, ∂_z̄ f = ½(2i - 3) f.
        let f = ScalarField::from_fn(g, |p| {
            let (x, y) = (g.centered(p, 0), g.centered(p, 1));
            Complex64::from_polar(1.0, 2.0 * x + 3.0 * y)
        });
        let dz = partial_z(&f, 0, false).unwrap();
        let dzb = partial_z(&f, 0, true).unwrap();
        for p in 0..g.num_points() {
            let v = f.values()[p];
            assert!((dz.values()[p] - c(1.5, 1.0) * v).norm() < 1e-12);
            assert!((dzb.values()[p] - c(-1.5, 1.0) * v).norm() < 1e-12);
        }
    }

    #[test]
    fn mixed_second_derivative_of_modulus_squared() {
        // ∂∂̄ |z|² = 1 is not periodic, but ∂∂̄ of a trig polynomial is exact.
        let g = GridSpec::new(2, 8, 2.0 * std::f64::consts::PI).unwrap();
        let f = ScalarField::from_fn(g, |p| c((g.centered(p, 0) + g.centered(p, 3)).cos(), 0.0));
        let d = partial_z_zbar(&f, 0, 1).unwrap();
        // ∂_{z1}∂_{z̄2} cos(x1 + y2) = ½·(i/2)·(-cos) with ∂_{x1} and ∂_{y2}.
        for p in 0..g.num_points() {
            let expect = c(0.0, 0.25) * (-(g.centered(p, 0) + g.centered(p, 3)).cos());
            assert!((d.values()[p] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn derivative_integrates_to_zero() {
        let g = GridSpec::new(1, 16, 3.0).unwrap();
        let f = ScalarField::from_fn(g, |p| c((p as f64 * 0.37).sin(), (p as f64 * 0.11).cos()));
        let d = partial_z(&f, 0, true).unwrap();
        assert!(integrate(&d).norm() < 1e-12);
    }

    #[test]
    fn convolution_with_delta_is_identity() {
        let g = GridSpec::new(1, 8, 2.0).unwrap();
        let mut k = ScalarField::zeros(g);
        k.values_mut()[0] = c(1.0 / g.cell_volume(), 0.0);
        let f = ScalarField::from_fn(g, |p| c(p as f64, 0.0));
        let out = convolve(&f, &k).unwrap();
        for (a, b) in out.values().iter().zip(f.values()) {
            assert_relative_eq!(a.re, b.re, epsilon = 1e-12);
            assert_eq!(a.im, 0.0);
        }
    }

    #[test]
    fn convolution_rejects_signed_kernel() {
        let g = GridSpec::new(1, 8, 2.0).unwrap();
        let k = ScalarField::from_fn(g, |p| c(if p == 0 { -1.0 } else { 0.0 }, 0.0));
        let f = ScalarField::zeros(g);
        assert!(matches!(convolve(&f, &k), Err(Error::InvalidKernel(_))));
    }

    #[test]
    fn interior_mask_fraction() {
        let g = GridSpec::new(1, 16, 16.0).unwrap();
        let m = g.interior_mask(0.5);
        // centred coordinates -8..7, kept when |x| <= 4: nine values per axis.
        assert_eq!(m.iter().filter(|&&b| b).count(), 81);
    }
}
