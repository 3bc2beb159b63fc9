//! Periodic stand-ins for the model weights of flat domains.
//!
//! The torus carries no strictly plurisubharmonic periodic function, so the
//! Gaussian weight `e^{-c|z|²}` is realized by a separable profile `ψ` with
//! `ψ(t) = t²` on a central interval and a compensating seam region where the
//! curvature is negative. `ψ″ = 2S`, where `S` is a Gaussian-smoothed
//! periodic step equal to `1` on `|t| < a` and `-β` outside, with mean zero.
//! Every quantity is a Fourier series, so derivatives have analytic oracles.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::Result;
use crate::grid::GridSpec;
use crate::hermitian::MetricField;

type C = Complex64;

/// Default half-width of the flat-curvature interval, as a fraction of `L`.
pub const DEFAULT_PLATEAU: f64 = 0.43;
/// Default smoothing width of the step, as a fraction of `L`.
pub const DEFAULT_SMOOTHING: f64 = 1.0 / 27.0;
/// Interior fraction on which the Gaussian family has exact curvature.
pub const DEFAULT_INTERIOR_FRACTION: f64 = 0.5;

/// One-dimensional periodic profile `ψ` with `ψ(t) = t²` near `t = 0`.
#[derive(Clone, Debug)]
pub struct Profile {
    side: f64,
    plateau: f64,
    smoothing: f64,
    beta: f64,
    /// `(k_m, A_m)` with `ψ(t) = Σ A_m (cos k_m t - 1)`.
    terms: Vec<(f64, f64)>,
}

impl Profile {
    /// `plateau` is the half-width `a` and `smoothing` the Gaussian width `σ`
    /// of the curvature step, both in absolute units.
    pub fn new(side: f64, plateau: f64, smoothing: f64) -> Self {
        let beta = 2.0 * plateau / (side - 2.0 * plateau);
        let mut terms = Vec::new();
        for m in 1.. {
            let k = 2.0 * PI * m as f64 / side;
            let damp = (-0.5 * smoothing * smoothing * k * k).exp();
            if damp < 1e-18 {
                break;
            }
            let cm = (1.0 + beta) * 2.0 * (k * plateau).sin() / (k * side) * damp;
            terms.push((k, -4.0 * cm / (k * k)));
        }
        Self { side, plateau, smoothing, beta, terms }
    }

    pub fn standard(side: f64) -> Self {
        Self::new(side, DEFAULT_PLATEAU * side, DEFAULT_SMOOTHING * side)
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn plateau(&self) -> f64 {
        self.plateau
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    /// Seam level `β` of the step.
    pub fn seam_level(&self) -> f64 {
        self.beta
    }

    pub fn psi(&self, t: f64) -> f64 {
        self.terms.iter().map(|&(k, a)| a * ((k * t).cos() - 1.0)).sum()
    }

    pub fn dpsi(&self, t: f64) -> f64 {
        self.terms.iter().map(|&(k, a)| -a * k * (k * t).sin()).sum()
    }

    pub fn ddpsi(&self, t: f64) -> f64 {
        self.terms.iter().map(|&(k, a)| -a * k * k * (k * t).cos()).sum()
    }

    /// Smoothed step `S = ψ″ / 2`.
    pub fn step(&self, t: f64) -> f64 {
        0.5 * self.ddpsi(t)
    }
}

fn per_axis<F: Fn(f64) -> f64>(grid: &GridSpec, shift: f64, f: F) -> Vec<f64> {
    (0..grid.samples())
        .map(|m| f(m as f64 * grid.spacing() - 0.5 * grid.side() - shift))
        .collect()
}

/// `φ = c Σ_j (ψ(x_j) + ψ(y_j))`, equal to `c|z|²` on the interior.
pub fn gaussian_potential(grid: &GridSpec, profile: &Profile, strength: f64) -> Vec<f64> {
    let psi = per_axis(grid, 0.0, |t| profile.psi(t));
    (0..grid.num_points())
        .map(|pt| strength * (0..grid.real_axes()).map(|a| psi[grid.axis_index(pt, a)]).sum::<f64>())
        .collect()
}

/// Analytic `∂_j ∂̄_j φ = (c/4)(ψ″(x_j) + ψ″(y_j))`; off-diagonal terms vanish.
pub fn gaussian_curvature(grid: &GridSpec, profile: &Profile, strength: f64, j: usize) -> Vec<f64> {
    let dd = per_axis(grid, 0.0, |t| profile.ddpsi(t));
    (0..grid.num_points())
        .map(|pt| 0.25 * strength * (dd[grid.axis_index(pt, 2 * j)] + dd[grid.axis_index(pt, 2 * j + 1)]))
        .collect()
}

/// `h = e^{-φ} I_r` for the Gaussian potential.
pub fn gaussian_metric(grid: &GridSpec, profile: &Profile, strength: f64, rank: usize) -> Result<MetricField> {
    let phi = gaussian_potential(grid, profile, strength);
    let mut data = Vec::with_capacity(phi.len() * rank * rank);
    for v in &phi {
        for a in 0..rank {
            for b in 0..rank {
                data.push(if a == b { C::new((-v).exp(), 0.0) } else { C::new(0.0, 0.0) });
            }
        }
    }
    MetricField::new(*grid, rank, data, None)
}

/// Periodic coordinate equal to `z_j - center_j` near `center`, holomorphic
/// there: `q = ½ψ′(x - x₀) + i ½ψ′(y - y₀)`.
pub fn apodized_coordinate(grid: &GridSpec, profile: &Profile, j: usize, center: C) -> Vec<C> {
    let dx = per_axis(grid, center.re, |t| 0.5 * profile.dpsi(t));
    let dy = per_axis(grid, center.im, |t| 0.5 * profile.dpsi(t));
    (0..grid.num_points())
        .map(|pt| C::new(dx[grid.axis_index(pt, 2 * j)], dy[grid.axis_index(pt, 2 * j + 1)]))
        .collect()
}

/// Nonnegative function vanishing (to `erfc` accuracy) on the plateau around
/// `center` and of order one in the seam region.
pub fn seam_indicator(grid: &GridSpec, profile: &Profile, center: &[C]) -> Vec<f64> {
    let scale = 1.0 + profile.seam_level();
    let axes: Vec<Vec<f64>> = (0..grid.real_axes())
        .map(|a| {
            let c = center[a / 2];
            let shift = if a % 2 == 0 { c.re } else { c.im };
            per_axis(grid, shift, |t| ((1.0 - profile.step(t)) / scale).max(0.0))
        })
        .collect();
    (0..grid.num_points())
        .map(|pt| (0..grid.real_axes()).map(|a| axes[a][grid.axis_index(pt, a)]).sum())
        .collect()
}

/// Rank-two metric `e^{-φ} H₀` with a band-limited hermitian twist `H₀`;
/// positive definite for `kappa < 2/3`.
pub fn twisted_metric(grid: &GridSpec, profile: &Profile, strength: f64, kappa: f64) -> Result<MetricField> {
    let phi = gaussian_potential(grid, profile, strength);
    let k = 2.0 * PI / grid.side();
    let last = grid.real_axes() - 1;
    let data = (0..grid.num_points())
        .flat_map(|pt| {
            let (x1, y1, yl) = (grid.centered(pt, 0), grid.centered(pt, 1), grid.centered(pt, last));
            let w = (-phi[pt]).exp();
            let off = C::from_polar(0.5 * kappa, k * (y1 + grid.centered(pt, last - 1)));
            [
                C::new(w * (1.0 + kappa * (k * x1).cos()), 0.0),
                w * off,
                w * off.conj(),
                C::new(w * (1.0 + kappa * (k * yl).sin()), 0.0),
            ]
        })
        .collect();
    MetricField::new(*grid, 2, data, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_is_quadratic_on_plateau() {
        let p = Profile::standard(6.0);
        for &t in &[0.0, 0.3, -0.9, 1.5] {
            assert!((p.psi(t) - t * t).abs() < 1e-5, "t = {t}: {}", p.psi(t));
            assert!((p.dpsi(t) - 2.0 * t).abs() < 1e-5);
            assert!((p.step(t) - 1.0).abs() < 5e-6);
        }
        // Mean-zero step: the seam carries compensating negative curvature.
        let m = 600;
        let mean: f64 = (0..m).map(|i| p.step(6.0 * i as f64 / m as f64)).sum::<f64>() / m as f64;
        assert!(mean.abs() < 1e-12);
        assert!(p.step(3.0) < -0.5 * p.seam_level());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = Profile::standard(6.0);
        let e = 1e-5;
        for &t in &[0.2, 2.4, -2.7] {
            let fd = (p.psi(t + e) - p.psi(t - e)) / (2.0 * e);
            assert!((fd - p.dpsi(t)).abs() < 1e-7);
            let fd2 = (p.dpsi(t + e) - p.dpsi(t - e)) / (2.0 * e);
            assert!((fd2 - p.ddpsi(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn seam_indicator_vanishes_at_centre() {
        let g = GridSpec::new(1, 32, 6.0).unwrap();
        let p = Profile::standard(6.0);
        let b = seam_indicator(&g, &p, &[C::new(0.0, 0.0)]);
        let centre = g.nearest_point(&[C::new(0.0, 0.0)]);
        assert!(b[centre] < 1e-20);
        let corner = 0;
        assert!(b[corner] > 1.0);
    }
}
