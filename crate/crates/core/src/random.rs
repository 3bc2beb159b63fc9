//! Seeded random test data: metrics, curvature fields and smooth forms.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exterior::{basis, Bidegree, EForm, Valued};
use crate::grid::GridSpec;
use crate::hermitian::{dbar, CurvatureField, MetricField};
use crate::linalg;

type C = Complex64;

pub use rand::SeedableRng;

/// Deterministic generator for a seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_c(rng: &mut ChaCha8Rng) -> C {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Random hermitian `size×size` matrix with standard normal entries.
pub fn hermitian(rng: &mut ChaCha8Rng, size: usize) -> Vec<C> {
    let a: Vec<C> = (0..size * size).map(|_| normal_c(rng)).collect();
    linalg::symmetrize(&a, size)
}

/// Random positive definite matrix `A A^H + shift I`.
pub fn positive_definite(rng: &mut ChaCha8Rng, size: usize, shift: f64) -> Vec<C> {
    let a: Vec<C> = (0..size * size).map(|_| normal_c(rng)).collect();
    let mut m = linalg::matmul(&a, &linalg::adjoint(&a, size), size);
    for i in 0..size {
        m[i * size + i] += shift;
    }
    linalg::symmetrize(&m, size)
}

/// Pointwise independent random positive definite metric.
pub fn metric(rng: &mut ChaCha8Rng, grid: GridSpec, rank: usize) -> Result<MetricField> {
    let data: Vec<C> = (0..grid.num_points()).flat_map(|_| positive_definite(rng, rank, 0.5)).collect();
    MetricField::new(grid, rank, data, None)
}

/// Pointwise independent curvature whose Nakano matrix is random hermitian.
pub fn curvature(rng: &mut ChaCha8Rng, h: &MetricField) -> Result<CurvatureField> {
    let size = h.grid().dim() * h.rank();
    let mats: Vec<Vec<C>> = (0..h.grid().num_points()).map(|_| hermitian(rng, size)).collect();
    CurvatureField::from_nakano_matrices(h, &mats)
}

/// Pointwise independent random form (no smoothness).
pub fn form(rng: &mut ChaCha8Rng, grid: GridSpec, bidegree: Bidegree, rank: usize) -> Result<EForm> {
    let nm = basis(grid.dim(), bidegree).len();
    let vals: Vec<Vec<C>> = (0..nm * rank).map(|_| (0..grid.num_points()).map(|_| normal_c(rng)).collect()).collect();
    EForm::from_fn(grid, bidegree, rank, Valued::Bundle, |m, c, pt| vals[m * rank + c][pt])
}

/// Periodic displacement `z - center` with each real coordinate wrapped to
/// `[-L/2, L/2)`.
pub fn wrapped_offset(grid: &GridSpec, pt: usize, center: &[C]) -> Vec<C> {
    let l = grid.side();
    let wrap = |t: f64| (t + 0.5 * l).rem_euclid(l) - 0.5 * l;
    (0..grid.dim())
        .map(|j| {
            let z = grid.z(pt, j);
            C::new(wrap(z.re - center[j].re), wrap(z.im - center[j].im))
        })
        .collect()
}

/// Smooth bump data: a Gaussian window of the given width around `center`
/// times a random polynomial of degree `degree` in `z` and `z̄`.
#[derive(Clone, Debug)]
pub struct Bump {
    pub center: Vec<C>,
    pub width: f64,
    /// Coefficients of `z^a z̄^b` per complex direction, indexed by component.
    coeffs: Vec<Vec<(Vec<u32>, C)>>,
}

impl Bump {
    pub fn random(rng: &mut ChaCha8Rng, grid: &GridSpec, components: usize, center: Vec<C>, width: f64, degree: u32) -> Self {
        let n = grid.dim();
        let mut exps: Vec<Vec<u32>> = vec![vec![]];
        for _ in 0..2 * n {
            exps = exps
                .into_iter()
                .flat_map(|e| (0..=degree).map(move |d| [e.clone(), vec![d]].concat()))
                .collect();
        }
        exps.retain(|e| e.iter().sum::<u32>() <= degree);
        let coeffs = (0..components)
            .map(|_| exps.iter().map(|e| (e.clone(), normal_c(rng))).collect())
            .collect();
        Self { center, width, coeffs }
    }

    /// Value of component `c` at `pt`, with polynomial variables scaled by
    /// the width.
    pub fn value(&self, grid: &GridSpec, c: usize, pt: usize) -> C {
        let w = wrapped_offset(grid, pt, &self.center);
        let r2: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        let window = (-r2 / (self.width * self.width)).exp();
        if window < 1e-300 {
            return C::new(0.0, 0.0);
        }
        let poly: C = self.coeffs[c]
            .iter()
            .map(|(e, a)| {
                let mut t = *a;
                for (j, zj) in w.iter().enumerate() {
                    let u = zj / self.width;
                    t *= u.powu(e[2 * j]) * u.conj().powu(e[2 * j + 1]);
                }
                t
            })
            .sum();
        window * poly
    }
}

/// Random centre within `radius` of the box centre along every real axis.
pub fn center(rng: &mut ChaCha8Rng, grid: &GridSpec, radius: f64) -> Vec<C> {
    (0..grid.dim())
        .map(|_| C::new(rng.gen_range(-radius..=radius), rng.gen_range(-radius..=radius)))
        .collect()
}

/// Smooth bundle-valued form with one random bump per coefficient.
pub fn bump_form(
    rng: &mut ChaCha8Rng,
    grid: GridSpec,
    bidegree: Bidegree,
    rank: usize,
    center_radius: f64,
    width: f64,
) -> Result<EForm> {
    let nm = basis(grid.dim(), bidegree).len();
    let bumps: Vec<Bump> = (0..nm)
        .map(|_| {
            let c = center(rng, &grid, center_radius);
            Bump::random(rng, &grid, rank, c, width, 2)
        })
        .collect();
    EForm::from_fn(grid, bidegree, rank, Valued::Bundle, |m, c, pt| bumps[m].value(&grid, c, pt))
}

/// Top-degree source `f = b (P - Σ_s c_s s)` supported in a Gaussian window
/// `b` around a random centre, with the coefficients `c_s` chosen so that `f`
/// has no content on the harmonic sign patterns `s` (which include the
/// constants). Such `f` lies in the range of `∂̄` on the torus.
pub fn zero_mean_source(rng: &mut ChaCha8Rng, grid: GridSpec, rank: usize, center_radius: f64, width: f64) -> Result<EForm> {
    let c = center(rng, &grid, center_radius);
    zero_mean_source_at(rng, grid, rank, c, width)
}

/// [`zero_mean_source`] with a prescribed centre.
pub fn zero_mean_source_at(rng: &mut ChaCha8Rng, grid: GridSpec, rank: usize, center: Vec<C>, width: f64) -> Result<EForm> {
    let n = grid.dim();
    let poly = Bump::random(rng, &grid, rank, center.clone(), width, 2);
    let window = Bump { center, width, coeffs: vec![vec![(vec![0; 2 * n], C::new(1.0, 0.0))]] };
    let npts = grid.num_points();
    let b: Vec<C> = (0..npts).map(|pt| window.value(&grid, 0, pt)).collect();
    let pats = crate::hormander::harmonic_patterns(&grid);
    let k = pats.len();
    // M_{st} = Σ b t s; solve M c = (Σ P s)_s per component.
    let m = DMatrix::from_fn(k, k, |i, j| (0..npts).map(|pt| b[pt] * pats[i][pt] * pats[j][pt]).sum::<C>());
    let lu = m.lu();
    let mut comps = Vec::with_capacity(rank);
    for comp in 0..rank {
        let v: Vec<C> = (0..npts).map(|pt| poly.value(&grid, comp, pt)).collect();
        let rhs = DVector::from_fn(k, |i, _| (0..npts).map(|pt| v[pt] * pats[i][pt]).sum::<C>());
        let coef = lu.solve(&rhs).ok_or(Error::Precondition { check: "source window has harmonic Gram rank", value: 0.0 })?;
        comps.push((0..npts).map(|pt| v[pt] - b[pt] * (0..k).map(|t| coef[t] * pats[t][pt]).sum::<C>()).collect::<Vec<C>>());
    }
    EForm::from_fn(grid, Bidegree::new(n, n), rank, Valued::Bundle, |_, c, pt| comps[c][pt])
}

/// `∂̄`-exact `(n,p)` source `∂̄v` for a bump form `v` of bidegree `(n,p-1)`.
pub fn exact_source(rng: &mut ChaCha8Rng, grid: GridSpec, p: usize, rank: usize, center_radius: f64, width: f64) -> Result<EForm> {
    let v = bump_form(rng, grid, Bidegree::new(grid.dim(), p - 1), rank, center_radius, width)?;
    dbar(&v)
}
