//! Weighted Hilbert spaces of bundle-valued forms and the minimal-norm
//! solver for `∂̄u = f`.
//!
//! `H₁ = L²_{(n,p-1)}` and `H₂ = L²_{(n,p)}` carry the multi-index inner
//! product `⟨a, b⟩ = Σ_{pts} Σ_I b_I^H h a_I · (L/N)^{2n}`. With `T = ∂̄` the
//! exact discrete adjoint is `T* = h⁻¹ ∂̄^† h`, where `∂̄^†` is the flat
//! adjoint of the spectral `∂̄`.
//!
//! The minimal-norm solution is the unique solution orthogonal to `Ker T`
//! in `H₁`. Three routes compute it:
//!
//! * [`SolveMethod::KernelProjection`] (`p = 1`): a flat particular solution
//!   `∂̄^† Δ⁻¹ f` followed by the `h`-orthogonal projection off `Ker T`, which
//!   for `(n,0)`-forms is spanned by the `4^n · r` modes with all wavenumbers
//!   in `{0, Nyquist}`.
//! * [`SolveMethod::Cg`]: `u = T*y` with `TT*y = f` solved by conjugate
//!   gradients in the `H₂` inner product.
//! * [`SolveMethod::Dense`]: whitened SVD pseudo-inverse, an oracle for
//!   small grids.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::bochner::margin_leakage;
use crate::error::{Error, Result};
use crate::exterior::{basis, inner_product, Bidegree, EForm, Valued};
use crate::grid::{integrate, spectral_apply, GridSpec};
use crate::hermitian::{apply_metric, curvature, dbar, dbar_adjoint_flat, MetricField};
use crate::linalg;
use crate::par;
use crate::positivity::{nakano_delta, PositivityOptions};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Weighted `L²` space of bundle-valued forms of a fixed bidegree.
#[derive(Clone, Debug)]
pub struct HilbertStructure {
    h: MetricField,
    bidegree: Bidegree,
}

impl HilbertStructure {
    pub fn new(h: MetricField, bidegree: Bidegree) -> Result<Self> {
        let n = h.grid().dim();
        if bidegree.p > n || bidegree.q > n {
            return Err(Error::DimensionMismatch(format!("bidegree ({}, {}) in dimension {n}", bidegree.p, bidegree.q)));
        }
        Ok(Self { h, bidegree })
    }

    pub fn metric(&self) -> &MetricField {
        &self.h
    }

    pub fn bidegree(&self) -> Bidegree {
        self.bidegree
    }

    pub fn grid(&self) -> &GridSpec {
        self.h.grid()
    }

    pub fn rank(&self) -> usize {
        self.h.rank()
    }

    /// Real dimension count `r · #monomials · N^{2n}` of the complex space.
    pub fn dim(&self) -> usize {
        self.rank() * basis(self.grid().dim(), self.bidegree).len() * self.grid().num_points()
    }

    fn check(&self, a: &EForm) -> Result<()> {
        if a.bidegree() != self.bidegree {
            return Err(Error::BidegreeMismatch {
                expected: (self.bidegree.p, self.bidegree.q),
                found: (a.bidegree().p, a.bidegree().q),
            });
        }
        if a.rank() != self.rank() || a.valued() != Valued::Bundle {
            return Err(Error::RankMismatch { expected: self.rank(), found: a.rank() });
        }
        if a.grid() != self.grid() {
            return Err(Error::DimensionMismatch("form and metric live on different grids".into()));
        }
        Ok(())
    }

    /// `⟨a, b⟩`, linear in `a`.
    pub fn inner(&self, a: &EForm, b: &EForm) -> Result<C> {
        self.check(a)?;
        self.check(b)?;
        Ok(integrate(&inner_product(a, b, &self.h)?))
    }

    pub fn norm_sq(&self, a: &EForm) -> Result<f64> {
        Ok(self.inner(a, a)?.re)
    }

    pub fn zeros(&self) -> Result<EForm> {
        EForm::bundle(*self.grid(), self.bidegree, self.rank())
    }
}

/// The operator `T = ∂̄ : H₁ → H₂` with its exact adjoint.
#[derive(Clone, Debug)]
pub struct DbarOperator {
    h1: HilbertStructure,
    h2: HilbertStructure,
    h_inv: Vec<C>,
}

impl DbarOperator {
    /// `T` from `(n, p-1)` to `(n, p)` forms, both weighted by `h`.
    pub fn new(h: &MetricField, p: usize) -> Result<Self> {
        let n = h.grid().dim();
        if p == 0 || p > n {
            return Err(Error::DimensionMismatch(format!("degree p = {p} outside 1..={n}")));
        }
        if let Some(pt) = h.masked_points().first() {
            return Err(Error::SingularMetric { point: *pt });
        }
        let h1 = HilbertStructure::new(h.clone(), Bidegree::new(n, p - 1))?;
        let h2 = HilbertStructure::new(h.clone(), Bidegree::new(n, p))?;
        Ok(Self { h1, h2, h_inv: h.inverse_data() })
    }

    pub fn domain(&self) -> &HilbertStructure {
        &self.h1
    }

    pub fn codomain(&self) -> &HilbertStructure {
        &self.h2
    }

    pub fn degree(&self) -> usize {
        self.h2.bidegree.q
    }

    pub fn apply_t(&self, u: &EForm) -> Result<EForm> {
        self.h1.check(u)?;
        dbar(u)
    }

    /// `T*v = h⁻¹ ∂̄^†(h v)`.
    pub fn apply_tstar(&self, v: &EForm) -> Result<EForm> {
        self.h2.check(v)?;
        let hv = apply_metric(&self.h2.h, v, false)?;
        let w = dbar_adjoint_flat(&hv)?;
        let r = self.h1.rank();
        let inv = &self.h_inv;
        Ok(w.map_vectors(|pt, x| linalg::matvec(&inv[pt * r * r..(pt + 1) * r * r], x, r)))
    }

    /// `TT*`, self-adjoint and nonnegative on `H₂`.
    pub fn normal(&self, v: &EForm) -> Result<EForm> {
        self.apply_t(&self.apply_tstar(v)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    /// Flat particular solution plus projection off `Ker T`; `p = 1` only.
    KernelProjection,
    /// Conjugate gradients on `TT*y = f`.
    Cg,
    /// Whitened dense SVD; small grids only.
    Dense,
}

impl SolveMethod {
    pub fn name(self) -> &'static str {
        match self {
            SolveMethod::KernelProjection => "kernel-projection",
            SolveMethod::Cg => "cg",
            SolveMethod::Dense => "dense",
        }
    }
}

impl std::str::FromStr for SolveMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kernel-projection" => Ok(SolveMethod::KernelProjection),
            "cg" => Ok(SolveMethod::Cg),
            "dense" => Ok(SolveMethod::Dense),
            other => Err(Error::Config { field: "method".into(), message: format!("unknown solve method `{other}`") }),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// `None` picks kernel projection for `p = 1` and CG otherwise.
    pub method: Option<SolveMethod>,
    /// Curvature floor used for the reported bound `1/(pδ)`.
    pub delta: Option<f64>,
    /// CG stopping threshold on `‖TT*y - f‖ / ‖f‖`.
    pub cg_tol: f64,
    /// Iteration cap; `None` means `10 · dim^{1/2}`.
    pub max_iterations: Option<usize>,
    /// Largest relative `‖∂̄f‖` accepted as closed.
    pub closed_tol: f64,
    /// Largest relative content of `f` on harmonic modes.
    pub range_tol: f64,
    /// Largest dense problem size.
    pub dense_limit: usize,
    pub interior_fraction: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: None,
            delta: None,
            cg_tol: 1e-10,
            max_iterations: None,
            closed_tol: 1e-8,
            range_tol: 1e-10,
            dense_limit: 2048,
            interior_fraction: crate::weights::DEFAULT_INTERIOR_FRACTION,
        }
    }
}

/// Outcome of a minimal-norm solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub method: SolveMethod,
    pub degree: usize,
    pub u_norm_sq: f64,
    pub f_norm_sq: f64,
    /// `1/(pδ)` when a positive `δ` was supplied; otherwise no bound is claimed.
    pub bound: Option<f64>,
    /// `‖u‖²/‖f‖²`, reported as 0 for `f = 0`.
    pub ratio: f64,
    /// `‖Tu - f‖ / ‖f‖` in `H₂`.
    pub residual: f64,
    pub iterations: usize,
    /// Fraction of `‖u‖²` in the seam margin.
    pub leakage: f64,
    /// Largest `|⟨u,k⟩| / (‖u‖‖k‖)` over the sampled kernel elements.
    pub kernel_overlap: f64,
}

/// Outcome of the weighted bound check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HormanderCheck {
    pub pass: bool,
    /// `(1/(pδ))‖f‖²(1 + tol) - ‖u‖²`, relative to `‖f‖²/(pδ)`.
    pub slack: f64,
    /// `pδ · ‖u‖²/‖f‖²`.
    pub normalized_ratio: f64,
}

/// Passes iff `‖u‖² ≤ (1/(pδ))‖f‖²(1 + tol)`; fails for `δ ≤ 0`.
pub fn verify_hormander(report: &SolveReport, delta: f64, p: usize, tol: f64) -> HormanderCheck {
    if delta <= 0.0 || !delta.is_finite() {
        return HormanderCheck { pass: false, slack: f64::NEG_INFINITY, normalized_ratio: f64::INFINITY };
    }
    let c = p as f64 * delta;
    let normalized_ratio = c * report.ratio;
    let slack = (1.0 + tol) - normalized_ratio;
    HormanderCheck { pass: slack >= 0.0, slack, normalized_ratio }
}

/// Interior and global Nakano floors of `h`.
pub fn certify_delta(h: &MetricField, interior_fraction: f64) -> Result<(f64, f64)> {
    let theta = curvature(h)?;
    let interior = nakano_delta(h, &theta, &PositivityOptions::on_region(h.grid().interior_mask(interior_fraction)))?;
    let global = nakano_delta(h, &theta, &PositivityOptions::default())?;
    Ok((interior, global))
}

/// Harmonic modes of the periodic grid: the `4^n` sign patterns whose
/// wavenumbers all lie in `{0, Nyquist}`, where every spectral derivative
/// vanishes.
pub fn harmonic_patterns(grid: &GridSpec) -> Vec<Vec<f64>> {
    let axes = grid.real_axes();
    (0..1usize << axes)
        .map(|mask| {
            (0..grid.num_points())
                .map(|pt| {
                    let odd: usize = (0..axes).filter(|a| mask >> a & 1 == 1).map(|a| grid.axis_index(pt, a)).sum();
                    if odd % 2 == 0 { 1.0 } else { -1.0 }
                })
                .collect()
        })
        .collect()
}

/// Constant-coefficient harmonic forms of the given shape: one per sign
/// pattern, monomial and frame direction.
pub fn harmonic_forms(grid: &GridSpec, bidegree: Bidegree, rank: usize) -> Result<Vec<EForm>> {
    let nm = basis(grid.dim(), bidegree).len();
    let mut out = Vec::new();
    for pat in harmonic_patterns(grid) {
        for m in 0..nm {
            for c in 0..rank {
                let mut e = EForm::bundle(*grid, bidegree, rank)?;
                *e.component_mut(m, c) = pat.iter().map(|&s| C::new(s, 0.0)).collect();
                out.push(e);
            }
        }
    }
    Ok(out)
}

/// Flat `Δ⁻¹ = (Σ_k ∂̄_k^†∂̄_k)⁻¹` on every component, zero on harmonic modes.
fn inverse_laplacian(a: &EForm) -> EForm {
    let grid = *a.grid();
    let axes: Vec<usize> = (0..grid.real_axes()).collect();
    let mut out = a.clone();
    for comp in out.components_mut() {
        *comp = spectral_apply(&grid, comp, &axes, |k| {
            let s: f64 = 0.25 * k.iter().map(|w| w * w).sum::<f64>();
            if s == 0.0 { ZERO } else { C::new(1.0 / s, 0.0) }
        });
    }
    out
}

/// Flat `ℓ²` norm of all coefficients.
fn flat_norm(a: &EForm) -> f64 {
    a.components()
        .iter()
        .map(|v| par::sum_by(v.len(), |i| v[i].norm_sqr()))
        .sum::<f64>()
        .sqrt()
}

/// Relative flat content of `a` on harmonic modes.
fn harmonic_content(a: &EForm) -> f64 {
    let total = flat_norm(a);
    if total == 0.0 {
        return 0.0;
    }
    let grid = *a.grid();
    let npts = grid.num_points() as f64;
    let mut acc = 0.0;
    for pat in harmonic_patterns(&grid) {
        for v in a.components() {
            let c: C = par::sum_by(v.len(), |i| v[i] * pat[i]);
            acc += c.norm_sqr() / npts;
        }
    }
    acc.sqrt() / total
}

fn check_source(f: &EForm, opts: &SolveOptions) -> Result<()> {
    let fnorm = flat_norm(f);
    if fnorm == 0.0 {
        return Ok(());
    }
    if f.bidegree().q < f.grid().dim() {
        let df = flat_norm(&dbar(f)?) / fnorm;
        if df > opts.closed_tol {
            return Err(Error::Precondition { check: "source is dbar-closed", value: df });
        }
    }
    let coker = harmonic_content(f);
    if coker > opts.range_tol {
        return Err(Error::NotInRange { component: coker });
    }
    Ok(())
}

/// Subtracts the `H₁`-orthogonal projection of `u` onto `span(kernel)`.
fn project_out(space: &HilbertStructure, u: &EForm, kernel: &[EForm]) -> Result<EForm> {
    let k = kernel.len();
    let mut gram = DMatrix::<C>::zeros(k, k);
    let mut rhs = DVector::<C>::zeros(k);
    for i in 0..k {
        for j in 0..k {
            gram[(i, j)] = space.inner(&kernel[j], &kernel[i])?;
        }
        rhs[i] = space.inner(u, &kernel[i])?;
    }
    let coeffs = gram
        .cholesky()
        .ok_or(Error::Precondition { check: "kernel Gram matrix is positive definite", value: 0.0 })?
        .solve(&rhs);
    let mut out = u.clone();
    for (i, kf) in kernel.iter().enumerate() {
        out = out.axpy(-coeffs[i], kf)?;
    }
    Ok(out)
}

fn kernel_projection(op: &DbarOperator, f: &EForm) -> Result<EForm> {
    if op.degree() != 1 {
        return Err(Error::Unsupported("kernel projection solves p = 1 only".into()));
    }
    let u0 = dbar_adjoint_flat(&inverse_laplacian(f))?;
    let kernel = harmonic_forms(op.h1.grid(), op.h1.bidegree, op.h1.rank())?;
    project_out(&op.h1, &u0, &kernel)
}

fn cg(op: &DbarOperator, f: &EForm, opts: &SolveOptions) -> Result<(EForm, usize)> {
    let space = &op.h2;
    let fn2 = space.norm_sq(f)?;
    let cap = opts.max_iterations.unwrap_or_else(|| (10.0 * (space.dim() as f64).sqrt()).ceil() as usize);
    let mut y = space.zeros()?;
    let mut r = f.clone();
    let mut d = r.clone();
    let mut rr = fn2;
    let mut iterations = 0;
    while (rr / fn2).sqrt() > opts.cg_tol {
        let ad = op.normal(&d)?;
        let dad = space.inner(&ad, &d)?.re;
        let dd = space.norm_sq(&d)?;
        let rayleigh = dad / dd;
        if iterations >= cap || !(dad > 1e-300) || !rayleigh.is_finite() {
            let near_null = d.scale(C::new(1.0 / dd.sqrt(), 0.0));
            return Err(Error::CgStagnation {
                iterations,
                residual: (rr / fn2).sqrt(),
                rayleigh,
                near_null: Box::new(near_null),
            });
        }
        let alpha = rr / dad;
        y = y.axpy(C::new(alpha, 0.0), &d)?;
        r = r.axpy(C::new(-alpha, 0.0), &ad)?;
        let rr_new = space.norm_sq(&r)?;
        d = r.axpy(C::new(rr_new / rr, 0.0), &d)?;
        rr = rr_new;
        iterations += 1;
    }
    Ok((op.apply_tstar(&y)?, iterations))
}

/// Flat coordinate vector of a form, ordered `(monomial, component, point)`.
fn flatten(a: &EForm) -> DVector<C> {
    DVector::from_iterator(a.components().iter().map(Vec::len).sum(), a.components().iter().flatten().copied())
}

fn unflatten(template: &EForm, v: &DVector<C>) -> EForm {
    let mut out = template.zeros_like();
    let npts = template.grid().num_points();
    for (i, comp) in out.components_mut().iter_mut().enumerate() {
        comp.copy_from_slice(&v.as_slice()[i * npts..(i + 1) * npts]);
    }
    out
}

/// Upper factor `R` with `R^H R` the dense Gram matrix of `space`.
fn gram_factor(space: &HilbertStructure) -> Result<DMatrix<C>> {
    let r = space.rank();
    let npts = space.grid().num_points();
    let nm = basis(space.grid().dim(), space.bidegree).len();
    let size = nm * r * npts;
    let dv = space.grid().cell_volume().sqrt();
    let mut out = DMatrix::<C>::zeros(size, size);
    for pt in 0..npts {
        // h = L L^H, so b^H h a = (L^H b)^H (L^H a).
        let l = linalg::cholesky(space.h.at(pt), r).ok_or(Error::SingularMetric { point: pt })?;
        for m in 0..nm {
            for a in 0..r {
                for b in 0..r {
                    // (L^H)_{ab} = conj(L_{ba})
                    out[((m * r + a) * npts + pt, (m * r + b) * npts + pt)] = l[b * r + a].conj() * dv;
                }
            }
        }
    }
    Ok(out)
}

fn dense(op: &DbarOperator, f: &EForm, opts: &SolveOptions) -> Result<EForm> {
    let cols = op.h1.dim();
    if cols.max(op.h2.dim()) > opts.dense_limit {
        return Err(Error::Unsupported(format!("dense oracle limited to {} unknowns", opts.dense_limit)));
    }
    let template = op.h1.zeros()?;
    let mut t = DMatrix::<C>::zeros(op.h2.dim(), cols);
    let mut e = DVector::<C>::zeros(cols);
    for j in 0..cols {
        e[j] = ONE;
        t.set_column(j, &flatten(&op.apply_t(&unflatten(&template, &e))?));
        e[j] = ZERO;
    }
    let r1 = gram_factor(&op.h1)?;
    let r2 = gram_factor(&op.h2)?;
    let r1_inv = r1
        .clone()
        .try_inverse()
        .ok_or(Error::Precondition { check: "domain Gram matrix is invertible", value: 0.0 })?;
    let a = &r2 * t * &r1_inv;
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let x = svd
        .solve(&(&r2 * flatten(f)), 1e-10 * smax)
        .map_err(|m| Error::Unsupported(m.to_string()))?;
    Ok(unflatten(&template, &(r1_inv * x)))
}

/// Sample of `Ker T` used for the minimal-norm diagnostic: harmonic forms
/// and, for `p ≥ 2`, `∂̄` of seeded smooth `(n, p-2)`-forms.
pub fn kernel_sample(op: &DbarOperator, seed: u64, count: usize) -> Result<Vec<EForm>> {
    let mut out = harmonic_forms(op.h1.grid(), op.h1.bidegree, op.h1.rank())?;
    let p = op.degree();
    if p >= 2 {
        let mut rng = crate::random::rng(seed);
        let grid = *op.h1.grid();
        for _ in 0..count {
            let w = crate::random::bump_form(&mut rng, grid, Bidegree::new(grid.dim(), p - 2), op.h1.rank(), 0.5, 0.6)?;
            out.push(dbar(&w)?);
        }
    }
    Ok(out)
}

/// Largest normalized overlap `|⟨u,k⟩| / (‖u‖‖k‖)` over `kernel`.
pub fn kernel_overlap(space: &HilbertStructure, u: &EForm, kernel: &[EForm]) -> Result<f64> {
    let un = space.norm_sq(u)?.sqrt();
    if un == 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for k in kernel {
        let kn = space.norm_sq(k)?.sqrt();
        if kn > 0.0 {
            worst = worst.max(space.inner(u, k)?.norm() / (un * kn));
        }
    }
    Ok(worst)
}

/// Minimal-norm solution of `∂̄u = f` in `L²(h)` for an `(n,p)`-form `f`.
pub fn solve_min_norm(f: &EForm, h: &MetricField, opts: &SolveOptions) -> Result<(EForm, SolveReport)> {
    let n = f.grid().dim();
    if f.bidegree().p != n || f.bidegree().q == 0 {
        return Err(Error::BidegreeMismatch { expected: (n, f.bidegree().q.max(1)), found: (f.bidegree().p, f.bidegree().q) });
    }
    let p = f.bidegree().q;
    let op = DbarOperator::new(h, p)?;
    op.h2.check(f)?;
    check_source(f, opts)?;
    let method = opts.method.unwrap_or(if p == 1 { SolveMethod::KernelProjection } else { SolveMethod::Cg });
    let f_norm_sq = op.h2.norm_sq(f)?;
    let (u, iterations) = if f_norm_sq == 0.0 {
        (op.h1.zeros()?, 0)
    } else {
        match method {
            SolveMethod::KernelProjection => (kernel_projection(&op, f)?, 0),
            SolveMethod::Cg => cg(&op, f, opts)?,
            SolveMethod::Dense => (dense(&op, f, opts)?, 0),
        }
    };
    let u_norm_sq = op.h1.norm_sq(&u)?;
    let residual = if f_norm_sq == 0.0 { 0.0 } else { (op.h2.norm_sq(&op.apply_t(&u)?.sub(f)?)? / f_norm_sq).sqrt() };
    let kernel = kernel_sample(&op, 0x6b65_726e, 4)?;
    let report = SolveReport {
        method,
        degree: p,
        u_norm_sq,
        f_norm_sq,
        bound: opts.delta.filter(|d| *d > 0.0).map(|d| 1.0 / (p as f64 * d)),
        ratio: if f_norm_sq == 0.0 { 0.0 } else { u_norm_sq / f_norm_sq },
        residual,
        iterations,
        leakage: margin_leakage(&u, h, opts.interior_fraction)?,
        kernel_overlap: kernel_overlap(&op.h1, &u, &kernel)?,
    };
    Ok((u, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use crate::weights::{gaussian_metric, Profile};

    fn gaussian(n: usize, samples: usize, c: f64, rank: usize) -> MetricField {
        let g = GridSpec::new(n, samples, 6.0).unwrap();
        gaussian_metric(&g, &Profile::standard(6.0), c, rank).unwrap()
    }

    #[test]
    fn adjoint_is_exact() {
        let mut rng = random::rng(7);
        for (n, p, r) in [(1, 1, 1), (1, 1, 2), (2, 1, 1), (2, 2, 2)] {
            let g = GridSpec::new(n, 8, 3.0).unwrap();
            let h = random::metric(&mut rng, g, r).unwrap();
            let op = DbarOperator::new(&h, p).unwrap();
            let u = random::form(&mut rng, g, op.domain().bidegree(), r).unwrap();
            let v = random::form(&mut rng, g, op.codomain().bidegree(), r).unwrap();
            let lhs = op.codomain().inner(&op.apply_t(&u).unwrap(), &v).unwrap();
            let rhs = op.domain().inner(&u, &op.apply_tstar(&v).unwrap()).unwrap();
            let scale = op.domain().norm_sq(&u).unwrap().sqrt() * op.codomain().norm_sq(&v).unwrap().sqrt();
            assert!((lhs - rhs).norm() <= 1e-12 * scale, "n={n} p={p}: {}", (lhs - rhs).norm() / scale);
        }
    }

    #[test]
    fn identity_metric_single_mode_is_multiplier() {
        let g = GridSpec::new(1, 8, 2.0 * std::f64::consts::PI).unwrap();
        let h = MetricField::identity(g, 1);
        let op = DbarOperator::new(&h, 1).unwrap();
        // ∂̄(w dz) = -∂_z̄w dz∧dz̄, so T* = ∂_z: e^{ix} dz∧dz̄ ↦ (i/2) e^{ix} dz.
        let v = EForm::from_fn(g, Bidegree::new(1, 1), 1, Valued::Bundle, |_, _, pt| C::from_polar(1.0, g.centered(pt, 0))).unwrap();
        let w = op.apply_tstar(&v).unwrap();
        for pt in 0..g.num_points() {
            let expect = C::new(0.0, 0.5) * v.component(0, 0)[pt];
            assert!((w.component(0, 0)[pt] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_source_gives_zero() {
        let h = gaussian(1, 16, 1.0, 1);
        let f = EForm::bundle(*h.grid(), Bidegree::new(1, 1), 1).unwrap();
        let (u, rep) = solve_min_norm(&f, &h, &SolveOptions::default()).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert_eq!(rep.ratio, 0.0);
    }

    #[test]
    fn three_routes_agree_on_small_grid() {
        let g = GridSpec::new(1, 8, 6.0).unwrap();
        let h = gaussian_metric(&g, &Profile::standard(6.0), 0.2, 2).unwrap();
        let mut rng = random::rng(11);
        let f = random::zero_mean_source(&mut rng, g, 2, 0.3, 0.8).unwrap();
        let mut sols = Vec::new();
        for m in [SolveMethod::KernelProjection, SolveMethod::Cg, SolveMethod::Dense] {
            let opts = SolveOptions { method: Some(m), max_iterations: Some(5000), ..Default::default() };
            let (u, rep) = solve_min_norm(&f, &h, &opts).unwrap();
            assert!(rep.residual < 1e-9, "{m:?}: {}", rep.residual);
            assert!(rep.kernel_overlap < 1e-8, "{m:?}: {}", rep.kernel_overlap);
            sols.push(u);
        }
        let space = HilbertStructure::new(h.clone(), Bidegree::new(1, 0)).unwrap();
        let scale = space.norm_sq(&sols[2]).unwrap().sqrt();
        for s in &sols[..2] {
            assert!(space.norm_sq(&s.sub(&sols[2]).unwrap()).unwrap().sqrt() < 1e-8 * scale);
        }
    }

    #[test]
    fn rejects_cokernel_content() {
        let h = gaussian(1, 8, 1.0, 1);
        let f = EForm::from_fn(*h.grid(), Bidegree::new(1, 1), 1, Valued::Bundle, |_, _, _| ONE).unwrap();
        assert!(matches!(solve_min_norm(&f, &h, &SolveOptions::default()), Err(Error::NotInRange { .. })));
    }

    #[test]
    fn rejects_non_closed_source() {
        let g = GridSpec::new(2, 8, 6.0).unwrap();
        let h = MetricField::identity(g, 1);
        let mut rng = random::rng(3);
        let f = random::bump_form(&mut rng, g, Bidegree::new(2, 1), 1, 0.3, 0.8).unwrap();
        let err = solve_min_norm(&f, &h, &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition { .. }), "{err}");
    }

    #[test]
    fn ratio_is_scale_invariant() {
        let h = gaussian(1, 32, 1.0, 1);
        let mut rng = random::rng(5);
        let f = random::zero_mean_source(&mut rng, *h.grid(), 1, 0.3, 0.4).unwrap();
        let (_, a) = solve_min_norm(&f, &h, &SolveOptions::default()).unwrap();
        let (_, b) = solve_min_norm(&f.scale(C::new(0.0, 3.0)), &h, &SolveOptions::default()).unwrap();
        assert!((a.ratio - b.ratio).abs() < 1e-10 * a.ratio);
    }

    #[test]
    fn verify_flags_missing_curvature() {
        let rep = SolveReport {
            method: SolveMethod::Cg,
            degree: 1,
            u_norm_sq: 1.0,
            f_norm_sq: 1.0,
            bound: None,
            ratio: 1.0,
            residual: 0.0,
            iterations: 0,
            leakage: 0.0,
            kernel_overlap: 0.0,
        };
        assert!(!verify_hormander(&rep, 0.0, 1, 0.05).pass);
        assert!(verify_hormander(&rep, 1.0, 1, 0.05).pass);
        assert!(!verify_hormander(&rep, 2.0, 1, 0.05).pass);
    }
}
