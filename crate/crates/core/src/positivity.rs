//! Griffiths and Nakano curvature bounds.
//!
//! At each point the Nakano form is the hermitian `nr×nr` matrix with block
//! `(k, j)` equal to `hΘ_jk`, measured against the Gram matrix `I_n ⊗ h`;
//! its smallest generalized eigenvalue is the pointwise Nakano constant.
//! The Griffiths constant restricts the same form to rank-one tensors
//! `ξ ⊗ s`: `min_ξ λ_min(Σ ξ_j ξ̄_k hΘ_jk, h)` over unit `ξ`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exterior::{c_const, pairing, wedge_const, ConstForm, EForm, Valued};
use crate::grid::ScalarField;
use crate::hermitian::{curvature_wedge, CurvatureField, MetricField};
use crate::linalg;
use crate::par;

type C = Complex64;

const I: C = C::new(0.0, 1.0);

/// Which end of the spectrum to report.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extreme {
    Min,
    Max,
}

/// Options shared by the positivity scans.
#[derive(Clone, Debug)]
pub struct PositivityOptions {
    /// Points to scan; all unmasked points when `None`.
    pub region: Option<Vec<bool>>,
    /// Tolerated relative hermitian defect of the Nakano matrix.
    pub symmetry_tol: f64,
    /// Number of directions in the Griffiths net (`n = 2`).
    pub net_size: usize,
    /// Pattern-search iterations refining the best net direction.
    pub refine_steps: usize,
}

impl Default for PositivityOptions {
    fn default() -> Self {
        Self { region: None, symmetry_tol: 1e-8, net_size: 256, refine_steps: 40 }
    }
}

impl PositivityOptions {
    pub fn on_region(region: Vec<bool>) -> Self {
        Self { region: Some(region), ..Self::default() }
    }
}

/// Extreme value of a pointwise curvature constant and where it occurs.
#[derive(Clone, Debug, PartialEq)]
pub struct Extremum {
    pub value: f64,
    pub point: usize,
    /// Nakano eigenvector (stacked `s_1..s_n`) or Griffiths direction `ξ`.
    pub vector: Vec<C>,
}

/// Both positivity constants of a metric with their locations.
#[derive(Clone, Debug, PartialEq)]
pub struct PositivityReport {
    pub nakano: Extremum,
    pub griffiths: Extremum,
    /// Final angular step of the direction refinement; zero when the
    /// Griffiths constant was computed exactly.
    pub net_resolution: f64,
    pub points: usize,
}

fn whitening(h: &MetricField, pt: usize) -> Result<Vec<C>> {
    let r = h.rank();
    let l = linalg::cholesky(h.at(pt), r).ok_or(Error::SingularMetric { point: pt })?;
    Ok(linalg::lower_inverse(&l, r))
}

fn in_scope(h: &MetricField, opts: &PositivityOptions, pt: usize) -> bool {
    !h.is_masked(pt) && opts.region.as_ref().is_none_or(|m| m[pt])
}

fn check_shapes(h: &MetricField, theta: &CurvatureField) -> Result<()> {
    if h.grid() != theta.grid() {
        return Err(Error::DimensionMismatch("metric and curvature live on different grids".into()));
    }
    if h.rank() != theta.rank() {
        return Err(Error::RankMismatch { expected: h.rank(), found: theta.rank() });
    }
    Ok(())
}

fn check_symmetry(h: &MetricField, theta: &CurvatureField, opts: &PositivityOptions) -> Result<()> {
    let (point, defect) = theta.symmetry_defect(h, opts.region.as_deref());
    if defect > opts.symmetry_tol {
        return Err(Error::CurvatureSymmetry { point, defect });
    }
    Ok(())
}

fn signed(values: &[f64], mode: Extreme) -> f64 {
    match mode {
        Extreme::Min => values[0],
        Extreme::Max => -values[values.len() - 1],
    }
}

/// Pointwise Nakano constant in the scan orientation (`-λ_max` for `Max`).
fn nakano_at(theta: &CurvatureField, h: &MetricField, pt: usize, mode: Extreme) -> Result<f64> {
    let (n, r) = (theta.grid().dim(), theta.rank());
    let m = linalg::symmetrize(&theta.nakano_matrix(h, pt), n * r);
    let w = linalg::whiten_blocks(&m, &whitening(h, pt)?, n, r);
    Ok(signed(&linalg::hermitian_eigenvalues(&w, n * r), mode))
}

/// Smallest (or largest) generalized Nakano eigenvalue over the scan region.
pub fn nakano_extreme(h: &MetricField, theta: &CurvatureField, opts: &PositivityOptions, mode: Extreme) -> Result<Extremum> {
    check_shapes(h, theta)?;
    check_symmetry(h, theta, opts)?;
    let npts = h.grid().num_points();
    let (point, v) = par::argmin_by(npts, |pt| {
        if !in_scope(h, opts, pt) {
            return f64::NAN;
        }
        nakano_at(theta, h, pt, mode).unwrap_or(f64::NAN)
    })
    .ok_or_else(|| Error::Precondition { check: "non-empty positivity scan region", value: 0.0 })?;
    let (n, r) = (theta.grid().dim(), theta.rank());
    let m = linalg::symmetrize(&theta.nakano_matrix(h, point), n * r);
    let w = linalg::whiten_blocks(&m, &whitening(h, point)?, n, r);
    let target = if mode == Extreme::Max { w.iter().map(|x| -x).collect() } else { w };
    let (_, vector) = linalg::hermitian_min_eigenpair(&target, n * r);
    let value = if mode == Extreme::Max { -v } else { v };
    Ok(Extremum { value, point, vector })
}

/// Nakano constant `δ_N = min λ_min(hΘ, I_n ⊗ h)` over the scan region.
pub fn nakano_delta(h: &MetricField, theta: &CurvatureField, opts: &PositivityOptions) -> Result<f64> {
    Ok(nakano_extreme(h, theta, opts, Extreme::Min)?.value)
}

fn direction(t: f64, phi: f64) -> [C; 2] {
    [C::new(t.cos(), 0.0), C::from_polar(t.sin(), phi)]
}

/// Minimizes `f(ξ)` over unit `ξ ∈ ℂ²` (up to phase) with a `(t, φ)` net
/// followed by a shrinking pattern search. Returns value, direction and final
/// step.
fn minimize_on_projective_line<F>(f: F, net_size: usize, refine_steps: usize) -> (f64, [C; 2], f64)
where
    F: Fn(&[C; 2]) -> f64,
{
    let nt = (net_size as f64).sqrt().round().max(2.0) as usize;
    let np = net_size.div_ceil(nt).max(1);
    let dt = 0.5 * PI / (nt - 1) as f64;
    let dp = 2.0 * PI / np as f64;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for a in 0..nt {
        for b in 0..np {
            let (t, p) = (a as f64 * dt, b as f64 * dp);
            let v = f(&direction(t, p));
            if v < best.0 {
                best = (v, t, p);
            }
        }
    }
    let (mut v, mut t, mut p) = best;
    let (mut st, mut sp) = (dt, dp);
    for _ in 0..refine_steps {
        let mut moved = false;
        for (ct, cp) in [(st, 0.0), (-st, 0.0), (0.0, sp), (0.0, -sp)] {
            let nt_ = (t + ct).clamp(0.0, 0.5 * PI);
            let cand = f(&direction(nt_, p + cp));
            if cand < v {
                v = cand;
                t = nt_;
                p += cp;
                moved = true;
            }
        }
        if !moved {
            st *= 0.5;
            sp *= 0.5;
        }
    }
    (v, direction(t, p), st.max(sp))
}

/// Griffiths constant at one point, in the scan orientation.
fn griffiths_at(theta: &CurvatureField, h: &MetricField, pt: usize, mode: Extreme, opts: &PositivityOptions) -> Result<(f64, Vec<C>, f64)> {
    let (n, r) = (theta.grid().dim(), theta.rank());
    if n == 1 {
        return Ok((nakano_at(theta, h, pt, mode)?, vec![C::new(1.0, 0.0)], 0.0));
    }
    let linv = whitening(h, pt)?;
    if r == 1 {
        // Rank one: Griffiths and Nakano forms coincide and are solved exactly.
        let m = linalg::symmetrize(&theta.nakano_matrix(h, pt), n);
        let w = linalg::whiten_blocks(&m, &linv, n, 1);
        let target = if mode == Extreme::Max { w.iter().map(|x| -x).collect() } else { w };
        let (v, xi) = linalg::hermitian_min_eigenpair(&target, n);
        return Ok((v, xi, 0.0));
    }
    let eval = |xi: &[C; 2]| {
        let g = linalg::symmetrize(&theta.griffiths_matrix(h, pt, xi), r);
        let w = linalg::whiten_blocks(&g, &linv, 1, r);
        signed(&linalg::hermitian_eigenvalues(&w, r), mode)
    };
    let (v, xi, step) = minimize_on_projective_line(eval, opts.net_size, opts.refine_steps);
    Ok((v, xi.to_vec(), step))
}

/// Smallest (or largest) Griffiths constant over the scan region.
pub fn griffiths_extreme(h: &MetricField, theta: &CurvatureField, opts: &PositivityOptions, mode: Extreme) -> Result<(Extremum, f64)> {
    check_shapes(h, theta)?;
    check_symmetry(h, theta, opts)?;
    let npts = h.grid().num_points();
    let (point, v) = par::argmin_by(npts, |pt| {
        if !in_scope(h, opts, pt) {
            return f64::NAN;
        }
        griffiths_at(theta, h, pt, mode, opts).map_or(f64::NAN, |x| x.0)
    })
    .ok_or_else(|| Error::Precondition { check: "non-empty positivity scan region", value: 0.0 })?;
    let (_, vector, step) = griffiths_at(theta, h, point, mode, opts)?;
    let value = if mode == Extreme::Max { -v } else { v };
    Ok((Extremum { value, point, vector }, step))
}

/// Griffiths constant `δ_G` over the scan region.
pub fn griffiths_delta(h: &MetricField, theta: &CurvatureField, opts: &PositivityOptions) -> Result<f64> {
    Ok(griffiths_extreme(h, theta, opts, Extreme::Min)?.0.value)
}

/// Both constants with locations.
pub fn positivity_report(h: &MetricField, theta: &CurvatureField, opts: &PositivityOptions) -> Result<PositivityReport> {
    let nakano = nakano_extreme(h, theta, opts, Extreme::Min)?;
    let (griffiths, net_resolution) = griffiths_extreme(h, theta, opts, Extreme::Min)?;
    let npts = h.grid().num_points();
    let points = (0..npts).filter(|&pt| in_scope(h, opts, pt)).count();
    Ok(PositivityReport { nakano, griffiths, net_resolution, points })
}

fn require_gamma(gamma: &EForm, holo_degree: usize) -> Result<()> {
    if gamma.valued() != Valued::Bundle {
        return Err(Error::Unsupported("expected a bundle-valued form".into()));
    }
    let b = gamma.bidegree();
    if b.p != holo_degree || b.q != 0 {
        return Err(Error::BidegreeMismatch { expected: (holo_degree, 0), found: (b.p, b.q) });
    }
    Ok(())
}

/// `i c_{n-p} ⟨Θ∧γ, γ⟩ ∧ ω_{p-1} / dV` for an `(n-p,0)`-form `γ`.
pub fn curvature_term(theta: &CurvatureField, gamma: &EForm, h: &MetricField, p: usize) -> Result<ScalarField> {
    let n = gamma.grid().dim();
    if p == 0 || p > n {
        return Err(Error::Precondition { check: "1 <= p <= n", value: p as f64 });
    }
    require_gamma(gamma, n - p)?;
    let tg = curvature_wedge(theta, gamma)?;
    let top = wedge_const(&pairing(&tg, gamma, h)?, &ConstForm::omega_power(n, p - 1))?;
    Ok(top.volume_density()?.scale(I * c_const(n - p)))
}

fn relative_residual(a: &[C], b: &[C]) -> f64 {
    let len = a.len();
    let diff = par::max_by(len, |i| (a[i] - b[i]).norm()).unwrap_or(0.0);
    let scale = par::max_by(len, |i| a[i].norm().max(b[i].norm())).unwrap_or(0.0);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Max relative residual of `i c_{n-1} ⟨Θ∧γ, γ⟩ = Σ_jk (Θ_jk γ^j, γ^k)_h dV`
/// for an `(n-1,0)`-form `γ = Σ_j γ^j \widehat{dz_j}` with
/// `dz_j ∧ \widehat{dz_j} = dz`.
pub fn check_nakano_pointwise_identity(theta: &CurvatureField, gamma: &EForm, h: &MetricField) -> Result<f64> {
    let n = gamma.grid().dim();
    let lhs = curvature_term(theta, gamma, h, 1)?;
    let r = gamma.rank();
    let full = (1u8 << n) - 1;
    let slots: Vec<usize> = (0..n)
        .map(|j| gamma.index_of(crate::exterior::Monomial::from_masks(full & !(1 << j), 0)).expect("basis monomial"))
        .collect();
    let sign = |j: usize| if j % 2 == 0 { 1.0 } else { -1.0 };
    let rhs = par::map_range(gamma.grid().num_points(), |pt| {
        if h.is_masked(pt) {
            return C::new(0.0, 0.0);
        }
        let comps: Vec<Vec<C>> = (0..n).map(|j| gamma.vector_at(slots[j], pt).iter().map(|v| v * sign(j)).collect()).collect();
        let mut acc = C::new(0.0, 0.0);
        for j in 0..n {
            for k in 0..n {
                let tv = linalg::matvec(theta.block(pt, j, k), &comps[j], r);
                let htv = h.apply(pt, &tv);
                acc += comps[k].iter().zip(&htv).map(|(t, s)| t.conj() * s).sum::<C>();
            }
        }
        acc
    });
    Ok(relative_residual(lhs.values(), &rhs))
}

/// Pointwise slack of `i c_{n-p} ⟨Θ∧γ,γ⟩ ∧ ω_{p-1} ≥ δ p ‖γ‖² dV`.
#[derive(Clone, Debug, PartialEq)]
pub struct InequalityReport {
    /// `min (LHS - δ p ‖γ‖²)` over the scan region.
    pub min_slack: f64,
    /// `max |LHS|` over the scan region.
    pub scale: f64,
    pub point: usize,
}

pub fn check_basic_inequality(
    theta: &CurvatureField,
    gamma: &EForm,
    h: &MetricField,
    delta: f64,
    p: usize,
    region: Option<&[bool]>,
) -> Result<InequalityReport> {
    let lhs = curvature_term(theta, gamma, h, p)?;
    let norm = crate::exterior::norm_sq(gamma, h)?;
    let scope = |pt: usize| region.is_none_or(|m| m[pt]) && !h.is_masked(pt);
    let npts = gamma.grid().num_points();
    let (point, min_slack) = par::argmin_by(npts, |pt| {
        if !scope(pt) {
            return f64::NAN;
        }
        lhs.values()[pt].re - delta * p as f64 * norm.values()[pt].re
    })
    .unwrap_or((0, 0.0));
    let scale = par::max_by(npts, |pt| if scope(pt) { lhs.values()[pt].norm() } else { 0.0 }).unwrap_or(0.0);
    Ok(InequalityReport { min_slack, scale, point })
}

/// Smallest Nakano and Griffiths eigenvalues of a single constant Nakano
/// matrix `m` (`nr×nr`, block `(k, j)` equal to `Θ_jk`) against `h = I`.
pub fn constant_form_deltas(m: &[C], n: usize, r: usize, opts: &PositivityOptions) -> Result<(f64, f64)> {
    let grid = crate::grid::GridSpec::new(n, 4, 1.0)?;
    let h = MetricField::identity(grid, r);
    let theta = CurvatureField::from_nakano_matrices(&h, &vec![m.to_vec(); grid.num_points()])?;
    let single = PositivityOptions { region: Some((0..grid.num_points()).map(|p| p == 0).collect()), ..opts.clone() };
    Ok((nakano_delta(&h, &theta, &single)?, griffiths_delta(&h, &theta, &single)?))
}

/// Randomized search for a constant curvature form on `n = 2`, `r = 2` that
/// is Griffiths positive but not Nakano positive. Candidates are perturbed
/// `I - t v v^H` with `v` an entangled unit tensor.
pub fn search_griffiths_not_nakano(seed: u64, attempts: usize) -> Result<Option<Vec<C>>> {
    use rand::Rng;
    let mut rng = crate::random::rng(seed);
    let opts = PositivityOptions::default();
    for _ in 0..attempts {
        let mut v: Vec<C> = (0..4).map(|_| crate::random::normal_c(&mut rng)).collect();
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let t: f64 = rng.gen_range(0.8..2.0);
        let noise = crate::random::hermitian(&mut rng, 4);
        let eta: f64 = rng.gen_range(0.0..0.1);
        let mut m = linalg::identity(4);
        for a in 0..4 {
            for b in 0..4 {
                m[a * 4 + b] += -t * v[a] * v[b].conj() + eta * noise[a * 4 + b];
            }
        }
        let (dn, dg) = constant_form_deltas(&m, 2, 2, &opts)?;
        if dg > 0.05 && dn < -0.05 {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::Bidegree;
    use crate::grid::GridSpec;
    use crate::hermitian::{curvature, dual_metric};
    use crate::weights::{gaussian_metric, Profile};

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn gaussian_weight_has_unit_constants_on_interior() {
        let g = GridSpec::new(1, 48, 6.0).unwrap();
        let h = gaussian_metric(&g, &Profile::standard(6.0), 1.0, 1).unwrap();
        let theta = curvature(&h).unwrap();
        let opts = PositivityOptions::on_region(g.interior_mask(0.5));
        let rep = positivity_report(&h, &theta, &opts).unwrap();
        assert!((rep.nakano.value - 1.0).abs() < 1e-4, "{}", rep.nakano.value);
        assert_eq!(rep.nakano.value, rep.griffiths.value);
    }

    #[test]
    fn scaling_curvature_scales_constants() {
        let g = GridSpec::new(2, 4, 1.0).unwrap();
        let h = MetricField::identity(g, 2);
        let mut rng = crate::random::rng(3);
        let theta = crate::random::curvature(&mut rng, &h).unwrap();
        let opts = PositivityOptions::default();
        let d1 = nakano_delta(&h, &theta, &opts).unwrap();
        let doubled = theta.add(&theta).unwrap();
        let d2 = nakano_delta(&h, &doubled, &opts).unwrap();
        assert!((d2 - 2.0 * d1).abs() < 1e-12);
    }

    #[test]
    fn dual_flips_griffiths_sign_for_line_bundles() {
        let g = GridSpec::new(1, 32, 6.0).unwrap();
        let h = gaussian_metric(&g, &Profile::standard(6.0), 1.5, 1).unwrap();
        let hd = dual_metric(&h).unwrap();
        let opts = PositivityOptions::default();
        let dmin = griffiths_delta(&hd, &curvature(&hd).unwrap(), &opts).unwrap();
        let (gmax, _) = griffiths_extreme(&h, &curvature(&h).unwrap(), &opts, Extreme::Max).unwrap();
        assert!((dmin + gmax.value).abs() < 1e-6);
    }

    #[test]
    fn asymmetric_curvature_is_rejected() {
        let g = GridSpec::new(1, 4, 1.0).unwrap();
        let h = MetricField::identity(g, 2);
        let theta = CurvatureField::from_fn(g, 2, |_| vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let err = nakano_delta(&h, &theta, &PositivityOptions::default());
        assert!(matches!(err, Err(Error::CurvatureSymmetry { .. })));
    }

    #[test]
    fn nakano_identity_on_random_data() {
        let g = GridSpec::new(2, 4, 1.0).unwrap();
        let mut rng = crate::random::rng(11);
        let h = crate::random::metric(&mut rng, g, 2).unwrap();
        let theta = crate::random::curvature(&mut rng, &h).unwrap();
        let gamma = crate::random::form(&mut rng, g, Bidegree::new(1, 0), 2).unwrap();
        assert!(check_nakano_pointwise_identity(&theta, &gamma, &h).unwrap() < 1e-12);
    }

    #[test]
    fn entangled_projector_separates_the_constants() {
        // I - t v v^H with v = (e1⊗e1 + e2⊗e2)/√2: Nakano 1 - t, Griffiths 1 - t/2.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = [c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)];
        let t = 1.5;
        let mut m = linalg::identity(4);
        for a in 0..4 {
            for b in 0..4 {
                m[a * 4 + b] -= t * v[a] * v[b].conj();
            }
        }
        let (dn, dg) = constant_form_deltas(&m, 2, 2, &PositivityOptions::default()).unwrap();
        assert!((dn - (1.0 - t)).abs() < 1e-12);
        assert!((dg - (1.0 - 0.5 * t)).abs() < 1e-4, "{dg}");
    }
}
