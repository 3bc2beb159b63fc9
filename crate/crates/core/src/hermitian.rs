//! Hermitian metrics, Chern connection and curvature, bundle operators.
//!
//! A metric is an `r×r` hermitian matrix field `h` in a holomorphic frame,
//! with `(s, t)_h = t^H h s`. The Chern connection is `θ_j = h^{-1} ∂_j h`,
//! `D′ = ∂ + Σ_j dz_j ∧ θ_j`, and the curvature is
//! `Θ = Σ Θ_jk dz_j ∧ dz̄_k` with `Θ_jk = -∂̄_k θ_j`; for `r = 1` this is
//! `-∂_j ∂̄_k log h`.
//!
//! Spectral differentiation of `h` itself loses all accuracy once `h` spans
//! many decades, so `θ_j` is evaluated through the determinant-normalized
//! splitting `h = e^{-φ₀} H`, `φ₀ = -(1/r) log det h`:
//! `θ_j = -∂_j φ₀ + H^{-1} ∂_j H`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exterior::{const_wedge, hodge_inverse, hodge_star, Bidegree, ConstForm, EForm, Monomial, Valued};
use crate::grid::{partial_z_raw, partial_z_zbar, GridSpec, ScalarField};
use crate::linalg;
use crate::par;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// Relative hermitian defect tolerated when constructing a metric.
const HERMITIAN_TOL: f64 = 1e-12;

/// Hermitian metric field, point-major `r×r` matrices.
///
/// Masked points carry no metric information: their stored matrix is zero
/// and they are skipped by every pairing and quadrature.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    grid: GridSpec,
    rank: usize,
    data: Vec<C>,
    mask: Option<Vec<bool>>,
}

impl MetricField {
    /// Validates hermitian symmetry and positive definiteness off the mask.
    pub fn new(grid: GridSpec, rank: usize, mut data: Vec<C>, mask: Option<Vec<bool>>) -> Result<Self> {
        let rr = rank * rank;
        if rank == 0 || data.len() != grid.num_points() * rr {
            return Err(Error::DimensionMismatch(format!(
                "metric data of length {} for rank {rank} on {} points",
                data.len(),
                grid.num_points()
            )));
        }
        if let Some(m) = &mask {
            if m.len() != grid.num_points() {
                return Err(Error::DimensionMismatch("mask length differs from grid".into()));
            }
        }
        let masked = |pt: usize| mask.as_ref().is_some_and(|m| m[pt]);
        let problems = par::map_range(grid.num_points(), |pt| {
            if masked(pt) {
                return None;
            }
            let h = &data[pt * rr..(pt + 1) * rr];
            let defect = linalg::hermitian_defect(h, rank);
            if !(defect <= HERMITIAN_TOL) {
                return Some(Error::NonHermitianMetric { point: pt, defect });
            }
            if linalg::cholesky(h, rank).is_none() {
                return Some(Error::SingularMetric { point: pt });
            }
            None
        });
        if let Some(err) = problems.into_iter().flatten().next() {
            return Err(err);
        }
        for pt in 0..grid.num_points() {
            let h = &mut data[pt * rr..(pt + 1) * rr];
            if masked(pt) {
                h.fill(ZERO);
            } else {
                let sym = linalg::symmetrize(h, rank);
                h.copy_from_slice(&sym);
            }
        }
        let mask = mask.filter(|m| m.iter().any(|&b| b));
        Ok(Self { grid, rank, data, mask })
    }

    pub fn from_fn<F>(grid: GridSpec, rank: usize, f: F) -> Result<Self>
    where
        F: Fn(usize) -> Vec<C> + Sync + Send,
    {
        let mats = par::map_range(grid.num_points(), f);
        Self::new(grid, rank, mats.concat(), None)
    }

    pub fn identity(grid: GridSpec, rank: usize) -> Self {
        let id = linalg::identity(rank);
        let data = (0..grid.num_points()).flat_map(|_| id.iter().copied()).collect();
        Self { grid, rank, data, mask: None }
    }

    /// Rank-one metric `h = w`, with `w > 0`.
    pub fn scalar_weight(grid: GridSpec, weight: &[f64]) -> Result<Self> {
        Self::new(grid, 1, weight.iter().map(|&w| C::new(w, 0.0)).collect(), None)
    }

    /// Builds a metric and masks the points where `det h` is not finite or
    /// falls below `rel_threshold · median(det h)`.
    pub fn with_det_mask(grid: GridSpec, rank: usize, mut data: Vec<C>, rel_threshold: f64) -> Result<Self> {
        let rr = rank * rank;
        let dets: Vec<f64> = (0..grid.num_points())
            .map(|pt| linalg::determinant(&data[pt * rr..(pt + 1) * rr], rank).re)
            .collect();
        let mut finite: Vec<f64> = dets.iter().copied().filter(|d| d.is_finite()).collect();
        if finite.is_empty() {
            return Err(Error::SingularMetric { point: 0 });
        }
        finite.sort_by(f64::total_cmp);
        let median = finite[finite.len() / 2];
        let mask: Vec<bool> = dets.iter().map(|&d| !d.is_finite() || d < rel_threshold * median).collect();
        for (pt, &m) in mask.iter().enumerate() {
            if m {
                data[pt * rr..(pt + 1) * rr].fill(ZERO);
            }
        }
        Self::new(grid, rank, data, Some(mask))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn at(&self, pt: usize) -> &[C] {
        let rr = self.rank * self.rank;
        &self.data[pt * rr..(pt + 1) * rr]
    }

    pub fn data(&self) -> &[C] {
        &self.data
    }

    pub fn is_masked(&self, pt: usize) -> bool {
        self.mask.as_ref().is_some_and(|m| m[pt])
    }

    /// The mask, or `None` when no point is masked.
    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn masked_points(&self) -> Vec<usize> {
        self.mask.as_ref().map_or_else(Vec::new, |m| (0..m.len()).filter(|&i| m[i]).collect())
    }

    fn require_unmasked(&self) -> Result<()> {
        match self.masked_points().first() {
            Some(&point) => Err(Error::SingularMetric { point }),
            None => Ok(()),
        }
    }

    /// Samples of entry `(alpha, beta)`.
    pub fn entry(&self, alpha: usize, beta: usize) -> Vec<C> {
        let rr = self.rank * self.rank;
        (0..self.grid.num_points()).map(|pt| self.data[pt * rr + alpha * self.rank + beta]).collect()
    }

    /// `det h` at every point (zero at masked points).
    pub fn determinants(&self) -> Vec<f64> {
        (0..self.grid.num_points()).map(|pt| linalg::determinant(self.at(pt), self.rank).re).collect()
    }

    /// `h v` at `pt`.
    pub fn apply(&self, pt: usize, v: &[C]) -> Vec<C> {
        linalg::matvec(self.at(pt), v, self.rank)
    }

    /// Pointwise `h^{-1}`; zero at masked points.
    pub fn inverse_data(&self) -> Vec<C> {
        let r = self.rank;
        par::map_range(self.grid.num_points(), |pt| {
            if self.is_masked(pt) {
                vec![ZERO; r * r]
            } else {
                linalg::inverse(self.at(pt), r).expect("validated metric is invertible")
            }
        })
        .concat()
    }

    /// The conjugate metric `h̄ = h^T` on the conjugate bundle.
    pub fn conjugate(&self) -> MetricField {
        let r = self.rank;
        let data = (0..self.grid.num_points()).flat_map(|pt| linalg::transpose(self.at(pt), r)).collect();
        MetricField { grid: self.grid, rank: r, data, mask: self.mask.clone() }
    }

    /// Multiplies the metric by a positive scalar function.
    pub fn scale_by(&self, w: &[f64]) -> Result<MetricField> {
        let rr = self.rank * self.rank;
        let data = self.data.iter().enumerate().map(|(i, v)| v * w[i / rr]).collect();
        MetricField::new(self.grid, self.rank, data, self.mask.clone())
    }

    pub fn scale(&self, c: f64) -> Result<MetricField> {
        MetricField::new(self.grid, self.rank, self.data.iter().map(|v| v * c).collect(), self.mask.clone())
    }
}

/// The dual metric `h* = (h^{-1})^T` in the dual frame. Masked points stay
/// masked.
pub fn dual_metric(h: &MetricField) -> Result<MetricField> {
    let r = h.rank;
    let inv = h.inverse_data();
    let data = (0..h.grid.num_points()).flat_map(|pt| linalg::transpose(&inv[pt * r * r..(pt + 1) * r * r], r)).collect();
    MetricField::new(h.grid, r, data, h.mask.clone())
}

/// Point-major field of `r×r` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    grid: GridSpec,
    rank: usize,
    data: Vec<C>,
}

impl MatrixField {
    pub fn at(&self, pt: usize) -> &[C] {
        let rr = self.rank * self.rank;
        &self.data[pt * rr..(pt + 1) * rr]
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Samples of entry `(alpha, beta)`.
    pub fn entry(&self, alpha: usize, beta: usize) -> Vec<C> {
        let rr = self.rank * self.rank;
        (0..self.grid.num_points()).map(|pt| self.data[pt * rr + alpha * self.rank + beta]).collect()
    }
}

/// Chern connection matrices `θ_j`, `j = 0..n`.
#[derive(Clone, Debug)]
pub struct Connection {
    theta: Vec<MatrixField>,
    /// `-(1/r) log det h`.
    phi0: Vec<f64>,
    /// `H = e^{φ₀} h`.
    normalized: Vec<C>,
    rank: usize,
}

impl Connection {
    /// Requires an unmasked metric.
    pub fn new(h: &MetricField) -> Result<Self> {
        h.require_unmasked()?;
        let grid = h.grid;
        let r = h.rank;
        let rr = r * r;
        let npts = grid.num_points();
        let phi0: Vec<f64> = (0..npts)
            .map(|pt| -linalg::determinant(h.at(pt), r).re.ln() / r as f64)
            .collect();
        if let Some(point) = phi0.iter().position(|v| !v.is_finite()) {
            return Err(Error::SingularMetric { point });
        }
        let normalized: Vec<C> = h.data.iter().enumerate().map(|(i, v)| v * phi0[i / rr].exp()).collect();
        let phi0_c: Vec<C> = phi0.iter().map(|&v| C::new(v, 0.0)).collect();
        let inv_h: Vec<C> = (0..npts)
            .flat_map(|pt| linalg::inverse(&normalized[pt * rr..(pt + 1) * rr], r).expect("validated metric"))
            .collect();
        let mut theta = Vec::with_capacity(grid.dim());
        for j in 0..grid.dim() {
            let dphi = partial_z_raw(&grid, &phi0_c, j, false);
            let d_entries: Vec<Vec<C>> = (0..rr)
                .map(|e| {
                    let vals: Vec<C> = (0..npts).map(|pt| normalized[pt * rr + e]).collect();
                    partial_z_raw(&grid, &vals, j, false)
                })
                .collect();
            let data = par::map_range(npts, |pt| {
                let dh: Vec<C> = (0..rr).map(|e| d_entries[e][pt]).collect();
                let mut m = linalg::matmul(&inv_h[pt * rr..(pt + 1) * rr], &dh, r);
                for a in 0..r {
                    m[a * r + a] -= dphi[pt];
                }
                m
            })
            .concat();
            theta.push(MatrixField { grid, rank: r, data });
        }
        Ok(Self { theta, phi0, normalized, rank: r })
    }

    pub fn theta(&self, j: usize) -> &MatrixField {
        &self.theta[j]
    }

    pub fn grid(&self) -> &GridSpec {
        &self.theta[0].grid
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
}

/// `θ_j`, `j = 0..n`.
pub fn chern_connection(h: &MetricField) -> Result<Vec<MatrixField>> {
    Ok(Connection::new(h)?.theta)
}

/// Curvature coefficients `Θ_jk`, point-major with blocks ordered `(j, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureField {
    grid: GridSpec,
    rank: usize,
    data: Vec<C>,
}

impl CurvatureField {
    /// `f(pt)` returns the `n²` blocks `Θ_jk` (`j`-major), each `r×r`.
    pub fn from_fn<F>(grid: GridSpec, rank: usize, f: F) -> Result<Self>
    where
        F: Fn(usize) -> Vec<C> + Sync + Send,
    {
        let n = grid.dim();
        let per = n * n * rank * rank;
        let blocks = par::map_range(grid.num_points(), f);
        if blocks.iter().any(|b| b.len() != per) {
            return Err(Error::DimensionMismatch("curvature block count".into()));
        }
        Ok(Self { grid, rank, data: blocks.concat() })
    }

    /// Curvature whose Nakano matrix (block `(k, j)` equal to `hΘ_jk`) is the
    /// given hermitian `nr×nr` matrix at each point.
    pub fn from_nakano_matrices(h: &MetricField, m: &[Vec<C>]) -> Result<Self> {
        let grid = h.grid;
        let (n, r) = (grid.dim(), h.rank);
        let size = n * r;
        let inv = h.inverse_data();
        Self::from_fn(grid, r, |pt| {
            let hinv = &inv[pt * r * r..(pt + 1) * r * r];
            let mut out = Vec::with_capacity(n * n * r * r);
            for j in 0..n {
                for k in 0..n {
                    let block: Vec<C> = (0..r * r)
                        .map(|e| m[pt][(k * r + e / r) * size + j * r + e % r])
                        .collect();
                    out.extend(linalg::matmul(hinv, &block, r));
                }
            }
            out
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `Θ_jk` at `pt`.
    pub fn block(&self, pt: usize, j: usize, k: usize) -> &[C] {
        let n = self.grid.dim();
        let rr = self.rank * self.rank;
        let base = pt * n * n * rr + (j * n + k) * rr;
        &self.data[base..base + rr]
    }

    /// Nakano matrix at `pt`: `nr×nr` with block `(k, j)` equal to `hΘ_jk`.
    pub fn nakano_matrix(&self, h: &MetricField, pt: usize) -> Vec<C> {
        let (n, r) = (self.grid.dim(), self.rank);
        let size = n * r;
        let mut m = vec![ZERO; size * size];
        for j in 0..n {
            for k in 0..n {
                let hb = linalg::matmul(h.at(pt), self.block(pt, j, k), r);
                for a in 0..r {
                    for b in 0..r {
                        m[(k * r + a) * size + j * r + b] = hb[a * r + b];
                    }
                }
            }
        }
        m
    }

    /// `Σ_jk ξ_j ξ̄_k hΘ_jk` at `pt`.
    pub fn griffiths_matrix(&self, h: &MetricField, pt: usize, xi: &[C]) -> Vec<C> {
        let (n, r) = (self.grid.dim(), self.rank);
        let mut acc = vec![ZERO; r * r];
        for j in 0..n {
            for k in 0..n {
                let w = xi[j] * xi[k].conj();
                if w == ZERO {
                    continue;
                }
                for (a, b) in acc.iter_mut().zip(self.block(pt, j, k)) {
                    *a += w * b;
                }
            }
        }
        linalg::matmul(h.at(pt), &acc, r)
    }

    /// Largest relative hermitian defect of the Nakano matrix over `region`
    /// (all points when `None`), with its location.
    pub fn symmetry_defect(&self, h: &MetricField, region: Option<&[bool]>) -> (usize, f64) {
        let size = self.grid.dim() * self.rank;
        let npts = self.grid.num_points();
        let best = par::argmin_by(npts, |pt| {
            if region.is_some_and(|m| !m[pt]) || h.is_masked(pt) {
                return f64::NAN;
            }
            -linalg::hermitian_defect(&self.nakano_matrix(h, pt), size)
        });
        best.map_or((0, 0.0), |(pt, v)| (pt, -v))
    }

    /// `self + other`, blockwise.
    pub fn add(&self, other: &CurvatureField) -> Result<CurvatureField> {
        if self.grid != other.grid || self.rank != other.rank {
            return Err(Error::DimensionMismatch("curvature fields differ in shape".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(CurvatureField { grid: self.grid, rank: self.rank, data })
    }
}

/// Chern curvature `Θ_jk = -∂̄_k θ_j` of an unmasked metric.
pub fn curvature(h: &MetricField) -> Result<CurvatureField> {
    curvature_with(&Connection::new(h)?)
}

/// Curvature from a precomputed connection.
pub fn curvature_with(conn: &Connection) -> Result<CurvatureField> {
    let grid = *conn.grid();
    let (n, r) = (grid.dim(), conn.rank);
    let rr = r * r;
    let npts = grid.num_points();
    let phi0 = ScalarField::from_real(grid, &conn.phi0)?;
    let inv_h: Vec<C> = (0..npts)
        .flat_map(|pt| linalg::inverse(&conn.normalized[pt * rr..(pt + 1) * rr], r).expect("validated metric"))
        .collect();
    let mut blocks: Vec<Vec<Vec<C>>> = Vec::with_capacity(n * n);
    for j in 0..n {
        let dh: Vec<Vec<C>> = (0..rr)
            .map(|e| {
                let vals: Vec<C> = (0..npts).map(|pt| conn.normalized[pt * rr + e]).collect();
                partial_z_raw(&grid, &vals, j, false)
            })
            .collect();
        // A_j = H^{-1} ∂_j H
        let a_j: Vec<Vec<C>> = {
            let prods = par::map_range(npts, |pt| {
                let d: Vec<C> = (0..rr).map(|e| dh[e][pt]).collect();
                linalg::matmul(&inv_h[pt * rr..(pt + 1) * rr], &d, r)
            });
            (0..rr).map(|e| prods.iter().map(|m| m[e]).collect()).collect()
        };
        for k in 0..n {
            let ddphi = partial_z_zbar(&phi0, j, k)?;
            let mut entries: Vec<Vec<C>> = a_j.iter().map(|vals| partial_z_raw(&grid, vals, k, true)).collect();
            for (e, vals) in entries.iter_mut().enumerate() {
                for (pt, v) in vals.iter_mut().enumerate() {
                    *v = -*v;
                    if e / r == e % r {
                        *v += ddphi.values()[pt];
                    }
                }
            }
            blocks.push(entries);
        }
    }
    let per = n * n * rr;
    let mut data = vec![ZERO; npts * per];
    for (b, entries) in blocks.iter().enumerate() {
        for (e, vals) in entries.iter().enumerate() {
            for (pt, v) in vals.iter().enumerate() {
                data[pt * per + b * rr + e] = *v;
            }
        }
    }
    Ok(CurvatureField { grid, rank: r, data })
}

fn require_bundle(a: &EForm) -> Result<()> {
    if a.valued() != Valued::Bundle {
        return Err(Error::Unsupported("operator expects a bundle-valued form".into()));
    }
    Ok(())
}

fn derivative_form(a: &EForm, conjugate: bool) -> Result<EForm> {
    let grid = *a.grid();
    let n = grid.dim();
    let b = a.bidegree();
    let out_b = if conjugate { Bidegree::new(b.p, b.q + 1) } else { Bidegree::new(b.p + 1, b.q) };
    let mut out = EForm::zeros(grid, out_b, a.rank(), a.valued())?;
    let r = a.rank();
    for (im, &m) in a.monomials().iter().enumerate() {
        for k in 0..n {
            let gen = if conjugate { Monomial::new(&[], &[k]) } else { Monomial::new(&[k], &[]) };
            let Some((sign, target)) = gen.wedge(m) else { continue };
            let io = out.index_of(target).expect("derivative lands in basis");
            for c in 0..r {
                let d = partial_z_raw(&grid, a.component(im, c), k, conjugate);
                for (dst, v) in out.component_mut(io, c).iter_mut().zip(d) {
                    *dst += sign * v;
                }
            }
        }
    }
    Ok(out)
}

/// `∂̄a = Σ_k dz̄_k ∧ ∂a/∂z̄_k`.
pub fn dbar(a: &EForm) -> Result<EForm> {
    if a.bidegree().q >= a.grid().dim() {
        return Err(Error::DimensionMismatch("dbar of a form of top antiholomorphic degree".into()));
    }
    derivative_form(a, true)
}

/// `∂a = Σ_k dz_k ∧ ∂a/∂z_k`.
pub fn dz_form(a: &EForm) -> Result<EForm> {
    if a.bidegree().p >= a.grid().dim() {
        return Err(Error::DimensionMismatch("d' of a form of top holomorphic degree".into()));
    }
    derivative_form(a, false)
}

/// Exact discrete adjoint of [`dbar`] for the flat, unweighted `ℓ²` pairing:
/// maps `(p, q+1)`-forms to `(p, q)`-forms.
pub fn dbar_adjoint_flat(b: &EForm) -> Result<EForm> {
    let grid = *b.grid();
    let n = grid.dim();
    let bd = b.bidegree();
    if bd.q == 0 {
        return Err(Error::DimensionMismatch("flat adjoint of dbar needs antiholomorphic degree >= 1".into()));
    }
    let mut out = EForm::zeros(grid, Bidegree::new(bd.p, bd.q - 1), b.rank(), b.valued())?;
    let r = b.rank();
    for (im, &m) in out.monomials().to_vec().iter().enumerate() {
        for k in 0..n {
            let Some((sign, target)) = Monomial::new(&[], &[k]).wedge(m) else { continue };
            let ib = b.index_of(target).expect("basis monomial");
            for c in 0..r {
                // (∂̄_k)^† = -∂_k for the zeroed-Nyquist symbols.
                let d = partial_z_raw(&grid, b.component(ib, c), k, false);
                for (dst, v) in out.component_mut(im, c).iter_mut().zip(d) {
                    *dst -= sign * v;
                }
            }
        }
    }
    Ok(out)
}

/// Applies a matrix field to every coefficient vector of `a`.
pub fn apply_endomorphism(m: &MatrixField, a: &EForm) -> Result<EForm> {
    if m.rank != a.rank() || m.grid != *a.grid() {
        return Err(Error::RankMismatch { expected: a.rank(), found: m.rank });
    }
    let r = m.rank;
    Ok(a.map_vectors(|pt, v| linalg::matvec(m.at(pt), v, r)))
}

/// Applies `h` (or `h^{-1}` when `inverse`) to every coefficient vector.
pub fn apply_metric(h: &MetricField, a: &EForm, inverse: bool) -> Result<EForm> {
    if h.rank != a.rank() || h.grid != *a.grid() {
        return Err(Error::RankMismatch { expected: a.rank(), found: h.rank });
    }
    let r = h.rank;
    if inverse {
        let inv = h.inverse_data();
        Ok(a.map_vectors(|pt, v| linalg::matvec(&inv[pt * r * r..(pt + 1) * r * r], v, r)))
    } else {
        Ok(a.map_vectors(|pt, v| if h.is_masked(pt) { vec![ZERO; r] } else { h.apply(pt, v) }))
    }
}

/// `D′γ = ∂γ + Σ_j dz_j ∧ θ_j γ` for a bundle-valued `(q,0)`-form.
pub fn dprime(gamma: &EForm, conn: &Connection) -> Result<EForm> {
    require_bundle(gamma)?;
    if gamma.bidegree().q != 0 {
        return Err(Error::BidegreeMismatch { expected: (gamma.bidegree().p, 0), found: (gamma.bidegree().p, gamma.bidegree().q) });
    }
    let n = gamma.grid().dim();
    let mut out = dz_form(gamma)?;
    for j in 0..n {
        let tg = apply_endomorphism(conn.theta(j), gamma)?;
        let dzj = ConstForm::new(n, vec![(Monomial::new(&[j], &[]), C::new(1.0, 0.0))]);
        out = out.add(&const_wedge(&dzj, &tg)?)?;
    }
    Ok(out)
}

/// `Θ ∧ γ = Σ_jk dz_j ∧ dz̄_k ∧ Θ_jk γ`.
pub fn curvature_wedge(theta: &CurvatureField, gamma: &EForm) -> Result<EForm> {
    require_bundle(gamma)?;
    if theta.rank != gamma.rank() || theta.grid != *gamma.grid() {
        return Err(Error::RankMismatch { expected: gamma.rank(), found: theta.rank });
    }
    let n = gamma.grid().dim();
    let r = theta.rank;
    let b = gamma.bidegree();
    let mut out = EForm::zeros(*gamma.grid(), Bidegree::new(b.p + 1, b.q + 1), r, Valued::Bundle)?;
    for j in 0..n {
        for k in 0..n {
            let tg = gamma.map_vectors(|pt, v| linalg::matvec(theta.block(pt, j, k), v, r));
            let jk = ConstForm::new(n, vec![(Monomial::new(&[j], &[k]), C::new(1.0, 0.0))]);
            out = out.add(&const_wedge(&jk, &tg)?)?;
        }
    }
    Ok(out)
}

/// Formal adjoint of `∂̄` on `(n,p)`-forms from `γ_{∂̄*β} = i D′γ_β`.
pub fn dbar_star_formal(beta: &EForm, conn: &Connection) -> Result<EForm> {
    let n = beta.grid().dim();
    let p = beta.bidegree().q;
    if beta.bidegree().p != n || p == 0 {
        return Err(Error::BidegreeMismatch { expected: (n, p.max(1)), found: (beta.bidegree().p, p) });
    }
    let gamma = hodge_star(beta)?;
    let g = dprime(&gamma, conn)?.scale(I);
    hodge_inverse(&g, p - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::{integrated_norm_sq, wedge_const};
    use crate::grid::integrate;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn periodic_weight(g: &GridSpec) -> Vec<f64> {
        let k = 2.0 * std::f64::consts::PI / g.side();
        (0..g.num_points())
            .map(|pt| {
                let s: f64 = (0..g.real_axes()).map(|a| (k * g.centered(pt, a)).cos()).sum();
                (0.4 * s).exp()
            })
            .collect()
    }

    #[test]
    fn rejects_indefinite_metric() {
        let g = GridSpec::new(1, 4, 1.0).unwrap();
        let data = vec![c(-1.0, 0.0); g.num_points()];
        assert!(matches!(MetricField::new(g, 1, data, None), Err(Error::SingularMetric { .. })));
    }

    #[test]
    fn dual_of_dual_is_identity() {
        let g = GridSpec::new(1, 4, 1.0).unwrap();
        let h = MetricField::from_fn(g, 2, |pt| {
            let t = pt as f64;
            vec![c(2.0, 0.0), c(0.1 * t.sin(), 0.4), c(0.1 * t.sin(), -0.4), c(1.0 + 0.01 * t, 0.0)]
        })
        .unwrap();
        let back = dual_metric(&dual_metric(&h).unwrap()).unwrap();
        for (a, b) in back.data().iter().zip(h.data()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn scalar_curvature_is_minus_ddbar_log() {
        let g = GridSpec::new(1, 32, 2.0 * std::f64::consts::PI).unwrap();
        let w = periodic_weight(&g);
        let h = MetricField::scalar_weight(g, &w).unwrap();
        let theta = curvature(&h).unwrap();
        // log h = 0.4 (cos x + cos y): -∂∂̄ log h = 0.1 (cos x + cos y).
        for pt in 0..g.num_points() {
            let expect = 0.1 * (g.centered(pt, 0).cos() + g.centered(pt, 1).cos());
            assert!((theta.block(pt, 0, 0)[0] - c(expect, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn flat_adjoint_is_exact() {
        let g = GridSpec::new(2, 8, 3.0).unwrap();
        let u = EForm::from_fn(g, Bidegree::new(2, 0), 1, Valued::Bundle, |_, _, pt| {
            c((pt as f64 * 0.31).sin(), (pt as f64 * 0.07).cos())
        })
        .unwrap();
        let v = EForm::from_fn(g, Bidegree::new(2, 1), 1, Valued::Bundle, |m, _, pt| {
            c((pt as f64 * 0.13 + m as f64).cos(), (pt as f64 * 0.29).sin())
        })
        .unwrap();
        let h = MetricField::identity(g, 1);
        let lhs = integrate(&crate::exterior::inner_product(&dbar(&u).unwrap(), &v, &h).unwrap());
        let rhs = integrate(&crate::exterior::inner_product(&u, &dbar_adjoint_flat(&v).unwrap(), &h).unwrap());
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn dbar_squares_to_zero() {
        let g = GridSpec::new(2, 8, 3.0).unwrap();
        let u = EForm::from_fn(g, Bidegree::new(2, 0), 1, Valued::Bundle, |_, _, pt| c((pt as f64 * 0.31).sin(), 0.0)).unwrap();
        let dd = dbar(&dbar(&u).unwrap()).unwrap();
        assert!(dd.max_abs() < 1e-12);
    }

    #[test]
    fn formal_adjoint_matches_weighted_adjoint_for_trig_data() {
        // Band-limited data with a band-limited log-weight: the Leibniz rule
        // holds up to aliasing only, so compare on a fine grid.
        let g = GridSpec::new(1, 64, 2.0 * std::f64::consts::PI).unwrap();
        let w = periodic_weight(&g);
        let h = MetricField::scalar_weight(g, &w).unwrap();
        let conn = Connection::new(&h).unwrap();
        let beta = EForm::from_fn(g, Bidegree::new(1, 1), 1, Valued::Bundle, |_, _, pt| {
            c(g.centered(pt, 0).sin(), (2.0 * g.centered(pt, 1)).cos())
        })
        .unwrap();
        let formal = dbar_star_formal(&beta, &conn).unwrap();
        let hb = apply_metric(&h, &beta, false).unwrap();
        let discrete = apply_metric(&h, &dbar_adjoint_flat(&hb).unwrap(), true).unwrap();
        let diff = integrated_norm_sq(&formal.sub(&discrete).unwrap(), &h).unwrap();
        let base = integrated_norm_sq(&discrete, &h).unwrap();
        assert!(diff.sqrt() < 1e-10 * base.sqrt(), "{diff} vs {base}");
    }

    #[test]
    fn dprime_of_constant_section_is_connection() {
        let g = GridSpec::new(1, 16, 2.0 * std::f64::consts::PI).unwrap();
        let h = MetricField::scalar_weight(g, &periodic_weight(&g)).unwrap();
        let conn = Connection::new(&h).unwrap();
        let one = EForm::from_fn(g, Bidegree::new(0, 0), 1, Valued::Bundle, |_, _, _| c(1.0, 0.0)).unwrap();
        let d = dprime(&one, &conn).unwrap();
        for pt in 0..g.num_points() {
            assert!((d.component(0, 0)[pt] - conn.theta(0).at(pt)[0]).norm() < 1e-15);
        }
        let _ = wedge_const(&one, &ConstForm::omega(1)).unwrap();
    }
}
