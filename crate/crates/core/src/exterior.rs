//! Exterior algebra of bundle-valued `(p,q)`-forms.
//!
//! Generators are ordered `dz_1, …, dz_n, dz̄_1, …, dz̄_n`. A monomial
//! `dz_I ∧ dz̄_J` is stored with `I` and `J` as bit sets, and forms are
//! expanded on strictly increasing multi-indices only. Coefficients of a
//! rank-`r` bundle-valued form are `r`-vectors in a local holomorphic frame.
//!
//! The `h`-pairing of `a = s dz_I∧dz̄_J` and `b = t dz_K∧dz̄_L` is the scalar
//! form `(s, t)_h · dz_I∧dz̄_J ∧ conj(dz_K∧dz̄_L)`, with `(s, t)_h = t^H h s`
//! linear in its first argument.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::hermitian::MetricField;
use crate::par;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const I: C = C::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bidegree {
    pub p: usize,
    pub q: usize,
}

impl Bidegree {
    pub fn new(p: usize, q: usize) -> Self {
        Self { p, q }
    }

    fn pair(self) -> (usize, usize) {
        (self.p, self.q)
    }
}

/// The unimodular constant `c_p = i^{p²}`.
pub fn c_const(p: usize) -> C {
    match (p * p) % 4 {
        0 => C::new(1.0, 0.0),
        1 => I,
        2 => C::new(-1.0, 0.0),
        _ => -I,
    }
}

/// `dz_I ∧ dz̄_J` with `I`, `J` as bit sets over `0..n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    holo: u8,
    anti: u8,
}

impl Monomial {
    pub fn new(holo: &[usize], anti: &[usize]) -> Self {
        Self { holo: to_mask(holo), anti: to_mask(anti) }
    }

    pub fn from_masks(holo: u8, anti: u8) -> Self {
        Self { holo, anti }
    }

    pub fn holo_mask(self) -> u8 {
        self.holo
    }

    pub fn anti_mask(self) -> u8 {
        self.anti
    }

    pub fn holo_indices(self) -> Vec<usize> {
        from_mask(self.holo)
    }

    pub fn anti_indices(self) -> Vec<usize> {
        from_mask(self.anti)
    }

    pub fn bidegree(self) -> Bidegree {
        Bidegree::new(self.holo.count_ones() as usize, self.anti.count_ones() as usize)
    }

    /// `self ∧ rhs` as `sign · monomial`, or `None` when it vanishes.
    pub fn wedge(self, rhs: Monomial) -> Option<(f64, Monomial)> {
        if self.holo & rhs.holo != 0 || self.anti & rhs.anti != 0 {
            return None;
        }
        // dz_{I_a} dz̄_{J_a} dz_{I_b} dz̄_{J_b}: move dz_{I_b} left past dz̄_{J_a},
        // then merge each sorted pair.
        let swaps = self.anti.count_ones() * rhs.holo.count_ones()
            + merge_inversions(self.holo, rhs.holo)
            + merge_inversions(self.anti, rhs.anti);
        let sign = if swaps % 2 == 0 { 1.0 } else { -1.0 };
        Some((sign, Monomial { holo: self.holo | rhs.holo, anti: self.anti | rhs.anti }))
    }

    /// `conj(dz_I ∧ dz̄_J) = dz̄_I ∧ dz_J = sign · dz_J ∧ dz̄_I`.
    pub fn conjugate(self) -> (f64, Monomial) {
        let swaps = self.holo.count_ones() * self.anti.count_ones();
        let sign = if swaps % 2 == 0 { 1.0 } else { -1.0 };
        (sign, Monomial { holo: self.anti, anti: self.holo })
    }
}

fn to_mask(idx: &[usize]) -> u8 {
    idx.iter().fold(0u8, |m, &i| m | (1u8 << i))
}

fn from_mask(mask: u8) -> Vec<usize> {
    (0..8).filter(|i| mask & (1 << i) != 0).collect()
}

/// Number of pairs `(x, y)` with `x ∈ a`, `y ∈ b`, `x > y`.
fn merge_inversions(a: u8, b: u8) -> u32 {
    from_mask(b).iter().map(|&y| (a >> (y + 1)).count_ones()).sum()
}

/// Strictly increasing `k`-subsets of `0..n` as bit sets, lexicographic.
pub fn subsets(n: usize, k: usize) -> Vec<u8> {
    fn rec(start: usize, n: usize, k: usize, acc: u8, out: &mut Vec<u8>) {
        if k == 0 {
            out.push(acc);
            return;
        }
        for i in start..n {
            rec(i + 1, n, k - 1, acc | (1 << i), out);
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, 0, &mut out);
    }
    out
}

/// Monomial basis of `(p,q)`-forms in dimension `n`, `I`-major.
pub fn basis(n: usize, bidegree: Bidegree) -> Vec<Monomial> {
    let mut out = Vec::new();
    for &i in &subsets(n, bidegree.p) {
        for &j in &subsets(n, bidegree.q) {
            out.push(Monomial::from_masks(i, j));
        }
    }
    out
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// A form with constant scalar coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstForm {
    n: usize,
    terms: Vec<(Monomial, C)>,
}

impl ConstForm {
    pub fn new(n: usize, terms: Vec<(Monomial, C)>) -> Self {
        let mut f = Self { n, terms: Vec::new() };
        for (m, c) in terms {
            f.accumulate(m, c);
        }
        f
    }

    pub fn one(n: usize) -> Self {
        Self::new(n, vec![(Monomial::from_masks(0, 0), C::new(1.0, 0.0))])
    }

    /// `ω = i Σ_j dz_j ∧ dz̄_j`.
    pub fn omega(n: usize) -> Self {
        Self::new(n, (0..n).map(|j| (Monomial::new(&[j], &[j]), I)).collect())
    }

    /// `ω_k = ω^k / k!`.
    pub fn omega_power(n: usize, k: usize) -> Self {
        let om = Self::omega(n);
        let mut acc = Self::one(n);
        for _ in 0..k {
            acc = acc.wedge(&om);
        }
        acc.scale(C::new(1.0 / factorial(k), 0.0))
    }

    /// The volume form `dV = ω_n`.
    pub fn volume(n: usize) -> Self {
        Self::omega_power(n, n)
    }

    pub fn terms(&self) -> &[(Monomial, C)] {
        &self.terms
    }

    pub fn coefficient(&self, m: Monomial) -> C {
        self.terms.iter().find(|(t, _)| *t == m).map_or(ZERO, |(_, c)| *c)
    }

    fn accumulate(&mut self, m: Monomial, c: C) {
        match self.terms.iter_mut().find(|(t, _)| *t == m) {
            Some((_, v)) => *v += c,
            None => self.terms.push((m, c)),
        }
    }

    pub fn scale(&self, c: C) -> Self {
        Self { n: self.n, terms: self.terms.iter().map(|&(m, v)| (m, v * c)).collect() }
    }

    pub fn wedge(&self, rhs: &ConstForm) -> Self {
        let mut out = Self { n: self.n, terms: Vec::new() };
        for &(a, ca) in &self.terms {
            for &(b, cb) in &rhs.terms {
                if let Some((s, m)) = a.wedge(b) {
                    out.accumulate(m, ca * cb * s);
                }
            }
        }
        out.terms.retain(|(_, c)| *c != ZERO);
        out.terms.sort_by_key(|(m, _)| *m);
        out
    }
}

/// Whether coefficients are scalars or sections of the bundle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Valued {
    Scalar,
    Bundle,
}

/// A bundle-valued (or scalar) `(p,q)`-form sampled on a grid.
///
/// `coeffs[m * rank + c]` holds component `c` of the coefficient of
/// `monomials[m]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EForm {
    grid: GridSpec,
    rank: usize,
    valued: Valued,
    bidegree: Bidegree,
    monomials: Vec<Monomial>,
    coeffs: Vec<Vec<C>>,
}

impl EForm {
    pub fn zeros(grid: GridSpec, bidegree: Bidegree, rank: usize, valued: Valued) -> Result<Self> {
        let n = grid.dim();
        if bidegree.p > n || bidegree.q > n {
            return Err(Error::DimensionMismatch(format!(
                "bidegree ({}, {}) exceeds dimension {n}",
                bidegree.p, bidegree.q
            )));
        }
        if rank == 0 || (valued == Valued::Scalar && rank != 1) {
            return Err(Error::RankMismatch { expected: 1, found: rank });
        }
        let monomials = basis(n, bidegree);
        let coeffs = vec![vec![ZERO; grid.num_points()]; monomials.len() * rank];
        Ok(Self { grid, rank, valued, bidegree, monomials, coeffs })
    }

    pub fn scalar(grid: GridSpec, bidegree: Bidegree) -> Result<Self> {
        Self::zeros(grid, bidegree, 1, Valued::Scalar)
    }

    pub fn bundle(grid: GridSpec, bidegree: Bidegree, rank: usize) -> Result<Self> {
        Self::zeros(grid, bidegree, rank, Valued::Bundle)
    }

    /// Form whose coefficient of monomial `m`, component `c`, at `point` is
    /// `f(m, c, point)`.
    pub fn from_fn<F>(grid: GridSpec, bidegree: Bidegree, rank: usize, valued: Valued, f: F) -> Result<Self>
    where
        F: Fn(usize, usize, usize) -> C + Sync + Send,
    {
        let mut out = Self::zeros(grid, bidegree, rank, valued)?;
        for m in 0..out.monomials.len() {
            for c in 0..rank {
                out.coeffs[m * rank + c] = par::map_range(grid.num_points(), |pt| f(m, c, pt));
            }
        }
        Ok(out)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn valued(&self) -> Valued {
        self.valued
    }

    pub fn bidegree(&self) -> Bidegree {
        self.bidegree
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn index_of(&self, m: Monomial) -> Option<usize> {
        self.monomials.iter().position(|&x| x == m)
    }

    pub fn component(&self, m: usize, c: usize) -> &[C] {
        &self.coeffs[m * self.rank + c]
    }

    pub fn component_mut(&mut self, m: usize, c: usize) -> &mut Vec<C> {
        &mut self.coeffs[m * self.rank + c]
    }

    pub(crate) fn components(&self) -> &[Vec<C>] {
        &self.coeffs
    }

    pub(crate) fn components_mut(&mut self) -> &mut [Vec<C>] {
        &mut self.coeffs
    }

    /// Coefficient vector of monomial `m` at `point`.
    pub fn vector_at(&self, m: usize, point: usize) -> Vec<C> {
        (0..self.rank).map(|c| self.coeffs[m * self.rank + c][point]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|v| crate::grid::max_abs(v)).fold(0.0, f64::max)
    }

    fn check_compatible(&self, other: &EForm) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch("forms live on different grids".into()));
        }
        if self.bidegree != other.bidegree {
            return Err(Error::BidegreeMismatch { expected: self.bidegree.pair(), found: other.bidegree.pair() });
        }
        if self.rank != other.rank {
            return Err(Error::RankMismatch { expected: self.rank, found: other.rank });
        }
        Ok(())
    }

    pub fn add(&self, other: &EForm) -> Result<EForm> {
        self.check_compatible(other)?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &EForm) -> Result<EForm> {
        self.check_compatible(other)?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: C, other: &EForm) -> Result<EForm> {
        self.check_compatible(other)?;
        Ok(self.zip_map(other, move |a, b| a + c * b))
    }

    pub fn scale(&self, c: C) -> EForm {
        self.map_values(|v| v * c)
    }

    /// Multiplies every coefficient by the scalar function `f`.
    pub fn mul_field(&self, f: &[C]) -> EForm {
        let mut out = self.clone();
        for comp in &mut out.coeffs {
            for (v, w) in comp.iter_mut().zip(f) {
                *v *= w;
            }
        }
        out
    }

    pub fn map_values<F: Fn(C) -> C + Sync + Send>(&self, f: F) -> EForm {
        let mut out = self.clone();
        for comp in &mut out.coeffs {
            for v in comp.iter_mut() {
                *v = f(*v);
            }
        }
        out
    }

    fn zip_map<F: Fn(C, C) -> C + Sync + Send>(&self, other: &EForm, f: F) -> EForm {
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x = f(*x, *y);
            }
        }
        out
    }

    /// Same shape with all coefficients zero.
    pub fn zeros_like(&self) -> EForm {
        self.map_values(|_| ZERO)
    }

    /// Coefficient of the top monomial of a scalar `(n,n)`-form divided by
    /// that of `dV`.
    pub fn volume_density(&self) -> Result<ScalarField> {
        let n = self.grid.dim();
        if self.valued != Valued::Scalar {
            return Err(Error::Unsupported("volume density of a bundle-valued form".into()));
        }
        if self.bidegree != Bidegree::new(n, n) {
            return Err(Error::BidegreeMismatch { expected: (n, n), found: self.bidegree.pair() });
        }
        let dv = ConstForm::volume(n).terms()[0].1;
        ScalarField::new(self.grid, self.coeffs[0].iter().map(|v| v / dv).collect())
    }

    /// Inverse of [`EForm::volume_density`]: the scalar `(n,n)`-form `f dV`.
    pub fn top_form(f: &ScalarField) -> EForm {
        let grid = *f.grid();
        let n = grid.dim();
        let dv = ConstForm::volume(n).terms()[0].1;
        let mut out = EForm::scalar(grid, Bidegree::new(n, n)).expect("top bidegree is valid");
        out.coeffs[0] = f.values().iter().map(|v| v * dv).collect();
        out
    }

    /// Treats the coefficient vectors at each point through `op`, which maps
    /// an `r`-vector to an `r`-vector.
    pub(crate) fn map_vectors<F>(&self, op: F) -> EForm
    where
        F: Fn(usize, &[C]) -> Vec<C> + Sync + Send,
    {
        let mut out = self.clone();
        let r = self.rank;
        let npts = self.grid.num_points();
        for m in 0..self.monomials.len() {
            let mapped: Vec<Vec<C>> = par::map_range(npts, |pt| {
                let v: Vec<C> = (0..r).map(|c| self.coeffs[m * r + c][pt]).collect();
                op(pt, &v)
            });
            for c in 0..r {
                for (pt, vec) in mapped.iter().enumerate() {
                    out.coeffs[m * r + c][pt] = vec[c];
                }
            }
        }
        out
    }
}

fn result_shape(a: &EForm, b: &EForm) -> Result<(usize, Valued)> {
    if a.grid != b.grid {
        return Err(Error::DimensionMismatch("forms live on different grids".into()));
    }
    match (a.valued, b.valued) {
        (Valued::Bundle, Valued::Bundle) => {
            Err(Error::Unsupported("wedge of two bundle-valued forms".into()))
        }
        (Valued::Bundle, Valued::Scalar) => Ok((a.rank, Valued::Bundle)),
        (Valued::Scalar, Valued::Bundle) => Ok((b.rank, Valued::Bundle)),
        (Valued::Scalar, Valued::Scalar) => Ok((1, Valued::Scalar)),
    }
}

/// `a ∧ b`; at most one factor may be bundle-valued.
pub fn wedge(a: &EForm, b: &EForm) -> Result<EForm> {
    let (rank, valued) = result_shape(a, b)?;
    let n = a.grid.dim();
    let bideg = Bidegree::new(a.bidegree.p + b.bidegree.p, a.bidegree.q + b.bidegree.q);
    if bideg.p > n || bideg.q > n {
        return Err(Error::DimensionMismatch("wedge exceeds top degree".into()));
    }
    let mut out = EForm::zeros(a.grid, bideg, rank, valued)?;
    for (ia, &ma) in a.monomials.iter().enumerate() {
        for (ib, &mb) in b.monomials.iter().enumerate() {
            let Some((sign, m)) = ma.wedge(mb) else { continue };
            let io = out.index_of(m).expect("wedge lands in basis");
            for c in 0..rank {
                let ca = if a.valued == Valued::Bundle { c } else { 0 };
                let cb = if b.valued == Valued::Bundle { c } else { 0 };
                let (xa, xb) = (&a.coeffs[ia * a.rank + ca], &b.coeffs[ib * b.rank + cb]);
                let dst = &mut out.coeffs[io * rank + c];
                for ((d, x), y) in dst.iter_mut().zip(xa).zip(xb) {
                    *d += sign * x * y;
                }
            }
        }
    }
    Ok(out)
}

/// `a ∧ k` for a constant form `k` placed on the right.
pub fn wedge_const(a: &EForm, k: &ConstForm) -> Result<EForm> {
    wedge_const_impl(a, k, false)
}

/// `k ∧ a` for a constant form `k` placed on the left.
pub fn const_wedge(k: &ConstForm, a: &EForm) -> Result<EForm> {
    wedge_const_impl(a, k, true)
}

fn wedge_const_impl(a: &EForm, k: &ConstForm, left: bool) -> Result<EForm> {
    let n = a.grid.dim();
    let Some(&(first, _)) = k.terms().first() else {
        return Err(Error::Unsupported("wedge with the zero constant form".into()));
    };
    let kb = first.bidegree();
    if k.terms().iter().any(|(m, _)| m.bidegree() != kb) {
        return Err(Error::Unsupported("constant form of mixed bidegree".into()));
    }
    let bideg = Bidegree::new(a.bidegree.p + kb.p, a.bidegree.q + kb.q);
    if bideg.p > n || bideg.q > n {
        return Err(Error::DimensionMismatch("wedge exceeds top degree".into()));
    }
    let mut out = EForm::zeros(a.grid, bideg, a.rank, a.valued)?;
    for (ia, &ma) in a.monomials.iter().enumerate() {
        for &(mk, ck) in k.terms() {
            let prod = if left { mk.wedge(ma) } else { ma.wedge(mk) };
            let Some((sign, m)) = prod else { continue };
            let io = out.index_of(m).expect("wedge lands in basis");
            let factor = ck * sign;
            for c in 0..a.rank {
                let src = &a.coeffs[ia * a.rank + c];
                let dst = &mut out.coeffs[io * a.rank + c];
                for (d, x) in dst.iter_mut().zip(src) {
                    *d += factor * x;
                }
            }
        }
    }
    Ok(out)
}

fn check_metric(a: &EForm, h: &MetricField) -> Result<()> {
    if *h.grid() != a.grid {
        return Err(Error::DimensionMismatch("metric and form live on different grids".into()));
    }
    if h.rank() != a.rank {
        return Err(Error::RankMismatch { expected: a.rank, found: h.rank() });
    }
    Ok(())
}

/// Pointwise `(a_{ia}, b_{ib})_h`; zero at masked points.
fn pair_components(a: &EForm, ia: usize, b: &EForm, ib: usize, h: &MetricField) -> Vec<C> {
    let r = a.rank;
    par::map_range(a.grid.num_points(), |pt| {
        if h.is_masked(pt) {
            return ZERO;
        }
        let hm = h.at(pt);
        let mut acc = ZERO;
        for beta in 0..r {
            let t = b.coeffs[ib * r + beta][pt].conj();
            if t == ZERO {
                continue;
            }
            for alpha in 0..r {
                acc += t * hm[beta * r + alpha] * a.coeffs[ia * r + alpha][pt];
            }
        }
        acc
    })
}

/// The `h`-pairing `⟨a, b⟩`, a scalar form of bidegree `(p_a + q_b, q_a + p_b)`.
pub fn pairing(a: &EForm, b: &EForm, h: &MetricField) -> Result<EForm> {
    check_metric(a, h)?;
    check_metric(b, h)?;
    let n = a.grid.dim();
    let bideg = Bidegree::new(a.bidegree.p + b.bidegree.q, a.bidegree.q + b.bidegree.p);
    if bideg.p > n || bideg.q > n {
        return Err(Error::DimensionMismatch("pairing exceeds top degree".into()));
    }
    let mut out = EForm::scalar(a.grid, bideg)?;
    for (ia, &ma) in a.monomials.iter().enumerate() {
        for (ib, &mb) in b.monomials.iter().enumerate() {
            let (s1, mbc) = mb.conjugate();
            let Some((s2, m)) = ma.wedge(mbc) else { continue };
            let io = out.index_of(m).expect("pairing lands in basis");
            let vals = pair_components(a, ia, b, ib, h);
            let sign = s1 * s2;
            for (d, v) in out.coeffs[io].iter_mut().zip(vals) {
                *d += sign * v;
            }
        }
    }
    Ok(out)
}

/// Multi-index inner product `Σ_{I,J} (a_{IJ}, b_{IJ})_h`.
pub fn inner_product(a: &EForm, b: &EForm, h: &MetricField) -> Result<ScalarField> {
    a.check_compatible(b)?;
    check_metric(a, h)?;
    let mut acc = vec![ZERO; a.grid.num_points()];
    for m in 0..a.monomials.len() {
        for (d, v) in acc.iter_mut().zip(pair_components(a, m, b, m, h)) {
            *d += v;
        }
    }
    ScalarField::new(a.grid, acc)
}

/// Pointwise `‖a‖²_h` as a multi-index sum (real, nonnegative).
pub fn norm_sq(a: &EForm, h: &MetricField) -> Result<ScalarField> {
    let ip = inner_product(a, a, h)?;
    Ok(ip.map(|v| C::new(v.re, 0.0)))
}

/// `∫ ‖a‖²_h dV`.
pub fn integrated_norm_sq(a: &EForm, h: &MetricField) -> Result<f64> {
    Ok(crate::grid::integrate(&norm_sq(a, h)?).re)
}

/// Pointwise `‖a‖²_h` through the pairing with the unimodular constants:
/// `c_p ⟨a,a⟩ ∧ ω_{n-p}` for `(p,0)`, conjugation for `(0,q)`, the Hodge
/// star for `(n,p)`, and `i c_{n-1} (-1)^n ⟨a,a⟩ + ‖a ∧ ω‖²` for `(n-1,1)`.
pub fn norm_sq_by_pairing(a: &EForm, h: &MetricField) -> Result<ScalarField> {
    let n = a.grid.dim();
    let Bidegree { p, q } = a.bidegree;
    if q == 0 {
        let top = wedge_const(&pairing(a, a, h)?, &ConstForm::omega_power(n, n - p))?;
        return Ok(top.volume_density()?.scale(c_const(p)).map(|v| C::new(v.re, 0.0)));
    }
    if p == 0 {
        let (ac, hc) = conjugate_form(a, h)?;
        return norm_sq_by_pairing(&ac, &hc);
    }
    if p == n {
        return norm_sq_by_pairing(&hodge_star(a)?, h);
    }
    if p + 1 == n && q == 1 {
        let mut pair = pairing(a, a, h)?
            .volume_density()?
            .scale(I * c_const(n - 1) * if n % 2 == 0 { 1.0 } else { -1.0 });
        let xw = norm_sq(&wedge_const(a, &ConstForm::omega(n))?, h)?;
        pair = pair.add(&xw)?;
        return Ok(pair.map(|v| C::new(v.re, 0.0)));
    }
    Err(Error::Unsupported(format!("pairing norm for bidegree ({p}, {q})")))
}

/// Complex conjugate of a `(0,q)`-form as a `(q,0)`-form with respect to the
/// conjugate metric `h̄ = h^T`, so that `‖ā‖_{h̄} = ‖a‖_h`.
fn conjugate_form(a: &EForm, h: &MetricField) -> Result<(EForm, MetricField)> {
    let b = Bidegree::new(a.bidegree.q, a.bidegree.p);
    let mut out = EForm::zeros(a.grid, b, a.rank, a.valued)?;
    for (ia, &ma) in a.monomials.iter().enumerate() {
        let (sign, mc) = ma.conjugate();
        let io = out.index_of(mc).expect("conjugate lands in basis");
        for c in 0..a.rank {
            out.coeffs[io * a.rank + c] = a.coeffs[ia * a.rank + c].iter().map(|v| sign * v.conj()).collect();
        }
    }
    Ok((out, h.conjugate()))
}

/// Entries `(J, J^c, ε_J)` with `γ_{J^c} = ε_J α_J` for `(n,p)`-forms, where
/// `ε_J` is fixed by `dz_{J^c} ∧ ω_p = ε_J^{-1} dz ∧ dz̄_J`.
pub fn hodge_constants(n: usize, p: usize) -> Vec<(Monomial, Monomial, C)> {
    let full = (1u8 << n) - 1;
    let omp = ConstForm::omega_power(n, p);
    subsets(n, p)
        .into_iter()
        .map(|j| {
            let target = Monomial::from_masks(full, j);
            let source = Monomial::from_masks(full & !j, 0);
            let prod = ConstForm::new(n, vec![(source, C::new(1.0, 0.0))]).wedge(&omp);
            let coef = prod.coefficient(target);
            (target, source, 1.0 / coef)
        })
        .collect()
}

/// The unique `(n-p,0)`-form `γ` with `γ ∧ ω_p = α` for an `(n,p)`-form `α`.
pub fn hodge_star(a: &EForm) -> Result<EForm> {
    let n = a.grid.dim();
    let Bidegree { p, q } = a.bidegree;
    if p != n {
        return Err(Error::BidegreeMismatch { expected: (n, q), found: (p, q) });
    }
    let mut out = EForm::zeros(a.grid, Bidegree::new(n - q, 0), a.rank, a.valued)?;
    for (target, source, eps) in hodge_constants(n, q) {
        let ia = a.index_of(target).expect("basis monomial");
        let io = out.index_of(source).expect("basis monomial");
        for c in 0..a.rank {
            out.coeffs[io * a.rank + c] = a.coeffs[ia * a.rank + c].iter().map(|v| eps * v).collect();
        }
    }
    Ok(out)
}

/// `γ ∧ ω_p` for an `(n-p,0)`-form `γ`.
pub fn hodge_inverse(gamma: &EForm, p: usize) -> Result<EForm> {
    let n = gamma.grid.dim();
    if gamma.bidegree != Bidegree::new(n - p.min(n), 0) || p > n {
        return Err(Error::BidegreeMismatch { expected: (n.saturating_sub(p), 0), found: gamma.bidegree.pair() });
    }
    wedge_const(gamma, &ConstForm::omega_power(n, p))
}

/// Pointwise `(α, β)_h` for `(n,p)`-forms through `c_{n-p} ⟨α, γ_β⟩`.
pub fn inner_product_top(a: &EForm, b: &EForm, h: &MetricField) -> Result<ScalarField> {
    a.check_compatible(b)?;
    let n = a.grid.dim();
    let p = a.bidegree.q;
    if a.bidegree.p != n {
        return Err(Error::BidegreeMismatch { expected: (n, p), found: a.bidegree.pair() });
    }
    let gamma_b = hodge_star(b)?;
    let top = pairing(a, &gamma_b, h)?;
    Ok(top.volume_density()?.scale(c_const(n - p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::MetricField;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    /// Sign of the permutation sorting `ids`, or 0 if an id repeats.
    fn sort_sign(mut ids: Vec<usize>) -> f64 {
        let mut sign = 1.0;
        for i in 0..ids.len() {
            for j in 0..ids.len() - 1 - i {
                if ids[j] == ids[j + 1] {
                    return 0.0;
                }
                if ids[j] > ids[j + 1] {
                    ids.swap(j, j + 1);
                    sign = -sign;
                }
            }
        }
        if ids.windows(2).any(|w| w[0] == w[1]) {
            0.0
        } else {
            sign
        }
    }

    fn generator_ids(m: Monomial, n: usize) -> Vec<usize> {
        let mut v = m.holo_indices();
        v.extend(m.anti_indices().into_iter().map(|j| n + j));
        v
    }

    #[test]
    fn wedge_sign_matches_permutation_oracle() {
        for n in 1..=4 {
            let all: Vec<Monomial> = (0..=n)
                .flat_map(|p| (0..=n).flat_map(move |q| basis(n, Bidegree::new(p, q))))
                .collect();
            for &a in &all {
                for &b in &all {
                    let mut ids = generator_ids(a, n);
                    ids.extend(generator_ids(b, n));
                    let expect = sort_sign(ids);
                    match a.wedge(b) {
                        None => assert_eq!(expect, 0.0),
                        Some((s, _)) => assert_eq!(s, expect),
                    }
                }
            }
        }
    }

    #[test]
    fn conjugation_sign_matches_oracle() {
        let n = 3;
        for p in 0..=n {
            for q in 0..=n {
                for m in basis(n, Bidegree::new(p, q)) {
                    // dz̄_I dz_J reordered to dz_J dz̄_I.
                    let mut ids: Vec<usize> = m.holo_indices().into_iter().map(|j| n + j).collect();
                    ids.extend(m.anti_indices());
                    assert_eq!(m.conjugate().0, sort_sign(ids));
                }
            }
        }
    }

    #[test]
    fn volume_form_coefficient() {
        // dV = c_n dz_1..dz_n ∧ dz̄_1..dz̄_n for n ≤ 4.
        for n in 1..=4 {
            let dv = ConstForm::volume(n);
            assert_eq!(dv.terms().len(), 1);
            let (m, v) = dv.terms()[0];
            assert_eq!(m.bidegree(), Bidegree::new(n, n));
            assert!((v - c_const(n)).norm() < 1e-14, "n = {n}");
        }
    }

    #[test]
    fn c_const_values() {
        assert_eq!(c_const(0), c(1.0, 0.0));
        assert_eq!(c_const(1), c(0.0, 1.0));
        assert_eq!(c_const(2), c(1.0, 0.0));
        assert_eq!(c_const(3), c(0.0, 1.0));
    }

    #[test]
    fn subsets_are_lexicographic() {
        let s: Vec<Vec<usize>> = subsets(3, 2).into_iter().map(from_mask).collect();
        assert_eq!(s, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    }

    #[test]
    fn hodge_round_trip_and_constants() {
        let g = GridSpec::new(2, 4, 1.0).unwrap();
        for p in 0..=2 {
            let a = EForm::from_fn(g, Bidegree::new(2, p), 2, Valued::Bundle, |m, comp, pt| {
                c((m + 1) as f64 * 0.3 + pt as f64 * 0.01, comp as f64 - 0.5)
            })
            .unwrap();
            let gamma = hodge_star(&a).unwrap();
            let back = hodge_inverse(&gamma, p).unwrap();
            assert!(back.sub(&a).unwrap().max_abs() < 1e-14);
        }
        // n = 1, p = 1: dz ∧ dz̄ = -i ω.
        let k = hodge_constants(1, 1);
        assert!((k[0].2 - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn scalar_wedge_anticommutes_for_odd_degrees() {
        let g = GridSpec::new(2, 4, 1.0).unwrap();
        let a = EForm::from_fn(g, Bidegree::new(1, 0), 1, Valued::Scalar, |m, _, pt| c(m as f64 + 1.0, pt as f64)).unwrap();
        let b = EForm::from_fn(g, Bidegree::new(0, 1), 1, Valued::Scalar, |m, _, pt| c(pt as f64, 2.0 - m as f64)).unwrap();
        let ab = wedge(&a, &b).unwrap();
        let ba = wedge(&b, &a).unwrap();
        assert!(ab.add(&ba).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn bundle_wedge_bundle_is_rejected() {
        let g = GridSpec::new(1, 4, 1.0).unwrap();
        let a = EForm::bundle(g, Bidegree::new(1, 0), 1).unwrap();
        assert!(matches!(wedge(&a, &a), Err(Error::Unsupported(_))));
    }

    #[test]
    fn pairing_norm_matches_multi_index_sum() {
        let g = GridSpec::new(2, 4, 1.0).unwrap();
        let h = MetricField::from_fn(g, 2, |pt| {
            let t = pt as f64 * 0.1;
            vec![c(2.0 + t.sin(), 0.0), c(0.3, 0.2 * t.cos()), c(0.3, -0.2 * t.cos()), c(1.5, 0.0)]
        })
        .unwrap();
        for (p, q) in [(1, 0), (2, 0), (0, 1), (0, 2), (2, 1), (2, 2), (1, 1)] {
            let a = EForm::from_fn(g, Bidegree::new(p, q), 2, Valued::Bundle, |m, comp, pt| {
                c((pt + m) as f64 * 0.17 + comp as f64, (pt * (comp + 1)) as f64 * 0.05 - m as f64)
            })
            .unwrap();
            let direct = norm_sq(&a, &h).unwrap();
            let via = norm_sq_by_pairing(&a, &h).unwrap();
            for (x, y) in direct.values().iter().zip(via.values()) {
                assert!((x - y).norm() <= 1e-12 * x.norm().max(1.0), "({p},{q}): {x} vs {y}");
            }
        }
    }

    #[test]
    fn top_inner_product_matches_multi_index_sum() {
        let g = GridSpec::new(2, 4, 1.0).unwrap();
        let h = MetricField::identity(g, 1);
        for p in 0..=2 {
            let mk = |s: f64| {
                EForm::from_fn(g, Bidegree::new(2, p), 1, Valued::Bundle, move |m, _, pt| {
                    c((pt as f64 * s + m as f64).sin(), (pt as f64 * 0.3 * s).cos())
                })
                .unwrap()
            };
            let (a, b) = (mk(0.7), mk(1.3));
            let x = inner_product(&a, &b, &h).unwrap();
            let y = inner_product_top(&a, &b, &h).unwrap();
            assert!(x.sub(&y).unwrap().max_abs() < 1e-13);
        }
    }
}
