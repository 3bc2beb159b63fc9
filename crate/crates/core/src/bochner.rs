//! The `∂∂̄`-Bochner-Kodaira identity for `(n,p)`-forms and its consequences.
//!
//! For `α = γ ∧ ω_p` the pointwise identity reads, as densities against `dV`,
//!
//! ```text
//! i c_{n-p} ∂∂̄⟨γ,γ⟩ ∧ ω_{p-1}
//!   =  i c_{n-p} ⟨Θ∧γ, γ⟩ ∧ ω_{p-1}          (curvature)
//!    - i c_{n-p} ⟨∂̄D′γ, γ⟩ ∧ ω_{p-1}         (cross, first)
//!    + i c_{n-p} ⟨γ, ∂̄D′γ⟩ ∧ ω_{p-1}         (cross, second)
//!    + ‖∂̄*_h α‖² + ‖∂̄γ‖² - ‖∂̄α‖²
//! ```
//!
//! Each term is evaluated by its own code path; nothing is solved for.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exterior::{c_const, integrated_norm_sq, norm_sq, pairing, wedge_const, ConstForm, EForm, Valued};
use crate::grid::{integrate, ScalarField};
use crate::hermitian::{curvature_with, dbar, dbar_star_formal, dprime, dz_form, Connection, MetricField};
use crate::par;
use crate::positivity::{curvature_term, nakano_delta, PositivityOptions};

type C = Complex64;

const I: C = C::new(0.0, 1.0);

/// Names of the pointwise terms, in order.
pub const TERM_NAMES: [&str; 7] = [
    "lhs_ddbar",
    "curvature",
    "cross_first",
    "cross_second",
    "dbar_star_alpha",
    "dbar_gamma",
    "minus_dbar_alpha",
];

/// Pointwise densities of every term of the identity.
#[derive(Clone, Debug)]
pub struct BkTerms {
    /// Left-hand side followed by the six right-hand terms, see [`TERM_NAMES`].
    pub terms: Vec<ScalarField>,
}

impl BkTerms {
    pub fn lhs(&self) -> &ScalarField {
        &self.terms[0]
    }

    /// Sum of the six right-hand terms.
    pub fn rhs(&self) -> ScalarField {
        let mut acc = self.terms[1].clone();
        for t in &self.terms[2..] {
            acc = acc.add(t).expect("terms share a grid");
        }
        acc
    }
}

/// Residuals and term magnitudes of an identity check.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    pub n: usize,
    pub p: usize,
    pub samples: usize,
    /// `(name, max |term|)` over the evaluation region.
    pub term_max: Vec<(&'static str, f64)>,
    /// `(name, ∫ term dV)`.
    pub integrals: Vec<(&'static str, f64)>,
    /// `max |LHS - RHS| / max_i max |term_i|` over the evaluation region.
    pub residual: f64,
}

fn check_alpha(alpha: &EForm, h: &MetricField) -> Result<usize> {
    let n = alpha.grid().dim();
    let b = alpha.bidegree();
    if alpha.valued() != Valued::Bundle {
        return Err(Error::Unsupported("identity checks expect a bundle-valued form".into()));
    }
    if b.p != n || b.q == 0 {
        return Err(Error::BidegreeMismatch { expected: (n, b.q.max(1)), found: (b.p, b.q) });
    }
    if h.rank() != alpha.rank() {
        return Err(Error::RankMismatch { expected: alpha.rank(), found: h.rank() });
    }
    Ok(b.q)
}

fn density(top: &EForm, factor: C) -> Result<ScalarField> {
    Ok(top.volume_density()?.scale(factor))
}

fn real(f: ScalarField) -> ScalarField {
    f.map(|v| C::new(v.re, 0.0))
}

/// Evaluates all terms of the identity for an `(n,p)`-form `α`, `p ≥ 1`.
pub fn bk_terms(alpha: &EForm, h: &MetricField) -> Result<BkTerms> {
    let p = check_alpha(alpha, h)?;
    let n = alpha.grid().dim();
    let conn = Connection::new(h)?;
    let theta = curvature_with(&conn)?;
    let gamma = crate::exterior::hodge_star(alpha)?;
    let factor = I * c_const(n - p);
    let om = ConstForm::omega_power(n, p - 1);

    let gg = pairing(&gamma, &gamma, h)?;
    let ddbar = dz_form(&dbar(&gg)?)?;
    let lhs = density(&wedge_const(&ddbar, &om)?, factor)?;

    let curv = curvature_term(&theta, &gamma, h, p)?;

    let dpg = dprime(&gamma, &conn)?;
    let b = dbar(&dpg)?;
    let cross1 = density(&wedge_const(&pairing(&b, &gamma, h)?, &om)?, -factor)?;
    let cross2 = density(&wedge_const(&pairing(&gamma, &b, h)?, &om)?, factor)?;

    let star = real(norm_sq(&dbar_star_formal(alpha, &conn)?, h)?);
    let dg = real(norm_sq(&dbar(&gamma)?, h)?);
    let da = if p < n {
        real(norm_sq(&dbar(alpha)?, h)?).scale(C::new(-1.0, 0.0))
    } else {
        ScalarField::zeros(*alpha.grid())
    };
    Ok(BkTerms { terms: vec![lhs, curv, cross1, cross2, star, dg, da] })
}

fn max_on(values: &[C], region: Option<&[bool]>) -> f64 {
    par::max_by(values.len(), |i| if region.is_none_or(|m| m[i]) { values[i].norm() } else { 0.0 }).unwrap_or(0.0)
}

/// Pointwise identity check. The residual is measured on `region` (all
/// points when `None`).
pub fn bk_pointwise(alpha: &EForm, h: &MetricField, region: Option<&[bool]>) -> Result<IdentityReport> {
    let p = check_alpha(alpha, h)?;
    let terms = bk_terms(alpha, h)?;
    let rhs = terms.rhs();
    let diff = terms.lhs().sub(&rhs)?;
    let term_max: Vec<(&'static str, f64)> =
        TERM_NAMES.iter().zip(&terms.terms).map(|(name, t)| (*name, max_on(t.values(), region))).collect();
    let scale = term_max.iter().map(|t| t.1).fold(0.0, f64::max);
    let residual = if scale == 0.0 { 0.0 } else { max_on(diff.values(), region) / scale };
    let integrals = TERM_NAMES.iter().zip(&terms.terms).map(|(name, t)| (*name, integrate(t).re)).collect();
    let samples = region.map_or(alpha.grid().num_points(), |m| m.iter().filter(|&&b| b).count());
    Ok(IdentityReport { n: alpha.grid().dim(), p, samples, term_max, integrals, residual })
}

/// Support requirement for compactly supported data on the periodic box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportCheck {
    pub interior_fraction: f64,
    /// Largest tolerated `∫_{margin} ‖α‖² / ∫ ‖α‖²`.
    pub max_leakage: f64,
}

impl Default for SupportCheck {
    fn default() -> Self {
        Self { interior_fraction: crate::weights::DEFAULT_INTERIOR_FRACTION, max_leakage: 1e-10 }
    }
}

/// Fraction of `∫‖a‖²_h` carried by the seam margin.
pub fn margin_leakage(a: &EForm, h: &MetricField, interior_fraction: f64) -> Result<f64> {
    let dens = norm_sq(a, h)?;
    let inside = a.grid().interior_mask(interior_fraction);
    let v = dens.values();
    let total: f64 = par::sum_by(v.len(), |i| v[i].re);
    let outside: f64 = par::sum_by(v.len(), |i| if inside[i] { 0.0 } else { v[i].re });
    Ok(if total == 0.0 { 0.0 } else { outside / total })
}

fn require_support(a: &EForm, h: &MetricField, support: Option<SupportCheck>) -> Result<f64> {
    let Some(s) = support else { return Ok(0.0) };
    let leak = margin_leakage(a, h, s.interior_fraction)?;
    if leak > s.max_leakage {
        return Err(Error::Precondition { check: "support inside the interior region", value: leak });
    }
    Ok(leak)
}

/// The four integrals of the integrated identity and the two cross terms.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegratedReport {
    pub curvature: f64,
    pub dbar_gamma: f64,
    pub dbar_star_alpha: f64,
    pub dbar_alpha: f64,
    pub cross_first: f64,
    pub cross_second: f64,
    pub leakage: f64,
    /// `|curvature + dbar_gamma - dbar_star_alpha - dbar_alpha|` relative to
    /// the largest of the four.
    pub residual: f64,
    /// Largest deviation of a cross-term integral from `-∫‖∂̄*α‖²`, relative.
    pub cross_residual: f64,
}

/// Integrated identity for compactly supported (or fully periodic) data.
pub fn bk_integrated(alpha: &EForm, h: &MetricField, support: Option<SupportCheck>) -> Result<IntegratedReport> {
    check_alpha(alpha, h)?;
    let leakage = require_support(alpha, h, support)?;
    let terms = bk_terms(alpha, h)?;
    let int = |i: usize| integrate(&terms.terms[i]).re;
    let (curvature, cross_first, cross_second) = (int(1), int(2), int(3));
    let (dbar_star_alpha, dbar_gamma, dbar_alpha) = (int(4), int(5), -int(6));
    let scale = [curvature, dbar_gamma, dbar_star_alpha, dbar_alpha].iter().map(|v| v.abs()).fold(0.0, f64::max);
    let residual = if scale == 0.0 { 0.0 } else { (curvature + dbar_gamma - dbar_star_alpha - dbar_alpha).abs() / scale };
    let cross_scale = dbar_star_alpha.abs().max(f64::MIN_POSITIVE);
    let cross_residual = (cross_first + dbar_star_alpha).abs().max((cross_second + dbar_star_alpha).abs()) / cross_scale;
    Ok(IntegratedReport {
        curvature,
        dbar_gamma,
        dbar_star_alpha,
        dbar_alpha,
        cross_first,
        cross_second,
        leakage,
        residual,
        cross_residual,
    })
}

/// Max relative residual of `i c_{n-1} (-1)^n ⟨ξ,ξ⟩ = (‖ξ‖² - ‖ξ∧ω‖²) dV`
/// for an `(n-1,1)`-form `ξ`.
pub fn xi_omega_identity(xi: &EForm, h: &MetricField) -> Result<f64> {
    let n = xi.grid().dim();
    let b = xi.bidegree();
    if b.p + 1 != n || b.q != 1 {
        return Err(Error::BidegreeMismatch { expected: (n - 1, 1), found: (b.p, b.q) });
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let lhs = pairing(xi, xi, h)?.volume_density()?.scale(I * c_const(n - 1) * sign);
    let mut rhs = norm_sq(xi, h)?;
    if n > 1 {
        rhs = rhs.sub(&norm_sq(&wedge_const(xi, &ConstForm::omega(n))?, h)?)?;
    }
    let len = lhs.values().len();
    let diff = par::max_by(len, |i| (lhs.values()[i] - rhs.values()[i]).norm()).unwrap_or(0.0);
    let scale = par::max_by(len, |i| lhs.values()[i].norm().max(rhs.values()[i].norm())).unwrap_or(0.0);
    Ok(if scale == 0.0 { 0.0 } else { diff / scale })
}

/// Both sides of `p δ ∫‖α‖² ≤ ∫(‖∂̄*_h α‖² + ‖∂̄α‖²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub slack: f64,
    /// Nakano constant certified on the interior.
    pub certified_delta: f64,
    pub leakage: f64,
}

/// Basic estimate for a compactly supported `(n,p)`-form. `delta` must not
/// exceed the Nakano constant certified on the interior region.
pub fn basic_estimate(alpha: &EForm, h: &MetricField, delta: f64, support: SupportCheck) -> Result<EstimateReport> {
    let p = check_alpha(alpha, h)?;
    let n = alpha.grid().dim();
    let leakage = require_support(alpha, h, Some(support))?;
    let conn = Connection::new(h)?;
    let theta = curvature_with(&conn)?;
    let opts = PositivityOptions::on_region(alpha.grid().interior_mask(support.interior_fraction));
    let certified = nakano_delta(h, &theta, &opts)?;
    if delta > certified {
        return Err(Error::Precondition { check: "delta <= certified Nakano constant", value: delta - certified });
    }
    let lhs = p as f64 * delta * integrated_norm_sq(alpha, h)?;
    let star = integrated_norm_sq(&dbar_star_formal(alpha, &conn)?, h)?;
    let da = if p < n { integrated_norm_sq(&dbar(alpha)?, h)? } else { 0.0 };
    let rhs = star + da;
    Ok(EstimateReport { lhs, rhs, slack: rhs - lhs, certified_delta: certified, leakage })
}
