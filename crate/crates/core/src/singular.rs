//! Singular hermitian metrics on the plane, their mollification, and the
//! regularized `∂̄`-solve (`n = 1`).
//!
//! A positively curved singular metric `h` is regularized through its dual
//! `h*`, whose section norms are plurisubharmonic: `h*_ν = h* ∗ χ_{ε_ν}` is
//! smooth, decreases as `ε_ν ↓ 0`, and `h_ν = dual(h*_ν)` increases to `h`.
//!
//! Catalog metrics use the periodic coordinate `q = z - z₀` of
//! [`apodized_coordinate`] and `ρ = |q|² + B`, where the seam indicator `B`
//! vanishes near `z₀` and keeps `ρ` away from zero on the seam.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exterior::EForm;
use crate::grid::{convolve_raw, validate_kernel, GridSpec, ScalarField};
use crate::hermitian::{curvature, dual_metric, MetricField};
use crate::hormander::{solve_min_norm, HilbertStructure, SolveOptions, SolveReport};
use crate::linalg;
use crate::par;
use crate::positivity::{nakano_delta, PositivityOptions};
use crate::weights::{apodized_coordinate, gaussian_potential, seam_indicator, Profile};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Names accepted by [`singular_catalog`].
pub const CATALOG: [&str; 4] = ["log-pole", "log-zero", "two-pole", "dual-negative"];

/// Which side of the metric is convolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Mollify `h*` and dualize back.
    Dual,
    /// Mollify `h` itself.
    Primal,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Dual => "dual",
            Side::Primal => "primal",
        }
    }
}

/// Parameters shared by the catalog entries.
#[derive(Clone, Debug)]
pub struct CatalogParams {
    /// Exponent `a` of the singular factor.
    pub exponent: f64,
    /// Strength `c` of the Gaussian factor `e^{-c|z|²}`.
    pub strength: f64,
    /// Singular points; the single-point entries use the first one.
    pub poles: Vec<C>,
    /// Off-diagonal coupling of the rank-two dual construction.
    pub coupling: f64,
    /// Weight of the seam term in the rank-two dual construction.
    pub seam_weight: f64,
    /// Relative `det` threshold of the mask.
    pub mask_threshold: f64,
}

impl Default for CatalogParams {
    fn default() -> Self {
        // Poles sit on grid points for N ∈ {16, 32, 64} at L = 6.
        Self {
            exponent: 0.5,
            strength: 1.0,
            poles: vec![C::new(0.375, 0.0), C::new(-0.375, 0.0)],
            coupling: 0.5,
            seam_weight: 1.0,
            mask_threshold: 1e-6,
        }
    }
}

/// A catalog metric with its singular set and the data that is mollified.
#[derive(Clone, Debug)]
pub struct SingularMetric {
    pub name: String,
    /// The metric `h`, masked on its singular set.
    pub metric: MetricField,
    /// Finite positive semidefinite samples of the side that is mollified.
    pub regular: Vec<C>,
    pub side: Side,
    pub poles: Vec<C>,
    /// One-line description of the curvature sign.
    pub curvature: &'static str,
}

impl SingularMetric {
    /// Largest kernel radius for which every point of the floor region
    /// `|x| ≤ half_width` keeps its kernel support inside the plateaus of
    /// both the Gaussian factor and the pole coordinates, taken to end at
    /// `a - 3σ`.
    pub fn plateau_margin(&self, half_width: f64) -> f64 {
        let profile = Profile::standard(self.grid().side());
        let usable = profile.plateau() - 3.0 * profile.smoothing();
        let offset = self.poles.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
        usable - half_width - offset
    }

    pub fn grid(&self) -> &GridSpec {
        self.metric.grid()
    }

    pub fn rank(&self) -> usize {
        self.metric.rank()
    }

    /// The mollified metric `h_ε` (dualized back when the dual side is
    /// mollified).
    pub fn regularize(&self, eps: f64) -> Result<MetricField> {
        let smooth = mollify_raw(self.grid(), self.rank(), &self.regular, eps)?;
        let m = MetricField::new(*self.grid(), self.rank(), smooth, None)?;
        match self.side {
            Side::Dual => dual_metric(&m),
            Side::Primal => Ok(m),
        }
    }
}

/// `ρ = |q|² + B` for the pole `z0`.
fn rho(grid: &GridSpec, profile: &Profile, z0: C) -> Vec<f64> {
    let q = apodized_coordinate(grid, profile, 0, z0);
    let b = seam_indicator(grid, profile, &[z0]);
    q.iter().zip(&b).map(|(q, b)| q.norm_sqr() + b).collect()
}

/// Mask where `det(data / w)` drops below `threshold · median`; `w` is the
/// smooth Gaussian factor, divided out so the mask sees the singular part.
fn det_mask(grid: &GridSpec, rank: usize, data: &[C], w: &[f64], threshold: f64) -> Vec<bool> {
    let rr = rank * rank;
    let dets: Vec<f64> = (0..grid.num_points())
        .map(|pt| linalg::determinant(&data[pt * rr..(pt + 1) * rr], rank).re / w[pt].powi(rank as i32))
        .collect();
    let mut sorted = dets.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    dets.iter().map(|&d| d < threshold * median).collect()
}

fn masked_metric(grid: &GridSpec, rank: usize, mut data: Vec<C>, mask: Vec<bool>) -> Result<MetricField> {
    let rr = rank * rank;
    for (pt, &m) in mask.iter().enumerate() {
        if m {
            data[pt * rr..(pt + 1) * rr].fill(ZERO);
        }
    }
    MetricField::new(*grid, rank, data, Some(mask))
}

/// Dual data given, `h = dual` with the mask of the dual's zeros.
fn from_dual(grid: &GridSpec, rank: usize, dual: Vec<C>, w: &[f64], threshold: f64) -> Result<(MetricField, Vec<C>)> {
    let mask = det_mask(grid, rank, &dual, w, threshold);
    let rr = rank * rank;
    let primal: Vec<C> = (0..grid.num_points())
        .flat_map(|pt| {
            if mask[pt] {
                vec![ZERO; rr]
            } else {
                let inv = linalg::inverse(&dual[pt * rr..(pt + 1) * rr], rank).unwrap_or_else(|| vec![ZERO; rr]);
                linalg::transpose(&inv, rank)
            }
        })
        .collect();
    Ok((masked_metric(grid, rank, primal, mask)?, dual))
}

/// Built-in singular metrics on a one-dimensional grid:
///
/// * `log-pole` (`r = 1`): `h = ρ^{-a} e^{-φ}`, infinite at `z₀`; curvature
///   `≥ c` off `z₀` plus `+a·[z₀]`. Regularized on the dual `ρ^a e^{φ}`.
/// * `log-zero` (`r = 1`): `h = ρ^{a} e^{-φ}`, vanishing at `z₀`; curvature
///   `c - a·[z₀]`, negative at the pole. Regularized on the primal side.
/// * `two-pole` (`r = 2`): `diag(ρ₁^{-a}, ρ₂^{-a}) e^{-φ}`, masked at both
///   poles; positive.
/// * `dual-negative` (`r = 2`): `h = dual(g)` for the Griffiths-negative
///   `g = e^{φ}(V̄V^T + ηB·I)`, `V = [[q₁, κ], [0, q₂]]`; `det g` vanishes at
///   both poles and `h` has curvature `c·I` on the plateau.
pub fn singular_catalog(name: &str, grid: &GridSpec, params: &CatalogParams) -> Result<SingularMetric> {
    if grid.dim() != 1 {
        return Err(Error::Unsupported("the singular catalog lives in dimension 1".into()));
    }
    let profile = Profile::standard(grid.side());
    let phi: Vec<f64> = gaussian_potential(grid, &profile, params.strength);
    let ephi: Vec<f64> = phi.iter().map(|p| p.exp()).collect();
    let a = params.exponent;
    let pole = |i: usize| -> Result<C> {
        params.poles.get(i).copied().ok_or_else(|| Error::Config { field: "poles".into(), message: format!("needs at least {} poles", i + 1) })
    };
    let real = |v: f64| C::new(v, 0.0);
    let (metric, regular, side, poles, sign) = match name {
        "log-pole" => {
            let z0 = pole(0)?;
            let r0 = rho(grid, &profile, z0);
            let dual: Vec<C> = r0.iter().zip(&phi).map(|(r, p)| real(r.powf(a) * p.exp())).collect();
            let (h, g) = from_dual(grid, 1, dual, &ephi, params.mask_threshold)?;
            (h, g, Side::Dual, vec![z0], "positive: c off the pole, +a at the pole")
        }
        "log-zero" => {
            let z0 = pole(0)?;
            let r0 = rho(grid, &profile, z0);
            let data: Vec<C> = r0.iter().zip(&phi).map(|(r, p)| real(r.powf(a) * (-p).exp())).collect();
            let emphi: Vec<f64> = ephi.iter().map(|e| 1.0 / e).collect();
            let mask = det_mask(grid, 1, &data, &emphi, params.mask_threshold);
            let h = masked_metric(grid, 1, data.clone(), mask)?;
            (h, data, Side::Primal, vec![z0], "mixed: c off the zero, -a at the zero")
        }
        "two-pole" => {
            let (z1, z2) = (pole(0)?, pole(1)?);
            let (r1, r2) = (rho(grid, &profile, z1), rho(grid, &profile, z2));
            let dual: Vec<C> = (0..grid.num_points())
                .flat_map(|pt| {
                    let e = phi[pt].exp();
                    [real(r1[pt].powf(a) * e), ZERO, ZERO, real(r2[pt].powf(a) * e)]
                })
                .collect();
            let (h, g) = from_dual(grid, 2, dual, &ephi, params.mask_threshold)?;
            (h, g, Side::Dual, vec![z1, z2], "positive: c off the poles, +a at each pole")
        }
        "dual-negative" => {
            let (z1, z2) = (pole(0)?, pole(1)?);
            let q1 = apodized_coordinate(grid, &profile, 0, z1);
            let q2 = apodized_coordinate(grid, &profile, 0, z2);
            let b1 = seam_indicator(grid, &profile, &[z1]);
            let b2 = seam_indicator(grid, &profile, &[z2]);
            let (k, eta) = (params.coupling, params.seam_weight);
            let dual: Vec<C> = (0..grid.num_points())
                .flat_map(|pt| {
                    let v = [q1[pt], real(k), ZERO, q2[pt]];
                    // conj(V) V^T
                    let mut g = [ZERO; 4];
                    for i in 0..2 {
                        for j in 0..2 {
                            g[i * 2 + j] = (0..2).map(|l| v[i * 2 + l].conj() * v[j * 2 + l]).sum();
                        }
                    }
                    let seam = eta * (b1[pt] + b2[pt]);
                    g[0] += seam;
                    g[3] += seam;
                    let e = phi[pt].exp();
                    g.map(|x| x * e)
                })
                .collect();
            let (h, g) = from_dual(grid, 2, dual, &ephi, params.mask_threshold)?;
            (h, g, Side::Dual, vec![z1, z2], "Griffiths-positive: dual of a Griffiths-negative metric")
        }
        other => return Err(Error::UnknownCatalog(other.to_string())),
    };
    Ok(SingularMetric { name: name.to_string(), metric, regular, side, poles, curvature: sign })
}

/// Radii `ε_ν = ε₀/ν`, `ν = 1..=ν_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierSchedule {
    pub eps0: f64,
    pub nu_max: usize,
}

impl MollifierSchedule {
    pub fn new(eps0: f64, nu_max: usize) -> Result<Self> {
        if !(eps0 > 0.0) || nu_max == 0 {
            return Err(Error::Config { field: "schedule".into(), message: format!("eps0 = {eps0}, nu_max = {nu_max}") });
        }
        Ok(Self { eps0, nu_max })
    }

    /// `ε₀ = 3 ν_max · dx`, so the finest kernel spans three cells.
    pub fn standard(grid: &GridSpec, nu_max: usize) -> Self {
        Self { eps0: 3.0 * nu_max as f64 * grid.spacing(), nu_max }
    }

    pub fn eps(&self, nu: usize) -> f64 {
        self.eps0 / nu as f64
    }

    /// Smallest `ν` with `ε_ν ≤ margin`.
    pub fn nu_min(&self, margin: f64) -> usize {
        (1..=self.nu_max).find(|&nu| self.eps(nu) <= margin + 1e-12).unwrap_or(self.nu_max)
    }
}

/// `χ_ε(x) = C exp(-1/(1 - |x/ε|²))` on the periodic grid, centred at the
/// origin sample, with unit discrete mass.
pub fn kernel(grid: &GridSpec, eps: f64) -> Result<ScalarField> {
    if !(eps >= 2.0 * grid.spacing()) {
        return Err(Error::UnderResolvedKernel { radius: eps, spacing: grid.spacing() });
    }
    let n = grid.samples();
    let dx = grid.spacing();
    let vals: Vec<f64> = (0..grid.num_points())
        .map(|pt| {
            let r2: f64 = (0..grid.real_axes())
                .map(|a| {
                    let m = grid.axis_index(pt, a);
                    let d = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 } * dx;
                    d * d
                })
                .sum();
            let s = r2 / (eps * eps);
            if s < 1.0 { (-1.0 / (1.0 - s)).exp() } else { 0.0 }
        })
        .collect();
    let mass: f64 = vals.iter().sum::<f64>() * grid.cell_volume();
    let k = ScalarField::from_real(*grid, &vals.iter().map(|v| v / mass).collect::<Vec<_>>())?;
    validate_kernel(&k)?;
    Ok(k)
}

/// Entrywise periodic convolution of point-major `r×r` matrix data.
pub fn mollify_raw(grid: &GridSpec, rank: usize, data: &[C], eps: f64) -> Result<Vec<C>> {
    let k = kernel(grid, eps)?;
    let rr = rank * rank;
    let npts = grid.num_points();
    let mut out = vec![ZERO; data.len()];
    for e in 0..rr {
        let entry: Vec<C> = (0..npts).map(|pt| data[pt * rr + e]).collect();
        for (pt, v) in convolve_raw(grid, &entry, k.values()).into_iter().enumerate() {
            out[pt * rr + e] = v;
        }
    }
    // Restore exact hermitian symmetry lost to FFT roundoff.
    for m in out.chunks_mut(rr) {
        let sym = linalg::symmetrize(m, rank);
        m.copy_from_slice(&sym);
    }
    Ok(out)
}

/// `h ∗ χ_ε` entrywise; masked points enter with their stored zero.
pub fn mollify(h: &MetricField, eps: f64) -> Result<MetricField> {
    let data = mollify_raw(h.grid(), h.rank(), h.data(), eps)?;
    MetricField::new(*h.grid(), h.rank(), data, None)
}

/// Worst ordering violations between consecutive mollifications.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneReport {
    /// `(ν, defect)` for the pair `(ν, ν+1)`.
    pub pairs: Vec<(usize, f64)>,
    pub max_defect: f64,
}

/// Checks `h*_{ε_{ν+1}} ⪯ h*_{ε_ν}` (dual side) or `h_{ε_ν} ⪯ h_{ε_{ν+1}}`
/// (primal side) at every point of `region`, for `ν ≥ nu_start`. The defect
/// of a pair is `max(0, -λ_min)` of the expected nonnegative difference,
/// relative to the largest entry of the coarser data on `region`.
pub fn check_monotone(sm: &SingularMetric, schedule: &MollifierSchedule, nu_start: usize, region: &[bool]) -> Result<MonotoneReport> {
    let (grid, r) = (*sm.grid(), sm.rank());
    let rr = r * r;
    let nus: Vec<usize> = (nu_start.max(1)..=schedule.nu_max).collect();
    let fields: Vec<Vec<C>> = nus.iter().map(|&nu| mollify_raw(&grid, r, &sm.regular, schedule.eps(nu))).collect::<Result<_>>()?;
    let mut pairs = Vec::new();
    for w in 0..fields.len().saturating_sub(1) {
        let (coarse, fine) = (&fields[w], &fields[w + 1]);
        let scale = par::max_by(grid.num_points(), |pt| {
            if region[pt] { coarse[pt * rr..(pt + 1) * rr].iter().map(|v| v.norm()).fold(0.0, f64::max) } else { 0.0 }
        })
        .unwrap_or(0.0);
        let worst = par::max_by(grid.num_points(), |pt| {
            if !region[pt] {
                return 0.0;
            }
            let diff: Vec<C> = (0..rr)
                .map(|e| match sm.side {
                    Side::Dual => coarse[pt * rr + e] - fine[pt * rr + e],
                    Side::Primal => fine[pt * rr + e] - coarse[pt * rr + e],
                })
                .collect();
            let lam = linalg::hermitian_eigenvalues(&linalg::symmetrize(&diff, r), r)[0];
            (-lam).max(0.0)
        })
        .unwrap_or(0.0);
        pairs.push((nus[w], if scale > 0.0 { worst / scale } else { 0.0 }));
    }
    let max_defect = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(MonotoneReport { pairs, max_defect })
}

/// Smallest relative five-point Laplacian `Δ_h‖u‖²_g / max‖u‖²_g` on
/// `region` for a constant section `u`. The stencil commutes with discrete
/// convolution, so it stays nonnegative under mollification wherever the
/// unmollified norm is discretely subharmonic.
pub fn section_norm_laplacian(grid: &GridSpec, rank: usize, data: &[C], u: &[C], region: &[bool]) -> Result<f64> {
    let rr = rank * rank;
    let s: Vec<f64> = (0..grid.num_points())
        .map(|pt| {
            let gu = linalg::matvec(&data[pt * rr..(pt + 1) * rr], u, rank);
            u.iter().zip(&gu).map(|(a, b)| a.conj() * b).sum::<C>().re
        })
        .collect();
    let scale = s.iter().zip(region).filter(|(_, &m)| m).map(|(v, _)| v.abs()).fold(0.0, f64::max);
    let n = grid.samples();
    let dx2 = grid.spacing() * grid.spacing();
    let lap = |pt: usize| -> f64 {
        (0..grid.real_axes())
            .map(|a| {
                let (st, m) = (grid.stride(a), grid.axis_index(pt, a));
                let up = pt - m * st + ((m + 1) % n) * st;
                let down = pt - m * st + ((m + n - 1) % n) * st;
                (s[up] + s[down] - 2.0 * s[pt]) / dx2
            })
            .sum()
    };
    let worst = (0..grid.num_points()).filter(|&pt| region[pt]).map(lap).fold(f64::INFINITY, f64::min);
    Ok(if scale > 0.0 { worst / scale } else { 0.0 })
}

#[derive(Clone, Debug)]
pub struct RegularizeOptions {
    /// Interior fraction used for the seam-leakage diagnostic of each solve.
    pub interior_fraction: f64,
    /// Interior fraction of the region where the curvature floor and the
    /// ordering are measured.
    pub floor_fraction: f64,
    /// Tolerated relative hermitian defect of the mollified curvature, which
    /// carries the spectral error of resolving `ε_ν` with a few cells.
    pub symmetry_tol: f64,
    /// Largest acceptable measured `ε` of the floor `1 - ε`.
    pub max_eps: f64,
    /// Relative tolerance of the final bound.
    pub tol: f64,
    pub monotone_tol: f64,
    pub solve: SolveOptions,
}

impl Default for RegularizeOptions {
    fn default() -> Self {
        Self {
            interior_fraction: crate::weights::DEFAULT_INTERIOR_FRACTION,
            floor_fraction: 0.3,
            symmetry_tol: 1e-2,
            max_eps: 0.1,
            tol: 0.05,
            monotone_tol: 1e-10,
            solve: SolveOptions::default(),
        }
    }
}

/// Per-`ν` data of the regularized solve.
#[derive(Clone, Debug, PartialEq)]
pub struct NuRecord {
    pub nu: usize,
    pub eps: f64,
    /// Interior Nakano floor of `h_ν`.
    pub delta: f64,
    pub solve: SolveReport,
    /// `‖u_ν - u_{ν-1}‖_{h_{ν_min}}`, absent for the first record.
    pub cauchy: Option<f64>,
}

/// One instance `‖u_ν‖²_{h_{ν₀}} ≤ (1/(1-ε))‖f‖²_h` of the uniform bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformBound {
    pub nu0: usize,
    pub nu: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularizationReport {
    pub nu_min: usize,
    pub records: Vec<NuRecord>,
    pub monotone: MonotoneReport,
    /// Measured `ε = max(0, 1 - min_ν δ_ν)`.
    pub eps: f64,
    /// `ν` attaining the minimum floor.
    pub worst_nu: usize,
    pub uniform: Vec<UniformBound>,
    /// `‖f‖²_h` off the mask.
    pub f_norm_sq: f64,
    /// `‖u_{ν_max}‖²_h` off the mask.
    pub final_norm_sq: f64,
}

impl RegularizationReport {
    pub fn floor_pass(&self, max_eps: f64) -> bool {
        self.eps <= max_eps
    }

    pub fn monotone_pass(&self, tol: f64) -> bool {
        self.monotone.max_defect <= tol
    }

    pub fn uniform_pass(&self) -> bool {
        self.uniform.iter().all(|b| b.lhs <= b.rhs)
    }

    pub fn final_ratio(&self) -> f64 {
        if self.f_norm_sq == 0.0 { 0.0 } else { self.final_norm_sq / self.f_norm_sq }
    }

    pub fn final_pass(&self, tol: f64) -> bool {
        self.final_ratio() <= 1.0 + tol
    }

    /// Cauchy defects strictly decrease over the last three `ν`.
    pub fn cauchy_decreasing(&self) -> bool {
        let d: Vec<f64> = self.records.iter().filter_map(|r| r.cauchy).collect();
        d.len() >= 3 && d[d.len() - 3..].windows(2).all(|w| w[1] < w[0] || w[0] == 0.0)
    }
}

/// Runs the schedule from `ν_min` and collects every diagnostic without
/// judging them; see [`regularized_solve`] for the checked variant.
pub fn regularize(
    f: &EForm,
    sm: &SingularMetric,
    schedule: &MollifierSchedule,
    opts: &RegularizeOptions,
) -> Result<(EForm, RegularizationReport)> {
    let grid = *sm.grid();
    if grid.dim() != 1 {
        return Err(Error::Unsupported("the regularized solve is implemented for n = 1".into()));
    }
    let region = grid.interior_mask(opts.floor_fraction);
    let nu_min = schedule.nu_min(sm.plateau_margin(0.5 * grid.side() * opts.floor_fraction));
    let monotone = check_monotone(sm, schedule, nu_min, &region)?;
    let pos = PositivityOptions { symmetry_tol: opts.symmetry_tol, ..PositivityOptions::on_region(region.clone()) };
    let mut metrics = Vec::new();
    let mut records: Vec<NuRecord> = Vec::new();
    let mut sols: Vec<EForm> = Vec::new();
    for nu in nu_min..=schedule.nu_max {
        let eps = schedule.eps(nu);
        let h = sm.regularize(eps)?;
        let delta = nakano_delta(&h, &curvature(&h)?, &pos)?;
        let sopts = SolveOptions { delta: Some(delta), interior_fraction: opts.interior_fraction, ..opts.solve.clone() };
        let (u, solve) = solve_min_norm(f, &h, &sopts)?;
        metrics.push(h);
        sols.push(u);
        records.push(NuRecord { nu, eps, delta, solve, cauchy: None });
    }
    let base = HilbertStructure::new(metrics[0].clone(), sols[0].bidegree())?;
    for i in 1..sols.len() {
        records[i].cauchy = Some(base.norm_sq(&sols[i].sub(&sols[i - 1])?)?.sqrt());
    }
    let (worst_i, min_delta) = records
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.delta))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let eps = (1.0 - min_delta).max(0.0);
    let h_space = HilbertStructure::new(sm.metric.clone(), f.bidegree())?;
    let f_norm_sq = h_space.norm_sq(f)?;
    let rhs = if eps < 1.0 { f_norm_sq / (1.0 - eps) } else { f64::INFINITY };
    let mut uniform = Vec::new();
    for (i0, h0) in metrics.iter().enumerate() {
        let space = HilbertStructure::new(h0.clone(), sols[0].bidegree())?;
        for (i, u) in sols.iter().enumerate().skip(i0) {
            uniform.push(UniformBound { nu0: records[i0].nu, nu: records[i].nu, lhs: space.norm_sq(u)?, rhs });
        }
    }
    let u = sols.pop().expect("schedule has at least one nu");
    let final_norm_sq = HilbertStructure::new(sm.metric.clone(), u.bidegree())?.norm_sq(&u)?;
    let report = RegularizationReport {
        nu_min,
        worst_nu: records[worst_i].nu,
        records,
        monotone,
        eps,
        uniform,
        f_norm_sq,
        final_norm_sq,
    };
    Ok((u, report))
}

/// [`regularize`] with the curvature floor enforced: fails with
/// [`Error::CurvatureFloor`] when some `δ_ν < 1 - max_eps`.
pub fn regularized_solve(
    f: &EForm,
    sm: &SingularMetric,
    schedule: &MollifierSchedule,
    opts: &RegularizeOptions,
) -> Result<(EForm, RegularizationReport)> {
    let (u, report) = regularize(f, sm, schedule, opts)?;
    if !report.floor_pass(opts.max_eps) {
        return Err(Error::CurvatureFloor { nu: report.worst_nu, delta: 1.0 - report.eps, required: 1.0 - opts.max_eps });
    }
    Ok((u, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::Bidegree;
    use crate::random;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(1, n, 6.0).unwrap()
    }

    #[test]
    fn zero_exponent_is_smooth() {
        let p = CatalogParams { exponent: 0.0, ..Default::default() };
        let sm = singular_catalog("log-pole", &grid(32), &p).unwrap();
        assert!(sm.metric.mask().is_none());
    }

    #[test]
    fn half_exponent_masks_the_pole() {
        let g = grid(32);
        let sm = singular_catalog("log-pole", &g, &CatalogParams::default()).unwrap();
        assert_eq!(sm.metric.masked_points(), vec![g.nearest_point(&[C::new(0.375, 0.0)])]);
    }

    #[test]
    fn two_pole_masks_both_points() {
        let g = grid(32);
        let p = CatalogParams::default();
        for name in ["two-pole", "dual-negative"] {
            let sm = singular_catalog(name, &g, &p).unwrap();
            let mut want: Vec<usize> = p.poles.iter().map(|z| g.nearest_point(&[*z])).collect();
            want.sort();
            assert_eq!(sm.metric.masked_points(), want, "{name}");
        }
    }

    #[test]
    fn unknown_name_is_rejected() {
        assert!(matches!(singular_catalog("nope", &grid(16), &CatalogParams::default()), Err(Error::UnknownCatalog(_))));
    }

    #[test]
    fn kernel_has_unit_mass_and_support() {
        let g = grid(64);
        let eps = 5.0 * g.spacing();
        let k = kernel(&g, eps).unwrap();
        let mass: f64 = k.values().iter().map(|v| v.re).sum::<f64>() * g.cell_volume();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(k.values().iter().all(|v| v.re >= 0.0));
        for pt in 0..g.num_points() {
            let d: f64 = (0..2)
                .map(|a| {
                    let m = g.axis_index(pt, a) as f64;
                    let m = if m > 32.0 { m - 64.0 } else { m };
                    (m * g.spacing()).powi(2)
                })
                .sum::<f64>()
                .sqrt();
            if d >= eps {
                assert_eq!(k.values()[pt].re, 0.0);
            }
        }
        assert!(matches!(kernel(&g, g.spacing()), Err(Error::UnderResolvedKernel { .. })));
    }

    #[test]
    fn convolution_of_quadratic_adds_constant() {
        // (|z|² ∗ χ)(z) = |z|² + ∫|y|²χ(y) for a radial kernel.
        let g = grid(64);
        let eps = 0.6;
        let k = kernel(&g, eps).unwrap();
        let second: f64 = (0..g.num_points())
            .map(|pt| {
                let d2: f64 = (0..2)
                    .map(|a| {
                        let m = g.axis_index(pt, a) as f64;
                        let m = if m > 32.0 { m - 64.0 } else { m };
                        (m * g.spacing()).powi(2)
                    })
                    .sum();
                d2 * k.values()[pt].re
            })
            .sum::<f64>()
            * g.cell_volume();
        let data: Vec<C> = (0..g.num_points()).map(|pt| C::new(g.z(pt, 0).norm_sqr(), 0.0)).collect();
        let out = mollify_raw(&g, 1, &data, eps).unwrap();
        let inner = g.interior_mask(0.5);
        for pt in (0..g.num_points()).filter(|&pt| inner[pt]) {
            let d = out[pt].re - data[pt].re - second;
            assert!(d.abs() < 1e-11, "{d}");
        }
    }

    #[test]
    fn mollified_smooth_metric_converges_quadratically() {
        let g = grid(64);
        let p = Profile::standard(6.0);
        let h = crate::weights::gaussian_metric(&g, &p, 1.0, 1).unwrap();
        let err = |eps: f64| {
            let m = mollify(&h, eps).unwrap();
            m.data().iter().zip(h.data()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.8), err(0.4));
        assert!(e2 < e1 / 3.0, "{e1} {e2}");
    }

    #[test]
    fn mollification_clears_the_mask_and_stays_positive() {
        let g = grid(32);
        for name in ["log-pole", "two-pole", "dual-negative"] {
            let sm = singular_catalog(name, &g, &CatalogParams::default()).unwrap();
            let h = sm.regularize(3.0 * g.spacing()).unwrap();
            assert!(h.mask().is_none());
            let r = h.rank();
            for pt in 0..g.num_points() {
                assert!(linalg::hermitian_eigenvalues(h.at(pt), r)[0] > 0.0);
            }
        }
    }

    #[test]
    fn dual_side_is_monotone_and_subharmonic() {
        let g = grid(32);
        let region = g.interior_mask(0.3);
        let sched = MollifierSchedule::standard(&g, 8);
        for name in ["log-pole", "two-pole", "dual-negative"] {
            let sm = singular_catalog(name, &g, &CatalogParams::default()).unwrap();
            let nu_min = sched.nu_min(sm.plateau_margin(0.9));
            let rep = check_monotone(&sm, &sched, nu_min, &region).unwrap();
            assert!(rep.max_defect <= 1e-10, "{name}: {rep:?}");
            let smooth = mollify_raw(&g, sm.rank(), &sm.regular, sched.eps(nu_min)).unwrap();
            let sections: Vec<Vec<C>> = if sm.rank() == 1 {
                vec![vec![C::new(1.0, 0.0)]]
            } else {
                vec![vec![C::new(1.0, 0.0), ZERO], vec![ZERO, C::new(1.0, 0.0)], vec![C::new(1.0, 0.0), C::new(0.0, 1.0)]]
            };
            for u in sections {
                let lap = section_norm_laplacian(&g, sm.rank(), &smooth, &u, &region).unwrap();
                assert!(lap >= -1e-8, "{name}: {lap}");
            }
        }
    }

    #[test]
    fn zero_source_gives_zero_solution() {
        let g = grid(16);
        let sm = singular_catalog("log-pole", &g, &CatalogParams::default()).unwrap();
        let f = EForm::bundle(g, Bidegree::new(1, 1), 1).unwrap();
        let sched = MollifierSchedule::standard(&g, 4);
        let (u, rep) = regularize(&f, &sm, &sched, &RegularizeOptions::default()).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert!(rep.uniform_pass());
        assert_eq!(rep.final_ratio(), 0.0);
    }

    #[test]
    fn log_pole_pipeline_holds_the_bound() {
        let g = grid(64);
        let sm = singular_catalog("log-pole", &g, &CatalogParams::default()).unwrap();
        let mut rng = random::rng(9);
        let f = random::zero_mean_source_at(&mut rng, g, 1, vec![C::new(0.0, -0.5)], 0.3).unwrap();
        let sched = MollifierSchedule::standard(&g, 8);
        let opts = RegularizeOptions::default();
        let (_, rep) = regularized_solve(&f, &sm, &sched, &opts).unwrap();
        assert!(rep.monotone_pass(opts.monotone_tol), "{:?}", rep.monotone);
        assert!(rep.uniform_pass());
        assert!(rep.final_pass(opts.tol), "{}", rep.final_ratio());
        assert!(rep.cauchy_decreasing());
    }

    #[test]
    fn smooth_weight_approaches_the_direct_solve() {
        // With an empty mask the finest-ν solution differs from the direct
        // solve by the O(ε²) mollification error, so the gap must shrink
        // roughly fourfold when ε halves.
        let g = grid(64);
        let params = CatalogParams { exponent: 0.0, ..CatalogParams::default() };
        let sm = singular_catalog("log-pole", &g, &params).unwrap();
        let mut rng = random::rng(9);
        let f = random::zero_mean_source_at(&mut rng, g, 1, vec![C::new(0.0, -0.5)], 0.3).unwrap();
        let space = HilbertStructure::new(sm.metric.clone(), Bidegree::new(1, 0)).unwrap();
        let (direct, _) = solve_min_norm(&f, &sm.metric, &SolveOptions::default()).unwrap();
        let gap = |nu_max: usize| {
            let sched = MollifierSchedule::new(1.6, nu_max).unwrap();
            let (u, _) = regularize(&f, &sm, &sched, &RegularizeOptions::default()).unwrap();
            (space.norm_sq(&u.sub(&direct).unwrap()).unwrap() / space.norm_sq(&direct).unwrap()).sqrt()
        };
        let (coarse, fine) = (gap(2), gap(4));
        assert!(fine < coarse / 3.0 && fine < 1e-2, "{coarse:e} {fine:e}");
    }

    #[test]
    fn log_zero_misses_the_floor() {
        let g = grid(32);
        let sm = singular_catalog("log-zero", &g, &CatalogParams::default()).unwrap();
        let mut rng = random::rng(9);
        let f = random::zero_mean_source_at(&mut rng, g, 1, vec![C::new(0.0, -0.5)], 0.3).unwrap();
        let sched = MollifierSchedule::standard(&g, 8);
        let err = regularized_solve(&f, &sm, &sched, &RegularizeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::CurvatureFloor { .. }), "{err}");
    }
}
