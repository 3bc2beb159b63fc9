//! The verification pipelines behind each subcommand. Every suite appends
//! rows to a [`Report`]; the suites are public so tests can run them with
//! their own parameters.

use std::str::FromStr;

use num_complex::Complex64 as C;

use super::config::{ExperimentConfig, MetricKind};
use super::convergence::report_convergence;
use super::fieldfile;
use super::plot::{Chart, Series};
use super::report::{Comparison, Report, Shape};
use crate::bochner::{basic_estimate, bk_integrated, bk_pointwise, xi_omega_identity, SupportCheck};
use crate::error::{Error, Result};
use crate::exterior::{c_const, hodge_star, norm_sq, norm_sq_by_pairing, wedge_const, Bidegree, ConstForm};
use crate::grid::GridSpec;
use crate::hermitian::{curvature, dbar_star_formal, dual_metric, Connection, MetricField};
use crate::hormander::{certify_delta, solve_min_norm, verify_hormander, DbarOperator, SolveOptions};
use crate::positivity::{
    check_nakano_pointwise_identity, constant_form_deltas, griffiths_delta, griffiths_extreme, nakano_delta,
    positivity_report, search_griffiths_not_nakano, Extreme, PositivityOptions,
};
use crate::random;
use crate::singular::{regularize, singular_catalog, CatalogParams, MollifierSchedule, RegularizeOptions};
use crate::weights::{gaussian_metric, twisted_metric, Profile};

pub const ANCHOR_CONSTANTS: &str = "unimodular constant relations";
pub const ANCHOR_HODGE: &str = "hodge star reconstruction";
pub const ANCHOR_HODGE_NORM: &str = "norm of the hodge star";
pub const ANCHOR_NAKANO_IDENTITY: &str = "nakano form of the curvature term";
pub const ANCHOR_XI: &str = "xi wedge omega identity";
pub const ANCHOR_BK_POINTWISE: &str = "pointwise bochner-kodaira identity";
pub const ANCHOR_BK_INTEGRATED: &str = "integrated bochner-kodaira identity";
pub const ANCHOR_ADJOINT: &str = "discrete adjoint exactness";
pub const ANCHOR_FORMAL_ADJOINT: &str = "formal adjoint of dbar";
pub const ANCHOR_ESTIMATE: &str = "basic estimate";
pub const ANCHOR_ORDER: &str = "nakano positivity implies griffiths";
pub const ANCHOR_LINE: &str = "griffiths equals nakano for line bundles and curves";
pub const ANCHOR_DUAL: &str = "griffiths positivity dualizes";
pub const ANCHOR_WITNESS: &str = "griffiths without nakano";
pub const ANCHOR_BOUND: &str = "weighted l2 estimate for dbar";
pub const ANCHOR_SOLVE: &str = "minimal-norm solution";
pub const ANCHOR_SWEEP: &str = "stronger weights give smaller solutions";
pub const ANCHOR_MONOTONE: &str = "increasing regularization of the dual";
pub const ANCHOR_FLOOR: &str = "curvature floor of the regularized metrics";
pub const ANCHOR_UNIFORM: &str = "uniform bounds along the regularization";
pub const ANCHOR_LIMIT: &str = "estimate for singular metrics";
pub const ANCHOR_STABILITY: &str = "weak limit of the regularized solutions";
pub const ANCHOR_CONVERGENCE: &str = "spectral convergence of the identity residuals";

/// Named subcommands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pipeline {
    Identities,
    Positivity,
    Solve,
    Regularize,
    Convergence,
}

impl Pipeline {
    pub const ALL: [Pipeline; 5] =
        [Pipeline::Identities, Pipeline::Positivity, Pipeline::Solve, Pipeline::Regularize, Pipeline::Convergence];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Identities => "identities",
            Pipeline::Positivity => "positivity",
            Pipeline::Solve => "solve",
            Pipeline::Regularize => "regularize",
            Pipeline::Convergence => "convergence",
        }
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config { field: "operation.name".into(), message: format!("unknown pipeline `{s}`") })
    }
}

/// A file produced next to the CSV report.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub artifacts: Vec<Artifact>,
}

/// Stream offsets keep the random data of different suites independent.
fn rng_for(seed: u64, stream: u64) -> rand_chacha::ChaCha8Rng {
    random::rng(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn relative(diff: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Metric named by the config on `grid`, with `strength` overriding the
/// configured one. Catalog metrics are regularized at the finest radius.
pub fn build_metric(cfg: &ExperimentConfig, grid: &GridSpec, strength: f64) -> Result<MetricField> {
    let m = &cfg.metric;
    let profile = Profile::new(grid.side(), m.plateau * grid.side(), m.smoothing * grid.side());
    match &m.kind {
        MetricKind::Gaussian => gaussian_metric(grid, &profile, strength, m.rank),
        MetricKind::Twisted => {
            if m.rank != 2 {
                return Err(Error::Config { field: "metric.rank".into(), message: "twisted metrics have rank 2".into() });
            }
            twisted_metric(grid, &profile, strength, m.kappa)
        }
        MetricKind::Identity => Ok(MetricField::identity(*grid, m.rank)),
        MetricKind::Catalog(name) => {
            let sm = singular_catalog(name, grid, &catalog_params(cfg))?;
            sm.regularize(schedule(cfg, grid)?.eps(cfg.operation.nu_max))
        }
    }
}

fn catalog_params(cfg: &ExperimentConfig) -> CatalogParams {
    CatalogParams { exponent: cfg.metric.exponent, strength: cfg.metric.strength, ..CatalogParams::default() }
}

fn schedule(cfg: &ExperimentConfig, grid: &GridSpec) -> Result<MollifierSchedule> {
    match cfg.operation.eps0 {
        Some(e) => MollifierSchedule::new(e, cfg.operation.nu_max),
        None => Ok(MollifierSchedule::standard(grid, cfg.operation.nu_max)),
    }
}

/// `c_{n-p} c_{p-1} (-1)^{(n-p)(p-1)} = c_{n-1}` and
/// `i c_{n-p} (-1)^{n-p} = c_{n-p+1}` for `1 ≤ p ≤ n ≤ max_n`, compared exactly.
pub fn constant_lemma(report: &mut Report, max_n: usize) {
    let i = C::new(0.0, 1.0);
    let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    for n in 1..=max_n {
        for p in 1..=n {
            let shape = Shape { n, samples: 0, p, rank: 0 };
            let first = c_const(n - p) * c_const(p - 1) * sign((n - p) * (p - 1)) - c_const(n - 1);
            let second = i * c_const(n - p) * sign(n - p) - c_const(n - p + 1);
            report.push(shape, "product relation", ANCHOR_CONSTANTS, first.norm(), Comparison::Exact, 0.0, "");
            report.push(shape, "shift relation", ANCHOR_CONSTANTS, second.norm(), Comparison::Exact, 0.0, "");
        }
    }
}

/// Pointwise algebraic identities on white-noise data, at least `instances`
/// grid points per identity. `p` ranges over `1..=n`.
pub fn algebraic_suite(
    report: &mut Report,
    grid: GridSpec,
    rank: usize,
    instances: usize,
    seed: u64,
    tol: f64,
) -> Result<()> {
    let n = grid.dim();
    let repeats = instances.div_ceil(grid.num_points()).max(1);
    let count = repeats * grid.num_points();
    let mut rng = rng_for(seed, 1);
    for p in 1..=n {
        let (mut hodge, mut norm, mut nakano, mut xi) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..repeats {
            let h = random::metric(&mut rng, grid, rank)?;
            let alpha = random::form(&mut rng, grid, Bidegree::new(n, p), rank)?;
            let gamma = hodge_star(&alpha)?;
            let back = wedge_const(&gamma, &ConstForm::omega_power(n, p))?;
            hodge = hodge.max(relative(back.sub(&alpha)?.max_abs(), alpha.max_abs()));
            let direct = norm_sq(&alpha, &h)?;
            let paired = norm_sq_by_pairing(&gamma, &h)?;
            norm = norm.max(relative(direct.sub(&paired)?.max_abs(), direct.max_abs()));
            if p == 1 {
                let theta = random::curvature(&mut rng, &h)?;
                nakano = nakano.max(check_nakano_pointwise_identity(&theta, &gamma, &h)?);
                let x = random::form(&mut rng, grid, Bidegree::new(n - 1, 1), rank)?;
                xi = xi.max(xi_omega_identity(&x, &h)?);
            }
        }
        let shape = Shape { n, samples: grid.samples(), p, rank };
        let detail = format!("{count} instances");
        report.push(shape, "hodge reconstruction", ANCHOR_HODGE, hodge, Comparison::AtMost, tol, detail.clone());
        report.push(shape, "hodge norm", ANCHOR_HODGE_NORM, norm, Comparison::AtMost, tol, detail.clone());
        if p == 1 {
            report.push(shape, "nakano identity", ANCHOR_NAKANO_IDENTITY, nakano, Comparison::AtMost, tol, detail.clone());
            report.push(shape, "xi omega identity", ANCHOR_XI, xi, Comparison::AtMost, tol, detail);
        }
    }
    Ok(())
}

/// Bump data of the configured width and spread.
fn bump(cfg: &ExperimentConfig, rng: &mut rand_chacha::ChaCha8Rng, grid: GridSpec, b: Bidegree, rank: usize) -> Result<crate::exterior::EForm> {
    random::bump_form(rng, grid, b, rank, cfg.operation.source_radius, cfg.operation.source_width)
}

/// Residuals of the pointwise and integrated identities for one bump form
/// of bidegree `(n,p)` at the resolution of `grid`.
pub fn bk_residuals(cfg: &ExperimentConfig, grid: GridSpec, p: usize, seed: u64) -> Result<(f64, f64)> {
    let h = build_metric(cfg, &grid, cfg.metric.strength)?;
    let mut rng = rng_for(seed, 10 + p as u64);
    let alpha = bump(cfg, &mut rng, grid, Bidegree::new(grid.dim(), p), h.rank())?;
    let region = grid.interior_mask(cfg.domain.interior_fraction);
    let point = bk_pointwise(&alpha, &h, Some(&region))?.residual;
    let support = SupportCheck { interior_fraction: cfg.domain.interior_fraction, ..SupportCheck::default() };
    let int = bk_integrated(&alpha, &h, Some(support))?;
    Ok((point, int.residual.max(int.cross_residual)))
}

pub fn differential_suite(report: &mut Report, cfg: &ExperimentConfig, grid: GridSpec) -> Result<()> {
    let tol = cfg.tolerance.differential;
    for p in 1..=grid.dim() {
        let (point, integrated) = bk_residuals(cfg, grid, p, cfg.seed)?;
        let shape = Shape { n: grid.dim(), samples: grid.samples(), p, rank: cfg.metric.rank };
        report.push(shape, "pointwise identity residual", ANCHOR_BK_POINTWISE, point, Comparison::AtMost, tol, "");
        report.push(shape, "integrated identity residual", ANCHOR_BK_INTEGRATED, integrated, Comparison::AtMost, tol, "");
    }
    Ok(())
}

/// `max |⟨Tu,v⟩ - ⟨u,T*v⟩| / (‖u‖‖v‖)` over `pairs` white-noise pairs for
/// each degree, and the agreement of the discrete adjoint with the formal
/// one on bump data.
pub fn adjoint_suite(report: &mut Report, cfg: &ExperimentConfig, grid: GridSpec, pairs: usize, formal: bool) -> Result<()> {
    let h = build_metric(cfg, &grid, cfg.metric.strength)?;
    let n = grid.dim();
    let mut rng = rng_for(cfg.seed, 20);
    for p in 1..=n {
        let op = DbarOperator::new(&h, p)?;
        let (dom, cod) = (op.domain(), op.codomain());
        let mut worst = 0.0f64;
        for _ in 0..pairs {
            let u = random::form(&mut rng, grid, dom.bidegree(), h.rank())?;
            let v = random::form(&mut rng, grid, cod.bidegree(), h.rank())?;
            let lhs = cod.inner(&op.apply_t(&u)?, &v)?;
            let rhs = dom.inner(&u, &op.apply_tstar(&v)?)?;
            let scale = (dom.norm_sq(&u)? * cod.norm_sq(&v)?).sqrt();
            worst = worst.max(relative((lhs - rhs).norm(), scale));
        }
        let shape = Shape { n, samples: grid.samples(), p, rank: h.rank() };
        report.push(shape, "adjoint defect", ANCHOR_ADJOINT, worst, Comparison::AtMost, cfg.tolerance.adjoint, format!("{pairs} pairs"));
        if formal {
            let beta = bump(cfg, &mut rng, grid, cod.bidegree(), h.rank())?;
            let a = dbar_star_formal(&beta, &Connection::new(&h)?)?;
            let b = op.apply_tstar(&beta)?;
            let d = relative(a.sub(&b)?.max_abs(), a.max_abs());
            report.push(shape, "formal adjoint agreement", ANCHOR_FORMAL_ADJOINT, d, Comparison::AtMost, cfg.tolerance.formal_adjoint, "");
        }
    }
    Ok(())
}

/// Smallest `slack / RHS` of the basic estimate over `forms` bump forms per
/// degree, with `δ` the Nakano constant certified on the interior.
pub fn estimate_suite(report: &mut Report, cfg: &ExperimentConfig, grid: GridSpec, forms: usize) -> Result<()> {
    let h = build_metric(cfg, &grid, cfg.metric.strength)?;
    let (delta, _) = certify_delta(&h, cfg.domain.interior_fraction)?;
    let support = SupportCheck { interior_fraction: cfg.domain.interior_fraction, ..SupportCheck::default() };
    let mut rng = rng_for(cfg.seed, 30);
    for p in 1..=grid.dim() {
        let mut worst = f64::INFINITY;
        for _ in 0..forms {
            let alpha = bump(cfg, &mut rng, grid, Bidegree::new(grid.dim(), p), h.rank())?;
            let rep = basic_estimate(&alpha, &h, delta, support)?;
            worst = worst.min(relative(rep.slack, rep.rhs));
        }
        let shape = Shape { n: grid.dim(), samples: grid.samples(), p, rank: h.rank() };
        let detail = format!("{forms} forms, delta {delta:.6e}");
        report.push(shape, "relative slack", ANCHOR_ESTIMATE, worst, Comparison::AtLeast, -cfg.tolerance.estimate, detail);
    }
    Ok(())
}

pub fn identities(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut report = Report::default();
    let grid = cfg.grid()?;
    constant_lemma(&mut report, 4);
    algebraic_suite(&mut report, grid, cfg.metric.rank, cfg.operation.samples, cfg.seed, cfg.tolerance.algebraic)?;
    differential_suite(&mut report, cfg, grid)?;
    adjoint_suite(&mut report, cfg, grid, cfg.operation.pairs, true)?;
    estimate_suite(&mut report, cfg, grid, cfg.operation.forms)?;
    Ok(Outcome { report, artifacts: Vec::new() })
}

/// `δ_N ≤ δ_G` (equal for `n = 1`) on random constant-grid fields, the
/// dual sign flip for line bundles, and the stored witness.
pub fn positivity_suite(report: &mut Report, n: usize, rank: usize, instances: usize, seed: u64) -> Result<()> {
    let grid = GridSpec::new(n, 4, 1.0)?;
    let mut rng = rng_for(seed, 40);
    let opts = PositivityOptions::default();
    let (mut excess, mut gap) = (f64::NEG_INFINITY, 0.0f64);
    for _ in 0..instances {
        let h = random::metric(&mut rng, grid, rank)?;
        let theta = random::curvature(&mut rng, &h)?;
        let dn = nakano_delta(&h, &theta, &opts)?;
        let dg = griffiths_delta(&h, &theta, &opts)?;
        excess = excess.max(dn - dg);
        gap = gap.max((dn - dg).abs());
    }
    let shape = Shape { n, samples: grid.samples(), p: 0, rank };
    let detail = format!("{instances} fields");
    report.push(shape, "nakano minus griffiths", ANCHOR_ORDER, excess, Comparison::AtMost, 0.0, detail.clone());
    if n == 1 || rank == 1 {
        report.push(shape, "griffiths nakano gap", ANCHOR_LINE, gap, Comparison::Exact, 0.0, detail);
    }
    Ok(())
}

pub fn dual_flip(report: &mut Report, cfg: &ExperimentConfig, grid: GridSpec) -> Result<()> {
    let h = build_metric(cfg, &grid, cfg.metric.strength)?;
    if h.rank() != 1 {
        return Ok(());
    }
    let opts = PositivityOptions::default();
    let hd = dual_metric(&h)?;
    let dual_min = griffiths_delta(&hd, &curvature(&hd)?, &opts)?;
    let (max, _) = griffiths_extreme(&h, &curvature(&h)?, &opts, Extreme::Max)?;
    let d = relative((dual_min + max.value).abs(), max.value.abs());
    let shape = Shape { n: grid.dim(), samples: grid.samples(), p: 0, rank: 1 };
    report.push(shape, "dual curvature sign flip", ANCHOR_DUAL, d, Comparison::AtMost, cfg.tolerance.algebraic.max(1e-9), "");
    Ok(())
}

/// `δ_G > 0 ≥ δ_N` for a constant curvature matrix on `n = r = 2`.
pub fn witness_rows(report: &mut Report, m: &[C], label: &str) -> Result<()> {
    let (dn, dg) = constant_form_deltas(m, 2, 2, &PositivityOptions::default())?;
    let shape = Shape { n: 2, samples: 4, p: 0, rank: 2 };
    report.push(shape, "witness griffiths constant", ANCHOR_WITNESS, dg, Comparison::AtLeast, f64::MIN_POSITIVE, label);
    report.push(shape, "witness nakano constant", ANCHOR_WITNESS, dn, Comparison::AtMost, 0.0, label);
    Ok(())
}

pub fn positivity(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut report = Report::default();
    let grid = cfg.grid()?;
    let h = build_metric(cfg, &grid, cfg.metric.strength)?;
    let rep = positivity_report(&h, &curvature(&h)?, &PositivityOptions::on_region(grid.interior_mask(cfg.domain.interior_fraction)))?;
    let shape = Shape { n: grid.dim(), samples: grid.samples(), p: 0, rank: h.rank() };
    report.push(shape, "interior nakano constant", ANCHOR_ORDER, rep.nakano.value, Comparison::Info, 0.0, "");
    report.push(shape, "interior griffiths constant", ANCHOR_ORDER, rep.griffiths.value, Comparison::Info, 0.0, "");
    let tol = 1e-12 * rep.nakano.value.abs().max(rep.griffiths.value.abs()).max(1.0);
    report.push(shape, "metric nakano minus griffiths", ANCHOR_ORDER, rep.nakano.value - rep.griffiths.value, Comparison::AtMost, tol, "");
    positivity_suite(&mut report, grid.dim(), cfg.metric.rank, cfg.operation.samples, cfg.seed)?;
    dual_flip(&mut report, cfg, grid)?;
    match search_griffiths_not_nakano(cfg.seed, 200)? {
        Some(m) => witness_rows(&mut report, &m, &format!("search seed {}", cfg.seed))?,
        None => {
            let shape = Shape { n: 2, samples: 4, p: 0, rank: 2 };
            report.push(shape, "witness found", ANCHOR_WITNESS, 0.0, Comparison::Exact, 1.0, "no witness in 200 attempts");
        }
    }
    Ok(Outcome { report, artifacts: Vec::new() })
}

/// Minimal-norm solves for `samples` interior sources under each weight of
/// the sweep.
pub fn solve(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    if matches!(cfg.metric.kind, MetricKind::Catalog(_)) {
        return Err(Error::Config { field: "metric.kind".into(), message: "use `regularize` for catalog metrics".into() });
    }
    let op = &cfg.operation;
    let tol = &cfg.tolerance;
    let p = grid.dim();
    let mut rng = rng_for(cfg.seed, 50);
    let sources = (0..op.samples)
        .map(|_| random::zero_mean_source(&mut rng, grid, cfg.metric.rank, op.source_radius, op.source_width))
        .collect::<Result<Vec<_>>>()?;
    let sweep = if cfg.metric.kind == MetricKind::Identity { vec![cfg.metric.strength] } else { op.sweep.clone() };
    let mut report = Report::default();
    let mut ratios: Vec<Vec<f64>> = Vec::new();
    let mut artifacts = Vec::new();
    for &c in &sweep {
        let h = build_metric(cfg, &grid, c)?;
        let (delta, _) = certify_delta(&h, cfg.domain.interior_fraction)?;
        let sopts = SolveOptions {
            method: op.method,
            delta: (delta > 0.0).then_some(delta),
            interior_fraction: cfg.domain.interior_fraction,
            ..SolveOptions::default()
        };
        let shape = Shape { n: grid.dim(), samples: grid.samples(), p, rank: h.rank() };
        let mut row = Vec::new();
        for (k, f) in sources.iter().enumerate() {
            let (u, rep) = solve_min_norm(f, &h, &sopts)?;
            let check = verify_hormander(&rep, delta, p, tol.hormander);
            let detail = format!("weight {c}, source {k}, delta {delta:.6e}, {} in {} steps", rep.method.name(), rep.iterations);
            let cmp = if op.check_bound { Comparison::AtMost } else { Comparison::Info };
            report.push(shape, "hormander bound", ANCHOR_BOUND, check.normalized_ratio, cmp, 1.0 + tol.hormander, detail.clone());
            report.push(shape, "solve residual", ANCHOR_SOLVE, rep.residual, Comparison::AtMost, tol.solve, detail.clone());
            report.push(shape, "kernel overlap", ANCHOR_SOLVE, rep.kernel_overlap, Comparison::AtMost, 1e-8, detail);
            if k == 0 && artifacts.is_empty() {
                let mut bytes = Vec::new();
                fieldfile::write_form(&mut bytes, &u)?;
                artifacts.push(Artifact { name: "solution.hdbl".into(), bytes });
            }
            row.push(rep.ratio);
        }
        ratios.push(row);
    }
    if sweep.len() > 1 {
        // Per-source ratios need not decrease; the family supremum, the
        // empirical bound constant, should.
        let shape = Shape { n: grid.dim(), samples: grid.samples(), p, rank: cfg.metric.rank };
        let sup: Vec<f64> = ratios.iter().map(|r| r.iter().copied().fold(0.0, f64::max)).collect();
        let worst = sup.windows(2).map(|w| relative(w[1] - w[0], w[0])).fold(f64::NEG_INFINITY, f64::max);
        let rising = (0..sources.len()).filter(|&k| ratios.windows(2).any(|w| w[1][k] > w[0][k])).count();
        let detail = format!("weights {sweep:?}, sup ratios {}", sup.iter().map(|v| format!("{v:.6e}")).collect::<Vec<_>>().join(" "));
        report.push(shape, "sup ratio increase along sweep", ANCHOR_SWEEP, worst, Comparison::AtMost, 0.0, detail);
        report.push(shape, "sources with a rising ratio", ANCHOR_SWEEP, rising as f64, Comparison::Info, 0.0, "");
    }
    let chart = Chart {
        title: "solution to source norm ratio".into(),
        x_label: "weight strength".into(),
        y_label: "|u|^2 / |f|^2".into(),
        log_x: false,
        log_y: false,
        series: (0..sources.len())
            .map(|k| Series { name: format!("source {k}"), points: sweep.iter().zip(&ratios).map(|(&c, r)| (c, r[k])).collect() })
            .collect(),
    };
    artifacts.push(Artifact { name: "solve.svg".into(), bytes: chart.to_svg().into_bytes() });
    Ok(Outcome { report, artifacts })
}

/// The regularized solve for a catalog metric.
pub fn regularize_pipeline(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let MetricKind::Catalog(name) = &cfg.metric.kind else {
        return Err(Error::Config { field: "metric.kind".into(), message: "regularize needs a catalog metric".into() });
    };
    let sm = singular_catalog(name, &grid, &catalog_params(cfg))?;
    let sched = schedule(cfg, &grid)?;
    let op = &cfg.operation;
    let tol = &cfg.tolerance;
    let mut rng = rng_for(cfg.seed, 60);
    let center = vec![C::new(op.source_center.0, op.source_center.1)];
    let f = random::zero_mean_source_at(&mut rng, grid, sm.rank(), center, op.source_width)?;
    let opts = RegularizeOptions {
        interior_fraction: cfg.domain.interior_fraction,
        max_eps: tol.max_eps,
        tol: tol.regularize,
        monotone_tol: tol.monotone,
        floor_fraction: op.floor_fraction,
        solve: SolveOptions { method: op.method, ..SolveOptions::default() },
        ..RegularizeOptions::default()
    };
    let (u, rep) = regularize(&f, &sm, &sched, &opts)?;
    let mut report = Report::default();
    let shape = Shape { n: 1, samples: grid.samples(), p: 1, rank: sm.rank() };
    for r in &rep.records {
        let detail = format!("nu {}, eps {:.6e}", r.nu, r.eps);
        report.push(shape, "regularized curvature floor", ANCHOR_FLOOR, r.delta, Comparison::Info, 0.0, detail.clone());
        report.push(shape, "regularized solve residual", ANCHOR_SOLVE, r.solve.residual, Comparison::AtMost, tol.solve, detail);
    }
    let detail = format!("{name}, nu {}..{}", rep.nu_min, sched.nu_max);
    report.push(shape, "monotone ordering defect", ANCHOR_MONOTONE, rep.monotone.max_defect, Comparison::AtMost, tol.monotone, detail.clone());
    report.push(shape, "measured floor epsilon", ANCHOR_FLOOR, rep.eps, Comparison::AtMost, tol.max_eps, format!("worst nu {}", rep.worst_nu));
    let worst_uniform = rep.uniform.iter().map(|b| b.lhs / b.rhs).fold(0.0, f64::max);
    let pairs = format!("{} pairs", rep.uniform.len());
    report.push(shape, "uniform bound ratio", ANCHOR_UNIFORM, worst_uniform, Comparison::AtMost, 1.0, pairs);
    report.push(shape, "limit bound ratio", ANCHOR_LIMIT, rep.final_ratio(), Comparison::AtMost, 1.0 + tol.regularize, detail);
    let defects: Vec<String> = rep.records.iter().filter_map(|r| r.cauchy).map(|d| format!("{d:.3e}")).collect();
    let stable = if rep.cauchy_decreasing() { 1.0 } else { 0.0 };
    report.push(shape, "cauchy defect decreasing", ANCHOR_STABILITY, stable, Comparison::Exact, 1.0, defects.join(" "));
    let chart = Chart {
        title: format!("regularization of {name}"),
        x_label: "nu".into(),
        y_label: "value".into(),
        log_x: false,
        log_y: true,
        series: vec![
            Series { name: "delta_nu".into(), points: rep.records.iter().map(|r| (r.nu as f64, r.delta)).collect() },
            Series {
                name: "cauchy defect".into(),
                points: rep.records.iter().filter_map(|r| r.cauchy.map(|d| (r.nu as f64, d))).collect(),
            },
        ],
    };
    let mut bytes = Vec::new();
    fieldfile::write_form(&mut bytes, &u)?;
    let mut metric = Vec::new();
    fieldfile::write_metric(&mut metric, &sm.metric)?;
    let artifacts = vec![
        Artifact { name: "solution.hdbl".into(), bytes },
        Artifact { name: "metric.hdbl".into(), bytes: metric },
        Artifact { name: "regularize.svg".into(), bytes: chart.to_svg().into_bytes() },
    ];
    Ok(Outcome { report, artifacts })
}

/// Identity residuals across `operation.resolutions` with fitted slopes.
pub fn convergence(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut report = Report::default();
    let n = cfg.domain.n;
    let tol = &cfg.tolerance;
    let mut series: Vec<Series> = Vec::new();
    for p in 1..=n {
        let mut point = Vec::new();
        let mut integrated = Vec::new();
        for &samples in &cfg.operation.resolutions {
            let grid = GridSpec::new(n, samples, cfg.domain.side)?;
            let (a, b) = bk_residuals(cfg, grid, p, cfg.seed)?;
            let shape = Shape { n, samples, p, rank: cfg.metric.rank };
            report.push(shape, "pointwise identity residual", ANCHOR_BK_POINTWISE, a, Comparison::Info, 0.0, "");
            report.push(shape, "integrated identity residual", ANCHOR_BK_INTEGRATED, b, Comparison::Info, 0.0, "");
            point.push((samples, a));
            integrated.push((samples, b));
        }
        let finest = *cfg.operation.resolutions.iter().max().expect("validated non-empty");
        let shape = Shape { n, samples: finest, p, rank: cfg.metric.rank };
        for (label, anchor, data) in
            [("pointwise", ANCHOR_BK_POINTWISE, &point), ("integrated", ANCHOR_BK_INTEGRATED, &integrated)]
        {
            let last = data.iter().find(|(s, _)| *s == finest).map_or(f64::NAN, |d| d.1);
            report.push(shape, format!("{label} residual at finest grid"), anchor, last, Comparison::AtMost, tol.differential, "");
            let est = report_convergence(data)?;
            let (value, cmp, detail) = match (est.saturated, est.slope) {
                (true, s) => (s.unwrap_or(f64::NAN), Comparison::Info, "saturated".to_string()),
                (false, Some(s)) => (s, Comparison::AtMost, format!("{} points", est.points_used)),
                (false, None) => unreachable!("unsaturated fits keep every point"),
            };
            report.push(shape, format!("{label} convergence slope"), ANCHOR_CONVERGENCE, value, cmp, tol.slope, detail);
            series.push(Series {
                name: format!("{label} p={p}"),
                points: data.iter().map(|&(s, r)| (s as f64, r)).collect(),
            });
        }
    }
    let chart = Chart {
        title: "identity residuals".into(),
        x_label: "N".into(),
        y_label: "relative residual".into(),
        log_x: true,
        log_y: true,
        series,
    };
    Ok(Outcome { report, artifacts: vec![Artifact { name: "convergence.svg".into(), bytes: chart.to_svg().into_bytes() }] })
}

pub fn run_pipeline(pipeline: Pipeline, cfg: &ExperimentConfig) -> Result<Outcome> {
    if let Some(name) = &cfg.operation.name {
        if name.parse::<Pipeline>()? != pipeline {
            return Err(Error::Config {
                field: "operation.name".into(),
                message: format!("config is for `{name}`, not `{}`", pipeline.name()),
            });
        }
    }
    match pipeline {
        Pipeline::Identities => identities(cfg),
        Pipeline::Positivity => positivity(cfg),
        Pipeline::Solve => solve(cfg),
        Pipeline::Regularize => regularize_pipeline(cfg),
        Pipeline::Convergence => convergence(cfg),
    }
}
