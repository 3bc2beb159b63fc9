//! Experiment configs: flat `key = value` lines grouped under `[section]`
//! headers. `#` and `;` start comments. Keys are case-sensitive.
//!
//! ```text
//! seed = 7
//!
//! [domain]
//! n = 1
//! N = 64
//! L = 6.0
//! interior_fraction = 0.5
//!
//! [metric]
//! kind = gaussian      # gaussian | twisted | identity | catalog
//! rank = 1
//! strength = 1.0
//!
//! [operation]
//! samples = 20
//!
//! [tolerance]
//! hormander = 0.05
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hormander::SolveMethod;
use crate::weights::{DEFAULT_INTERIOR_FRACTION, DEFAULT_PLATEAU, DEFAULT_SMOOTHING};

/// Raw `section.key → value` pairs; top-level keys have an empty section.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut section = String::new();
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::Config {
                    field: format!("line {}", lineno + 1),
                    message: format!("unterminated section header `{line}`"),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                field: format!("line {}", lineno + 1),
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = key.trim();
            let full = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
            if entries.insert(full.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Config { field: full, message: "duplicate key".into() });
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config { field: key.to_string(), message: format!("cannot parse `{v}`") })
            })
            .transpose()
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parsed(key)?.ok_or_else(|| Error::Config { field: key.to_string(), message: "missing required field".into() })
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim().parse::<T>().map_err(|_| Error::Config {
                            field: key.to_string(),
                            message: format!("cannot parse list entry `{}`", s.trim()),
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    /// Keys not in `known`, for rejecting typos.
    fn unknown(&self, known: &[&str]) -> Vec<String> {
        self.entries.keys().filter(|k| !known.contains(&k.as_str())).cloned().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainConfig {
    pub n: usize,
    pub samples: usize,
    pub side: f64,
    /// Fraction of the box treated as the interior; the rest is seam margin.
    pub interior_fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MetricKind {
    /// `e^{-c|z|²} I_r` with the apodized profile.
    Gaussian,
    /// Rank-two Gaussian metric with a band-limited hermitian twist.
    Twisted,
    /// Flat `h = I_r`, curvature zero.
    Identity,
    /// A singular catalog entry.
    Catalog(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricConfig {
    pub kind: MetricKind,
    pub rank: usize,
    pub strength: f64,
    /// Twist amplitude of the rank-two metric.
    pub kappa: f64,
    /// Exponent of the catalog singular factor.
    pub exponent: f64,
    /// Apodization plateau half-width and smoothing, as fractions of `L`.
    pub plateau: f64,
    pub smoothing: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperationConfig {
    /// Pipeline the config was written for; checked against the subcommand.
    pub name: Option<String>,
    /// Form degree `p` for solves and the basic estimate.
    pub p: usize,
    /// Number of random instances or sources.
    pub samples: usize,
    /// Random pairs for the adjoint check.
    pub pairs: usize,
    /// Random forms for the basic estimate.
    pub forms: usize,
    pub method: Option<SolveMethod>,
    /// Gaussian strengths of the weight sweep.
    pub sweep: Vec<f64>,
    pub nu_max: usize,
    /// Base mollifier radius; `3 ν_max · dx` when absent.
    pub eps0: Option<f64>,
    /// Box fraction on which the regularized curvature floor is measured.
    pub floor_fraction: f64,
    pub resolutions: Vec<usize>,
    /// Gaussian width of the random bump data.
    pub source_width: f64,
    /// Bump centres are drawn within this distance of the box centre.
    pub source_radius: f64,
    /// Centre of the source of the regularized solve.
    pub source_center: (f64, f64),
    /// Whether the solve pipeline enforces the weighted bound.
    pub check_bound: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances {
    pub algebraic: f64,
    pub differential: f64,
    pub adjoint: f64,
    pub formal_adjoint: f64,
    pub solve: f64,
    pub hormander: f64,
    pub estimate: f64,
    pub monotone: f64,
    pub max_eps: f64,
    pub regularize: f64,
    pub slope: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            algebraic: 1e-12,
            differential: 1e-6,
            adjoint: 1e-12,
            formal_adjoint: 1e-6,
            solve: 1e-9,
            hormander: 0.05,
            estimate: 1e-6,
            monotone: 1e-10,
            max_eps: 0.1,
            regularize: 0.05,
            slope: -4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub domain: DomainConfig,
    pub metric: MetricConfig,
    pub operation: OperationConfig,
    pub tolerance: Tolerances,
}

const KNOWN: &[&str] = &[
    "seed",
    "domain.n",
    "domain.N",
    "domain.L",
    "domain.interior_fraction",
    "metric.kind",
    "metric.catalog",
    "metric.rank",
    "metric.strength",
    "metric.kappa",
    "metric.exponent",
    "metric.plateau",
    "metric.smoothing",
    "operation.name",
    "operation.p",
    "operation.samples",
    "operation.pairs",
    "operation.forms",
    "operation.method",
    "operation.sweep",
    "operation.nu_max",
    "operation.eps0",
    "operation.floor_fraction",
    "operation.resolutions",
    "operation.source_width",
    "operation.source_radius",
    "operation.source_center",
    "operation.check_bound",
    "tolerance.algebraic",
    "tolerance.differential",
    "tolerance.adjoint",
    "tolerance.formal_adjoint",
    "tolerance.solve",
    "tolerance.hormander",
    "tolerance.estimate",
    "tolerance.monotone",
    "tolerance.max_eps",
    "tolerance.regularize",
    "tolerance.slope",
];

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        if let Some(key) = raw.unknown(KNOWN).into_iter().next() {
            return Err(Error::Config { field: key, message: "unknown key".into() });
        }
        let domain = DomainConfig {
            n: raw.required("domain.n")?,
            samples: raw.required("domain.N")?,
            side: raw.or("domain.L", 6.0)?,
            interior_fraction: raw.or("domain.interior_fraction", DEFAULT_INTERIOR_FRACTION)?,
        };
        let kind = match raw.get("metric.kind").unwrap_or("gaussian") {
            "gaussian" => MetricKind::Gaussian,
            "twisted" => MetricKind::Twisted,
            "identity" => MetricKind::Identity,
            "catalog" => MetricKind::Catalog(
                raw.get("metric.catalog")
                    .ok_or_else(|| Error::Config { field: "metric.catalog".into(), message: "missing catalog name".into() })?
                    .to_string(),
            ),
            other => {
                return Err(Error::Config { field: "metric.kind".into(), message: format!("unknown metric kind `{other}`") })
            }
        };
        let metric = MetricConfig {
            rank: raw.or("metric.rank", if kind == MetricKind::Twisted { 2 } else { 1 })?,
            kind,
            strength: raw.or("metric.strength", 1.0)?,
            kappa: raw.or("metric.kappa", 0.3)?,
            exponent: raw.or("metric.exponent", 0.5)?,
            plateau: raw.or("metric.plateau", DEFAULT_PLATEAU)?,
            smoothing: raw.or("metric.smoothing", DEFAULT_SMOOTHING)?,
        };
        let center: Vec<f64> = raw.list("operation.source_center")?.unwrap_or_else(|| vec![0.0, -0.5]);
        if center.len() != 2 {
            return Err(Error::Config { field: "operation.source_center".into(), message: "expected `x, y`".into() });
        }
        let operation = OperationConfig {
            name: raw.get("operation.name").map(str::to_string),
            p: raw.or("operation.p", 1)?,
            samples: raw.or("operation.samples", 20)?,
            pairs: raw.or("operation.pairs", 1000)?,
            forms: raw.or("operation.forms", 100)?,
            method: raw.parsed("operation.method")?,
            sweep: raw.list("operation.sweep")?.unwrap_or_else(|| vec![metric.strength]),
            nu_max: raw.or("operation.nu_max", 8)?,
            eps0: raw.parsed("operation.eps0")?,
            floor_fraction: raw.or("operation.floor_fraction", 0.3)?,
            resolutions: raw.list("operation.resolutions")?.unwrap_or_else(|| vec![16, 32, 64]),
            source_width: raw.or("operation.source_width", 0.4)?,
            source_radius: raw.or("operation.source_radius", 0.5)?,
            source_center: (center[0], center[1]),
            check_bound: raw.or("operation.check_bound", true)?,
        };
        let d = Tolerances::default();
        let tolerance = Tolerances {
            algebraic: raw.or("tolerance.algebraic", d.algebraic)?,
            differential: raw.or("tolerance.differential", d.differential)?,
            adjoint: raw.or("tolerance.adjoint", d.adjoint)?,
            formal_adjoint: raw.or("tolerance.formal_adjoint", d.formal_adjoint)?,
            solve: raw.or("tolerance.solve", d.solve)?,
            hormander: raw.or("tolerance.hormander", d.hormander)?,
            estimate: raw.or("tolerance.estimate", d.estimate)?,
            monotone: raw.or("tolerance.monotone", d.monotone)?,
            max_eps: raw.or("tolerance.max_eps", d.max_eps)?,
            regularize: raw.or("tolerance.regularize", d.regularize)?,
            slope: raw.or("tolerance.slope", d.slope)?,
        };
        let cfg = Self { seed: raw.or("seed", 0)?, domain, metric, operation, tolerance };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: String| Err(Error::Config { field: field.into(), message });
        let d = &self.domain;
        if !(1..=2).contains(&d.n) {
            return bad("domain.n", format!("{} not in {{1, 2}}", d.n));
        }
        if d.samples < 4 || d.samples % 2 != 0 {
            return bad("domain.N", format!("{} must be even and >= 4", d.samples));
        }
        if !(d.side > 0.0) {
            return bad("domain.L", format!("{} must be positive", d.side));
        }
        if !(d.interior_fraction > 0.0 && d.interior_fraction < 1.0) {
            return bad("domain.interior_fraction", format!("{} not in (0, 1)", d.interior_fraction));
        }
        if self.metric.rank == 0 || self.metric.rank > 4 {
            return bad("metric.rank", format!("{} not in 1..=4", self.metric.rank));
        }
        let op = &self.operation;
        if op.p == 0 || op.p > d.n {
            return bad("operation.p", format!("{} not in 1..={}", op.p, d.n));
        }
        if op.samples == 0 || op.nu_max == 0 {
            return bad("operation.samples", "samples and nu_max must be positive".into());
        }
        if !(op.floor_fraction > 0.0 && op.floor_fraction < 1.0) {
            return bad("operation.floor_fraction", format!("{} not in (0, 1)", op.floor_fraction));
        }
        if op.resolutions.iter().any(|&r| r < 4 || r % 2 != 0) {
            return bad("operation.resolutions", "resolutions must be even and >= 4".into());
        }
        let t = &self.tolerance;
        let named = [
            ("tolerance.algebraic", t.algebraic),
            ("tolerance.differential", t.differential),
            ("tolerance.adjoint", t.adjoint),
            ("tolerance.formal_adjoint", t.formal_adjoint),
            ("tolerance.solve", t.solve),
            ("tolerance.hormander", t.hormander),
            ("tolerance.estimate", t.estimate),
            ("tolerance.monotone", t.monotone),
            ("tolerance.max_eps", t.max_eps),
            ("tolerance.regularize", t.regularize),
        ];
        for (field, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return bad(field, format!("tolerance {v} must be positive"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<crate::grid::GridSpec> {
        crate::grid::GridSpec::new(self.domain.n, self.domain.samples, self.domain.side)
    }

    pub fn profile(&self) -> crate::weights::Profile {
        let l = self.domain.side;
        crate::weights::Profile::new(l, self.metric.plateau * l, self.metric.smoothing * l)
    }
}
