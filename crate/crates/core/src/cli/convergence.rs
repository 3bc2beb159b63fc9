//! Convergence-rate estimates from residuals at several resolutions.

use crate::error::{Error, Result};

/// Residuals below this are treated as round-off.
pub const NOISE_FLOOR: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceEstimate {
    /// Least-squares slope of `log residual` against `log N` over the points
    /// above the noise floor; `None` when fewer than two remain.
    pub slope: Option<f64>,
    /// Some residual reached the noise floor.
    pub saturated: bool,
    pub points_used: usize,
}

impl ConvergenceEstimate {
    /// Saturated runs pass; otherwise the slope must not exceed `max_slope`.
    pub fn pass(&self, max_slope: f64) -> bool {
        self.saturated || self.slope.is_some_and(|s| s <= max_slope)
    }
}

/// Fits `log r = a + s log N`. Needs at least three resolutions.
pub fn report_convergence(results: &[(usize, f64)]) -> Result<ConvergenceEstimate> {
    if results.len() < 3 {
        return Err(Error::Precondition { check: "at least three resolutions", value: results.len() as f64 });
    }
    if let Some(&(n, r)) = results.iter().find(|(n, r)| *n == 0 || !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::Precondition { check: "positive resolution and finite residual", value: if n == 0 { 0.0 } else { r } });
    }
    let kept: Vec<(f64, f64)> =
        results.iter().filter(|(_, r)| *r >= NOISE_FLOOR).map(|&(n, r)| ((n as f64).ln(), r.ln())).collect();
    let saturated = kept.len() < results.len();
    let slope = (kept.len() >= 2).then(|| {
        let m = kept.len() as f64;
        let (mx, my) = kept.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / m, b + y / m));
        let sxy: f64 = kept.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = kept.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        sxy / sxx
    });
    Ok(ConvergenceEstimate { slope, saturated, points_used: kept.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_slope() {
        let data: Vec<(usize, f64)> = [16, 32, 64].iter().map(|&n| (n, 3.0 * (n as f64).powi(-6))).collect();
        let e = report_convergence(&data).unwrap();
        assert!((e.slope.unwrap() + 6.0).abs() < 1e-12);
        assert!(!e.saturated && e.pass(-4.0));
    }

    #[test]
    fn constant_residuals_have_zero_slope() {
        let e = report_convergence(&[(16, 1e-3), (32, 1e-3), (64, 1e-3)]).unwrap();
        assert_eq!(e.slope, Some(0.0));
        assert!(!e.pass(-4.0));
    }

    #[test]
    fn noise_floor_saturates() {
        let e = report_convergence(&[(16, 1e-4), (32, 1e-14), (64, 2e-15)]).unwrap();
        assert!(e.saturated);
        assert_eq!(e.slope, None);
        assert!(e.pass(-4.0));
    }

    #[test]
    fn needs_three_points() {
        assert!(report_convergence(&[(16, 1.0), (32, 0.1)]).is_err());
        assert!(report_convergence(&[(16, 1.0), (32, f64::NAN), (64, 0.1)]).is_err());
    }
}
