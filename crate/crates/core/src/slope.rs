//! Log-log convergence slopes for derivative and expansion checks.

use std::fmt;

/// Observed convergence order of an error sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slope {
    /// Every error is exactly zero.
    Exact,
    /// Least-squares slope of `log(err)` against `log(s)`.
    Fitted(f64),
    /// Fewer than two nonzero errors; no line can be fitted.
    Undetermined,
}

impl Slope {
    /// `true` when the errors vanish or decay at least with `order`.
    pub fn at_least(&self, order: f64) -> bool {
        match *self {
            Slope::Exact => true,
            Slope::Fitted(p) => p >= order,
            Slope::Undetermined => false,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Slope::Fitted(p) => Some(p),
            _ => None,
        }
    }
}

impl fmt::Display for Slope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slope::Exact => write!(f, "exact (all errors 0)"),
            Slope::Fitted(p) => write!(f, "{p:.16e}"),
            Slope::Undetermined => write!(f, "undetermined"),
        }
    }
}

/// Fits `log|err| = p log|s| + c` over the points with nonzero error.
pub fn loglog_slope(points: &[(f64, f64)]) -> Slope {
    if points.iter().all(|&(_, e)| e == 0.0) {
        return Slope::Exact;
    }
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(s, e)| e != 0.0 && s != 0.0 && e.is_finite())
        .map(|&(s, e)| (s.abs().ln(), e.abs().ln()))
        .collect();
    if logs.len() < 2 {
        return Slope::Undetermined;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Slope::Undetermined;
    }
    Slope::Fitted(sxy / sxx)
}

/// One row of a finite-difference table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdRow {
    pub s: f64,
    pub fd: f64,
    pub l1: f64,
    pub abs_err: f64,
}

impl FdRow {
    pub fn new(s: f64, fd: f64, l1: f64) -> Self {
        Self { s, fd, l1, abs_err: (fd - l1).abs() }
    }
}

/// Slope of `|fd - L1|` against `s` over a table.
pub fn table_slope(rows: &[FdRow]) -> Slope {
    let pts: Vec<_> = rows.iter().map(|r| (r.s, r.abs_err)).collect();
    loglog_slope(&pts)
}
