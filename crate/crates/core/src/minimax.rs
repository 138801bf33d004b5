//! Cone-constrained quadratic minimization and its primal-dual saddle point.
//!
//! The primal problem is
//!
//! ```text
//!     minimize    E(u) = 1/2 u' A u - f' u
//!     subject to  B u >= 0      (inequality cone)
//!            or   B u  = 0      (equality cone)
//! ```
//!
//! with Lagrangian `L(u, lambda) = E(u) - lambda' B u`. The stationarity condition
//! is `A u - f - B' lambda = 0`, so every KKT system here is the bordered matrix
//! `[[A, -B'], [-B, 0]]`.
//!
//! A perturbation `(A1, B1, f1)` defines the family `(A + s A1, B + s B1, f + s f1)`
//! whose optimal value has derivative `L1(u, lambda) = 1/2 u' A1 u - f1' u - lambda' B1 u`
//! at `s = 0`. [`fd_table`] checks that formula against central differences.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, QR};
use thiserror::Error;

use crate::slope::{table_slope, FdRow, Slope};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MinimaxError {
    #[error("matrix A is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix {0} is not symmetric")]
    NotSymmetric(&'static str),
    #[error("constraint matrix B is row-rank deficient (inf-sup constant {0:e})")]
    RankDeficientB(f64),
    #[error("active-set iteration did not converge within {0} iterations")]
    MaxIterations(usize),
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("unknown cone kind `{0}` (expected `inequality` or `equality`)")]
    UnknownCone(String),
}

pub type Result<T> = std::result::Result<T, MinimaxError>;

/// Which primal cone `K` the constraint matrix describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConeKind {
    /// `K = { u : B u >= 0 }`, dual cone `lambda >= 0`.
    Inequality,
    /// `K = { u : B u = 0 }`, dual cone is the whole multiplier space.
    Equality,
}

impl ConeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConeKind::Inequality => "inequality",
            ConeKind::Equality => "equality",
        }
    }
}

impl fmt::Display for ConeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConeKind {
    type Err = MinimaxError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inequality" | "ineq" => Ok(ConeKind::Inequality),
            "equality" | "eq" => Ok(ConeKind::Equality),
            other => Err(MinimaxError::UnknownCone(other.to_string())),
        }
    }
}

const SYMMETRY_TOL: f64 = 1e-12;
const RANK_TOL: f64 = 1e-12;

fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(MinimaxError::DimensionMismatch { what, expected, found });
    }
    Ok(())
}

fn check_symmetric(name: &'static str, m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > SYMMETRY_TOL * scale {
        return Err(MinimaxError::NotSymmetric(name));
    }
    Ok(())
}

/// A validated instance: `A` symmetric positive definite, `B` of full row rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeQp {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    f: DVector<f64>,
    cone: ConeKind,
}

impl ConeQp {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, f: DVector<f64>, cone: ConeKind) -> Result<Self> {
        let n = a.nrows();
        check_dim("A columns", n, a.ncols())?;
        check_dim("B columns", n, b.ncols())?;
        check_dim("f length", n, f.len())?;
        check_symmetric("A", &a)?;
        let sv = weighted_singular_values(&a, &b)?;
        if b.nrows() > 0 {
            let beta = if b.nrows() > n { 0.0 } else { sv.min() };
            if !(beta > RANK_TOL * sv.max()) {
                return Err(MinimaxError::RankDeficientB(beta));
            }
        }
        Ok(Self { a, b, f, cone })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn f(&self) -> &DVector<f64> {
        &self.f
    }

    pub fn cone(&self) -> ConeKind {
        self.cone
    }

    /// Number of primal unknowns.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Number of constraints (multipliers).
    pub fn m(&self) -> usize {
        self.b.nrows()
    }
}

/// First-order perturbation `(A1, B1, f1)` of a [`ConeQp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub a1: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub f1: DVector<f64>,
}

impl Perturbation {
    pub fn new(a1: DMatrix<f64>, b1: DMatrix<f64>, f1: DVector<f64>) -> Result<Self> {
        check_dim("A1 columns", a1.nrows(), a1.ncols())?;
        check_symmetric("A1", &a1)?;
        Ok(Self { a1, b1, f1 })
    }

    pub fn zero(n: usize, m: usize) -> Self {
        Self {
            a1: DMatrix::zeros(n, n),
            b1: DMatrix::zeros(m, n),
            f1: DVector::zeros(n),
        }
    }

    fn check_against(&self, qp: &ConeQp) -> Result<()> {
        check_dim("A1 rows", qp.n(), self.a1.nrows())?;
        check_dim("B1 rows", qp.m(), self.b1.nrows())?;
        check_dim("B1 columns", qp.n(), self.b1.ncols())?;
        check_dim("f1 length", qp.n(), self.f1.len())
    }
}

/// Primal minimizer and multiplier of a solved instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddlePoint {
    pub u: DVector<f64>,
    pub lambda: DVector<f64>,
    /// Constraints held with equality in the final working set (sorted, 0-based).
    /// Every row for the equality cone.
    pub active_set: Vec<usize>,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative tolerance; the absolute tolerance is `tol * (1 + |f|)`.
    pub tol: f64,
    /// Active-set iteration cap. `None` uses `50 + 10 (n + m)`.
    pub max_iterations: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: None,
        }
    }
}

/// Block `L D L'` factorization of `[[A, -B'], [-B, 0]]`:
/// `A = L L'` and the Schur complement `B A^-1 B' = R' R` from a QR of `L^-1 B'`.
struct KktFactor {
    chol: Cholesky<f64, Dyn>,
    b: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl KktFactor {
    fn new(a: &DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(a.clone()).ok_or(MinimaxError::NotPositiveDefinite)?;
        if b.nrows() == 0 {
            return Ok(Self { chol, b, r: DMatrix::zeros(0, 0) });
        }
        let mut x = b.transpose();
        chol.l_dirty().solve_lower_triangular_mut(&mut x);
        let r = QR::new(x).r();
        let m = r.nrows();
        let scale = (0..m).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        for i in 0..m {
            if !(r[(i, i)].abs() > RANK_TOL * scale) {
                return Err(MinimaxError::RankDeficientB(r[(i, i)].abs()));
            }
        }
        Ok(Self { chol, b, r })
    }

    /// Solves `A u - B' lambda = rhs_u`, `-B u = rhs_lambda`.
    fn solve(&self, rhs_u: &DVector<f64>, rhs_lambda: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let a_inv_f = self.chol.solve(rhs_u);
        let mut lambda = -rhs_lambda - &self.b * &a_inv_f;
        if !lambda.is_empty() {
            let rt = self.r.transpose();
            rt.solve_lower_triangular_mut(&mut lambda);
            self.r.solve_upper_triangular_mut(&mut lambda);
        }
        let u = self.chol.solve(&(rhs_u + self.b.transpose() * &lambda));
        (u, lambda)
    }
}

fn rows_of(b: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), b.ncols(), |i, j| b[(rows[i], j)])
}

/// Solves the primal-dual problem.
///
/// The equality cone is a single KKT solve. The inequality cone runs a primal
/// active-set method from the feasible point `u = 0`; each working set is an
/// equality KKT system. Ratio-test ties go to the lowest index, and the constraint
/// released is the one with the most negative multiplier (lowest index on ties).
pub fn solve_saddle_point(qp: &ConeQp) -> Result<SaddlePoint> {
    solve_saddle_point_with(qp, &SolveOptions::default())
}

pub fn solve_saddle_point_with(qp: &ConeQp, opts: &SolveOptions) -> Result<SaddlePoint> {
    let tol = opts.tol * (1.0 + qp.f.norm());
    let (u, lambda, active_set) = match qp.cone {
        ConeKind::Equality => {
            let kkt = KktFactor::new(&qp.a, qp.b.clone())?;
            let (u, lambda) = kkt.solve(&qp.f, &DVector::zeros(qp.m()));
            (u, lambda, (0..qp.m()).collect())
        }
        ConeKind::Inequality => active_set_solve(qp, tol, opts)?,
    };
    let kkt_residual = kkt_residual(qp, &u, &lambda);
    Ok(SaddlePoint {
        u,
        lambda,
        active_set,
        kkt_residual,
    })
}

fn active_set_solve(
    qp: &ConeQp,
    tol: f64,
    opts: &SolveOptions,
) -> Result<(DVector<f64>, DVector<f64>, Vec<usize>)> {
    let (n, m) = (qp.n(), qp.m());
    let max_iter = opts.max_iterations.unwrap_or(50 + 10 * (n + m));
    let mut u = DVector::zeros(n);
    let mut working: Vec<usize> = Vec::new();

    for _ in 0..max_iter {
        let kkt = KktFactor::new(&qp.a, rows_of(&qp.b, &working))?;
        let (u_eq, lambda_w) = kkt.solve(&qp.f, &DVector::zeros(working.len()));
        let step = &u_eq - &u;

        if step.norm() > 1e-14 * (1.0 + u_eq.norm()) {
            let bu = &qp.b * &u;
            let bstep = &qp.b * &step;
            let mut alpha = 1.0;
            let mut blocking = None;
            for i in (0..m).filter(|i| !working.contains(i)) {
                if bstep[i] < -1e-14 * (1.0 + bstep.amax()) {
                    let ratio = bu[i].max(0.0) / -bstep[i];
                    if ratio < alpha {
                        alpha = ratio;
                        blocking = Some(i);
                    }
                }
            }
            if let Some(i) = blocking {
                u += step * alpha;
                working.push(i);
                working.sort_unstable();
                continue;
            }
            u = u_eq;
        }

        // Stationary on the working set: release the most negative multiplier.
        let mut release: Option<(usize, f64)> = None;
        for (k, &lam) in lambda_w.iter().enumerate() {
            if lam < -tol && release.map_or(true, |(_, best)| lam < best) {
                release = Some((k, lam));
            }
        }
        match release {
            Some((k, _)) => {
                working.remove(k);
            }
            None => {
                let mut lambda = DVector::zeros(m);
                for (k, &i) in working.iter().enumerate() {
                    lambda[i] = lambda_w[k];
                }
                return Ok((u, lambda, working));
            }
        }
    }
    Err(MinimaxError::MaxIterations(max_iter))
}

/// Largest violation of the optimality conditions at `(u, lambda)`.
pub fn kkt_residual(qp: &ConeQp, u: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
    let stationarity = (&qp.a * u - &qp.f - qp.b.transpose() * lambda).norm();
    let bu = &qp.b * u;
    match qp.cone {
        ConeKind::Equality => stationarity.max(bu.norm()),
        ConeKind::Inequality => {
            let primal = (-bu.min()).max(0.0);
            let dual = (-lambda.min()).max(0.0);
            let comp = lambda.dot(&bu).abs();
            stationarity.max(primal).max(dual).max(comp)
        }
    }
}

/// `E(u) = 1/2 u' A u - f' u`.
pub fn objective_value(qp: &ConeQp, u: &DVector<f64>) -> Result<f64> {
    check_dim("u length", qp.n(), u.len())?;
    Ok(0.5 * u.dot(&(&qp.a * u)) - qp.f.dot(u))
}

/// `L(u, lambda) = E(u) - lambda' B u`.
pub fn lagrangian_value(qp: &ConeQp, u: &DVector<f64>, lambda: &DVector<f64>) -> Result<f64> {
    check_dim("lambda length", qp.m(), lambda.len())?;
    Ok(objective_value(qp, u)? - lambda.dot(&(&qp.b * u)))
}

/// `L1(u, lambda) = 1/2 u' A1 u - f1' u - lambda' B1 u` at the saddle point.
pub fn shape_derivative(qp: &ConeQp, dir: &Perturbation, sp: &SaddlePoint) -> Result<f64> {
    dir.check_against(qp)?;
    check_dim("u length", qp.n(), sp.u.len())?;
    check_dim("lambda length", qp.m(), sp.lambda.len())?;
    let u = &sp.u;
    Ok(0.5 * u.dot(&(&dir.a1 * u)) - dir.f1.dot(u) - sp.lambda.dot(&(&dir.b1 * u)))
}

/// `(A + s A1, B + s B1, f + s f1)`; fails once `s` leaves the admissible interval.
pub fn perturbed_qp(qp: &ConeQp, dir: &Perturbation, s: f64) -> Result<ConeQp> {
    dir.check_against(qp)?;
    ConeQp::new(
        &qp.a + &dir.a1 * s,
        &qp.b + &dir.b1 * s,
        &qp.f + &dir.f1 * s,
        qp.cone,
    )
}

/// Optimal value of the perturbed problem at parameter `s`.
pub fn optimal_value_at(qp: &ConeQp, dir: &Perturbation, s: f64) -> Result<f64> {
    let pqp = perturbed_qp(qp, dir, s)?;
    let sp = solve_saddle_point(&pqp)?;
    objective_value(&pqp, &sp.u)
}

/// Central difference `(E(+s) - E(-s)) / 2s` of the optimal value.
pub fn fd_derivative(qp: &ConeQp, dir: &Perturbation, s: f64) -> Result<f64> {
    let plus = optimal_value_at(qp, dir, s)?;
    let minus = optimal_value_at(qp, dir, -s)?;
    Ok((plus - minus) / (2.0 * s))
}

/// The discrete inf-sup constant: smallest singular value of `B L^-T`, `A = L L'`.
/// Positive iff the multiplier is unique; `+inf` without constraints.
pub fn check_lbb(qp: &ConeQp) -> Result<f64> {
    if qp.m() == 0 {
        return Ok(f64::INFINITY);
    }
    if qp.m() > qp.n() {
        return Ok(0.0);
    }
    Ok(weighted_singular_values(&qp.a, &qp.b)?.min())
}

fn weighted_singular_values(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DVector<f64>> {
    let chol = Cholesky::new(a.clone()).ok_or(MinimaxError::NotPositiveDefinite)?;
    if b.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    let mut x = b.transpose();
    chol.l_dirty().solve_lower_triangular_mut(&mut x);
    Ok(x.singular_values())
}

/// Derivative check over a list of step sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub l1: f64,
    pub rows: Vec<FdRow>,
    pub slope: Slope,
}

pub fn fd_table(qp: &ConeQp, dir: &Perturbation, s_list: &[f64]) -> Result<FdReport> {
    let sp = solve_saddle_point(qp)?;
    let l1 = shape_derivative(qp, dir, &sp)?;
    let rows = s_list
        .iter()
        .map(|&s| Ok(FdRow::new(s, fd_derivative(qp, dir, s)?, l1)))
        .collect::<Result<Vec<_>>>()?;
    let slope = table_slope(&rows);
    Ok(FdReport { l1, rows, slope })
}
