//! Stationary velocity fields and the flows they generate.
//!
//! A field `Λ` defines the domain perturbation `φ_s` through `dφ/ds = Λ(φ)`, `φ_0 = x`.
//! The flow Jacobian follows the variational equation `dJ/ds = ∇Λ(φ) J`, `J_0 = I`,
//! and both are advanced together by fixed-step classical RK4.

use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

use crate::slope::{loglog_slope, Slope};

pub type Point = Vector2<f64>;

/// Default number of RK4 steps per flow evaluation.
pub const DEFAULT_STEPS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("flow integration needs at least one step")]
    ZeroSteps,
    #[error("flow Jacobian determinant {det:e} is not positive at s = {s:e}")]
    NonPositiveJacobian { s: f64, det: f64 },
}

/// Closed-form velocity families with exact derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    Zero,
    Constant { b: Vector2<f64> },
    /// `Λ(x) = M x + b`.
    Affine { m: Matrix2<f64>, b: Vector2<f64> },
    /// `Λ(x) = ω (-x2, x1)`.
    Rotation { omega: f64 },
    /// Per component `c0 + c1 x1 + c2 x2 + c3 x1² + c4 x1 x2 + c5 x2²`.
    Quadratic { coeffs: [[f64; 6]; 2] },
}

/// Axis-aligned box outside of which the field is ramped to zero over `width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: Point,
    pub hi: Point,
    pub width: f64,
}

/// `1 - (6t⁵ - 15t⁴ + 10t³)` on `[0, 1]`: C² with vanishing first and second
/// derivatives at both ends.
fn ramp(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (1.0, 0.0)
    } else if t >= 1.0 {
        (0.0, 0.0)
    } else {
        let value = 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
        let slope = -30.0 * t * t * (1.0 - t) * (1.0 - t);
        (value, slope)
    }
}

impl Window {
    /// Cutoff value and gradient.
    fn cutoff(&self, x: &Point) -> (f64, Vector2<f64>) {
        let mut vals = [0.0; 2];
        let mut ders = [0.0; 2];
        for k in 0..2 {
            let (dist, dir) = if x[k] < self.lo[k] {
                (self.lo[k] - x[k], -1.0)
            } else if x[k] > self.hi[k] {
                (x[k] - self.hi[k], 1.0)
            } else {
                (0.0, 0.0)
            };
            let (v, d) = ramp(dist / self.width);
            vals[k] = v;
            ders[k] = d * dir / self.width;
        }
        (
            vals[0] * vals[1],
            Vector2::new(ders[0] * vals[1], vals[0] * ders[1]),
        )
    }
}

/// The kinematic velocity `Λ`, optionally localized by a [`Window`].
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub kind: FieldKind,
    pub window: Option<Window>,
}

impl VelocityField {
    pub fn new(kind: FieldKind) -> Self {
        Self { kind, window: None }
    }

    pub fn zero() -> Self {
        Self::new(FieldKind::Zero)
    }

    pub fn constant(b: [f64; 2]) -> Self {
        Self::new(FieldKind::Constant { b: Vector2::from(b) })
    }

    /// `m` is row-major: `m[i][j] = ∂Λ_i/∂x_j`.
    pub fn affine(m: [[f64; 2]; 2], b: [f64; 2]) -> Self {
        Self::new(FieldKind::Affine {
            m: Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]),
            b: Vector2::from(b),
        })
    }

    pub fn rotation(omega: f64) -> Self {
        Self::new(FieldKind::Rotation { omega })
    }

    pub fn quadratic(coeffs: [[f64; 6]; 2]) -> Self {
        Self::new(FieldKind::Quadratic { coeffs })
    }

    pub fn with_window(mut self, window: Window) -> Self {
        self.window = Some(window);
        self
    }

    /// `c Λ`.
    pub fn scaled(&self, c: f64) -> Self {
        let kind = match &self.kind {
            FieldKind::Zero => FieldKind::Zero,
            FieldKind::Constant { b } => FieldKind::Constant { b: b * c },
            FieldKind::Affine { m, b } => FieldKind::Affine { m: m * c, b: b * c },
            FieldKind::Rotation { omega } => FieldKind::Rotation { omega: omega * c },
            FieldKind::Quadratic { coeffs } => {
                let mut q = *coeffs;
                q.iter_mut().flatten().for_each(|v| *v *= c);
                FieldKind::Quadratic { coeffs: q }
            }
        };
        Self { kind, window: self.window }
    }

    /// `-Λ`, whose flow is the inverse map.
    pub fn reversed(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            FieldKind::Zero => true,
            FieldKind::Constant { b } => b.iter().all(|&v| v == 0.0),
            FieldKind::Affine { m, b } => m.iter().chain(b.iter()).all(|&v| v == 0.0),
            FieldKind::Rotation { omega } => *omega == 0.0,
            FieldKind::Quadratic { coeffs } => coeffs.iter().flatten().all(|&v| v == 0.0),
        }
    }

    fn raw(&self, x: &Point) -> (Vector2<f64>, Matrix2<f64>) {
        match &self.kind {
            FieldKind::Zero => (Vector2::zeros(), Matrix2::zeros()),
            FieldKind::Constant { b } => (*b, Matrix2::zeros()),
            FieldKind::Affine { m, b } => (m * x + b, *m),
            FieldKind::Rotation { omega } => (
                Vector2::new(-omega * x[1], omega * x[0]),
                Matrix2::new(0.0, -omega, *omega, 0.0),
            ),
            FieldKind::Quadratic { coeffs } => {
                let (x1, x2) = (x[0], x[1]);
                let mut v = Vector2::zeros();
                let mut jac = Matrix2::zeros();
                for (i, c) in coeffs.iter().enumerate() {
                    v[i] = c[0] + c[1] * x1 + c[2] * x2 + c[3] * x1 * x1 + c[4] * x1 * x2 + c[5] * x2 * x2;
                    jac[(i, 0)] = c[1] + 2.0 * c[3] * x1 + c[4] * x2;
                    jac[(i, 1)] = c[2] + c[4] * x1 + 2.0 * c[5] * x2;
                }
                (v, jac)
            }
        }
    }

    /// Value and Jacobian `∇Λ` (entry `(i, j)` is `∂Λ_i/∂x_j`).
    pub fn value_and_jacobian(&self, x: &Point) -> (Vector2<f64>, Matrix2<f64>) {
        let (v, jac) = self.raw(x);
        match &self.window {
            None => (v, jac),
            Some(w) => {
                let (chi, grad) = w.cutoff(x);
                (v * chi, jac * chi + v * grad.transpose())
            }
        }
    }

    pub fn evaluate(&self, x: &Point) -> Vector2<f64> {
        self.value_and_jacobian(x).0
    }

    pub fn jacobian(&self, x: &Point) -> Matrix2<f64> {
        self.value_and_jacobian(x).1
    }

    pub fn divergence(&self, x: &Point) -> f64 {
        self.jacobian(x).trace()
    }
}

/// Image point, flow Jacobian `∇φ_s` and its determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSample {
    pub point: Point,
    pub jacobian: Matrix2<f64>,
    pub det: f64,
}

/// Advances `(φ, ∇φ)` from `x` to parameter `s` with `steps` RK4 steps.
pub fn integrate_flow(field: &VelocityField, x: &Point, s: f64, steps: usize) -> Result<FlowSample, FlowError> {
    if steps == 0 {
        return Err(FlowError::ZeroSteps);
    }
    let mut y = *x;
    let mut jac = Matrix2::identity();
    if field.is_zero() || s == 0.0 {
        return Ok(FlowSample { point: y, jacobian: jac, det: 1.0 });
    }
    let h = s / steps as f64;
    let rhs = |y: &Point, j: &Matrix2<f64>| {
        let (v, g) = field.value_and_jacobian(y);
        (v, g * j)
    };
    for k in 0..steps {
        let (k1y, k1j) = rhs(&y, &jac);
        let (k2y, k2j) = rhs(&(y + k1y * (0.5 * h)), &(jac + k1j * (0.5 * h)));
        let (k3y, k3j) = rhs(&(y + k2y * (0.5 * h)), &(jac + k2j * (0.5 * h)));
        let (k4y, k4j) = rhs(&(y + k3y * h), &(jac + k3j * h));
        y += (k1y + k2y * 2.0 + k3y * 2.0 + k4y) * (h / 6.0);
        jac += (k1j + k2j * 2.0 + k3j * 2.0 + k4j) * (h / 6.0);
        let det = jac.determinant();
        if !(det > 0.0) {
            return Err(FlowError::NonPositiveJacobian { s: h * (k + 1) as f64, det });
        }
    }
    Ok(FlowSample { point: y, jacobian: jac, det: jac.determinant() })
}

/// `φ_s^{-1}(y)` and its Jacobian, by integrating `-Λ` from `y`.
pub fn inverse_flow(field: &VelocityField, y: &Point, s: f64, steps: usize) -> Result<FlowSample, FlowError> {
    integrate_flow(&field.reversed(), y, s, steps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionRow {
    pub s: f64,
    /// Frobenius norm of `∇_y φ_s^{-1}(φ_s(x)) - (I - s ∇Λ(x))`.
    pub r1: f64,
    /// `|det ∇φ_s(x) - (1 + s div Λ(x))|`.
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionReport {
    pub rows: Vec<ExpansionRow>,
    pub slope_r1: Slope,
    pub slope_r2: Slope,
}

/// Measures the first-order expansions of the inverse Jacobian and of the
/// Jacobian determinant at `x`.
pub fn expansion_check(
    field: &VelocityField,
    x: &Point,
    s_list: &[f64],
    steps: usize,
) -> Result<ExpansionReport, FlowError> {
    let (_, grad) = field.value_and_jacobian(x);
    let div = grad.trace();
    let mut rows = Vec::with_capacity(s_list.len());
    for &s in s_list {
        let fwd = integrate_flow(field, x, s, steps)?;
        let inv = inverse_flow(field, &fwd.point, s, steps)?;
        let r1 = (inv.jacobian - (Matrix2::identity() - grad * s)).norm();
        let r2 = (fwd.det - (1.0 + s * div)).abs();
        rows.push(ExpansionRow { s, r1, r2 });
    }
    let slope_r1 = loglog_slope(&rows.iter().map(|r| (r.s, r.r1)).collect::<Vec<_>>());
    let slope_r2 = loglog_slope(&rows.iter().map(|r| (r.s, r.r2)).collect::<Vec<_>>());
    Ok(ExpansionReport { rows, slope_r1, slope_r2 })
}
