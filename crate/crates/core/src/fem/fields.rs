//! Registry of analytic body forces, boundary tractions and exact Stokes solutions.
//!
//! Forces are defined on all of ℝ² with exact gradients, so they can be evaluated
//! on transported meshes and differentiated along a flow.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix2, Vector2};

use crate::flow::Point;

/// Body force `f` with its Jacobian (row `i` is `∇f_i`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForceField {
    Zero,
    /// Also the gradient of the linear potential `c · x`.
    Constant([f64; 2]),
    /// `c (-x2, x1)`; commutes with rotations about the origin.
    Swirl(f64),
    /// Forcing of the [`ExactSolution::Trig`] flow.
    Trig,
}

impl ForceField {
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self, String> {
        let need = |k: usize| {
            if params.len() == k {
                Ok(())
            } else {
                Err(format!("force `{name}` takes {k} parameter(s), got {}", params.len()))
            }
        };
        match name {
            "zero" => need(0).map(|_| ForceField::Zero),
            "constant" | "gradient-of-linear" => need(2).map(|_| ForceField::Constant([params[0], params[1]])),
            "swirl" => need(1).map(|_| ForceField::Swirl(params[0])),
            "trig" | "trigonometric-manufactured" => need(0).map(|_| ForceField::Trig),
            other => Err(format!("unknown force field `{other}`")),
        }
    }

    pub fn value(&self, x: &Point) -> Vector2<f64> {
        match *self {
            ForceField::Zero => Vector2::zeros(),
            ForceField::Constant(c) => Vector2::from(c),
            ForceField::Swirl(c) => Vector2::new(-c * x[1], c * x[0]),
            ForceField::Trig => {
                let (sx, cx) = (PI * x[0]).sin_cos();
                let (sy, cy) = (PI * x[1]).sin_cos();
                let (s2x, c2x) = (2.0 * PI * x[0]).sin_cos();
                let (s2y, c2y) = (2.0 * PI * x[1]).sin_cos();
                let p3 = PI.powi(3);
                Vector2::new(
                    -2.0 * p3 * s2y * (2.0 * c2x - 1.0) + PI * cx * sy,
                    2.0 * p3 * s2x * (2.0 * c2y - 1.0) + PI * sx * cy,
                )
            }
        }
    }

    pub fn gradient(&self, x: &Point) -> Matrix2<f64> {
        match *self {
            ForceField::Zero | ForceField::Constant(_) => Matrix2::zeros(),
            ForceField::Swirl(c) => Matrix2::new(0.0, -c, c, 0.0),
            ForceField::Trig => {
                let (sx, cx) = (PI * x[0]).sin_cos();
                let (sy, cy) = (PI * x[1]).sin_cos();
                let (s2x, c2x) = (2.0 * PI * x[0]).sin_cos();
                let (s2y, c2y) = (2.0 * PI * x[1]).sin_cos();
                let (p2, p4) = (PI * PI, PI.powi(4));
                Matrix2::new(
                    8.0 * p4 * s2x * s2y - p2 * sx * sy,
                    -4.0 * p4 * c2y * (2.0 * c2x - 1.0) + p2 * cx * cy,
                    4.0 * p4 * c2x * (2.0 * c2y - 1.0) + p2 * cx * cy,
                    -8.0 * p4 * s2x * s2y - p2 * sx * sy,
                )
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            ForceField::Zero => true,
            ForceField::Constant(c) => c == [0.0, 0.0],
            ForceField::Swirl(c) => c == 0.0,
            ForceField::Trig => false,
        }
    }
}

impl fmt::Display for ForceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForceField::Zero => write!(f, "zero"),
            ForceField::Constant(c) => write!(f, "constant({:?}, {:?})", c[0], c[1]),
            ForceField::Swirl(c) => write!(f, "swirl({c:?})"),
            ForceField::Trig => write!(f, "trig"),
        }
    }
}

/// Closed-form Stokes solutions used for exactness and convergence checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactSolution {
    /// `u = (x2 (1 - x2), 0)`, `λ = 2 (1 - x1)`, `f = 0`. Representable by P2/P1.
    Poiseuille,
    /// `u = curl(sin²(πx1) sin²(πx2))`, `λ = sin(πx1) sin(πx2)`, `f = ForceField::Trig`.
    Trig,
}

impl ExactSolution {
    pub fn from_name(name: &str) -> Result<Self, String> {
        match name {
            "poiseuille" => Ok(ExactSolution::Poiseuille),
            "trig" | "trigonometric-manufactured" => Ok(ExactSolution::Trig),
            other => Err(format!("unknown exact solution `{other}`")),
        }
    }

    pub fn velocity(&self, x: &Point) -> Vector2<f64> {
        match self {
            ExactSolution::Poiseuille => Vector2::new(x[1] * (1.0 - x[1]), 0.0),
            ExactSolution::Trig => {
                let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
                let (s2x, s2y) = ((2.0 * PI * x[0]).sin(), (2.0 * PI * x[1]).sin());
                Vector2::new(PI * sx * sx * s2y, -PI * s2x * sy * sy)
            }
        }
    }

    /// Entry `(i, j)` is `∂u_i/∂x_j`.
    pub fn velocity_gradient(&self, x: &Point) -> Matrix2<f64> {
        match self {
            ExactSolution::Poiseuille => Matrix2::new(0.0, 1.0 - 2.0 * x[1], 0.0, 0.0),
            ExactSolution::Trig => {
                let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
                let (s2x, c2x) = (2.0 * PI * x[0]).sin_cos();
                let (s2y, c2y) = (2.0 * PI * x[1]).sin_cos();
                let p2 = PI * PI;
                Matrix2::new(
                    p2 * s2x * s2y,
                    2.0 * p2 * sx * sx * c2y,
                    -2.0 * p2 * sy * sy * c2x,
                    -p2 * s2x * s2y,
                )
            }
        }
    }

    pub fn pressure(&self, x: &Point) -> f64 {
        match self {
            ExactSolution::Poiseuille => 2.0 * (1.0 - x[0]),
            ExactSolution::Trig => (PI * x[0]).sin() * (PI * x[1]).sin(),
        }
    }

    pub fn forcing(&self) -> ForceField {
        match self {
            ExactSolution::Poiseuille => ForceField::Zero,
            ExactSolution::Trig => ForceField::Trig,
        }
    }
}

/// Neumann boundary data `g` in `∂u/∂n - λ n = g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TractionField {
    Zero,
    Constant([f64; 2]),
    /// The traction `(∇u) n - λ n` of an exact solution.
    Exact(ExactSolution),
}

impl TractionField {
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self, String> {
        match (name, params.len()) {
            ("zero", 0) => Ok(TractionField::Zero),
            ("constant", 2) => Ok(TractionField::Constant([params[0], params[1]])),
            ("poiseuille" | "poiseuille-traction", 0) => Ok(TractionField::Exact(ExactSolution::Poiseuille)),
            ("trig" | "trig-traction", 0) => Ok(TractionField::Exact(ExactSolution::Trig)),
            ("zero" | "constant" | "poiseuille" | "poiseuille-traction" | "trig" | "trig-traction", k) => {
                Err(format!("traction `{name}` does not take {k} parameter(s)"))
            }
            (other, _) => Err(format!("unknown traction field `{other}`")),
        }
    }

    pub fn value(&self, x: &Point, normal: &Vector2<f64>) -> Vector2<f64> {
        match self {
            TractionField::Zero => Vector2::zeros(),
            TractionField::Constant(c) => Vector2::from(*c),
            TractionField::Exact(sol) => sol.velocity_gradient(x) * normal - normal * sol.pressure(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TractionField::Zero => true,
            TractionField::Constant(c) => *c == [0.0, 0.0],
            TractionField::Exact(_) => false,
        }
    }
}

impl fmt::Display for TractionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TractionField::Zero => write!(f, "zero"),
            TractionField::Constant(c) => write!(f, "constant({:?}, {:?})", c[0], c[1]),
            TractionField::Exact(ExactSolution::Poiseuille) => write!(f, "poiseuille"),
            TractionField::Exact(ExactSolution::Trig) => write!(f, "trig"),
        }
    }
}
