//! Shape derivative of the Stokes energy under the flow of a velocity field Λ.
//!
//! With `(u, λ)` the discrete saddle point, the derivative is
//!
//! ```text
//! L1 = E1 + ∫ λ Σ_ij Λ_{j,i} u_{i,j},    E1 = 1/2 u'A1u - f1'u
//! ```
//!
//! where `A1`, `B1`, `f1` are the first-order terms of the pulled-back forms:
//!
//! ```text
//! A1 : ∫ ∇w_c' ((div Λ) I - ∇Λ - ∇Λ') ∇v_c
//! B1 : ∫ p ((div Λ) div v - Σ_ij Λ_{j,i} v_{i,j})
//! f1 : ∫ ((div Λ) f + ∇f Λ) · v
//! ```
//!
//! [`fd_verify`] checks `L1` against central differences of the energy on
//! meshes transported by `±s`.

use nalgebra::{DVector, Matrix2, Vector2};
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::fem::quadrature::TRIANGLE_DEGREE4;
use crate::fem::stokes::{assemble_forms, FormKernels};
use crate::fem::{assemble, energy, solve_stokes_with, ForceField, FunctionSpace, StokesError, StokesSolution, StokesSystem};
use crate::flow::{Point, VelocityField};
use crate::mesh::{transport_mesh, BoundaryTag, MeshError, TriMesh};
use crate::slope::{table_slope, FdRow, Slope};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error(transparent)]
    Stokes(#[from] StokesError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("the derivative does not cover Neumann traction data; use g = 0")]
    TractionUnsupported,
    #[error("pure-Dirichlet mesh required, found {0} Neumann edges")]
    NotPureDirichlet(usize),
    #[error("velocity field is not divergence free (div = {0:.3e})")]
    NotDivergenceFree(f64),
    #[error("step sizes must be positive and finite, got {0}")]
    InvalidStep(f64),
}

pub type Result<T> = std::result::Result<T, ShapeError>;

#[derive(Debug, Clone)]
pub struct PerturbationForms {
    pub a1: CsrMatrix<f64>,
    pub b1: CsrMatrix<f64>,
    pub f1: DVector<f64>,
}

/// Assembles `A1`, `B1`, `f1` on the free dofs of `space`.
pub fn assemble_perturbation(space: &FunctionSpace, field: &VelocityField, force: &ForceField) -> PerturbationForms {
    let stiffness = |x: &Point| {
        let (_, j) = field.value_and_jacobian(x);
        Matrix2::identity() * j.trace() - j - j.transpose()
    };
    let divergence = |x: &Point| {
        let (_, j) = field.value_and_jacobian(x);
        Matrix2::identity() * j.trace() - j.transpose()
    };
    let load = |x: &Point| {
        let (v, j) = field.value_and_jacobian(x);
        force.value(x) * j.trace() + force.gradient(x) * v
    };
    let kernels = FormKernels { stiffness: &stiffness, divergence: &divergence, load: &load };
    let (a1, b1, f1) = assemble_forms(space, &kernels);
    PerturbationForms { a1, b1, f1 }
}

/// The part of `B1` coming from `-Σ Λ_{j,i} v_{i,j}` alone.
pub fn assemble_b1_trace_part(space: &FunctionSpace, field: &VelocityField) -> CsrMatrix<f64> {
    let zero = |_: &Point| Matrix2::zeros();
    let divergence = |x: &Point| -field.jacobian(x).transpose();
    let load = |_: &Point| Vector2::zeros();
    let kernels = FormKernels { stiffness: &zero, divergence: &divergence, load: &load };
    assemble_forms(space, &kernels).1
}

/// `∫ λ Σ_ij Λ_{j,i} u_{i,j}` by direct quadrature.
pub fn dual_term(space: &FunctionSpace, field: &VelocityField, sol: &StokesSolution) -> f64 {
    let mut total = 0.0;
    for t in 0..space.mesh().triangles().len() {
        let geo = space.geometry(t);
        let local = space.local_velocity(&sol.u, t);
        for (l, weight) in TRIANGLE_DEGREE4 {
            let x = geo.point_at(&l);
            let (_, grad_u) = FunctionSpace::velocity_at(&local, &geo.p2(&l));
            let lambda = space.pressure_at(&sol.lambda, t, &l);
            total += weight * geo.area * lambda * (grad_u * field.jacobian(&x)).trace();
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport {
    /// The shape derivative `E1 + dual_term`.
    pub l1: f64,
    pub e1: f64,
    pub dual_term: f64,
    /// The same derivative evaluated as `E1 - λ'B1u`.
    pub l1_from_b1: f64,
    /// Energy of the unperturbed problem.
    pub energy: f64,
    /// `u'Au` of the unperturbed problem, a natural magnitude for `L1`.
    pub velocity_energy: f64,
    pub fd_table: Vec<FdRow>,
    pub slope: Slope,
    /// Forward differences `(E(s) - E(0))/s` against `L1`.
    pub one_sided: Vec<FdRow>,
    pub one_sided_slope: Slope,
}

/// Evaluates the derivative at a solved saddle point.
pub fn stokes_shape_derivative(
    sys: &StokesSystem,
    sol: &StokesSolution,
    forms: &PerturbationForms,
    field: &VelocityField,
) -> Result<DerivativeReport> {
    if sys.has_traction() {
        return Err(ShapeError::TractionUnsupported);
    }
    let load = sys.load();
    let (momentum, divergence) = sys.residuals(&sol.u, &sol.lambda)?;
    let bad = momentum.max(divergence);
    if momentum > 1e-8 * (1.0 + load.norm()) || divergence > 1e-8 {
        return Err(StokesError::UnsolvedSolution(bad).into());
    }
    let n_u = sys.space().n_u();
    if forms.f1.len() != n_u || forms.a1.nrows() != n_u || forms.b1.nrows() != sys.space().n_p() {
        return Err(StokesError::DimensionMismatch { what: "perturbation forms", expected: n_u, found: forms.f1.len() }
            .into());
    }
    let u = &sol.u;
    let e1 = 0.5 * u.dot(&(&forms.a1 * u)) - forms.f1.dot(u);
    let dual = dual_term(sys.space(), field, sol);
    let l1_from_b1 = e1 - sol.lambda.dot(&(&forms.b1 * u));
    let velocity_energy = u.dot(&(sys.a() * u));
    Ok(DerivativeReport {
        l1: e1 + dual,
        e1,
        dual_term: dual,
        l1_from_b1,
        energy: energy(sys, sol)?,
        velocity_energy,
        fd_table: Vec::new(),
        slope: Slope::Undetermined,
        one_sided: Vec::new(),
        one_sided_slope: Slope::Undetermined,
    })
}

fn energy_on(mesh: &TriMesh, force: &ForceField, field: &VelocityField, s: f64, steps: usize, mode: crate::fem::PressureMode) -> Result<f64> {
    let moved = transport_mesh(mesh, field, s, steps)?;
    let sys = assemble(&moved, force, None)?;
    let sol = solve_stokes_with(&sys, mode)?;
    Ok(energy(&sys, &sol)?)
}

/// Computes the derivative on `mesh` and compares it with central differences
/// of the energy over meshes transported by `±s` for each `s` in `s_list`.
pub fn fd_verify(
    mesh: &TriMesh,
    force: &ForceField,
    field: &VelocityField,
    s_list: &[f64],
    steps: usize,
) -> Result<DerivativeReport> {
    if let Some(&bad) = s_list.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(ShapeError::InvalidStep(bad));
    }
    let sys = assemble(mesh, force, None)?;
    let mode = sys.default_mode();
    let sol = solve_stokes_with(&sys, mode)?;
    let forms = assemble_perturbation(sys.space(), field, force);
    let mut report = stokes_shape_derivative(&sys, &sol, &forms, field)?;

    let jobs: Vec<f64> = s_list.iter().flat_map(|&s| [s, -s]).collect();
    let energies = jobs
        .par_iter()
        .map(|&s| energy_on(mesh, force, field, s, steps, mode))
        .collect::<Result<Vec<f64>>>()?;
    let e0 = report.energy;
    for (k, &s) in s_list.iter().enumerate() {
        let (plus, minus) = (energies[2 * k], energies[2 * k + 1]);
        report.fd_table.push(FdRow::new(s, (plus - minus) / (2.0 * s), report.l1));
        report.one_sided.push(FdRow::new(s, (plus - e0) / s, report.l1));
    }
    report.slope = table_slope(&report.fd_table);
    report.one_sided_slope = table_slope(&report.one_sided);
    Ok(report)
}

/// Area-preserving check on a pure-Dirichlet domain: rotation with angular
/// velocity `omega`, pressure fixed to zero mean.
pub fn corollary3_check(
    mesh: &TriMesh,
    force: &ForceField,
    omega: f64,
    s_list: &[f64],
    steps: usize,
) -> Result<DerivativeReport> {
    let neumann = mesh.edges_with_tag(BoundaryTag::Neumann).count();
    if neumann > 0 {
        return Err(ShapeError::NotPureDirichlet(neumann));
    }
    let field = VelocityField::rotation(omega);
    let div = mesh.vertices().iter().map(|x| field.divergence(x).abs()).fold(0.0, f64::max);
    if div > 0.0 {
        return Err(ShapeError::NotDivergenceFree(div));
    }
    fd_verify(mesh, force, &field, s_list, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::solve_stokes;
    use crate::mesh::{unit_square_mesh, Side};
    use nalgebra_sparse::convert::serial::convert_csr_dense;

    fn forms_on(n: usize, field: &VelocityField, force: &ForceField) -> (StokesSystem, PerturbationForms) {
        let sys = assemble(&unit_square_mesh(n, &[Side::Right]), force, None).unwrap();
        let forms = assemble_perturbation(sys.space(), field, force);
        (sys, forms)
    }

    #[test]
    fn zero_and_constant_fields_give_zero_forms() {
        for field in [VelocityField::zero(), VelocityField::constant([0.3, -0.7])] {
            let (_, forms) = forms_on(3, &field, &ForceField::Constant([1.0, 2.0]));
            assert!(forms.a1.values().iter().all(|&v| v == 0.0));
            assert!(forms.b1.values().iter().all(|&v| v == 0.0));
            assert_eq!(forms.f1.amax(), 0.0);
        }
    }

    #[test]
    fn identity_field_reproduces_b() {
        let field = VelocityField::affine([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0]);
        let (sys, forms) = forms_on(3, &field, &ForceField::Zero);
        assert!(forms.a1.values().iter().all(|&v| v.abs() < 1e-15));
        let diff = convert_csr_dense(&forms.b1) - convert_csr_dense(sys.b());
        assert!(diff.amax() < 1e-15);
    }

    #[test]
    fn a1_is_symmetric() {
        let field = VelocityField::quadratic([[0.1, 0.2, -0.3, 0.4, 0.5, -0.6], [0.0, -0.2, 0.7, 0.1, -0.3, 0.2]]);
        let (_, forms) = forms_on(4, &field, &ForceField::Trig);
        let a1 = convert_csr_dense(&forms.a1);
        assert!((&a1 - a1.transpose()).amax() <= 1e-14 * a1.amax());
    }

    #[test]
    fn zero_field_has_zero_derivative() {
        let (sys, forms) = forms_on(4, &VelocityField::zero(), &ForceField::Trig);
        let sol = solve_stokes(&sys).unwrap();
        let r = stokes_shape_derivative(&sys, &sol, &forms, &VelocityField::zero()).unwrap();
        assert_eq!((r.l1, r.e1, r.dual_term), (0.0, 0.0, 0.0));
    }

    #[test]
    fn traction_is_rejected() {
        let mesh = unit_square_mesh(2, &[Side::Right]);
        let sys = assemble(&mesh, &ForceField::Zero, Some(&crate::fem::TractionField::Constant([1.0, 0.0]))).unwrap();
        let sol = solve_stokes(&sys).unwrap();
        let field = VelocityField::rotation(1.0);
        let forms = assemble_perturbation(sys.space(), &field, &ForceField::Zero);
        assert_eq!(stokes_shape_derivative(&sys, &sol, &forms, &field), Err(ShapeError::TractionUnsupported));
    }

    #[test]
    fn unsolved_input_is_rejected() {
        let (sys, forms) = forms_on(3, &VelocityField::rotation(1.0), &ForceField::Trig);
        let mut sol = solve_stokes(&sys).unwrap();
        sol.u[0] += 1.0;
        let err = stokes_shape_derivative(&sys, &sol, &forms, &VelocityField::rotation(1.0)).unwrap_err();
        assert!(matches!(err, ShapeError::Stokes(StokesError::UnsolvedSolution(_))));
    }

    #[test]
    fn invalid_steps_and_tagging_are_rejected() {
        let mesh = unit_square_mesh(2, &[Side::Right]);
        let err = fd_verify(&mesh, &ForceField::Zero, &VelocityField::zero(), &[1e-2, 0.0], 4).unwrap_err();
        assert_eq!(err, ShapeError::InvalidStep(0.0));
        let err = corollary3_check(&mesh, &ForceField::Zero, 1.0, &[1e-2], 4).unwrap_err();
        assert_eq!(err, ShapeError::NotPureDirichlet(2));
    }
}
