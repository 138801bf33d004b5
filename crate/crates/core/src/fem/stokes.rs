//! Assembly and direct solution of the Taylor-Hood Stokes saddle-point system
//!
//! ```text
//! [  A  -B' ] [ u ]   [ f + g ]
//! [ -B   0  ] [ λ ] = [   0   ]
//! ```
//!
//! with `A` the vector Laplacian and `B[p, (j, c)] = ∫ ψ_p ∂_c φ_j`.
//!
//! The velocity block is factored by sparse Cholesky; the pressure is recovered
//! from the dense Schur complement `S = B A⁻¹ B'`. That is a block LDL' of the
//! bordered matrix, which is enough at the mesh sizes this crate targets.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};
use rayon::prelude::*;
use thiserror::Error;

use super::fields::{ExactSolution, ForceField, TractionField};
use super::quadrature::{EDGE_GAUSS3, TRIANGLE_DEGREE4};
use super::space::FunctionSpace;
use crate::flow::Point;
use crate::mesh::{unit_square_mesh, BoundaryTag, MeshError, Side, TriMesh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StokesError {
    #[error("mesh has no Dirichlet edge; the velocity block would be singular")]
    EmptyDirichletBoundary,
    #[error("saddle-point system is singular: {0}")]
    SingularSystem(String),
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("solution does not solve the system: residual {0:.3e}")]
    UnsolvedSolution(f64),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

pub type Result<T> = std::result::Result<T, StokesError>;

/// How the pressure constant is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureMode {
    /// Pressure determined by the Neumann boundary.
    Free,
    /// Pure Dirichlet: pressure dof 0 pinned during the solve, then shifted to zero mean.
    Pinned,
}

#[derive(Debug, Clone)]
pub struct StokesSystem {
    space: FunctionSpace,
    a: CsrMatrix<f64>,
    b: CsrMatrix<f64>,
    f: DVector<f64>,
    g: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct StokesSolution {
    pub u: DVector<f64>,
    pub lambda: DVector<f64>,
    pub momentum_residual: f64,
    pub divergence_residual: f64,
}

type MatrixKernel<'a> = &'a (dyn Fn(&Point) -> Matrix2<f64> + Sync);
type VectorKernel<'a> = &'a (dyn Fn(&Point) -> Vector2<f64> + Sync);

/// Integrands of the three bilinear/linear forms assembled over the triangles:
///
/// - `stiffness` K: `∫ ∇φ_k' K ∇φ_l`, applied to each velocity component;
/// - `divergence` N: `∫ ψ_p (N ∇φ_k)_c` for velocity dof `(k, c)`;
/// - `load` F: `∫ F_c φ_k`.
pub(crate) struct FormKernels<'a> {
    pub stiffness: MatrixKernel<'a>,
    pub divergence: MatrixKernel<'a>,
    pub load: VectorKernel<'a>,
}

struct ElementForms {
    stiffness: [[f64; 6]; 6],
    divergence: [[[f64; 2]; 6]; 3],
    load: [[f64; 2]; 6],
}

fn element_forms(space: &FunctionSpace, t: usize, kernels: &FormKernels<'_>) -> ElementForms {
    let geo = space.geometry(t);
    let mut out = ElementForms { stiffness: [[0.0; 6]; 6], divergence: [[[0.0; 2]; 6]; 3], load: [[0.0; 2]; 6] };
    for (l, weight) in TRIANGLE_DEGREE4 {
        let w = weight * geo.area;
        let x = geo.point_at(&l);
        let e = geo.p2(&l);
        let k = (kernels.stiffness)(&x);
        let n = (kernels.divergence)(&x);
        let f = (kernels.load)(&x);
        for i in 0..6 {
            let kg = k * e.grad[i];
            for j in 0..6 {
                out.stiffness[j][i] += w * e.grad[j].dot(&kg);
            }
            let ng = n * e.grad[i];
            for p in 0..3 {
                for c in 0..2 {
                    out.divergence[p][i][c] += w * l[p] * ng[c];
                }
            }
            for c in 0..2 {
                out.load[i][c] += w * f[c] * e.phi[i];
            }
        }
    }
    out
}

/// Element-wise assembly with Dirichlet rows and columns removed. Element
/// contributions are computed in parallel and summed in element order.
pub(crate) fn assemble_forms(
    space: &FunctionSpace,
    kernels: &FormKernels<'_>,
) -> (CsrMatrix<f64>, CsrMatrix<f64>, DVector<f64>) {
    let n_u = space.n_u();
    let n_p = space.n_p();
    let locals: Vec<ElementForms> = (0..space.mesh().triangles().len())
        .into_par_iter()
        .map(|t| element_forms(space, t, kernels))
        .collect();

    let mut a = CooMatrix::new(n_u, n_u);
    let mut b = CooMatrix::new(n_p, n_u);
    let mut f = DVector::zeros(n_u);
    for (t, local) in locals.iter().enumerate() {
        let nodes = space.element_nodes(t);
        let verts = space.mesh().triangles()[t];
        for c in 0..2 {
            for i in 0..6 {
                let Some(di) = space.velocity_dof(nodes[i], c) else { continue };
                f[di] += local.load[i][c];
                for j in 0..6 {
                    if let Some(dj) = space.velocity_dof(nodes[j], c) {
                        a.push(di, dj, local.stiffness[i][j]);
                    }
                }
                for p in 0..3 {
                    b.push(verts[p], di, local.divergence[p][i][c]);
                }
            }
        }
    }
    (CsrMatrix::from(&a), CsrMatrix::from(&b), f)
}

/// `∫_{Γ^N} g · φ` using the three-point Gauss rule on each Neumann edge.
fn assemble_traction(space: &FunctionSpace, traction: &TractionField) -> DVector<f64> {
    let mut g = DVector::zeros(space.n_u());
    let mesh = space.mesh();
    for edge in mesh.edges_with_tag(BoundaryTag::Neumann) {
        let [a, b] = edge.v;
        let nodes = space.edge_nodes(a, b).expect("boundary edge belongs to a triangle");
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let len = (pb - pa).norm();
        let normal = mesh.outward_normal(edge);
        for (t, weight) in EDGE_GAUSS3 {
            let x = pa * (1.0 - t) + pb * t;
            let value = traction.value(&x, &normal);
            let phi = [(1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t)];
            for (k, &node) in nodes.iter().enumerate() {
                for c in 0..2 {
                    if let Some(d) = space.velocity_dof(node, c) {
                        g[d] += weight * len * value[c] * phi[k];
                    }
                }
            }
        }
    }
    g
}

/// Assembles the Stokes system on `mesh` with body force `force` and optional
/// traction `traction` on the Neumann edges.
pub fn assemble(mesh: &TriMesh, force: &ForceField, traction: Option<&TractionField>) -> Result<StokesSystem> {
    if !mesh.has_tag(BoundaryTag::Dirichlet) {
        return Err(StokesError::EmptyDirichletBoundary);
    }
    let space = FunctionSpace::new(mesh);
    let identity = |_: &Point| Matrix2::identity();
    let load = |x: &Point| force.value(x);
    let kernels = FormKernels { stiffness: &identity, divergence: &identity, load: &load };
    let (a, b, f) = assemble_forms(&space, &kernels);
    let g = match traction {
        Some(tr) if !tr.is_zero() => assemble_traction(&space, tr),
        _ => DVector::zeros(space.n_u()),
    };
    Ok(StokesSystem { space, a, b, f, g })
}

impl StokesSystem {
    pub fn space(&self) -> &FunctionSpace {
        &self.space
    }

    pub fn a(&self) -> &CsrMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &CsrMatrix<f64> {
        &self.b
    }

    pub fn f(&self) -> &DVector<f64> {
        &self.f
    }

    pub fn g(&self) -> &DVector<f64> {
        &self.g
    }

    /// Total load `f + g`.
    pub fn load(&self) -> DVector<f64> {
        &self.f + &self.g
    }

    pub fn has_traction(&self) -> bool {
        self.g.iter().any(|&v| v != 0.0)
    }

    /// Pressure mode matching the boundary tagging.
    pub fn default_mode(&self) -> PressureMode {
        if self.space.mesh().has_tag(BoundaryTag::Neumann) {
            PressureMode::Free
        } else {
            PressureMode::Pinned
        }
    }

    /// Residual norms `(‖Au - f - g - B'λ‖, ‖Bu‖)`.
    pub fn residuals(&self, u: &DVector<f64>, lambda: &DVector<f64>) -> Result<(f64, f64)> {
        self.check_dims(u, lambda)?;
        let bt_lambda = self.b.transpose() * lambda;
        let momentum = &self.a * u - self.load() - bt_lambda;
        let divergence = &self.b * u;
        Ok((momentum.norm(), divergence.norm()))
    }

    fn check_dims(&self, u: &DVector<f64>, lambda: &DVector<f64>) -> Result<()> {
        if u.len() != self.space.n_u() {
            return Err(StokesError::DimensionMismatch { what: "u", expected: self.space.n_u(), found: u.len() });
        }
        if lambda.len() != self.space.n_p() {
            return Err(StokesError::DimensionMismatch {
                what: "lambda",
                expected: self.space.n_p(),
                found: lambda.len(),
            });
        }
        Ok(())
    }

    fn factor_velocity_block(&self) -> Result<CscCholesky<f64>> {
        CscCholesky::factor(&CscMatrix::from(&self.a))
            .map_err(|e| StokesError::SingularSystem(format!("velocity block: {e}")))
    }

    /// Dense `B A⁻¹ B'`, built from blocks of pressure columns.
    fn schur_complement(&self, chol: &CscCholesky<f64>) -> DMatrix<f64> {
        const BLOCK: usize = 32;
        let n_u = self.space.n_u();
        let n_p = self.space.n_p();
        let starts: Vec<usize> = (0..n_p).step_by(BLOCK).collect();
        let blocks: Vec<DMatrix<f64>> = starts
            .par_iter()
            .map(|&k0| {
                let k1 = (k0 + BLOCK).min(n_p);
                let mut rhs = DMatrix::zeros(n_u, k1 - k0);
                for p in k0..k1 {
                    let row = self.b.row(p);
                    for (&col, &val) in row.col_indices().iter().zip(row.values()) {
                        rhs[(col, p - k0)] = val;
                    }
                }
                let x = chol.solve(&rhs);
                &self.b * &x
            })
            .collect();
        let mut s = DMatrix::zeros(n_p, n_p);
        for (&k0, block) in starts.iter().zip(&blocks) {
            s.columns_mut(k0, block.ncols()).copy_from(block);
        }
        (&s + s.transpose()) * 0.5
    }

    /// P1 pressure mass matrix.
    pub fn pressure_mass(&self) -> DMatrix<f64> {
        let mesh = self.space.mesh();
        let mut m = DMatrix::zeros(self.space.n_p(), self.space.n_p());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let area = mesh.triangle_area(t);
            for i in 0..3 {
                for j in 0..3 {
                    m[(tri[i], tri[j])] += area * if i == j { 2.0 } else { 1.0 } / 12.0;
                }
            }
        }
        m
    }

    /// `∫ ψ_p` for every pressure basis function.
    pub fn pressure_weights(&self) -> DVector<f64> {
        let mesh = self.space.mesh();
        let mut w = DVector::zeros(self.space.n_p());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let third = mesh.triangle_area(t) / 3.0;
            for &v in tri {
                w[v] += third;
            }
        }
        w
    }
}

pub fn solve_stokes(sys: &StokesSystem) -> Result<StokesSolution> {
    solve_stokes_with(sys, sys.default_mode())
}

pub fn solve_stokes_with(sys: &StokesSystem, mode: PressureMode) -> Result<StokesSolution> {
    let n_u = sys.space.n_u();
    let n_p = sys.space.n_p();
    let load = sys.load();
    if n_u == 0 {
        return Err(StokesError::SingularSystem("no free velocity dofs".into()));
    }
    let chol = sys.factor_velocity_block()?;
    let y0 = chol.solve(&load).column(0).into_owned();
    let s = sys.schur_complement(&chol);
    let rhs = -(&sys.b * &y0);

    let skip = match mode {
        PressureMode::Free => 0,
        PressureMode::Pinned => 1,
    };
    let k = n_p - skip;
    let s_red = s.view((skip, skip), (k, k)).into_owned();
    let rhs_red = rhs.rows(skip, k).into_owned();
    let mut lambda = DVector::zeros(n_p);
    if k > 0 {
        let chol_s = s_red
            .clone()
            .cholesky()
            .ok_or_else(|| StokesError::SingularSystem("pressure Schur complement is not positive definite".into()))?;
        let l = chol_s.l();
        let max_diag = s_red.diagonal().amax();
        let min_pivot = l.diagonal().iter().map(|d| d * d).fold(f64::INFINITY, f64::min);
        if min_pivot <= 1e-12 * max_diag {
            return Err(StokesError::SingularSystem(format!(
                "pressure Schur complement pivot {min_pivot:.3e} vs diagonal {max_diag:.3e}"
            )));
        }
        lambda.rows_mut(skip, k).copy_from(&chol_s.solve(&rhs_red));
    }
    if mode == PressureMode::Pinned {
        let w = sys.pressure_weights();
        let mean = w.dot(&lambda) / w.sum();
        lambda.add_scalar_mut(-mean);
    }
    let bt_lambda = sys.b.transpose() * &lambda;
    let u = y0 + chol.solve(&bt_lambda).column(0);
    let (momentum_residual, divergence_residual) = sys.residuals(&u, &lambda)?;
    Ok(StokesSolution { u, lambda, momentum_residual, divergence_residual })
}

/// `1/2 u'Au - (f + g)'u`.
pub fn energy(sys: &StokesSystem, sol: &StokesSolution) -> Result<f64> {
    sys.check_dims(&sol.u, &sol.lambda)?;
    let au = &sys.a * &sol.u;
    Ok(0.5 * sol.u.dot(&au) - sys.load().dot(&sol.u))
}

/// Discrete inf-sup constant `min_p sqrt(p'Sp / p'Mp)` with `S = B A⁻¹ B'` and `M`
/// the pressure mass matrix. In pinned mode constants are excluded.
pub fn discrete_inf_sup(sys: &StokesSystem, mode: PressureMode) -> Result<f64> {
    if sys.space.n_u() == 0 {
        return Ok(0.0);
    }
    let chol = sys.factor_velocity_block()?;
    let s = sys.schur_complement(&chol);
    let m = sys.pressure_mass();
    let lm = m.cholesky().ok_or_else(|| StokesError::SingularSystem("pressure mass matrix".into()))?;
    let l = lm.l();
    let linv_s = l.solve_lower_triangular(&s).expect("mass factor has a positive diagonal");
    let c = l.solve_lower_triangular(&linv_s.transpose()).expect("mass factor has a positive diagonal");
    let c = (&c + c.transpose()) * 0.5;
    let mut eig: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let idx = match mode {
        PressureMode::Free => 0,
        PressureMode::Pinned => 1,
    };
    Ok(eig.get(idx).copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// H¹-seminorm of the velocity error `(∫ |∇u_h - ∇u|²)^{1/2}`.
pub fn velocity_h1_error(space: &FunctionSpace, u: &DVector<f64>, exact: &ExactSolution) -> f64 {
    let mut total = 0.0;
    for t in 0..space.mesh().triangles().len() {
        let geo = space.geometry(t);
        let local = space.local_velocity(u, t);
        for (l, weight) in TRIANGLE_DEGREE4 {
            let (_, grad) = FunctionSpace::velocity_at(&local, &geo.p2(&l));
            let diff = grad - exact.velocity_gradient(&geo.point_at(&l));
            total += weight * geo.area * diff.norm_squared();
        }
    }
    total.sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub h1_error: f64,
    /// Observed order against the previous row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Smallest observed order, if any order was computed.
    pub fn min_order(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.order).reduce(f64::min)
    }
}

/// Solves on unit-square meshes for each `n` with the forcing and traction of
/// `exact`, and tabulates the velocity H¹ error.
pub fn convergence_study(exact: &ExactSolution, neumann_sides: &[Side], n_list: &[usize]) -> Result<ConvergenceTable> {
    let force = exact.forcing();
    let traction = TractionField::Exact(*exact);
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n == 0 {
            return Err(StokesError::Unsupported("mesh resolution n must be positive".into()));
        }
        let mesh = unit_square_mesh(n, neumann_sides);
        let sys = assemble(&mesh, &force, Some(&traction))?;
        let sol = solve_stokes(&sys)?;
        let h = 1.0 / n as f64;
        let h1_error = velocity_h1_error(sys.space(), &sol.u, exact);
        let order = rows.last().map(|prev: &ConvergenceRow| (prev.h1_error / h1_error).ln() / (prev.h / h).ln());
        rows.push(ConvergenceRow { n, h, h1_error, order });
    }
    Ok(ConvergenceTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::disk_mesh;

    #[test]
    fn zero_data_gives_zero_solution() {
        let mesh = unit_square_mesh(3, &[Side::Right]);
        let sys = assemble(&mesh, &ForceField::Zero, None).unwrap();
        assert!(sys.f().iter().all(|&v| v == 0.0));
        let sol = solve_stokes(&sys).unwrap();
        assert_eq!(sol.u.amax(), 0.0);
        assert_eq!(sol.lambda.amax(), 0.0);
        assert_eq!(energy(&sys, &sol).unwrap(), 0.0);
    }

    #[test]
    fn pure_neumann_is_rejected() {
        let mesh = unit_square_mesh(2, &[Side::Left, Side::Right, Side::Top, Side::Bottom]);
        let err = assemble(&mesh, &ForceField::Zero, None).unwrap_err();
        assert_eq!(err, StokesError::EmptyDirichletBoundary);
    }

    #[test]
    fn matrices_have_expected_shape_and_symmetry() {
        let mesh = unit_square_mesh(4, &[Side::Right]);
        let sys = assemble(&mesh, &ForceField::Constant([1.0, 0.0]), None).unwrap();
        let a = nalgebra_sparse::convert::serial::convert_csr_dense(sys.a());
        assert_eq!(a.nrows(), sys.space().n_u());
        assert_eq!((&a - a.transpose()).amax(), 0.0);
        assert_eq!(sys.b().nrows(), 25);
        // Column sums of B integrate div φ over the domain, which vanishes for
        // velocity basis functions with no support on the open Neumann side.
        let ones = DVector::from_element(25, 1.0);
        let colsum = sys.b().transpose() * &ones;
        for node in 0..sys.space().n_nodes() {
            let p = sys.space().node_point(node);
            if p[0] < 1.0 - 1e-12 {
                for c in 0..2 {
                    if let Some(d) = sys.space().velocity_dof(node, c) {
                        assert!(colsum[d].abs() < 1e-14, "node {p}");
                    }
                }
            }
        }
    }

    #[test]
    fn pressure_mass_integrates_constants() {
        let mesh = disk_mesh(3);
        let sys = assemble(&mesh, &ForceField::Zero, None).unwrap();
        let one = DVector::from_element(sys.space().n_p(), 1.0);
        let m = sys.pressure_mass();
        assert!((one.dot(&(&m * &one)) - mesh.total_area()).abs() < 1e-13);
        assert!((sys.pressure_weights().sum() - mesh.total_area()).abs() < 1e-13);
    }

    #[test]
    fn dimension_mismatch_in_energy() {
        let mesh = unit_square_mesh(2, &[Side::Right]);
        let sys = assemble(&mesh, &ForceField::Zero, None).unwrap();
        let sol = StokesSolution {
            u: DVector::zeros(3),
            lambda: DVector::zeros(9),
            momentum_residual: 0.0,
            divergence_residual: 0.0,
        };
        assert!(matches!(energy(&sys, &sol), Err(StokesError::DimensionMismatch { what: "u", .. })));
    }

    #[test]
    fn single_row_convergence_table_has_no_order() {
        let table = convergence_study(&ExactSolution::Poiseuille, &[Side::Left, Side::Right], &[2]).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].order, None);
        assert_eq!(table.min_order(), None);
        assert!(table.rows[0].h1_error < 1e-9);
    }
}
