//! Shape derivatives of constrained quadratic minimization problems.
//!
//! Two realizations of the same primal-dual sensitivity formula live here:
//!
//! - [`minimax`]: finite-dimensional cone QPs `min 1/2 u'Au - f'u` over `Bu >= 0`
//!   or `Bu = 0`, their saddle points, and the Lagrangian derivative under a
//!   perturbation `(A1, B1, f1)`.
//! - [`fem`] + [`shape`]: the mixed Dirichlet-Neumann Stokes problem discretized with
//!   Taylor-Hood elements, differentiated with respect to domain flows from [`flow`]
//!   acting on meshes from [`mesh`].
//!
//! Every derivative is paired with a central finite-difference check whose error
//! slope is reported by [`slope`].

pub mod fem;
pub mod flow;
pub mod mesh;
pub mod minimax;
pub mod shape;
pub mod slope;
