//! Taylor-Hood discretization of the mixed Dirichlet-Neumann Stokes problem.

pub mod fields;
pub mod quadrature;
pub mod space;
pub mod stokes;

pub use fields::{ExactSolution, ForceField, TractionField};
pub use space::FunctionSpace;
pub use stokes::{
    assemble, convergence_study, discrete_inf_sup, energy, solve_stokes, solve_stokes_with, ConvergenceRow,
    ConvergenceTable, PressureMode, StokesError, StokesSolution, StokesSystem,
};
