use std::process::ExitCode;

use shapederiv_core::fem::StokesError;
use shapederiv_core::mesh::MeshError;
use shapederiv_core::minimax::MinimaxError;
use shapederiv_core::shape::ShapeError;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Mesh(String),
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Mesh(_) => "mesh",
            CliError::Solver(_) => "solver",
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Mesh(_) => 4,
            CliError::Solver(_) => 5,
        })
    }
}

impl From<MinimaxError> for CliError {
    fn from(e: MinimaxError) -> Self {
        match e {
            MinimaxError::DimensionMismatch { .. } | MinimaxError::UnknownCone(_) | MinimaxError::NotSymmetric(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        CliError::Mesh(e.to_string())
    }
}

impl From<StokesError> for CliError {
    fn from(e: StokesError) -> Self {
        match e {
            StokesError::Mesh(m) => m.into(),
            StokesError::EmptyDirichletBoundary => CliError::Mesh(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}

impl From<ShapeError> for CliError {
    fn from(e: ShapeError) -> Self {
        match e {
            ShapeError::Stokes(s) => s.into(),
            ShapeError::Mesh(m) => m.into(),
            ShapeError::InvalidStep(_) | ShapeError::TractionUnsupported => CliError::Config(e.to_string()),
            other => CliError::Mesh(other.to_string()),
        }
    }
}
