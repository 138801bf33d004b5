//! Run configuration: one TOML file per run, validated before anything executes.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use shapederiv_core::fem::{ExactSolution, ForceField, TractionField};
use shapederiv_core::flow::{Point, VelocityField, Window, DEFAULT_STEPS};
use shapederiv_core::mesh::{disk_mesh, unit_square_mesh, Side, TriMesh};

use crate::error::CliError;

pub const DEFAULT_S_LIST: [f64; 3] = [1e-2, 3e-3, 1e-3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    QpDemo,
    StokesSolve,
    ShapeDerivative,
    FdVerify,
    Corollary3,
    Convergence,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::QpDemo,
        Command::StokesSolve,
        Command::ShapeDerivative,
        Command::FdVerify,
        Command::Corollary3,
        Command::Convergence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::QpDemo => "qp-demo",
            Command::StokesSolve => "stokes-solve",
            Command::ShapeDerivative => "shape-derivative",
            Command::FdVerify => "fd-verify",
            Command::Corollary3 => "corollary3",
            Command::Convergence => "convergence",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| CliError::Config(format!("unknown command `{s}`")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional; must agree with the command given on the command line.
    pub command: Option<Command>,
    pub output: Option<PathBuf>,
    pub mesh: Option<MeshSpec>,
    pub field: Option<FieldSpec>,
    pub force: Option<NamedField>,
    pub traction: Option<NamedField>,
    pub fd: Option<FdSpec>,
    pub qp: Option<QpSpec>,
    pub stokes: Option<StokesSpec>,
    pub corollary3: Option<Corollary3Spec>,
    pub convergence: Option<ConvergenceSpec>,
    pub tolerance: Option<ToleranceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    /// `unit-square`, `disk` or `file`.
    pub kind: String,
    pub n: Option<usize>,
    pub rings: Option<usize>,
    #[serde(default)]
    pub neumann: Vec<String>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    /// `zero`, `constant`, `affine`, `rotation` or `quadratic`.
    pub kind: String,
    pub m: Option<[[f64; 2]; 2]>,
    pub b: Option<[f64; 2]>,
    pub omega: Option<f64>,
    pub coeffs: Option<[[f64; 6]; 2]>,
    pub window: Option<WindowSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedField {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdSpec {
    pub s_list: Option<Vec<f64>>,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpSpec {
    /// Name of a bundled instance (`qp6-equality`) or a path to an instance file.
    pub instance: Option<String>,
    pub path: Option<PathBuf>,
}

/// Instance file contents, rows of row-major matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpInstance {
    pub cone: String,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub f: Vec<f64>,
    pub a1: Vec<Vec<f64>>,
    pub b1: Vec<Vec<f64>>,
    pub f1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StokesSpec {
    /// Exact solution to compare against (`poiseuille` or `trig`).
    pub exact: Option<String>,
    /// Reference pressure `c0 + c1 x1 + c2 x2` compared nodally.
    pub reference_pressure: Option<[f64; 3]>,
    /// `free` or `pinned`; defaults to the mode implied by the boundary tags.
    pub pressure_mode: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corollary3Spec {
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub exact: String,
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub neumann: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    /// Relative tolerance of the cone QP solver.
    pub qp: Option<f64>,
    /// Slope a difference table must reach to be reported as passing.
    pub min_slope: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration types serialize")
    }

    /// Checks command-specific requirements and fills in defaults.
    pub fn resolve(mut self, command: Command) -> Result<Self, CliError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(CliError::Config(format!("config is for `{c}` but `{command}` was requested")));
            }
        }
        self.command = Some(command);
        let needs_fd = matches!(command, Command::QpDemo | Command::FdVerify | Command::Corollary3);
        if needs_fd {
            let fd = self.fd.get_or_insert(FdSpec { s_list: None, steps: None });
            fd.s_list.get_or_insert_with(|| DEFAULT_S_LIST.to_vec());
        }
        if matches!(command, Command::ShapeDerivative | Command::FdVerify | Command::Corollary3) {
            let fd = self.fd.get_or_insert(FdSpec { s_list: None, steps: None });
            fd.steps.get_or_insert(DEFAULT_STEPS);
        }
        if let Some(fd) = &self.fd {
            if let Some(list) = &fd.s_list {
                validate_s_list(list)?;
            }
            if fd.steps == Some(0) {
                return Err(CliError::Config("fd.steps must be positive".into()));
            }
        }
        let tol = self.tolerance.get_or_insert(ToleranceSpec { qp: None, min_slope: None });
        tol.qp.get_or_insert(1e-10);
        tol.min_slope.get_or_insert(1.8);
        if !(tol.qp.unwrap() > 0.0) {
            return Err(CliError::Config("tolerance.qp must be positive".into()));
        }

        match command {
            Command::QpDemo => {
                let qp = self.qp.get_or_insert(QpSpec { instance: None, path: None });
                if qp.instance.is_none() && qp.path.is_none() {
                    qp.instance = Some("qp6-equality".into());
                }
                if qp.instance.is_some() && qp.path.is_some() {
                    return Err(CliError::Config("qp: give either `instance` or `path`, not both".into()));
                }
            }
            Command::StokesSolve => {
                self.require_mesh()?;
                self.force_or_default();
            }
            Command::ShapeDerivative | Command::FdVerify => {
                self.require_mesh()?;
                self.force_or_default();
                if self.field.is_none() {
                    return Err(CliError::Config(format!("`{command}` needs a [field] section")));
                }
                if self.traction.is_some() {
                    return Err(CliError::Config(format!("`{command}` does not accept a [traction] section")));
                }
            }
            Command::Corollary3 => {
                self.mesh.get_or_insert(MeshSpec {
                    kind: "disk".into(),
                    n: None,
                    rings: Some(4),
                    neumann: Vec::new(),
                    path: None,
                });
                self.force_or_default();
                self.corollary3.get_or_insert(Corollary3Spec { omega: 1.0 });
                if self.field.is_some() {
                    return Err(CliError::Config("corollary3 uses a rotation field; remove [field]".into()));
                }
            }
            Command::Convergence => {
                let conv =
                    self.convergence.as_ref().ok_or_else(|| CliError::Config("convergence needs a [convergence] section".into()))?;
                if conv.n_list.is_empty() || conv.n_list.contains(&0) {
                    return Err(CliError::Config("convergence.n_list must hold positive integers".into()));
                }
            }
        }
        // Validate every named entity now so runs fail before any work is done.
        if let Some(m) = &self.mesh {
            m.sides()?;
        }
        if let Some(f) = &self.field {
            f.build()?;
        }
        if let Some(f) = &self.force {
            f.force()?;
        }
        if let Some(t) = &self.traction {
            t.traction()?;
        }
        if let Some(c) = &self.convergence {
            exact_solution(&c.exact)?;
            parse_sides(&c.neumann)?;
        }
        if let Some(s) = &self.stokes {
            if let Some(e) = &s.exact {
                exact_solution(e)?;
            }
            s.mode()?;
        }
        Ok(self)
    }

    fn require_mesh(&self) -> Result<(), CliError> {
        match &self.mesh {
            Some(_) => Ok(()),
            None => Err(CliError::Config(format!(
                "`{}` needs a [mesh] section",
                self.command.map_or("run", Command::as_str)
            ))),
        }
    }

    fn force_or_default(&mut self) {
        self.force.get_or_insert(NamedField { name: "zero".into(), params: Vec::new() });
    }

    pub fn s_list(&self) -> Vec<f64> {
        self.fd.as_ref().and_then(|f| f.s_list.clone()).unwrap_or_else(|| DEFAULT_S_LIST.to_vec())
    }

    pub fn steps(&self) -> usize {
        self.fd.as_ref().and_then(|f| f.steps).unwrap_or(DEFAULT_STEPS)
    }

    pub fn min_slope(&self) -> f64 {
        self.tolerance.as_ref().and_then(|t| t.min_slope).unwrap_or(1.8)
    }

    pub fn qp_tol(&self) -> f64 {
        self.tolerance.as_ref().and_then(|t| t.qp).unwrap_or(1e-10)
    }
}

fn validate_s_list(list: &[f64]) -> Result<(), CliError> {
    if list.is_empty() {
        return Err(CliError::Config("fd.s_list must not be empty".into()));
    }
    if list.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(CliError::Config("fd.s_list entries must be positive".into()));
    }
    if list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CliError::Config("fd.s_list must be strictly decreasing".into()));
    }
    Ok(())
}

pub fn parse_sides(names: &[String]) -> Result<Vec<Side>, CliError> {
    names.iter().map(|s| s.parse::<Side>().map_err(CliError::Config)).collect()
}

pub fn exact_solution(name: &str) -> Result<ExactSolution, CliError> {
    ExactSolution::from_name(name).map_err(CliError::Config)
}

impl MeshSpec {
    fn sides(&self) -> Result<Vec<Side>, CliError> {
        let sides = parse_sides(&self.neumann)?;
        match self.kind.as_str() {
            "unit-square" => {
                if self.n.unwrap_or(0) == 0 {
                    return Err(CliError::Config("mesh.n must be a positive integer".into()));
                }
            }
            "disk" => {
                if self.rings.unwrap_or(0) == 0 {
                    return Err(CliError::Config("mesh.rings must be a positive integer".into()));
                }
                if !sides.is_empty() {
                    return Err(CliError::Config("disk meshes are all Dirichlet; remove mesh.neumann".into()));
                }
            }
            "file" => {
                if self.path.is_none() {
                    return Err(CliError::Config("mesh.path is required for kind = \"file\"".into()));
                }
            }
            other => return Err(CliError::Config(format!("unknown mesh kind `{other}`"))),
        }
        Ok(sides)
    }

    /// Builds the mesh; relative file paths are taken from `base`.
    pub fn build(&self, base: &Path) -> Result<TriMesh, CliError> {
        let sides = self.sides()?;
        match self.kind.as_str() {
            "unit-square" => Ok(unit_square_mesh(self.n.unwrap_or(1), &sides)),
            "disk" => Ok(disk_mesh(self.rings.unwrap_or(1))),
            _ => {
                let path = base.join(self.path.as_ref().expect("checked in sides"));
                let text =
                    std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                TriMesh::from_text(&text).map_err(|e| CliError::Mesh(format!("{}: {e}", path.display())))
            }
        }
    }
}

impl FieldSpec {
    pub fn build(&self) -> Result<VelocityField, CliError> {
        let need = |what: &str| CliError::Config(format!("field kind `{}` needs `{what}`", self.kind));
        let field = match self.kind.as_str() {
            "zero" => VelocityField::zero(),
            "constant" => VelocityField::constant(self.b.ok_or_else(|| need("b"))?),
            "affine" => VelocityField::affine(self.m.ok_or_else(|| need("m"))?, self.b.unwrap_or([0.0; 2])),
            "rotation" => VelocityField::rotation(self.omega.ok_or_else(|| need("omega"))?),
            "quadratic" => VelocityField::quadratic(self.coeffs.ok_or_else(|| need("coeffs"))?),
            other => return Err(CliError::Config(format!("unknown field kind `{other}`"))),
        };
        match &self.window {
            None => Ok(field),
            Some(w) => {
                if !(w.width > 0.0) || w.lo[0] > w.hi[0] || w.lo[1] > w.hi[1] {
                    return Err(CliError::Config("field.window needs lo <= hi and width > 0".into()));
                }
                Ok(field.with_window(Window {
                    lo: Point::new(w.lo[0], w.lo[1]),
                    hi: Point::new(w.hi[0], w.hi[1]),
                    width: w.width,
                }))
            }
        }
    }
}

impl NamedField {
    pub fn force(&self) -> Result<ForceField, CliError> {
        ForceField::from_name(&self.name, &self.params).map_err(CliError::Config)
    }

    pub fn traction(&self) -> Result<TractionField, CliError> {
        TractionField::from_name(&self.name, &self.params).map_err(CliError::Config)
    }
}

impl StokesSpec {
    pub fn mode(&self) -> Result<Option<shapederiv_core::fem::PressureMode>, CliError> {
        use shapederiv_core::fem::PressureMode;
        match self.pressure_mode.as_deref() {
            None => Ok(None),
            Some("free") => Ok(Some(PressureMode::Free)),
            Some("pinned") => Ok(Some(PressureMode::Pinned)),
            Some(other) => Err(CliError::Config(format!("unknown pressure mode `{other}`"))),
        }
    }
}

pub const QP6_EQUALITY: &str = include_str!("../assets/qp6_equality.toml");

impl QpInstance {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("qp instance: {}", e.message())))
    }

    pub fn bundled(name: &str) -> Result<Self, CliError> {
        match name {
            "qp6-equality" => Self::parse(QP6_EQUALITY),
            other => Err(CliError::Config(format!("unknown bundled qp instance `{other}`"))),
        }
    }
}
