//! One pipeline per command; each returns the report to be written.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use shapederiv_core::fem::{
    assemble, convergence_study, energy, solve_stokes_with, stokes::velocity_h1_error, TractionField,
};
use shapederiv_core::minimax::{
    check_lbb, fd_table, lagrangian_value, objective_value, shape_derivative, solve_saddle_point_with, ConeKind,
    ConeQp, Perturbation, SolveOptions,
};
use shapederiv_core::shape::{
    assemble_perturbation, corollary3_check, fd_verify, stokes_shape_derivative, DerivativeReport,
};
use shapederiv_core::slope::{FdRow, Slope};

use crate::config::{exact_solution, parse_sides, Command, QpInstance, RunConfig};
use crate::error::CliError;
use crate::report::{full, Report};

pub struct Context<'a> {
    pub config: &'a RunConfig,
    /// Directory that relative paths in the config refer to.
    pub base: &'a Path,
    pub verbose: bool,
}

impl Context<'_> {
    fn note(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("shapederiv: {}", msg.as_ref());
        }
    }
}

pub fn run(command: Command, ctx: &Context<'_>) -> Result<Report, CliError> {
    match command {
        Command::QpDemo => qp_demo(ctx),
        Command::StokesSolve => stokes_solve(ctx),
        Command::ShapeDerivative => shape_derivative_only(ctx),
        Command::FdVerify => fd_verify_run(ctx),
        Command::Corollary3 => corollary3_run(ctx),
        Command::Convergence => convergence_run(ctx),
    }
}

fn matrix(name: &str, rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>, CliError> {
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(CliError::Config(format!(
            "{name}: row {bad} has {} entries, expected {ncols}",
            rows[bad].len()
        )));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.iter().flatten().copied()))
}

fn load_instance(ctx: &Context<'_>) -> Result<QpInstance, CliError> {
    let spec = ctx.config.qp.as_ref().expect("resolved config has a qp section");
    match (&spec.instance, &spec.path) {
        (Some(name), _) => QpInstance::bundled(name),
        (None, Some(path)) => {
            let path = ctx.base.join(path);
            let text =
                std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            QpInstance::parse(&text)
        }
        (None, None) => Err(CliError::Config("qp: no instance given".into())),
    }
}

fn slope_ok(slope: &Slope, min: f64) -> bool {
    slope.at_least(min)
}

fn qp_demo(ctx: &Context<'_>) -> Result<Report, CliError> {
    let inst = load_instance(ctx)?;
    let n = inst.f.len();
    let cone: ConeKind = inst.cone.parse()?;
    let qp = ConeQp::new(
        matrix("a", &inst.a, n)?,
        matrix("b", &inst.b, n)?,
        DVector::from_vec(inst.f.clone()),
        cone,
    )?;
    let dir = Perturbation::new(
        matrix("a1", &inst.a1, n)?,
        matrix("b1", &inst.b1, n)?,
        DVector::from_vec(inst.f1.clone()),
    )?;
    ctx.note(format!("solving {}-dimensional {cone} instance", n));
    let opts = SolveOptions { tol: ctx.config.qp_tol(), ..SolveOptions::default() };
    let sp = solve_saddle_point_with(&qp, &opts)?;
    let l1 = shape_derivative(&qp, &dir, &sp)?;
    let s_list = ctx.config.s_list();
    let table = fd_table(&qp, &dir, &s_list)?;

    let mut r = Report::default();
    r.count("n", "unknowns", qp.n());
    r.count("m", "constraints", qp.m());
    r.text("cone", "cone", cone.as_str());
    r.vector("u", sp.u.as_slice());
    r.vector("lambda", sp.lambda.as_slice());
    let active: Vec<String> = sp.active_set.iter().map(|i| i.to_string()).collect();
    r.text("active_set", "active set (0-based)", &format!("[{}]", active.join(", ")));
    r.scalar("objective", "objective E", objective_value(&qp, &sp.u)?);
    r.scalar("lagrangian", "Lagrangian L", lagrangian_value(&qp, &sp.u, &sp.lambda)?);
    r.scalar("kkt_residual", "KKT residual", sp.kkt_residual);
    r.scalar("inf_sup", "inf-sup constant", check_lbb(&qp)?);
    r.scalar("L1", "shape derivative L1", l1);
    r.slope("slope", "central-difference slope", &table.slope);
    let min = ctx.config.min_slope();
    r.check("slope_check", "slope check", slope_ok(&table.slope, min), format!("required {min}"));
    r.fd_table(&table.rows);
    Ok(r)
}

fn stokes_solve(ctx: &Context<'_>) -> Result<Report, CliError> {
    let cfg = ctx.config;
    let mesh = cfg.mesh.as_ref().expect("resolved").build(ctx.base)?;
    let force = cfg.force.as_ref().expect("resolved").force()?;
    let traction: Option<TractionField> = cfg.traction.as_ref().map(|t| t.traction()).transpose()?;
    ctx.note(format!("assembling on {} triangles", mesh.triangles().len()));
    let sys = assemble(&mesh, &force, traction.as_ref())?;
    let mode = match cfg.stokes.as_ref().map(|s| s.mode()).transpose()?.flatten() {
        Some(m) => m,
        None => sys.default_mode(),
    };
    ctx.note(format!("solving {} velocity and {} pressure unknowns", sys.space().n_u(), sys.space().n_p()));
    let sol = solve_stokes_with(&sys, mode)?;

    let mut r = Report::default();
    r.count("vertices", "vertices", mesh.vertices().len());
    r.count("triangles", "triangles", mesh.triangles().len());
    r.count("n_u", "velocity unknowns", sys.space().n_u());
    r.count("n_p", "pressure unknowns", sys.space().n_p());
    r.text("pressure_mode", "pressure mode", if mode == sys.default_mode() { "default" } else { "override" });
    r.scalar("energy", "energy", energy(&sys, &sol)?);
    r.scalar("momentum_residual", "momentum residual", sol.momentum_residual);
    r.scalar("divergence_residual", "divergence residual", sol.divergence_residual);
    r.scalar("u_max", "max |u|", sol.u.amax());
    r.scalar("lambda_min", "min pressure", sol.lambda.min());
    r.scalar("lambda_max", "max pressure", sol.lambda.max());
    if let Some(c) = cfg.stokes.as_ref().and_then(|s| s.reference_pressure) {
        let p = sys.space().interpolate_pressure(|x| c[0] + c[1] * x[0] + c[2] * x[1]);
        r.scalar("pressure_reference_error", "max nodal pressure error vs reference", (&sol.lambda - p).amax());
    }
    if let Some(name) = cfg.stokes.as_ref().and_then(|s| s.exact.as_deref()) {
        let exact = exact_solution(name)?;
        let u = sys.space().interpolate_velocity(|x| exact.velocity(x));
        let p = sys.space().interpolate_pressure(|x| exact.pressure(x));
        r.scalar("velocity_dof_error", "max velocity dof error", (&sol.u - u).amax());
        r.scalar("pressure_dof_error", "max pressure dof error", (&sol.lambda - p).amax());
        r.scalar("h1_error", "velocity H1 error", velocity_h1_error(sys.space(), &sol.u, &exact));
    }
    r.vector("lambda", sol.lambda.as_slice());
    Ok(r)
}

fn derivative_fields(r: &mut Report, d: &DerivativeReport) {
    r.scalar("L1", "shape derivative L1", d.l1);
    r.scalar("E1", "energy term E1", d.e1);
    r.scalar("dual_term", "dual term", d.dual_term);
    r.scalar("L1_from_B1", "L1 via B1 assembly", d.l1_from_b1);
    r.scalar("energy", "energy", d.energy);
    r.scalar("velocity_energy", "u'Au", d.velocity_energy);
}

fn fd_fields(r: &mut Report, d: &DerivativeReport, min: f64) {
    r.slope("slope", "central-difference slope", &d.slope);
    r.slope("one_sided_slope", "one-sided slope", &d.one_sided_slope);
    r.check("slope_check", "slope check", slope_ok(&d.slope, min), format!("required {min}"));
    r.fd_table(&d.fd_table);
    let mut csv = String::from("s,fd,L1,abs_err\n");
    for row in &d.one_sided {
        let FdRow { s, fd, l1, abs_err } = *row;
        let _ = writeln!(csv, "{},{},{},{}", full(s), full(fd), full(l1), full(abs_err));
    }
    r.table("one_sided.csv", csv);
}

fn shape_derivative_only(ctx: &Context<'_>) -> Result<Report, CliError> {
    let cfg = ctx.config;
    let mesh = cfg.mesh.as_ref().expect("resolved").build(ctx.base)?;
    let force = cfg.force.as_ref().expect("resolved").force()?;
    let field = cfg.field.as_ref().expect("resolved").build()?;
    let sys = assemble(&mesh, &force, None)?;
    let sol = solve_stokes_with(&sys, sys.default_mode())?;
    let forms = assemble_perturbation(sys.space(), &field, &force);
    let d = stokes_shape_derivative(&sys, &sol, &forms, &field)?;
    let mut r = Report::default();
    derivative_fields(&mut r, &d);
    Ok(r)
}

fn fd_verify_run(ctx: &Context<'_>) -> Result<Report, CliError> {
    let cfg = ctx.config;
    let mesh = cfg.mesh.as_ref().expect("resolved").build(ctx.base)?;
    let force = cfg.force.as_ref().expect("resolved").force()?;
    let field = cfg.field.as_ref().expect("resolved").build()?;
    let s_list = cfg.s_list();
    ctx.note(format!("{} perturbed solves", 2 * s_list.len()));
    let d = fd_verify(&mesh, &force, &field, &s_list, cfg.steps())?;
    let mut r = Report::default();
    derivative_fields(&mut r, &d);
    fd_fields(&mut r, &d, cfg.min_slope());
    Ok(r)
}

fn corollary3_run(ctx: &Context<'_>) -> Result<Report, CliError> {
    let cfg = ctx.config;
    let mesh = cfg.mesh.as_ref().expect("resolved").build(ctx.base)?;
    let force = cfg.force.as_ref().expect("resolved").force()?;
    let omega = cfg.corollary3.as_ref().expect("resolved").omega;
    let s_list = cfg.s_list();
    let d = corollary3_check(&mesh, &force, omega, &s_list, cfg.steps())?;
    let mut r = Report::default();
    r.scalar("omega", "angular velocity", omega);
    derivative_fields(&mut r, &d);
    fd_fields(&mut r, &d, cfg.min_slope());
    Ok(r)
}

fn convergence_run(ctx: &Context<'_>) -> Result<Report, CliError> {
    let spec = ctx.config.convergence.as_ref().expect("resolved");
    let exact = exact_solution(&spec.exact)?;
    let sides = parse_sides(&spec.neumann)?;
    let table = convergence_study(&exact, &sides, &spec.n_list)?;
    let mut r = Report::default();
    let mut csv = String::from("n,h,h1_error,order\n");
    r.summary_line("n      h1 error      order".into());
    for row in &table.rows {
        let order = row.order.map(full).unwrap_or_default();
        let _ = writeln!(csv, "{},{},{},{}", row.n, full(row.h), full(row.h1_error), order);
        let short_order = row.order.map(crate::report::short).unwrap_or_else(|| "-".into());
        r.summary_line(format!("{:<6} {}  {}", row.n, crate::report::short(row.h1_error), short_order));
    }
    r.table("convergence.csv", csv);
    r.count("rows", "rows", table.rows.len());
    match table.min_order() {
        Some(o) => r.scalar("min_order", "smallest observed order", o),
        None => r.text("min_order", "smallest observed order", "none (single row)"),
    }
    Ok(r)
}
