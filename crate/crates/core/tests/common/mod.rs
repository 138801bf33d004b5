//! Random cone QP instances shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapederiv_core::minimax::{perturbed_qp, solve_saddle_point, ConeKind, ConeQp, Perturbation, SaddlePoint};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn uniform_vector(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_spd(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let q = uniform_matrix(rng, n, n);
    &q.transpose() * &q + DMatrix::identity(n, n) * 0.5
}

pub fn random_symmetric(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let q = uniform_matrix(rng, n, n);
    (&q + q.transpose()) * 0.5
}

pub fn random_qp(rng: &mut impl Rng, n: usize, m: usize, cone: ConeKind) -> ConeQp {
    loop {
        let a = random_spd(rng, n);
        let b = uniform_matrix(rng, m, n);
        let f = uniform_vector(rng, n) * 2.0;
        if let Ok(qp) = ConeQp::new(a, b, f, cone) {
            return qp;
        }
    }
}

pub fn random_direction(rng: &mut impl Rng, n: usize, m: usize) -> Perturbation {
    Perturbation::new(
        random_symmetric(rng, n) * 0.5,
        uniform_matrix(rng, m, n) * 0.5,
        uniform_vector(rng, n),
    )
    .expect("symmetric by construction")
}

/// Strict complementarity margin: active multipliers and inactive slacks must
/// clear `margin`.
fn strictly_complementary(qp: &ConeQp, sp: &SaddlePoint, margin: f64) -> bool {
    if qp.cone() == ConeKind::Equality {
        return true;
    }
    let bu = qp.b() * &sp.u;
    (0..qp.m()).all(|i| if sp.active_set.contains(&i) { sp.lambda[i] > margin } else { bu[i] > margin })
}

/// Draws instances until the active set is strictly complementary and unchanged
/// at `±s_max`.
pub fn stable_instance(rng: &mut impl Rng, cone: ConeKind, s_max: f64) -> (ConeQp, Perturbation) {
    loop {
        let n = rng.random_range(2..=10);
        let m = rng.random_range(1..=4.min(n));
        let qp = random_qp(rng, n, m, cone);
        let dir = random_direction(rng, n, m);
        let Ok(sp) = solve_saddle_point(&qp) else { continue };
        // A cone collapsing to {0} makes every difference quotient pure roundoff.
        if sp.u.norm() < 1e-6 {
            continue;
        }
        if !strictly_complementary(&qp, &sp, 1e-3) {
            continue;
        }
        let stable = [-s_max, s_max].iter().all(|&s| {
            perturbed_qp(&qp, &dir, s)
                .and_then(|p| solve_saddle_point(&p))
                .is_ok_and(|q| q.active_set == sp.active_set)
        });
        if stable {
            return (qp, dir);
        }
    }
}

/// Energy magnitude of the data: `1/2 f'A⁻¹f`, the unconstrained optimal |E|.
pub fn energy_scale(qp: &ConeQp) -> f64 {
    let chol = qp.a().clone().cholesky().expect("A is positive definite");
    0.5 * qp.f().dot(&chol.solve(qp.f()))
}

/// Exhaustive oracle for the inequality cone: solves the bordered system for
/// every subset of constraints with a dense LU and keeps the KKT-feasible one
/// of least objective.
pub fn enumerate_active_sets(qp: &ConeQp) -> (DVector<f64>, DVector<f64>) {
    let (n, m) = (qp.n(), qp.m());
    let tol = 1e-9 * (1.0 + qp.f().norm());
    let mut best: Option<(f64, DVector<f64>, DVector<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let rows: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let k = rows.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(qp.a());
        for (r, &i) in rows.iter().enumerate() {
            for j in 0..n {
                kkt[(j, n + r)] = -qp.b()[(i, j)];
                kkt[(n + r, j)] = -qp.b()[(i, j)];
            }
        }
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(qp.f());
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let u = sol.rows(0, n).into_owned();
        let mut lambda = DVector::zeros(m);
        for (r, &i) in rows.iter().enumerate() {
            lambda[i] = sol[n + r];
        }
        let bu = qp.b() * &u;
        if bu.iter().any(|&v| v < -tol) || lambda.iter().any(|&v| v < -tol) {
            continue;
        }
        let mut obj = 0.0;
        for i in 0..n {
            for j in 0..n {
                obj += 0.5 * u[i] * qp.a()[(i, j)] * u[j];
            }
            obj -= qp.f()[i] * u[i];
        }
        if best.as_ref().is_none_or(|(o, _, _)| obj < *o) {
            best = Some((obj, u, lambda));
        }
    }
    let (_, u, lambda) = best.expect("a strictly convex QP has a KKT point");
    (u, lambda)
}
