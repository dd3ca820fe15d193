//! Implicit Euler on the full velocity-pressure space.
//!
//! Solves the same discrete equations as the reduced system, but over every discretely
//! divergence-free field instead of a truncated eigenbasis. Used as a reference for the
//! Galerkin runs and for manufactured-solution error studies.

use crate::error::{Error, Result};
use crate::galerkin::{step_count, Problem, NEWTON_MAX_ITER};
use crate::linalg::{axpy, norm2};
use crate::saddle::SaddleSolver;

const CHORD_TOL: f64 = 1e-12;
/// Iterations on one frozen Jacobian before it is rebuilt.
const CHORD_REFRESH: usize = 8;
/// A step needing this many iterations drops the carried-over Jacobian.
const CHORD_SLOW: usize = 4;

#[derive(Debug, Clone, Default)]
pub struct FullTrajectory {
    pub times: Vec<f64>,
    /// Homogeneous part `z` at each saved time.
    pub states: Vec<Vec<f64>>,
    pub pressures: Vec<Vec<f64>>,
    pub iterations: Vec<usize>,
}

/// Velocity `v = ζ_g(t) + z` of a saved full-space state.
pub fn reconstruct(problem: &Problem, t: f64, z: &[f64]) -> Result<Vec<f64>> {
    let (mut v, _) = problem.lift_at(t)?;
    axpy(&mut v, 1.0, z);
    Ok(v)
}

pub struct FullSpaceSolver<'a> {
    problem: &'a Problem,
    convection: bool,
}

impl<'a> FullSpaceSolver<'a> {
    pub fn new(problem: &'a Problem) -> Self {
        Self { problem, convection: true }
    }

    pub fn without_convection(mut self) -> Self {
        self.convection = false;
        self
    }

    /// Momentum residual `M(z⁺ − z)/dt + L(z⁺) − H(t₁)`, without the pressure term.
    fn residual(
        &self,
        z_old: &[f64],
        z: &[f64],
        zeta_q: &crate::discretization::QpField,
        h: &[f64],
        dt: f64,
    ) -> Vec<f64> {
        let space = &self.problem.space;
        let diff: Vec<f64> = z.iter().zip(z_old).map(|(a, b)| (a - b) / dt).collect();
        let mut r = space.ops().mass.mul_vec(&diff);
        axpy(&mut r, 1.0, &self.problem.operator_load(&space.eval_qp(z), zeta_q, self.convection));
        axpy(&mut r, -1.0, h);
        r
    }

    fn factor(&self, z: &[f64], zeta_q: &crate::discretization::QpField, dt: f64) -> Result<SaddleSolver> {
        let space = &self.problem.space;
        let tangent = self.problem.operator_tangent(&space.eval_qp(z), zeta_q, self.convection);
        SaddleSolver::new(space, &tangent.add_scaled(&space.ops().mass, 1.0 / dt))
    }

    /// One step from `(t, z)`; returns `(z⁺, p⁺, iterations)`.
    pub fn step(&self, t: f64, z: &[f64], dt: f64) -> Result<(Vec<f64>, Vec<f64>, usize)> {
        self.step_cached(t, z, dt, &mut None)
    }

    /// Chord iteration on a Jacobian that may be carried over from earlier steps of the
    /// same size; it is rebuilt whenever convergence slows.
    fn step_cached(
        &self,
        t: f64,
        z: &[f64],
        dt: f64,
        cache: &mut Option<SaddleSolver>,
    ) -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let space = &self.problem.space;
        let t1 = t + dt;
        let (zeta, dzeta) = self.problem.lift_at(t1)?;
        let h = crate::lifting::hg_load_from(space, self.problem.forcing.as_ref(), t1, &zeta, &dzeta);
        let zeta_q = space.eval_qp(&zeta);
        let mut y = z.to_vec();
        let mut since_refresh = 0;
        for it in 1..=NEWTON_MAX_ITER {
            if cache.is_none() || since_refresh == CHORD_REFRESH {
                *cache = Some(self.factor(&y, &zeta_q, dt)?);
                since_refresh = 0;
            }
            let solver = cache.as_ref().expect("factorisation present");
            let mut rhs = self.residual(z, &y, &zeta_q, &h, dt);
            rhs.iter_mut().for_each(|v| *v = -*v);
            let g: Vec<f64> = space.ops().div.mul_vec(&y).iter().map(|v| -v).collect();
            let sol = solver.solve(space, &rhs, None, Some(&g))?;
            axpy(&mut y, 1.0, &sol.velocity);
            let step = norm2(&sol.velocity);
            if !step.is_finite() {
                break;
            }
            if step <= CHORD_TOL * norm2(&y).max(1.0) {
                if since_refresh >= CHORD_SLOW {
                    *cache = None;
                }
                return Ok((y, sol.pressure, it));
            }
            since_refresh += 1;
        }
        *cache = None;
        let r = norm2(&self.residual(z, &y, &zeta_q, &h, dt));
        Err(Error::Step { t: t1, residual: r, iterations: NEWTON_MAX_ITER })
    }

    /// Integrates the homogeneous part from `z0` at `t = 0`, saving every step.
    pub fn integrate(&self, z0: &[f64], end: f64, dt: f64) -> Result<FullTrajectory> {
        let steps = step_count(end, dt)?;
        let mut out = FullTrajectory {
            times: vec![0.0],
            states: vec![z0.to_vec()],
            pressures: vec![vec![0.0; self.problem.space.n_pressure()]],
            iterations: vec![],
        };
        let mut z = z0.to_vec();
        let mut cache = None;
        for i in 0..steps {
            let t = i as f64 * dt;
            let (next, p, it) = self.step_cached(t, &z, dt, &mut cache)?;
            out.times.push((i + 1) as f64 * dt);
            out.states.push(next.clone());
            out.pressures.push(p);
            out.iterations.push(it);
            z = next;
        }
        Ok(out)
    }
}

/// `‖v_h − v‖_{L²(0,T;L²)}` against an exact velocity, trapezoid in time.
pub fn space_time_l2_error(
    problem: &Problem,
    traj: &FullTrajectory,
    exact: impl Fn([f64; 2], f64) -> [f64; 2],
) -> Result<f64> {
    let space = &problem.space;
    let pts = space.qp_points();
    let w = space.qp_weights();
    let mut sq = Vec::with_capacity(traj.times.len());
    for (t, z) in traj.times.iter().zip(&traj.states) {
        let v = reconstruct(problem, *t, z)?;
        let qp = space.eval_qp(&v);
        let e: f64 = (0..pts.len())
            .map(|q| {
                let ex = exact(pts[q], *t);
                w[q] * ((qp.vals[q][0] - ex[0]).powi(2) + (qp.vals[q][1] - ex[1]).powi(2))
            })
            .sum();
        sq.push(e);
    }
    Ok(trapezoid(&traj.times, &sq).sqrt())
}

pub fn trapezoid(t: &[f64], f: &[f64]) -> f64 {
    t.windows(2).zip(f.windows(2)).map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{build_rect_mesh, MixedSpace};
    use crate::eigenbasis::{solve_stokes_eigen, subspace_dimension};
    use crate::galerkin::{GalerkinState, GalerkinSystem, Scheme};
    use crate::lifting::ZeroForcing;
    use crate::manufactured::ManufacturedSwirl;
    use crate::pumps::PumpSet;
    use crate::turbulence::ClosureParams;

    #[test]
    fn matches_galerkin_with_the_full_basis() {
        let space = MixedSpace::new(build_rect_mesh(1.0, 1.0, 2, 2).unwrap()).unwrap();
        let params = ClosureParams::new(0.05, 0.1).unwrap();
        let forcing = ManufacturedSwirl::new(1.0, 1.0, params);
        let p = Problem::new(space, PumpSet::empty(), Box::new(forcing), params).unwrap();
        let n = subspace_dimension(&p.space);
        let basis = solve_stokes_eigen(&p.space, n, 0).unwrap();
        let sys = GalerkinSystem::new(&p, &basis);
        let tr = sys.integrate(GalerkinState { t: 0.0, z: vec![0.0; n] }, 0.2, 0.05, Scheme::ImplicitEuler).unwrap();
        let full = FullSpaceSolver::new(&p).integrate(&vec![0.0; p.space.n_velocity()], 0.2, 0.05).unwrap();
        for (zr, zf) in tr.states.iter().zip(&full.states) {
            let v = basis.expand(zr);
            for (a, b) in v.iter().zip(zf) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let space = MixedSpace::new(build_rect_mesh(1.0, 1.0, 2, 2).unwrap()).unwrap();
        let params = ClosureParams::new(0.1, 0.1).unwrap();
        let p = Problem::new(space, PumpSet::empty(), Box::new(ZeroForcing), params).unwrap();
        let full = FullSpaceSolver::new(&p).integrate(&vec![0.0; p.space.n_velocity()], 0.1, 0.05).unwrap();
        assert!(full.states.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn trapezoid_examples() {
        assert_eq!(trapezoid(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]), 2.0);
        assert_eq!(trapezoid(&[0.0], &[3.0]), 0.0);
    }
}
