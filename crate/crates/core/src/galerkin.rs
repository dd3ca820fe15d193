//! Reduced dynamics `dz/dt = F(z, t)` on the Stokes eigenbasis and its time integration.
//!
//! With `v = ζ_g + z` and `z = Σ z_k ξ_k`, component `k` of the right-hand side is
//!
//! ```text
//! (H_g, ξ_k) − c(z; ζ_g + z, ξ_k) − c(ζ_g; z, ξ_k)
//!            − 2ν∫ε(z):ε(ξ_k) − 2ν_tur∫|ε(v)| ε(v):ε(ξ_k)
//! ```
//!
//! where `c` is the skew-symmetrised convection. The basis is M-orthonormal, so the mass
//! matrix of the reduced system is the identity.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::discretization::space::{PointOperator, QpField};
use crate::discretization::MixedSpace;
use crate::eigenbasis::EigenBasis;
use crate::error::{Error, Result};
use crate::lifting::{hg_load_from, Forcing, LiftingBasis};
use crate::linalg::{axpy, dot, norm2};
use crate::pumps::PumpSet;
use crate::turbulence::{
    convection_operator_in_u, convection_operator_in_w, stress_point_operator, ClosureParams, Strain,
};

pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;
const TRACE_TOL: f64 = 1e-8;

/// Everything that defines the continuous problem on a given discretisation.
pub struct Problem {
    pub space: MixedSpace,
    pub pumps: PumpSet,
    pub lifting: LiftingBasis,
    pub forcing: Box<dyn Forcing>,
    pub params: ClosureParams,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("n_velocity", &self.space.n_velocity())
            .field("pumps", &self.pumps.len())
            .field("params", &self.params)
            .finish()
    }
}

impl Problem {
    /// Builds the lifting with the molecular viscosity.
    pub fn new(space: MixedSpace, pumps: PumpSet, forcing: Box<dyn Forcing>, params: ClosureParams) -> Result<Self> {
        let lifting = LiftingBasis::build(&space, &pumps, params.nu)?;
        Ok(Self { space, pumps, lifting, forcing, params })
    }

    /// `(ζ_g(t), ∂ζ_g/∂t(t))`
    pub fn lift_at(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.lifting.lift_at(&self.space, &self.pumps, t)
    }

    /// Load vector of `H_g(t)`.
    pub fn hg_load(&self, t: f64) -> Result<Vec<f64>> {
        let (zeta, dzeta) = self.lift_at(t)?;
        Ok(hg_load_from(&self.space, self.forcing.as_ref(), t, &zeta, &dzeta))
    }

    /// Full-space load of the terms moved to the left: convection, viscous and turbulent
    /// stress, evaluated for homogeneous part `z` and lifting `ζ`.
    pub fn operator_load(&self, z: &QpField, zeta: &QpField, convection: bool) -> Vec<f64> {
        let p = self.params;
        self.space.assemble_load(|q| {
            let (zv, zg) = (z.vals[q], &z.grads[q]);
            let (lv, lg) = (zeta.vals[q], &zeta.grads[q]);
            let vv = [zv[0] + lv[0], zv[1] + lv[1]];
            let vg = [[zg[0][0] + lg[0][0], zg[0][1] + lg[0][1]], [zg[1][0] + lg[1][0], zg[1][1] + lg[1][1]]];
            let ez = Strain::from_gradient(zg);
            let ev = Strain::from_gradient(&vg);
            let turb = 2.0 * p.nu_tur * ev.magnitude();
            let mut s = [0.0; 2];
            let mut g = [[0.0; 2]; 2];
            for c in 0..2 {
                for j in 0..2 {
                    g[c][j] = 2.0 * p.nu * ez.0[c][j] + turb * ev.0[c][j];
                }
            }
            if convection {
                // c(z; v, ·) + c(ζ; z, ·)
                for c in 0..2 {
                    s[c] = 0.5 * (vg[c][0] * zv[0] + vg[c][1] * zv[1] + zg[c][0] * lv[0] + zg[c][1] * lv[1]);
                    for j in 0..2 {
                        g[c][j] -= 0.5 * (vv[c] * zv[j] + zv[c] * lv[j]);
                    }
                }
            }
            (s, g)
        })
    }

    /// Point operator of the derivative of [`Problem::operator_load`] with respect to `z`.
    pub fn operator_tangent(&self, z: &QpField, zeta: &QpField, convection: bool) -> crate::linalg::CsrMatrix {
        let p = self.params;
        self.space.assemble_matrix(|q| {
            let (zv, zg) = (z.vals[q], &z.grads[q]);
            let (lv, lg) = (zeta.vals[q], &zeta.grads[q]);
            let vv = [zv[0] + lv[0], zv[1] + lv[1]];
            let vg = [[zg[0][0] + lg[0][0], zg[0][1] + lg[0][1]], [zg[1][0] + lg[1][0], zg[1][1] + lg[1][1]]];
            let mut t: PointOperator = stress_point_operator(&Strain::from_gradient(&vg), &p);
            if convection {
                // d/dz [c(z; v, ·) + c(ζ; z, ·)] = c(δ; v, ·) + c(v; δ, ·)
                let a = convection_operator_in_w(&vg, vv);
                let b = convection_operator_in_u(vv);
                for r in 0..6 {
                    for c in 0..6 {
                        t[r][c] += a[r][c] + b[r][c];
                    }
                }
            }
            t
        })
    }

    /// Checks that `v0` vanishes on the boundary and is discretely divergence-free.
    pub fn check_initial(&self, v0: &[f64]) -> Result<()> {
        let scale = norm2(v0).max(1.0);
        let trace = (0..v0.len()).filter(|&d| self.space.is_boundary_dof(d)).map(|d| v0[d].abs()).fold(0.0, f64::max);
        if trace > TRACE_TOL * scale {
            return Err(Error::InvalidArgument(format!("initial velocity has boundary values up to {trace:e}")));
        }
        let div = norm2(&self.space.ops().div.mul_vec(v0));
        if div > TRACE_TOL * scale {
            return Err(Error::InvalidArgument(format!("initial velocity has discrete divergence {div:e}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    ImplicitEuler,
    #[serde(alias = "rk4")]
    ExplicitRk4,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit-euler" => Ok(Self::ImplicitEuler),
            "explicit-rk4" | "rk4" => Ok(Self::ExplicitRk4),
            other => Err(Error::InvalidArgument(format!("unknown time scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinState {
    pub t: f64,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// One entry per step (so one fewer than `times`).
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// A failed integration keeps the steps completed before the failure.
#[derive(Debug)]
pub struct IntegrationError {
    pub error: Error,
    pub partial: Trajectory,
}

impl std::fmt::Display for IntegrationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} saved states)", self.error, self.partial.len())
    }
}

impl std::error::Error for IntegrationError {}

/// Number of steps of size `dt` covering `[0, end]`; `end` must be a multiple of `dt`.
pub fn step_count(end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && end > 0.0 && dt.is_finite() && end.is_finite()) {
        return Err(Error::InvalidArgument(format!("need T > 0 and dt > 0, got T={end}, dt={dt}")));
    }
    let n = (end / dt).round();
    if (n * dt - end).abs() > 1e-9 * end || n < 1.0 {
        return Err(Error::InvalidArgument(format!("T={end} is not a multiple of dt={dt}")));
    }
    Ok(n as usize)
}

/// The reduced system for one problem and one basis.
pub struct GalerkinSystem<'a> {
    problem: &'a Problem,
    basis: &'a EigenBasis,
    convection: bool,
}

impl<'a> GalerkinSystem<'a> {
    pub fn new(problem: &'a Problem, basis: &'a EigenBasis) -> Self {
        Self { problem, basis, convection: true }
    }

    /// Drops the convection terms (linear test problems only).
    pub fn without_convection(mut self) -> Self {
        self.convection = false;
        self
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    pub fn basis(&self) -> &EigenBasis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `z(0)` as the M-orthogonal projection of `v0`.
    pub fn initial_state(&self, v0: &[f64]) -> Result<GalerkinState> {
        self.problem.check_initial(v0)?;
        Ok(GalerkinState { t: 0.0, z: self.basis.project(&self.problem.space, v0) })
    }

    /// Reconstructed velocity `v = ζ_g(t) + Σ z_k ξ_k`.
    pub fn velocity(&self, state: &GalerkinState) -> Result<Vec<f64>> {
        let (mut v, _) = self.problem.lift_at(state.t)?;
        axpy(&mut v, 1.0, &self.basis.expand(&state.z));
        Ok(v)
    }

    pub fn rhs(&self, z: &[f64], t: f64) -> Result<Vec<f64>> {
        let space = &self.problem.space;
        let (zeta, dzeta) = self.problem.lift_at(t)?;
        let mut load = hg_load_from(space, self.problem.forcing.as_ref(), t, &zeta, &dzeta);
        let zq = space.eval_qp(&self.basis.expand(z));
        let lq = space.eval_qp(&zeta);
        axpy(&mut load, -1.0, &self.problem.operator_load(&zq, &lq, self.convection));
        Ok(self.basis.project_load(&load))
    }

    /// `∂ rhs / ∂z`
    pub fn jacobian(&self, z: &[f64], t: f64) -> Result<DMatrix<f64>> {
        let space = &self.problem.space;
        let (zeta, _) = self.problem.lift_at(t)?;
        let zq = space.eval_qp(&self.basis.expand(z));
        let lq = space.eval_qp(&zeta);
        let tangent = self.problem.operator_tangent(&zq, &lq, self.convection);
        let n = self.dim();
        let images: Vec<Vec<f64>> = self.basis.vectors().iter().map(|x| tangent.mul_vec(x)).collect();
        Ok(DMatrix::from_fn(n, n, |i, j| -dot(&self.basis.vectors()[i], &images[j])))
    }

    /// Mismatch in the discrete energy balance of one implicit Euler step,
    /// `½|z⁺|² − ½|z|² = dt z⁺·F(z⁺, t⁺) − ½|z⁺ − z|²`.
    pub fn energy_identity_residual(&self, prev: &GalerkinState, next: &GalerkinState) -> Result<f64> {
        let dt = next.t - prev.t;
        let f = self.rhs(&next.z, next.t)?;
        let jump: f64 = next.z.iter().zip(&prev.z).map(|(a, b)| (a - b) * (a - b)).sum();
        let lhs = 0.5 * dot(&next.z, &next.z) - 0.5 * dot(&prev.z, &prev.z);
        Ok(lhs - (dt * dot(&next.z, &f) - 0.5 * jump))
    }

    pub fn step(&self, state: &GalerkinState, dt: f64, scheme: Scheme) -> Result<(GalerkinState, StepDiagnostics)> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        match scheme {
            Scheme::ImplicitEuler => self.implicit_euler(state, dt),
            Scheme::ExplicitRk4 => self.rk4(state, dt),
        }
    }

    fn implicit_euler(&self, state: &GalerkinState, dt: f64) -> Result<(GalerkinState, StepDiagnostics)> {
        let t1 = state.t + dt;
        let residual = |y: &[f64]| -> Result<Vec<f64>> {
            let f = self.rhs(y, t1)?;
            Ok(y.iter().zip(&state.z).zip(&f).map(|((y, z), f)| y - z - dt * f).collect())
        };
        let mut y = state.z.clone();
        let mut r = residual(&y)?;
        let mut rn = norm2(&r);
        let mut iterations = 0;
        while rn > NEWTON_TOL * norm2(&y).max(1.0) {
            if iterations == NEWTON_MAX_ITER || !rn.is_finite() {
                return Err(Error::Step { t: t1, residual: rn, iterations });
            }
            iterations += 1;
            let mut jr = self.jacobian(&y, t1)? * (-dt);
            for i in 0..jr.nrows() {
                jr[(i, i)] += 1.0;
            }
            let delta = jr
                .lu()
                .solve(&DVector::from_column_slice(&r))
                .ok_or_else(|| Error::Solver("singular Newton matrix".into()))?;
            let mut alpha = 1.0;
            loop {
                let trial: Vec<f64> = y.iter().zip(delta.iter()).map(|(a, d)| a - alpha * d).collect();
                let rt = residual(&trial)?;
                let rtn = norm2(&rt);
                if rtn < rn || alpha < 1e-3 {
                    y = trial;
                    r = rt;
                    rn = rtn;
                    break;
                }
                alpha *= 0.5;
            }
        }
        Ok((GalerkinState { t: t1, z: y }, StepDiagnostics { iterations, residual: rn }))
    }

    fn rk4(&self, state: &GalerkinState, dt: f64) -> Result<(GalerkinState, StepDiagnostics)> {
        let (t, z) = (state.t, &state.z);
        let shifted = |k: &[f64], a: f64| -> Vec<f64> { z.iter().zip(k).map(|(z, k)| z + a * k).collect() };
        let k1 = self.rhs(z, t)?;
        let k2 = self.rhs(&shifted(&k1, 0.5 * dt), t + 0.5 * dt)?;
        let k3 = self.rhs(&shifted(&k2, 0.5 * dt), t + 0.5 * dt)?;
        let k4 = self.rhs(&shifted(&k3, dt), t + dt)?;
        let next: Vec<f64> =
            (0..z.len()).map(|i| z[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Step { t: t + dt, residual: f64::INFINITY, iterations: 1 });
        }
        Ok((GalerkinState { t: t + dt, z: next }, StepDiagnostics { iterations: 1, residual: 0.0 }))
    }

    /// Integrates from `initial` to `end` with fixed steps, recording every state.
    pub fn integrate(
        &self,
        initial: GalerkinState,
        end: f64,
        dt: f64,
        scheme: Scheme,
    ) -> std::result::Result<Trajectory, IntegrationError> {
        let mut traj = Trajectory::default();
        let steps = match step_count(end, dt) {
            Ok(n) => n,
            Err(error) => return Err(IntegrationError { error, partial: traj }),
        };
        traj.times.push(initial.t);
        traj.states.push(initial.z.clone());
        let mut state = initial;
        for i in 0..steps {
            // exact grid times avoid drifting past the schedule end
            let target = (i + 1) as f64 * dt;
            match self.step(&state, target - state.t, scheme) {
                Ok((mut next, diag)) => {
                    next.t = target;
                    traj.times.push(next.t);
                    traj.states.push(next.z.clone());
                    traj.diagnostics.push(diag);
                    state = next;
                }
                Err(error) => return Err(IntegrationError { error, partial: traj }),
            }
        }
        Ok(traj)
    }
}
