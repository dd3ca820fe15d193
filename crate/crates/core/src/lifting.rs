//! Divergence-free extensions of the pump traces and the homogenised load.
//!
//! Each trace `ψ_k` is extended by a steady Stokes solve with the symmetric-gradient form
//! `2ν∫ε(u):ε(v)`, so the extension is orthogonal in that form to every discretely
//! divergence-free field vanishing on the boundary.

use crate::discretization::space::Vec2;
use crate::discretization::MixedSpace;
use crate::error::{Error, Result};
use crate::linalg::axpy;
use crate::pumps::PumpSet;
use crate::saddle::SaddleSolver;

const COMPATIBILITY_TOL: f64 = 1e-8;

/// Body force `F(x, t)`.
pub trait Forcing: Send + Sync {
    fn eval(&self, x: Vec2, t: f64) -> Vec2;

    /// Lets callers skip quadrature for identically zero forcing.
    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroForcing;

impl Forcing for ZeroForcing {
    fn eval(&self, _: Vec2, _: f64) -> Vec2 {
        [0.0; 2]
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// `∫ F(·, t)·φ_a` for every velocity basis function.
pub fn forcing_load(space: &MixedSpace, forcing: &dyn Forcing, t: f64) -> Vec<f64> {
    if forcing.is_zero() {
        return vec![0.0; space.n_velocity()];
    }
    let pts = space.qp_points();
    space.assemble_load(|q| (forcing.eval(pts[q], t), [[0.0; 2]; 2]))
}

/// Stokes lifting of a single compatible trace. Returns `(velocity, pressure, residual)`.
pub fn solve_stokes_lift(space: &MixedSpace, psi: &[f64], nu: f64) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let solver = stokes_solver(space, nu)?;
    lift_with(space, &solver, psi)
}

fn stokes_solver(space: &MixedSpace, nu: f64) -> Result<SaddleSolver> {
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("lifting viscosity must be positive, got {nu}")));
    }
    SaddleSolver::new(space, &space.ops().k_eps.scaled(nu))
}

fn lift_with(space: &MixedSpace, solver: &SaddleSolver, psi: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let flux = space.net_flux(psi);
    if flux.abs() > COMPATIBILITY_TOL {
        return Err(Error::Compatibility { flux });
    }
    let zero = vec![0.0; space.n_velocity()];
    let sol = solver.solve(space, &zero, Some(psi), None)?;
    Ok((sol.velocity, sol.pressure, sol.residual))
}

/// Extensions `ζ_k` (and pressures `p_k`) of every pump trace.
#[derive(Debug, Clone)]
pub struct LiftingBasis {
    fields: Vec<Vec<f64>>,
    pressures: Vec<Vec<f64>>,
    nu: f64,
    residuals: Vec<f64>,
}

impl LiftingBasis {
    pub fn build(space: &MixedSpace, pumps: &PumpSet, nu: f64) -> Result<Self> {
        let mut out = Self { fields: vec![], pressures: vec![], nu, residuals: vec![] };
        if pumps.is_empty() {
            return Ok(out);
        }
        let solver = stokes_solver(space, nu)?;
        for pump in pumps.pumps() {
            let (u, p, r) = lift_with(space, &solver, &pump.psi)?;
            out.fields.push(u);
            out.pressures.push(p);
            out.residuals.push(r);
        }
        Ok(out)
    }

    pub fn fields(&self) -> &[Vec<f64>] {
        &self.fields
    }

    pub fn pressures(&self) -> &[Vec<f64>] {
        &self.pressures
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// `(ζ_g(t), ∂ζ_g/∂t(t))`
    pub fn lift_at(&self, space: &MixedSpace, pumps: &PumpSet, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut zeta = vec![0.0; space.n_velocity()];
        let mut dzeta = vec![0.0; space.n_velocity()];
        for (field, (g, dg)) in self.fields.iter().zip(pumps.rates(t)?) {
            axpy(&mut zeta, g, field);
            axpy(&mut dzeta, dg, field);
        }
        Ok((zeta, dzeta))
    }

    /// Load vector of `H_g = F − ∂ζ_g/∂t − (ζ_g·∇)ζ_g` tested against every velocity basis
    /// function.
    pub fn hg_load(&self, space: &MixedSpace, pumps: &PumpSet, forcing: &dyn Forcing, t: f64) -> Result<Vec<f64>> {
        let (zeta, dzeta) = self.lift_at(space, pumps, t)?;
        Ok(hg_load_from(space, forcing, t, &zeta, &dzeta))
    }
}

/// [`LiftingBasis::hg_load`] for given lifting fields.
pub fn hg_load_from(space: &MixedSpace, forcing: &dyn Forcing, t: f64, zeta: &[f64], dzeta: &[f64]) -> Vec<f64> {
    let mut load = forcing_load(space, forcing, t);
    if zeta.iter().all(|v| *v == 0.0) && dzeta.iter().all(|v| *v == 0.0) {
        return load;
    }
    axpy(&mut load, -1.0, &space.ops().mass.mul_vec(dzeta));
    let zq = space.eval_qp(zeta);
    let conv = space.assemble_load(|q| {
        let (g, w) = (&zq.grads[q], zq.vals[q]);
        ([g[0][0] * w[0] + g[0][1] * w[1], g[1][0] * w[0] + g[1][1] * w[1]], [[0.0; 2]; 2])
    });
    axpy(&mut load, -1.0, &conv);
    load
}
