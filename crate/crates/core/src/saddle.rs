//! Velocity-pressure saddle-point solves with strong Dirichlet data.
//!
//! Unknowns are the interior velocity dofs, all pressure dofs and one multiplier that pins
//! the pressure mean to zero:
//!
//! ```text
//! [ A_II  B_Iᵀ  0 ] [u_I]   [f_I - A_IB u_B]
//! [ B_I   0     m ] [p  ] = [g   - B_B u_B ]
//! [ 0     mᵀ    0 ] [λ  ]   [0             ]
//! ```

use crate::discretization::MixedSpace;
use crate::error::{Error, Result};
use crate::linalg::{norm2, CsrMatrix, SparseLu};

#[derive(Debug, Clone)]
pub struct SaddleSolution {
    /// Full-length velocity (boundary entries equal the prescribed data).
    pub velocity: Vec<f64>,
    /// Zero-mean pressure.
    pub pressure: Vec<f64>,
    /// Relative residual of the assembled system.
    pub residual: f64,
}

/// Factorised saddle system for a fixed velocity block `A`.
#[derive(Debug)]
pub struct SaddleSolver {
    a: CsrMatrix,
    lu: SparseLu,
    triplets: Vec<(usize, usize, f64)>,
}

impl SaddleSolver {
    pub fn new(space: &MixedSpace, a: &CsrMatrix) -> Result<Self> {
        let n_i = space.interior_dofs().len();
        let n_p = space.n_pressure();
        let mut trip = Vec::with_capacity(a.nnz() + 2 * space.ops().div.nnz() + 2 * n_p);
        for (r, c, v) in a.triplets() {
            if let (Some(ri), Some(ci)) = (space.interior_index(r), space.interior_index(c)) {
                trip.push((ri, ci, v));
            }
        }
        for (q, c, v) in space.ops().div.triplets() {
            if let Some(ci) = space.interior_index(c) {
                trip.push((n_i + q, ci, v));
                trip.push((ci, n_i + q, v));
            }
        }
        let last = n_i + n_p;
        for (q, &m) in space.ops().pressure_mass.iter().enumerate() {
            trip.push((n_i + q, last, m));
            trip.push((last, n_i + q, m));
        }
        let lu = SparseLu::factor(last + 1, &trip)?;
        Ok(Self { a: a.clone(), lu, triplets: trip })
    }

    /// Solves with load `f` (full velocity length; boundary rows ignored), boundary values
    /// taken from the boundary entries of `boundary`, and divergence right-hand side `g`
    /// (zero when `None`).
    pub fn solve(
        &self,
        space: &MixedSpace,
        f: &[f64],
        boundary: Option<&[f64]>,
        g: Option<&[f64]>,
    ) -> Result<SaddleSolution> {
        let n_v = space.n_velocity();
        let n_i = space.interior_dofs().len();
        let n_p = space.n_pressure();
        assert_eq!(f.len(), n_v);

        let mut ub = vec![0.0; n_v];
        if let Some(b) = boundary {
            assert_eq!(b.len(), n_v);
            for (dof, (ub, bv)) in ub.iter_mut().zip(b).enumerate() {
                if space.is_boundary_dof(dof) {
                    *ub = *bv;
                }
            }
        }
        let a_ub = self.a.mul_vec(&ub);
        let b_ub = space.ops().div.mul_vec(&ub);

        let mut rhs = vec![0.0; n_i + n_p + 1];
        for (i, &dof) in space.interior_dofs().iter().enumerate() {
            rhs[i] = f[dof] - a_ub[dof];
        }
        for q in 0..n_p {
            rhs[n_i + q] = g.map_or(0.0, |g| g[q]) - b_ub[q];
        }
        let x = self.lu.solve(&rhs)?;

        let mut ax = vec![0.0; rhs.len()];
        for &(r, c, v) in &self.triplets {
            ax[r] += v * x[c];
        }
        let scale = norm2(&rhs).max(f64::MIN_POSITIVE);
        let res: Vec<f64> = ax.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        let residual = if norm2(&rhs) == 0.0 { norm2(&res) } else { norm2(&res) / scale };
        if !residual.is_finite() {
            return Err(Error::Solver("saddle solve produced non-finite residual".into()));
        }

        let mut velocity = ub;
        for (i, &dof) in space.interior_dofs().iter().enumerate() {
            velocity[dof] = x[i];
        }
        let mut pressure = x[n_i..n_i + n_p].to_vec();
        space.remove_pressure_mean(&mut pressure);
        Ok(SaddleSolution { velocity, pressure, residual })
    }
}

/// Discrete Leray projection: the M-closest discretely divergence-free field vanishing on
/// the boundary.
#[derive(Debug)]
pub struct LerayProjector {
    solver: SaddleSolver,
}

impl LerayProjector {
    pub fn new(space: &MixedSpace) -> Result<Self> {
        Ok(Self { solver: SaddleSolver::new(space, &space.ops().mass)? })
    }

    pub fn project(&self, space: &MixedSpace, v: &[f64]) -> Result<Vec<f64>> {
        let mv = space.ops().mass.mul_vec(v);
        Ok(self.solver.solve(space, &mv, None, None)?.velocity)
    }
}
