//! Energy ledger, data functionals and contraction diagnostics computed from trajectories.
//!
//! Time integrals use the trapezoid rule on the saved grid and `∂z/∂t` is a backward
//! difference, so ledger values approximate their continuous counterparts. Strain norms use
//! the symmetric gradient throughout.

use serde::Serialize;

use crate::discretization::norms::strain_sq;
use crate::discretization::{MixedSpace, QpField};
use crate::error::{Error, Result};
use crate::fullspace::trapezoid;
use crate::galerkin::{GalerkinSystem, Problem, Trajectory};
use crate::linalg::{axpy, dot};

const DENOMINATOR_FLOOR: f64 = 1e-14;

/// `(‖ε(u)‖²_{L²}, ‖ε(u)‖³_{L³})`
fn strain_norms(space: &MixedSpace, u: &QpField) -> (f64, f64) {
    let w = space.qp_weights();
    let mut l2 = 0.0;
    let mut l3 = 0.0;
    for (q, g) in u.grads.iter().enumerate() {
        let e = strain_sq(g);
        l2 += w[q] * e;
        l3 += w[q] * e.powf(1.5);
    }
    (l2, l3)
}

/// `(‖u‖²_{L²}, ‖∇u‖²_{L²})`
fn value_norms(space: &MixedSpace, u: &QpField) -> (f64, f64) {
    let w = space.qp_weights();
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for q in 0..w.len() {
        let v = u.vals[q];
        let g = &u.grads[q];
        l2 += w[q] * (v[0] * v[0] + v[1] * v[1]);
        h1 += w[q] * (g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]);
    }
    (l2, h1)
}

/// `‖u‖⁴_{L⁴}`
fn l4_fourth(space: &MixedSpace, u: &[f64]) -> f64 {
    let qp = space.eval_qp(u);
    space.qp_weights().iter().zip(&qp.vals).map(|(w, v)| w * (v[0] * v[0] + v[1] * v[1]).powi(2)).sum()
}

/// Norms of the data entering the a priori bounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DataFunctionals {
    /// `‖v₀‖²_{L²}`
    pub v0_sq: f64,
    /// `ν‖ε(v₀)‖² + (2/3)ν_tur‖ε(v₀)‖³_{L³}`
    pub v0_potential: f64,
    /// `‖H_g‖²_{L²(0,T;L²)}`
    pub hg_sq: f64,
    /// `‖F − ∂ζ_g/∂t‖²_{L²(0,T;L²)}`
    pub htilde_sq: f64,
    /// `‖ε(ζ_g)‖³_{L³(0,T;L³)}`
    pub zeta_w13_cube: f64,
    /// `‖∂ζ_g/∂t‖²_{L²(0,T;H¹)}`
    pub dzeta_h1_sq: f64,
    /// `(∫‖ε(∂ζ_g/∂t)‖²_{L³} dt)^{3/2}`
    pub dzeta_w13_cube: f64,
}

/// `(‖H_g(t)‖²_{L²}, ‖H̃_g(t)‖²_{L²})` at one time, by quadrature of the pointwise fields.
fn hg_pointwise(problem: &Problem, t: f64) -> Result<(f64, f64)> {
    let space = &problem.space;
    let (zeta, dzeta) = problem.lift_at(t)?;
    let zq = space.eval_qp(&zeta);
    let dq = space.eval_qp(&dzeta);
    let pts = space.qp_points();
    let w = space.qp_weights();
    let zero = problem.forcing.is_zero();
    let (mut hg, mut ht) = (0.0, 0.0);
    for q in 0..w.len() {
        let f = if zero { [0.0; 2] } else { problem.forcing.eval(pts[q], t) };
        let g = &zq.grads[q];
        let v = zq.vals[q];
        let mut a = [0.0; 2];
        let mut b = [0.0; 2];
        for c in 0..2 {
            b[c] = f[c] - dq.vals[q][c];
            a[c] = b[c] - (g[c][0] * v[0] + g[c][1] * v[1]);
        }
        hg += w[q] * (a[0] * a[0] + a[1] * a[1]);
        ht += w[q] * (b[0] * b[0] + b[1] * b[1]);
    }
    Ok((hg, ht))
}

/// `‖H_g‖²_{L²(0,T;L²)}` and `‖H̃_g‖²_{L²(0,T;L²)}` by trapezoid on `times`.
pub fn hg_norms(problem: &Problem, times: &[f64]) -> Result<(f64, f64)> {
    let mut hg = Vec::with_capacity(times.len());
    let mut ht = Vec::with_capacity(times.len());
    for &t in times {
        let (a, b) = hg_pointwise(problem, t)?;
        hg.push(a);
        ht.push(b);
    }
    Ok((trapezoid(times, &hg), trapezoid(times, &ht)))
}

/// Data functionals for initial velocity `v0` on the grid `times`.
pub fn data_functionals(problem: &Problem, v0: &[f64], times: &[f64]) -> Result<DataFunctionals> {
    let space = &problem.space;
    let p = problem.params;
    let v0q = space.eval_qp(v0);
    let (v0_sq, _) = value_norms(space, &v0q);
    let (e2, e3) = strain_norms(space, &v0q);
    let (hg_sq, htilde_sq) = hg_norms(problem, times)?;
    let mut zeta3 = Vec::with_capacity(times.len());
    let mut dz_h1 = Vec::with_capacity(times.len());
    let mut dz_w13 = Vec::with_capacity(times.len());
    for &t in times {
        let (zeta, dzeta) = problem.lift_at(t)?;
        zeta3.push(strain_norms(space, &space.eval_qp(&zeta)).1);
        let dq = space.eval_qp(&dzeta);
        let (l2, h1) = value_norms(space, &dq);
        dz_h1.push(l2 + h1);
        dz_w13.push(strain_norms(space, &dq).1.powf(2.0 / 3.0));
    }
    Ok(DataFunctionals {
        v0_sq,
        v0_potential: p.nu * e2 + 2.0 / 3.0 * p.nu_tur * e3,
        hg_sq,
        htilde_sq,
        zeta_w13_cube: trapezoid(times, &zeta3),
        dzeta_h1_sq: trapezoid(times, &dz_h1),
        dzeta_w13_cube: trapezoid(times, &dz_w13).powf(1.5),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LedgerRow {
    pub t: f64,
    /// `‖z(t)‖²_{L²}`
    pub z_sq: f64,
    /// `∫₀ᵗ ‖ε(z)‖²_{L²}`
    pub eps_z_sq_int: f64,
    /// `∫₀ᵗ ‖ε(ζ_g + z)‖³_{L³}`
    pub eps_v_cube_int: f64,
    /// `‖∂z/∂t‖²_{L²}` by backward difference (zero at the first row).
    pub dzdt_sq: f64,
    /// `∫₀ᵗ ‖∂z/∂t‖²_{L²}`
    pub dzdt_sq_int: f64,
    /// `‖ε(v)‖²_{L²} + ‖ε(v)‖³_{L³}`
    pub psi1: f64,
    /// `‖ε(v)‖²_{L³} + ‖ε(∂ζ_g/∂t)‖²_{L²} + ‖ε(∂ζ_g/∂t)‖^{3/2}_{L³}`
    pub psi2: f64,
}

impl LedgerRow {
    pub const COLUMNS: [&'static str; 8] =
        ["t", "z_sq", "eps_z_sq_int", "eps_v_cube_int", "dzdt_sq", "dzdt_sq_int", "psi1", "psi2"];

    pub fn values(&self) -> [f64; 8] {
        [
            self.t,
            self.z_sq,
            self.eps_z_sq_int,
            self.eps_v_cube_int,
            self.dzdt_sq,
            self.dzdt_sq_int,
            self.psi1,
            self.psi2,
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
    pub data: DataFunctionals,
    /// `sup‖z‖² + ∫‖ε(z)‖² + ∫‖ε(ζ_g+z)‖³_{L³}`
    pub lhs: f64,
    /// `‖v₀‖² + ‖ζ_g‖³_{L³(W^{1,3})} + ‖H_g‖²_{L²(L²)}`
    pub rhs: f64,
    /// `lhs / rhs`, absent when the data vanish.
    pub c1: Option<f64>,
}

/// Per-time norms of one saved state.
fn state_norms(sys: &GalerkinSystem, t: f64, z: &[f64]) -> Result<(f64, f64, f64, f64, f64)> {
    let problem = sys.problem();
    let space = &problem.space;
    let zf = sys.basis().expand(z);
    let (zeta, dzeta) = problem.lift_at(t)?;
    let mut v = zeta;
    axpy(&mut v, 1.0, &zf);
    let (ez2, _) = strain_norms(space, &space.eval_qp(&zf));
    let (ev2, ev3) = strain_norms(space, &space.eval_qp(&v));
    let (ed2, ed3) = strain_norms(space, &space.eval_qp(&dzeta));
    let psi2 = ev3.powf(2.0 / 3.0) + ed2 + ed3.sqrt();
    Ok((ez2, ev2, ev3, psi2, dot(z, z)))
}

/// Energy ledger of a reduced trajectory started from `v0`.
pub fn ledger(sys: &GalerkinSystem, traj: &Trajectory, v0: &[f64]) -> Result<EnergyLedger> {
    if traj.len() < 2 {
        return Err(Error::InvalidArgument("ledger needs at least two saved states".into()));
    }
    let mut rows: Vec<LedgerRow> = Vec::with_capacity(traj.len());
    let mut prev: Option<(f64, f64, f64, f64)> = None;
    for (i, (&t, z)) in traj.times.iter().zip(&traj.states).enumerate() {
        let (ez2, ev2, ev3, psi2, z_sq) = state_norms(sys, t, z)?;
        let mut row = LedgerRow { t, z_sq, psi1: ev2 + ev3, psi2, ..Default::default() };
        if let (Some((pt, pez2, pev3, _)), Some(last)) = (prev, rows.last()) {
            let dt = t - pt;
            let dz: f64 = z.iter().zip(&traj.states[i - 1]).map(|(a, b)| (a - b) * (a - b)).sum();
            row.dzdt_sq = dz / (dt * dt);
            row.eps_z_sq_int = last.eps_z_sq_int + 0.5 * dt * (pez2 + ez2);
            row.eps_v_cube_int = last.eps_v_cube_int + 0.5 * dt * (pev3 + ev3);
            row.dzdt_sq_int = last.dzdt_sq_int + dt * row.dzdt_sq;
        }
        prev = Some((t, ez2, ev3, z_sq));
        rows.push(row);
    }
    let data = data_functionals(sys.problem(), v0, &traj.times)?;
    let last = rows.last().expect("non-empty");
    let sup = rows.iter().map(|r| r.z_sq).fold(0.0, f64::max);
    let lhs = sup + last.eps_z_sq_int + last.eps_v_cube_int;
    let rhs = data.v0_sq + data.zeta_w13_cube + data.hg_sq;
    let c1 = (rhs > 0.0).then(|| lhs / rhs);
    Ok(EnergyLedger { rows, data, lhs, rhs, c1 })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ContractionRow {
    pub t: f64,
    /// `‖v₁ − v₂‖²_{L²}`
    pub diff_sq: f64,
    /// `‖v₁‖⁸_{L⁴}`
    pub v1_l4_pow8: f64,
    /// `∫₀ᵗ ‖v₁‖⁸_{L⁴}`
    pub gronwall_int: f64,
}

impl ContractionRow {
    pub const COLUMNS: [&'static str; 4] = ["t", "diff_sq", "v1_l4_pow8", "gronwall_int"];

    pub fn values(&self) -> [f64; 4] {
        [self.t, self.diff_sq, self.v1_l4_pow8, self.gronwall_int]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub rows: Vec<ContractionRow>,
    /// Least `C₂ ≥ 0` with `Δ‖v‖² ≤ C₂ ‖v‖² ∫‖v₁‖⁸_{L⁴}` on every step.
    pub c2: f64,
    /// The two runs coincide at every saved time.
    pub exact_zero: bool,
    /// `exp(−C₂ ∫‖v₁‖⁸) ‖v₁ − v₂‖²` is non-increasing with the fitted constant.
    pub adjusted_monotone: bool,
    /// `‖v₁ − v₂‖²` itself is non-increasing.
    pub raw_nonincreasing: bool,
}

impl ContractionReport {
    /// Checks `‖v₁−v₂‖²(t) ≤ (1+slack) ‖v₁−v₂‖²(0) exp(C₂ ∫₀ᵗ‖v₁‖⁸)` on every row.
    pub fn bound_holds(&self, c2: f64, slack: f64) -> bool {
        let y0 = self.rows[0].diff_sq;
        self.rows.iter().all(|r| r.diff_sq <= (1.0 + slack) * y0 * (c2 * r.gronwall_int).exp())
    }
}

/// Contraction diagnostics for two trajectories of the same system that differ only in
/// their initial state.
pub fn contraction(sys: &GalerkinSystem, run1: &Trajectory, run2: &Trajectory) -> Result<ContractionReport> {
    if run1.times != run2.times || run1.states.first().map(Vec::len) != run2.states.first().map(Vec::len) {
        return Err(Error::InvalidArgument("contraction needs runs on the same time grid and basis".into()));
    }
    if run1.len() < 2 {
        return Err(Error::InvalidArgument("contraction needs at least two saved states".into()));
    }
    let space = &sys.problem().space;
    let mut rows: Vec<ContractionRow> = Vec::with_capacity(run1.len());
    for (i, &t) in run1.times.iter().enumerate() {
        let (a, b) = (&run1.states[i], &run2.states[i]);
        let diff_sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let v1 = sys.velocity(&crate::galerkin::GalerkinState { t, z: a.clone() })?;
        let w = l4_fourth(space, &v1).powi(2);
        let gronwall_int = match rows.last() {
            Some(r) => r.gronwall_int + 0.5 * (t - r.t) * (r.v1_l4_pow8 + w),
            None => 0.0,
        };
        rows.push(ContractionRow { t, diff_sq, v1_l4_pow8: w, gronwall_int });
    }
    let exact_zero = rows.iter().all(|r| r.diff_sq == 0.0);
    // ln(y₁/y₀) ≤ (y₁ − y₀)/y₀, so the per-step fit below makes the adjusted norm monotone
    let mut c2: f64 = 0.0;
    for w in rows.windows(2) {
        let denom = w[0].diff_sq * (w[1].gronwall_int - w[0].gronwall_int);
        if denom > DENOMINATOR_FLOOR {
            c2 = c2.max((w[1].diff_sq - w[0].diff_sq) / denom);
        }
    }
    let adjusted: Vec<f64> = rows.iter().map(|r| (-c2 * r.gronwall_int).exp() * r.diff_sq).collect();
    let adjusted_monotone = adjusted.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300);
    let raw_nonincreasing = rows.windows(2).all(|w| w[1].diff_sq <= w[0].diff_sq);
    Ok(ContractionReport { rows, c2, exact_zero, adjusted_monotone, raw_nonincreasing })
}
