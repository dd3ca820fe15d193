//! Discrete Stokes eigenpairs: `K_∇ ξ + Bᵀp = λ M ξ`, `B ξ = 0`, `ξ = 0` on the boundary.
//!
//! Shift-invert at zero: the operator `y ↦ S⁻¹ M y`, with `S` the velocity-pressure block
//! built on `K_∇`, is self-adjoint in the M inner product and maps into the discretely
//! divergence-free subspace. A block Krylov space of that operator is built with full
//! M-orthogonalisation and the largest Ritz values `1/λ` are extracted. Starting with a
//! block (not a single vector) keeps repeated eigenvalues, which the symmetric square
//! produces exactly, from being missed.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretization::MixedSpace;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::saddle::SaddleSolver;

/// Relative residual required of every returned pair.
pub const RESIDUAL_TOL: f64 = 1e-9;
const BLOCK: usize = 4;
const BREAKDOWN: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct EigenBasis {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    residuals: Vec<f64>,
    gram_residual: f64,
    fingerprint: String,
}

/// Dimension of the discretely divergence-free, boundary-zero velocity subspace.
pub fn subspace_dimension(space: &MixedSpace) -> usize {
    // B restricted to interior dofs has rank n_p - 1 (constants are its only cokernel)
    space.interior_dofs().len().saturating_sub(space.n_pressure() - 1)
}

struct Krylov<'a> {
    space: &'a MixedSpace,
    solver: SaddleSolver,
    rng: ChaCha8Rng,
    basis: Vec<Vec<f64>>,
    m_basis: Vec<Vec<f64>>,
    op_basis: Vec<Vec<f64>>,
    pending: Vec<Vec<f64>>,
    /// Number of basis vectors whose image has already been fed back as a candidate.
    expanded: usize,
    exhausted: bool,
}

impl<'a> Krylov<'a> {
    fn op(&self, y: &[f64]) -> Result<Vec<f64>> {
        let my = self.space.ops().mass.mul_vec(y);
        Ok(self.solver.solve(self.space, &my, None, None)?.velocity)
    }

    fn random_interior(&mut self) -> Vec<f64> {
        let mut v = vec![0.0; self.space.n_velocity()];
        for &d in self.space.interior_dofs() {
            v[d] = self.rng.random_range(-1.0..1.0);
        }
        v
    }

    /// M-orthogonalises against the basis (twice) and appends; false on breakdown.
    fn push(&mut self, mut w: Vec<f64>) -> bool {
        let m = &self.space.ops().mass;
        let before = dot(&w, &m.mul_vec(&w)).sqrt();
        if before == 0.0 {
            return false;
        }
        for _ in 0..2 {
            for (q, mq) in self.basis.iter().zip(&self.m_basis) {
                let c = dot(&w, mq);
                axpy(&mut w, -c, q);
            }
        }
        let mw = m.mul_vec(&w);
        let after = dot(&w, &mw).sqrt();
        if after <= BREAKDOWN * before {
            return false;
        }
        let s = 1.0 / after;
        w.iter_mut().for_each(|v| *v *= s);
        self.m_basis.push(mw.into_iter().map(|v| v * s).collect());
        self.basis.push(w);
        true
    }

    fn fresh(&mut self) -> Result<Vec<f64>> {
        let r = self.random_interior();
        self.op(&r)
    }

    /// Grows the basis to `target` vectors (or until the subspace is exhausted).
    fn extend(&mut self, target: usize) -> Result<()> {
        while self.basis.len() < target && !self.exhausted {
            let candidate = if let Some(c) = self.pending.pop() {
                c
            } else if self.expanded < self.basis.len() {
                if self.op_basis.len() == self.expanded {
                    let next = self.op(&self.basis[self.expanded])?;
                    self.op_basis.push(next);
                }
                self.expanded += 1;
                self.op_basis[self.expanded - 1].clone()
            } else {
                self.fresh()?
            };
            if !self.push(candidate) {
                let mut recovered = false;
                for _ in 0..3 {
                    let c = self.fresh()?;
                    if self.push(c) {
                        recovered = true;
                        break;
                    }
                }
                self.exhausted = !recovered;
            }
        }
        while self.op_basis.len() < self.basis.len() {
            let next = self.op(&self.basis[self.op_basis.len()])?;
            self.op_basis.push(next);
        }
        Ok(())
    }
}

struct Ritz {
    theta: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    residuals: Vec<f64>,
}

fn rayleigh_ritz(k: &Krylov<'_>, count: usize) -> Ritz {
    let n = k.basis.len();
    let h =
        DMatrix::from_fn(n, n, |i, j| 0.5 * (dot(&k.op_basis[j], &k.m_basis[i]) + dot(&k.op_basis[i], &k.m_basis[j])));
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mass = &k.space.ops().mass;
    let mut out = Ritz { theta: vec![], vectors: vec![], residuals: vec![] };
    for &i in order.iter().take(count) {
        let theta = eig.eigenvalues[i];
        let y = eig.eigenvectors.column(i);
        let mut x = vec![0.0; k.space.n_velocity()];
        let mut opx = vec![0.0; k.space.n_velocity()];
        for j in 0..n {
            axpy(&mut x, y[j], &k.basis[j]);
            axpy(&mut opx, y[j], &k.op_basis[j]);
        }
        axpy(&mut opx, -theta, &x);
        let res = dot(&opx, &mass.mul_vec(&opx)).sqrt() / theta.abs().max(f64::MIN_POSITIVE);
        out.theta.push(theta);
        out.vectors.push(x);
        out.residuals.push(res);
    }
    out
}

/// The `n_modes` smallest eigenpairs, M-orthonormal and sorted by eigenvalue.
pub fn solve_stokes_eigen(space: &MixedSpace, n_modes: usize, seed: u64) -> Result<EigenBasis> {
    let available = subspace_dimension(space);
    if n_modes == 0 || n_modes > available {
        return Err(Error::Capacity { requested: n_modes, available });
    }
    let solver = SaddleSolver::new(space, &space.ops().k_grad)?;
    let mut k = Krylov {
        space,
        solver,
        rng: ChaCha8Rng::seed_from_u64(seed),
        basis: vec![],
        m_basis: vec![],
        op_basis: vec![],
        pending: vec![],
        expanded: 0,
        exhausted: false,
    };
    for _ in 0..BLOCK.min(available) {
        let r = k.fresh()?;
        k.pending.push(r);
    }
    let mut target = (2 * n_modes + 20).max(2 * BLOCK).min(available);
    let ritz = loop {
        k.extend(target)?;
        let ritz = rayleigh_ritz(&k, n_modes.min(k.basis.len()));
        let worst = ritz.residuals.iter().cloned().fold(0.0, f64::max);
        let complete = ritz.theta.len() == n_modes;
        if complete && worst <= RESIDUAL_TOL {
            break ritz;
        }
        if k.exhausted || k.basis.len() >= available {
            if complete && worst <= RESIDUAL_TOL * 10.0 && k.basis.len() >= available {
                break ritz;
            }
            return Err(Error::EigenNonConvergence { residual: worst });
        }
        target = (target + target / 2).min(available);
    };
    if ritz.theta.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::EigenNonConvergence { residual: f64::INFINITY });
    }
    finish(space, ritz)
}

fn finish(space: &MixedSpace, ritz: Ritz) -> Result<EigenBasis> {
    let mass = &space.ops().mass;
    let mut vectors = ritz.vectors;
    // already orthonormal up to rounding; two Gram-Schmidt sweeps tighten it
    for _ in 0..2 {
        for i in 0..vectors.len() {
            for j in 0..i {
                let (head, tail) = vectors.split_at_mut(i);
                let c = dot(&tail[0], &mass.mul_vec(&head[j]));
                axpy(&mut tail[0], -c, &head[j]);
            }
            let nrm = dot(&vectors[i], &mass.mul_vec(&vectors[i])).sqrt();
            vectors[i].iter_mut().for_each(|v| *v /= nrm);
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>, f64)> =
        vectors.into_iter().zip(ritz.residuals).map(|(x, r)| (space.ops().k_grad.bilinear(&x, &x), x, r)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (values, vectors, residuals) =
        pairs.into_iter().fold((vec![], vec![], vec![]), |(mut l, mut v, mut r), (li, vi, ri)| {
            l.push(li);
            v.push(vi);
            r.push(ri);
            (l, v, r)
        });
    let mut basis =
        EigenBasis { values, vectors, residuals, gram_residual: 0.0, fingerprint: space.mesh().fingerprint() };
    basis.gram_residual = basis.gram_residual(space);
    Ok(basis)
}

impl EigenBasis {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// `‖Op x − x/λ‖_M · λ` per mode, with `Op` the shift-invert operator.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// First `n` modes.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n > self.len() {
            return Err(Error::Capacity { requested: n, available: self.len() });
        }
        Ok(Self {
            values: self.values[..n].to_vec(),
            vectors: self.vectors[..n].to_vec(),
            residuals: self.residuals[..n].to_vec(),
            gram_residual: self.gram_residual,
            fingerprint: self.fingerprint.clone(),
        })
    }

    /// `max |ξᵢᵀMξⱼ − δᵢⱼ|`
    pub fn gram_residual(&self, space: &MixedSpace) -> f64 {
        let mx: Vec<Vec<f64>> = self.vectors.iter().map(|x| space.ops().mass.mul_vec(x)).collect();
        let mut worst = 0.0f64;
        for (i, a) in self.vectors.iter().enumerate() {
            for (j, mb) in mx.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(a, mb) - target).abs());
            }
        }
        worst
    }

    /// Stored Gram residual from construction.
    pub fn gram_residual_at_build(&self) -> f64 {
        self.gram_residual
    }

    /// `(ξᵀK_∇ξ)/(ξᵀMξ)` per mode.
    pub fn rayleigh_quotients(&self, space: &MixedSpace) -> Vec<f64> {
        self.vectors.iter().map(|x| space.ops().k_grad.bilinear(x, x) / space.ops().mass.bilinear(x, x)).collect()
    }

    /// `Σ cₖ ξₖ`
    pub fn expand(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.len());
        let mut out = vec![0.0; self.vectors.first().map_or(0, Vec::len)];
        for (c, x) in coeffs.iter().zip(&self.vectors) {
            axpy(&mut out, *c, x);
        }
        out
    }

    /// M-orthogonal projection coefficients `cₖ = ξₖᵀ M v`.
    pub fn project(&self, space: &MixedSpace, v: &[f64]) -> Vec<f64> {
        let mv = space.ops().mass.mul_vec(v);
        self.project_load(&mv)
    }

    /// `ξₖᵀ f` for a load vector `f`.
    pub fn project_load(&self, load: &[f64]) -> Vec<f64> {
        self.vectors.iter().map(|x| dot(x, load)).collect()
    }

    /// CSV: a header line with the mesh fingerprint, the eigenvalues, then one row per
    /// velocity dof holding that dof's coefficient in every mode.
    pub fn to_csv(&self) -> String {
        let n = self.vectors.first().map_or(0, Vec::len);
        let mut s = format!("# recirc-eigenbasis fingerprint={} modes={} dofs={n}\n", self.fingerprint, self.len());
        let join = |it: &mut dyn Iterator<Item = f64>| it.map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "{}", join(&mut self.values.iter().copied()));
        let _ = writeln!(s, "{}", join(&mut self.residuals.iter().copied()));
        for d in 0..n {
            let _ = writeln!(s, "{}", join(&mut self.vectors.iter().map(|x| x[d])));
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv(space: &MixedSpace, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty basis file".into()))?;
        let field = |key: &str| -> Result<String> {
            header
                .split_whitespace()
                .find_map(|tok| tok.strip_prefix(key))
                .map(str::to_owned)
                .ok_or_else(|| Error::Parse(format!("basis header lacks '{key}'")))
        };
        let found = field("fingerprint=")?;
        let expected = space.mesh().fingerprint();
        if found != expected {
            return Err(Error::Fingerprint { expected, found });
        }
        let modes: usize = field("modes=")?.parse().map_err(|e| Error::Parse(format!("modes: {e}")))?;
        let dofs: usize = field("dofs=")?.parse().map_err(|e| Error::Parse(format!("dofs: {e}")))?;
        if dofs != space.n_velocity() {
            return Err(Error::Parse(format!("basis has {dofs} dofs, space has {}", space.n_velocity())));
        }
        let parse_row = |line: Option<&str>, what: &str| -> Result<Vec<f64>> {
            let line = line.ok_or_else(|| Error::Parse(format!("missing {what} row")))?;
            let row: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{what}: {e}"))))
                .collect::<Result<_>>()?;
            if row.len() != modes {
                return Err(Error::Parse(format!("{what} row has {} entries, expected {modes}", row.len())));
            }
            Ok(row)
        };
        let values = parse_row(lines.next(), "eigenvalue")?;
        let residuals = parse_row(lines.next(), "residual")?;
        let mut vectors = vec![vec![0.0; dofs]; modes];
        for d in 0..dofs {
            let row = parse_row(lines.next(), "coefficient")?;
            for (m, v) in row.into_iter().enumerate() {
                vectors[m][d] = v;
            }
        }
        let mut basis = Self { values, vectors, residuals, gram_residual: 0.0, fingerprint: found };
        basis.gram_residual = basis.gram_residual(space);
        Ok(basis)
    }

    pub fn load(space: &MixedSpace, path: &Path) -> Result<Self> {
        Self::from_csv(space, &std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_rect_mesh;
    use crate::linalg::norm2;

    fn space(n: usize) -> MixedSpace {
        MixedSpace::new(build_rect_mesh(1.0, 1.0, n, n).unwrap()).unwrap()
    }

    #[test]
    fn basis_invariants() {
        let s = space(8);
        let b = solve_stokes_eigen(&s, 12, 1).unwrap();
        assert!(b.gram_residual(&s) < 1e-10);
        assert!(b.values().windows(2).all(|w| w[0] <= w[1]));
        assert!(b.values()[0] > 0.0);
        for (l, r) in b.values().iter().zip(b.rayleigh_quotients(&s)) {
            assert!((l - r).abs() < 1e-8 * l);
        }
        for (x, r) in b.vectors().iter().zip(b.residuals()) {
            assert!(*r <= RESIDUAL_TOL);
            assert!(norm2(&s.ops().div.mul_vec(x)) < 1e-8);
            for d in 0..s.n_velocity() {
                if s.is_boundary_dof(d) {
                    assert_eq!(x[d], 0.0);
                }
            }
        }
        // the square's symmetry makes the second and third eigenvalues coincide
        assert!((b.values()[1] - b.values()[2]).abs() < 1e-8 * b.values()[1]);
    }

    #[test]
    fn project_expand_round_trip() {
        let s = space(6);
        let b = solve_stokes_eigen(&s, 8, 2).unwrap();
        let c: Vec<f64> = (0..8).map(|i| (i as f64 - 3.5) * 0.3).collect();
        let back = b.project(&s, &b.expand(&c));
        for (a, e) in back.iter().zip(&c) {
            assert!((a - e).abs() < 1e-12);
        }
        let e3 = b.project(&s, &b.vectors()[2]);
        for (i, v) in e3.iter().enumerate() {
            assert!((v - if i == 2 { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
        assert!(b.project(&s, &vec![0.0; s.n_velocity()]).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn capacity_error() {
        let s = space(2);
        let cap = subspace_dimension(&s);
        assert!(matches!(solve_stokes_eigen(&s, cap + 1, 0), Err(Error::Capacity { .. })));
    }

    #[test]
    fn full_subspace_is_reachable() {
        let s = space(2);
        let cap = subspace_dimension(&s);
        let b = solve_stokes_eigen(&s, cap, 0).unwrap();
        assert_eq!(b.len(), cap);
        assert!(b.gram_residual(&s) < 1e-10);
    }

    #[test]
    fn csv_round_trip_and_fingerprint_guard() {
        let s = space(4);
        let b = solve_stokes_eigen(&s, 5, 3).unwrap();
        let back = EigenBasis::from_csv(&s, &b.to_csv()).unwrap();
        assert_eq!(back.values(), b.values());
        assert_eq!(back.vectors(), b.vectors());
        let other = space(6);
        assert!(matches!(EigenBasis::from_csv(&other, &b.to_csv()), Err(Error::Fingerprint { .. })));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let s = space(4);
        let a = solve_stokes_eigen(&s, 4, 9).unwrap();
        let b = solve_stokes_eigen(&s, 4, 9).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }
}
