//! Smagorinsky closure and the weak forms built on it.
//!
//! Pointwise algebra (strain, potential, coefficient, stress and its derivative) is written
//! for any dimension `D`. The weak forms are assembled as full-length velocity load vectors
//! on the 2-D space, together with their tangent matrices for Newton solves.

use crate::discretization::space::{Mat2, PointOperator, QpField, Vec2};
use crate::discretization::MixedSpace;
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Molecular viscosity `ν > 0` and turbulent coefficient `ν_tur ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureParams {
    pub nu: f64,
    pub nu_tur: f64,
}

impl ClosureParams {
    pub fn new(nu: f64, nu_tur: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidArgument(format!("nu must be positive, got {nu}")));
        }
        if !(nu_tur >= 0.0 && nu_tur.is_finite()) {
            return Err(Error::InvalidArgument(format!("nu_tur must be nonnegative, got {nu_tur}")));
        }
        Ok(Self { nu, nu_tur })
    }
}

/// Symmetric strain-rate tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strain<const D: usize>(pub [[f64; D]; D]);

impl<const D: usize> Strain<D> {
    pub fn zero() -> Self {
        Self([[0.0; D]; D])
    }

    /// Symmetric part of `g[i][j] = ∂_j v_i`.
    pub fn from_gradient(g: &[[f64; D]; D]) -> Self {
        let mut e = [[0.0; D]; D];
        for i in 0..D {
            for j in 0..D {
                e[i][j] = 0.5 * (g[i][j] + g[j][i]);
            }
        }
        Self(e)
    }

    pub fn contract(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..D {
            for j in 0..D {
                s += self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    /// `|ε| = (ε:ε)^{1/2}`
    pub fn magnitude(&self) -> f64 {
        self.contract(self).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.map(|row| row.map(|v| s * v)))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut e = self.0;
        for i in 0..D {
            for j in 0..D {
                e[i][j] += other.0[i][j];
            }
        }
        Self(e)
    }
}

/// `D(ε) = ν ε:ε + (2/3) ν_tur (ε:ε)^{3/2}`
pub fn potential<const D: usize>(eps: &Strain<D>, p: &ClosureParams) -> f64 {
    let ee = eps.contract(eps);
    p.nu * ee + 2.0 / 3.0 * p.nu_tur * ee.powf(1.5)
}

/// `β(ε) = 2ν + 2ν_tur |ε|`
pub fn beta<const D: usize>(eps: &Strain<D>, p: &ClosureParams) -> f64 {
    2.0 * p.nu + 2.0 * p.nu_tur * eps.magnitude()
}

/// `Ξ = β(ε) ε`, the derivative of the potential.
pub fn stress<const D: usize>(eps: &Strain<D>, p: &ClosureParams) -> Strain<D> {
    eps.scaled(beta(eps, p))
}

/// Directional derivative of the stress: `β δ + 2ν_tur (ε:δ)/|ε| ε`.
pub fn stress_derivative<const D: usize>(eps: &Strain<D>, delta: &Strain<D>, p: &ClosureParams) -> Strain<D> {
    let mag = eps.magnitude();
    let mut out = delta.scaled(beta(eps, p));
    if mag > 0.0 {
        out = out.add(&eps.scaled(2.0 * p.nu_tur * eps.contract(delta) / mag));
    }
    out
}

/// Strain of a velocity field at barycentric coordinates of a cell.
pub fn strain(space: &MixedSpace, v: &[f64], cell: usize, bary: [f64; 3]) -> Strain<2> {
    let (_, g) = space.eval_in_cell(v, cell, bary);
    Strain::from_gradient(&g)
}

fn stress_matrix(s: &Strain<2>) -> Mat2 {
    s.0
}

/// Load `∫ β(ε(u)) ε(u) : ε(φ_a)` for every velocity basis function.
pub fn stress_load(space: &MixedSpace, u: &QpField, p: &ClosureParams) -> Vec<f64> {
    space.assemble_load(|q| {
        let eps = Strain::from_gradient(&u.grads[q]);
        ([0.0; 2], stress_matrix(&stress(&eps, p)))
    })
}

/// Tangent matrix of [`stress_load`] with respect to `u`.
pub fn stress_tangent(space: &MixedSpace, u: &QpField, p: &ClosureParams) -> CsrMatrix {
    space.assemble_matrix(|q| stress_point_operator(&Strain::from_gradient(&u.grads[q]), p))
}

pub fn stress_point_operator(eps: &Strain<2>, p: &ClosureParams) -> PointOperator {
    let b = beta(eps, p);
    let mag = eps.magnitude();
    let coupling = if mag > 0.0 { 2.0 * p.nu_tur / mag } else { 0.0 };
    let mut t = [[0.0; 6]; 6];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let mut v = coupling * eps.0[i][j] * eps.0[k][l];
                    if i == k && j == l {
                        v += 0.5 * b;
                    }
                    if i == l && j == k {
                        v += 0.5 * b;
                    }
                    t[2 + 2 * i + j][2 + 2 * k + l] = v;
                }
            }
        }
    }
    t
}

/// `⟨A(z), ξ⟩ = ∫ β(ε(ζ_g+z)) ε(ζ_g+z) : ε(ξ)` for each test field.
pub fn apply_a(space: &MixedSpace, z: &[f64], zeta: &[f64], p: &ClosureParams, tests: &[Vec<f64>]) -> Vec<f64> {
    let v: Vec<f64> = z.iter().zip(zeta).map(|(a, b)| a + b).collect();
    let load = stress_load(space, &space.eval_qp(&v), p);
    tests.iter().map(|t| crate::linalg::dot(t, &load)).collect()
}

/// Skew-symmetrised convection `c(w; u, φ_a) = ½∫[((w·∇)u)·φ_a − ((w·∇)φ_a)·u]` for every
/// velocity basis function.
pub fn convection_load(space: &MixedSpace, w: &QpField, u: &QpField) -> Vec<f64> {
    space.assemble_load(|q| convection_integrand(w.vals[q], &u.grads[q], u.vals[q]))
}

fn convection_integrand(w: Vec2, grad_u: &Mat2, u: Vec2) -> (Vec2, Mat2) {
    let s = [0.5 * (grad_u[0][0] * w[0] + grad_u[0][1] * w[1]), 0.5 * (grad_u[1][0] * w[0] + grad_u[1][1] * w[1])];
    let g = [[-0.5 * u[0] * w[0], -0.5 * u[0] * w[1]], [-0.5 * u[1] * w[0], -0.5 * u[1] * w[1]]];
    (s, g)
}

/// Convection pairings `c(w; u, ξ)` against a list of test fields.
pub fn convect(space: &MixedSpace, w: &[f64], u: &[f64], tests: &[Vec<f64>]) -> Vec<f64> {
    let load = convection_load(space, &space.eval_qp(w), &space.eval_qp(u));
    tests.iter().map(|t| crate::linalg::dot(t, &load)).collect()
}

/// Point operator of `δu ↦ c(w; δu, ·)`.
pub fn convection_operator_in_u(w: Vec2) -> PointOperator {
    let mut t = [[0.0; 6]; 6];
    for c in 0..2 {
        for j in 0..2 {
            t[c][2 + 2 * c + j] += 0.5 * w[j];
            t[2 + 2 * c + j][c] -= 0.5 * w[j];
        }
    }
    t
}

/// Point operator of `δw ↦ c(δw; u, ·)`.
pub fn convection_operator_in_w(grad_u: &Mat2, u: Vec2) -> PointOperator {
    let mut t = [[0.0; 6]; 6];
    for c in 0..2 {
        for j in 0..2 {
            t[c][j] += 0.5 * grad_u[c][j];
            t[2 + 2 * c + j][j] -= 0.5 * u[c];
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_rect_mesh;
    use crate::linalg::dot;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(n: usize) -> MixedSpace {
        MixedSpace::new(build_rect_mesh(1.0, 1.0, n, n).unwrap()).unwrap()
    }

    fn params(nu: f64, nu_tur: f64) -> ClosureParams {
        ClosureParams::new(nu, nu_tur).unwrap()
    }

    #[test]
    fn strain_examples() {
        let s = space(2);
        let shear = s.interpolate(|p| [p[1], 0.0]);
        let rot = s.interpolate(|p| [-p[1], p[0]]);
        let stretch = s.interpolate(|p| [p[0], -p[1]]);
        let bary = [0.2, 0.3, 0.5];
        assert_eq!(strain(&s, &shear, 3, bary).0, [[0.0, 0.5], [0.5, 0.0]]);
        assert!(strain(&s, &rot, 3, bary).magnitude() < 1e-14);
        let e = strain(&s, &stretch, 3, bary).0;
        assert!((e[0][0] - 1.0).abs() < 1e-14 && (e[1][1] + 1.0).abs() < 1e-14 && e[0][1].abs() < 1e-14);
    }

    fn with_sq_norm(ee: f64) -> Strain<2> {
        // diag(a, a) has ε:ε = 2a²
        let a = (ee / 2.0).sqrt();
        Strain([[a, 0.0], [0.0, a]])
    }

    #[test]
    fn potential_examples() {
        assert_eq!(potential(&Strain::<2>::zero(), &params(1.0, 1.0)), 0.0);
        assert!((potential(&with_sq_norm(2.0), &params(1.0, 0.0)) - 2.0).abs() < 1e-14);
        let p = ClosureParams { nu: 0.0, nu_tur: 1.0 };
        assert!((potential(&with_sq_norm(4.0), &p) - 16.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta(&Strain::<2>::zero(), &params(0.3, 2.0)), 0.6);
        assert!((beta(&with_sq_norm(9.0), &params(1.0, 1.0)) - 8.0).abs() < 1e-14);
        let e = Strain([[0.1, 0.4], [0.4, -0.1]]);
        assert_eq!(stress(&e, &params(0.5, 0.0)), e.scaled(1.0));
    }

    #[test]
    fn three_dimensional_algebra() {
        let g = [[1.0, 2.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, -1.0]];
        let e = Strain::<3>::from_gradient(&g);
        assert_eq!(e.0[0][1], 1.0);
        assert_eq!(e.0[1][2], 1.0);
        assert!((e.contract(&e) - 6.0).abs() < 1e-14);
    }

    #[test]
    fn invalid_params() {
        assert!(ClosureParams::new(0.0, 0.1).is_err());
        assert!(ClosureParams::new(0.1, -1.0).is_err());
        assert!(ClosureParams::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn zero_strain_gives_zero_a() {
        let s = space(3);
        let zeta = s.interpolate(|_| [1.0, -2.0]);
        let z = vec![0.0; s.n_velocity()];
        let tests = vec![s.interpolate(|p| [p[0] * p[1], p[0]])];
        let a = apply_a(&s, &z, &zeta, &params(0.1, 0.2), &tests);
        assert!(a[0].abs() < 1e-14);
    }

    #[test]
    fn linear_closure_matches_k_eps() {
        let s = space(4);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut rv = || (0..s.n_velocity()).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let (z, zeta) = (rv(), rv());
        let tests: Vec<Vec<f64>> = (0..5).map(|_| rv()).collect();
        let nu = 0.37;
        let a = apply_a(&s, &z, &zeta, &params(nu, 0.0), &tests);
        let v: Vec<f64> = z.iter().zip(&zeta).map(|(a, b)| a + b).collect();
        let kv = s.ops().k_eps.mul_vec(&v);
        for (ai, t) in a.iter().zip(&tests) {
            let oracle = nu * dot(t, &kv);
            assert!((ai - oracle).abs() < 1e-12 * (1.0 + oracle.abs()));
        }
    }

    #[test]
    fn convection_self_pairing_vanishes() {
        let s = space(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rv = || (0..s.n_velocity()).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let (w, u) = (rv(), rv());
        let c = convect(&s, &w, &u, std::slice::from_ref(&u));
        let scale = convect(&s, &w, &u, std::slice::from_ref(&w))[0].abs().max(1.0);
        assert!(c[0].abs() < 1e-13 * scale);
        assert!(convect(&s, &w, &vec![0.0; s.n_velocity()], std::slice::from_ref(&w))[0] == 0.0);
    }

    #[test]
    fn convection_on_single_element() {
        // w = (a, b) constant, u = (x, 0): (w·∇)u = (a, 0); for η = (1, 0):
        // c = ½[∫a − ∫(w·∇η)·u] = a|Ω|/2 since ∇η = 0
        let s = MixedSpace::new(build_rect_mesh(1.0, 1.0, 1, 1).unwrap()).unwrap();
        let (a, b) = (0.7, -0.4);
        let w = s.interpolate(|_| [a, b]);
        let u = s.interpolate(|p| [p[0], 0.0]);
        let eta = s.interpolate(|_| [1.0, 0.0]);
        let c = convect(&s, &w, &u, &[eta])[0];
        assert!((c - 0.5 * a).abs() < 1e-14);
        // η = (y, 0): ∫(w·∇u)·η = a/2, ∫(w·∇η)·u = ∫ b x = b/2
        let eta = s.interpolate(|p| [p[1], 0.0]);
        let c = convect(&s, &w, &u, &[eta])[0];
        assert!((c - 0.5 * (0.5 * a - 0.5 * b)).abs() < 1e-14);
    }

    fn tangent_check(f: impl Fn(&[f64]) -> Vec<f64>, jac: &CsrMatrix, x: &[f64], dir: &[f64]) -> f64 {
        let h = 1e-6;
        let xp: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + h * d).collect();
        let xm: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a - h * d).collect();
        let fd: Vec<f64> = f(&xp).iter().zip(f(&xm)).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let an = jac.mul_vec(dir);
        let num: f64 = fd.iter().zip(&an).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        num / crate::linalg::norm2(&an).max(1e-300)
    }

    #[test]
    fn tangents_match_finite_differences() {
        let s = space(3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rv = || (0..s.n_velocity()).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let (u, w, dir) = (rv(), rv(), rv());
        let p = params(0.05, 0.3);

        let jac = stress_tangent(&s, &s.eval_qp(&u), &p);
        let err = tangent_check(|x| stress_load(&s, &s.eval_qp(x), &p), &jac, &u, &dir);
        assert!(err < 1e-7, "stress tangent {err}");

        let wq = s.eval_qp(&w);
        let ju = s.assemble_matrix(|q| convection_operator_in_u(wq.vals[q]));
        let err = tangent_check(|x| convection_load(&s, &wq, &s.eval_qp(x)), &ju, &u, &dir);
        assert!(err < 1e-7, "convection tangent in u {err}");

        let uq = s.eval_qp(&u);
        let jw = s.assemble_matrix(|q| convection_operator_in_w(&uq.grads[q], uq.vals[q]));
        let err = tangent_check(|x| convection_load(&s, &s.eval_qp(x), &uq), &jw, &w, &dir);
        assert!(err < 1e-7, "convection tangent in w {err}");
    }

    fn sym(a: [f64; 3]) -> Strain<2> {
        Strain([[a[0], a[1]], [a[1], a[2]]])
    }

    proptest! {
        #[test]
        fn beta_bounded_below(a in prop::array::uniform3(-10.0f64..10.0), nu in 1e-4f64..1.0, nt in 0.0f64..1.0) {
            let p = params(nu, nt);
            prop_assert!(beta(&sym(a), &p) >= 2.0 * nu);
        }

        #[test]
        fn pointwise_monotonicity(a in prop::array::uniform3(-5.0f64..5.0), b in prop::array::uniform3(-5.0f64..5.0),
                                  nu in 1e-3f64..1.0, nt in 0.0f64..1.0) {
            let p = params(nu, nt);
            let (e1, e2) = (sym(a), sym(b));
            let d = e1.add(&e2.scaled(-1.0));
            let lhs = stress(&e1, &p).add(&stress(&e2, &p).scaled(-1.0)).contract(&d);
            let rhs = 2.0 * nu * d.contract(&d);
            prop_assert!(lhs - rhs >= -1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn stress_derivative_matches_difference(a in prop::array::uniform3(-2.0f64..2.0), d in prop::array::uniform3(-1.0f64..1.0)) {
            let p = params(0.1, 0.4);
            let (e, dl) = (sym(a), sym(d));
            prop_assume!(e.magnitude() > 0.1);
            let h = 1e-6;
            let fd = stress(&e.add(&dl.scaled(h)), &p).add(&stress(&e.add(&dl.scaled(-h)), &p).scaled(-1.0)).scaled(0.5 / h);
            let an = stress_derivative(&e, &dl, &p);
            let diff = fd.add(&an.scaled(-1.0)).magnitude();
            prop_assert!(diff < 1e-7 * (1.0 + an.magnitude()));
        }
    }
}
