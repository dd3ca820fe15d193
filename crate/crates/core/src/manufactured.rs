//! Manufactured space-time solution with closed-form forcing.
//!
//! Velocity `v = t·curl s` with stream function `s = A sin²(πx/Lx) sin²(πy/Ly)` and pressure
//! `p = t·P sin(2πx/Lx) sin(2πy/Ly)`. The field is divergence-free, vanishes on the boundary
//! together with its normal derivative of `s`, and the forcing is
//! `F = ∂v/∂t + (∇v)v − div(β(ε(v))ε(v)) + ∇p`.

use std::f64::consts::PI;

use crate::discretization::space::{Mat2, Vec2};
use crate::lifting::Forcing;
use crate::turbulence::{beta, ClosureParams, Strain};

pub const SWIRL_AMPLITUDE: f64 = 0.5;
pub const SWIRL_PRESSURE: f64 = 0.1;

/// `sin²(kx)` and its first three derivatives, `k = π/L`.
fn bump(x: f64, l: f64) -> [f64; 4] {
    let k = PI / l;
    let (s2, c2) = (2.0 * k * x).sin_cos();
    let s = (k * x).sin();
    [s * s, k * s2, 2.0 * k * k * c2, -4.0 * k * k * k * s2]
}

#[derive(Debug, Clone, Copy)]
pub struct ManufacturedSwirl {
    pub amplitude: f64,
    pub pressure: f64,
    pub lx: f64,
    pub ly: f64,
    pub params: ClosureParams,
}

impl ManufacturedSwirl {
    pub fn new(lx: f64, ly: f64, params: ClosureParams) -> Self {
        Self { amplitude: SWIRL_AMPLITUDE, pressure: SWIRL_PRESSURE, lx, ly, params }
    }

    /// Time-independent profile `V = curl s`, its gradient and second derivatives
    /// `h[i][j][k] = ∂_k ∂_j V_i`.
    fn profile(&self, x: Vec2) -> (Vec2, Mat2, [[[f64; 2]; 2]; 2]) {
        let a = self.amplitude;
        let bx = bump(x[0], self.lx);
        let by = bump(x[1], self.ly);
        let v = [a * bx[0] * by[1], -a * bx[1] * by[0]];
        let g = [[a * bx[1] * by[1], a * bx[0] * by[2]], [-a * bx[2] * by[0], -a * bx[1] * by[1]]];
        let v1 = [[a * bx[2] * by[1], a * bx[1] * by[2]], [a * bx[1] * by[2], a * bx[0] * by[3]]];
        let v2 = [[-a * bx[3] * by[0], -a * bx[2] * by[1]], [-a * bx[2] * by[1], -a * bx[1] * by[2]]];
        (v, g, [v1, v2])
    }

    pub fn velocity(&self, x: Vec2, t: f64) -> Vec2 {
        let (v, _, _) = self.profile(x);
        [t * v[0], t * v[1]]
    }

    pub fn gradient(&self, x: Vec2, t: f64) -> Mat2 {
        let (_, g, _) = self.profile(x);
        g.map(|row| row.map(|v| t * v))
    }

    pub fn pressure_at(&self, x: Vec2, t: f64) -> f64 {
        let kx = 2.0 * PI / self.lx;
        let ky = 2.0 * PI / self.ly;
        t * self.pressure * (kx * x[0]).sin() * (ky * x[1]).sin()
    }

    fn pressure_gradient(&self, x: Vec2, t: f64) -> Vec2 {
        let kx = 2.0 * PI / self.lx;
        let ky = 2.0 * PI / self.ly;
        let p = t * self.pressure;
        [p * kx * (kx * x[0]).cos() * (ky * x[1]).sin(), p * ky * (kx * x[0]).sin() * (ky * x[1]).cos()]
    }

    /// `div(β(ε)ε)` of the exact velocity.
    pub fn stress_divergence(&self, x: Vec2, t: f64) -> Vec2 {
        let (_, g0, h0) = self.profile(x);
        let g = g0.map(|row| row.map(|v| t * v));
        let eps = Strain::from_gradient(&g);
        // ∂_k ε_ij
        let mut de = [[[0.0; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    de[k][i][j] = 0.5 * t * (h0[i][j][k] + h0[j][i][k]);
                }
            }
        }
        let mag = eps.magnitude();
        let b = beta(&eps, &self.params);
        let mut out = [0.0; 2];
        for i in 0..2 {
            for j in 0..2 {
                let dbeta = if mag > 0.0 {
                    let mut s = 0.0;
                    for a in 0..2 {
                        for c in 0..2 {
                            s += eps.0[a][c] * de[j][a][c];
                        }
                    }
                    2.0 * self.params.nu_tur * s / mag
                } else {
                    0.0
                };
                out[i] += dbeta * eps.0[i][j] + b * de[j][i][j];
            }
        }
        out
    }

    pub fn forcing(&self, x: Vec2, t: f64) -> Vec2 {
        let (v0, _, _) = self.profile(x);
        let v = self.velocity(x, t);
        let g = self.gradient(x, t);
        let div = self.stress_divergence(x, t);
        let gp = self.pressure_gradient(x, t);
        let mut f = [0.0; 2];
        for i in 0..2 {
            f[i] = v0[i] + g[i][0] * v[0] + g[i][1] * v[1] - div[i] + gp[i];
        }
        f
    }
}

impl Forcing for ManufacturedSwirl {
    fn eval(&self, x: Vec2, t: f64) -> Vec2 {
        self.forcing(x, t)
    }
}
