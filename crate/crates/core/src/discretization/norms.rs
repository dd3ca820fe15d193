//! Discrete fields and the norms used by the energy estimates.
//!
//! `W13semi` is taken in the strain form, `(∫ |ε(v)|³)^{1/3}` with `|ε| = (ε:ε)^{1/2}`.
//! `H1semi` uses the full gradient.

use std::fmt;
use std::str::FromStr;

use super::space::{Mat2, MixedSpace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Velocity,
    Pressure,
}

/// Coefficient vector over the velocity or pressure degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    kind: FieldKind,
    values: Vec<f64>,
}

impl Field {
    pub fn new(space: &MixedSpace, kind: FieldKind, values: Vec<f64>) -> Result<Self> {
        let expected = match kind {
            FieldKind::Velocity => space.n_velocity(),
            FieldKind::Pressure => space.n_pressure(),
        };
        if values.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "{kind:?} field has {} coefficients, space expects {expected}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite coefficient at index {i}")));
        }
        Ok(Self { kind, values })
    }

    pub fn velocity(space: &MixedSpace, values: Vec<f64>) -> Result<Self> {
        Self::new(space, FieldKind::Velocity, values)
    }

    pub fn zeros(space: &MixedSpace, kind: FieldKind) -> Self {
        let n = match kind {
            FieldKind::Velocity => space.n_velocity(),
            FieldKind::Pressure => space.n_pressure(),
        };
        Self { kind, values: vec![0.0; n] }
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    L3,
    L4,
    H1Semi,
    W13Semi,
    L2Boundary,
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L2" => Ok(Self::L2),
            "L3" => Ok(Self::L3),
            "L4" => Ok(Self::L4),
            "H1semi" => Ok(Self::H1Semi),
            "W13semi" => Ok(Self::W13Semi),
            "L2boundary" => Ok(Self::L2Boundary),
            other => Err(Error::InvalidArgument(format!("unknown norm kind '{other}'"))),
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::L2 => "L2",
            Self::L3 => "L3",
            Self::L4 => "L4",
            Self::H1Semi => "H1semi",
            Self::W13Semi => "W13semi",
            Self::L2Boundary => "L2boundary",
        })
    }
}

/// `ε:ε` for a gradient `g[i][j] = ∂_j v_i`.
pub fn strain_sq(g: &Mat2) -> f64 {
    let off = 0.5 * (g[0][1] + g[1][0]);
    g[0][0] * g[0][0] + g[1][1] * g[1][1] + 2.0 * off * off
}

pub fn norm(space: &MixedSpace, field: &Field, kind: NormKind) -> Result<f64> {
    if field.kind() != FieldKind::Velocity {
        return Err(Error::InvalidArgument("norms are defined for velocity fields".into()));
    }
    Ok(velocity_norm(space, field.values(), kind))
}

/// Same as [`norm`] on a raw velocity coefficient slice.
pub fn velocity_norm(space: &MixedSpace, u: &[f64], kind: NormKind) -> f64 {
    if kind == NormKind::L2Boundary {
        let mut acc = 0.0;
        space.for_each_boundary_qp(u, |_, w, _, val| acc += w * (val[0] * val[0] + val[1] * val[1]));
        return acc.sqrt();
    }
    let qp = space.eval_qp(u);
    let w = space.qp_weights();
    let integrate = |f: &dyn Fn(usize) -> f64| -> f64 { (0..w.len()).map(|q| w[q] * f(q)).sum() };
    let speed_sq = |q: usize| qp.vals[q][0] * qp.vals[q][0] + qp.vals[q][1] * qp.vals[q][1];
    match kind {
        NormKind::L2 => integrate(&speed_sq).sqrt(),
        NormKind::L3 => integrate(&|q| speed_sq(q).powf(1.5)).cbrt(),
        NormKind::L4 => integrate(&|q| speed_sq(q).powi(2)).powf(0.25),
        NormKind::H1Semi => integrate(&|q| {
            let g = &qp.grads[q];
            g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]
        })
        .sqrt(),
        NormKind::W13Semi => integrate(&|q| strain_sq(&qp.grads[q]).powf(1.5)).cbrt(),
        NormKind::L2Boundary => unreachable!(),
    }
}
