//! Pump boundary data: injector and collector profiles, the per-pump trace `ψ`, the
//! piecewise-linear flow schedules and the combined boundary velocity `φ_g(t)`.
//!
//! Each profile exists in two forms. The analytic form is what the user describes
//! (indicator or raised-cosine ramps). The discrete form is its quadratic boundary trace,
//! forced to zero at the segment endpoints and rescaled so that its exact integral equals
//! the segment length. That makes the discrete net flux of every `ψ` vanish to rounding.

use serde::{Deserialize, Serialize};

use crate::discretization::{BoundaryTag, MixedSpace, Segment, Side};
use crate::error::{Error, Result};

const ENDPOINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileKind {
    Flat,
    /// Raised-cosine ramps of the given width at both ends.
    Mollified {
        width: f64,
    },
}

#[derive(Debug, Clone)]
pub struct PumpProfile {
    segment: Segment,
    kind: ProfileKind,
    /// Scale making the analytic profile integrate to the segment length.
    peak: f64,
    nodes: Vec<usize>,
    values: Vec<f64>,
    /// `[lx, ly]` of the tank.
    domain: [f64; 2],
}

fn ramp(s: f64, width: f64) -> f64 {
    0.5 * (1.0 - (std::f64::consts::PI * s / width).cos())
}

impl PumpProfile {
    pub fn segment(&self) -> &Segment {
        &self.segment
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn length(&self) -> f64 {
        self.segment.length()
    }

    /// Maximum of the analytic profile.
    pub fn peak(&self) -> f64 {
        self.peak
    }

    fn shape(&self, arc: f64) -> f64 {
        let len = self.length();
        if !(0.0..=len).contains(&arc) {
            return 0.0;
        }
        match self.kind {
            ProfileKind::Flat => 1.0,
            ProfileKind::Mollified { width } => {
                let d = arc.min(len - arc);
                if d >= width {
                    1.0
                } else {
                    ramp(d, width)
                }
            }
        }
    }

    /// Analytic profile at a point; zero away from the segment.
    pub fn value_at(&self, p: [f64; 2]) -> f64 {
        let side = self.segment.side;
        let [lx, ly] = self.domain;
        let offset = match side {
            Side::Bottom => p[1],
            Side::Top => p[1] - ly,
            Side::Left => p[0],
            Side::Right => p[0] - lx,
        };
        if offset.abs() > 1e-12 {
            return 0.0;
        }
        self.peak * self.shape(side.coordinate(p) - self.segment.start)
    }

    /// Discrete trace values at the boundary nodes on the segment, `(node, value)`.
    pub fn nodal(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().copied().zip(self.values.iter().copied())
    }

    /// Exact integral of the discrete trace over the boundary.
    pub fn integral(&self, space: &MixedSpace) -> f64 {
        let mut full = vec![0.0; space.n_nodes()];
        for (n, v) in self.nodal() {
            full[n] = v;
        }
        trace_integral(space, &full)
    }

    /// `(arc length from the segment start, value)` pairs sorted by arc length.
    pub fn samples(&self, space: &MixedSpace) -> Vec<(f64, f64)> {
        let mut rows: Vec<(f64, f64)> = self
            .nodal()
            .map(|(n, v)| (self.segment.side.coordinate(space.nodes()[n]) - self.segment.start, v))
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        rows
    }
}

/// Simpson integral of a scalar nodal trace over all boundary edges.
fn trace_integral(space: &MixedSpace, nodal: &[f64]) -> f64 {
    space
        .mesh()
        .boundary_edges()
        .iter()
        .zip(space.boundary_edge_nodes())
        .map(|(e, [a, m, b])| space.mesh().edge_length(e) / 6.0 * (nodal[*a] + 4.0 * nodal[*m] + nodal[*b]))
        .sum()
}

/// Builds the profile for the segment carrying `tag`.
pub fn build_profile(space: &MixedSpace, tag: BoundaryTag, kind: ProfileKind) -> Result<PumpProfile> {
    let segment = *space
        .mesh()
        .segment(tag)
        .ok_or_else(|| Error::InvalidArgument(format!("no boundary segment tagged {tag}")))?;
    let len = segment.length();
    if len <= 0.0 {
        return Err(Error::InvalidArgument(format!("segment {tag} has zero length")));
    }
    let shape_integral = match kind {
        ProfileKind::Flat => len,
        ProfileKind::Mollified { width } => {
            if !(width > 0.0 && width < 0.5 * len) {
                return Err(Error::InvalidArgument(format!(
                    "mollifier width {width} must lie in (0, {}) for segment {tag}",
                    0.5 * len
                )));
            }
            // each raised-cosine ramp integrates to width / 2
            len - width
        }
    };
    let mut profile = PumpProfile {
        segment,
        kind,
        peak: len / shape_integral,
        nodes: Vec::new(),
        values: Vec::new(),
        domain: [space.mesh().lx(), space.mesh().ly()],
    };

    let mut seen = vec![false; space.n_nodes()];
    for (e, nodes) in space.mesh().boundary_edges().iter().zip(space.boundary_edge_nodes()) {
        if e.tag != tag {
            continue;
        }
        for &n in nodes {
            if std::mem::replace(&mut seen[n], true) {
                continue;
            }
            let arc = segment.side.coordinate(space.nodes()[n]) - segment.start;
            let at_end = arc.abs() < ENDPOINT_TOL * len.max(1.0) || (arc - len).abs() < ENDPOINT_TOL * len.max(1.0);
            profile.nodes.push(n);
            profile.values.push(if at_end { 0.0 } else { profile.shape(arc) });
        }
    }
    let raw = profile.integral(space);
    if raw <= 0.0 {
        return Err(Error::InvalidArgument(format!("profile on {tag} vanishes identically")));
    }
    let scale = len / raw;
    profile.values.iter_mut().for_each(|v| *v *= scale);
    Ok(profile)
}

/// Velocity trace `ψ = [φ/μ(T) − φ̃/μ(C)] n` as a full velocity coefficient vector.
pub fn build_psi(space: &MixedSpace, injector: &PumpProfile, collector: &PumpProfile) -> Result<Vec<f64>> {
    if injector.segment == collector.segment
        || injector.segment.tag == collector.segment.tag
        || segments_overlap(&injector.segment, &collector.segment)
    {
        return Err(Error::InvalidArgument("injector and collector must lie on distinct segments".into()));
    }
    for (name, p) in [("injector", injector), ("collector", collector)] {
        let integral = p.integral(space);
        if !(integral > 0.0) || ((integral - p.length()).abs() > 1e-10 * p.length()) {
            return Err(Error::InvalidArgument(format!(
                "{name} profile is not normalised (integral {integral:e}, segment length {})",
                p.length()
            )));
        }
    }
    let mut psi = vec![0.0; space.n_velocity()];
    for (p, sign) in [(injector, 1.0), (collector, -1.0)] {
        let n = p.segment.side.outward_normal();
        let mu = p.length();
        for (node, v) in p.nodal() {
            psi[2 * node] += sign * v / mu * n[0];
            psi[2 * node + 1] += sign * v / mu * n[1];
        }
    }
    Ok(psi)
}

fn segments_overlap(a: &Segment, b: &Segment) -> bool {
    a.side == b.side && a.start < b.end && b.start < a.end
}

/// Piecewise-linear flow rate `g(t)` with `g(0) = 0` and `g ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    knots: Vec<(f64, f64)>,
}

impl Schedule {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidArgument("schedule needs at least two samples".into()));
        }
        if knots.iter().any(|(t, g)| !t.is_finite() || !g.is_finite()) {
            return Err(Error::InvalidArgument("schedule samples must be finite".into()));
        }
        if knots[0].0 != 0.0 {
            return Err(Error::InvalidArgument("schedule must start at t = 0".into()));
        }
        if knots[0].1 != 0.0 {
            return Err(Error::InvalidArgument("g(0) must be 0".into()));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidArgument("schedule times must be strictly increasing".into()));
        }
        if knots.iter().any(|(_, g)| *g < 0.0) {
            return Err(Error::InvalidArgument("flow rates must be nonnegative".into()));
        }
        Ok(Self { knots })
    }

    /// Identically zero schedule on `[0, end]`.
    pub fn zero(end: f64) -> Self {
        Self { knots: vec![(0.0, 0.0), (end, 0.0)] }
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn end(&self) -> f64 {
        self.knots.last().unwrap().0
    }

    /// `(g(t), g'(t))`; at a knot the derivative is the slope of the segment ending there
    /// (the first segment's slope at `t = 0`).
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        let end = self.end();
        if !(t >= 0.0 && t <= end * (1.0 + 1e-12)) {
            return Err(Error::Range { t, end });
        }
        let t = t.min(end);
        let i = self.knots.partition_point(|(tk, _)| *tk < t).clamp(1, self.knots.len() - 1);
        let (t0, g0) = self.knots[i - 1];
        let (t1, g1) = self.knots[i];
        let slope = (g1 - g0) / (t1 - t0);
        Ok((g0 + slope * (t - t0), slope))
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        Self::new(self.knots.iter().map(|&(t, g)| (t, alpha * g)).collect())
    }
}

#[derive(Debug, Clone)]
pub struct Pump {
    pub injector: PumpProfile,
    pub collector: PumpProfile,
    pub psi: Vec<f64>,
    pub schedule: Schedule,
}

/// Per-pump profile choice and schedule; pump `k` uses the segments tagged `T^k`, `C^k`.
#[derive(Debug, Clone)]
pub struct PumpSpec {
    pub profile: ProfileKind,
    pub schedule: Schedule,
}

#[derive(Debug, Clone, Default)]
pub struct PumpSet {
    pumps: Vec<Pump>,
}

impl PumpSet {
    pub fn build(space: &MixedSpace, specs: &[PumpSpec]) -> Result<Self> {
        let mut pumps = Vec::with_capacity(specs.len());
        for (k, spec) in specs.iter().enumerate() {
            let injector = build_profile(space, BoundaryTag::Injector(k), spec.profile)?;
            let collector = build_profile(space, BoundaryTag::Collector(k), spec.profile)?;
            let psi = build_psi(space, &injector, &collector)?;
            pumps.push(Pump { injector, collector, psi, schedule: spec.schedule.clone() });
        }
        Ok(Self { pumps })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn pumps(&self) -> &[Pump] {
        &self.pumps
    }

    pub fn len(&self) -> usize {
        self.pumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pumps.is_empty()
    }

    /// `(g_k(t), g_k'(t))` for every pump.
    pub fn rates(&self, t: f64) -> Result<Vec<(f64, f64)>> {
        self.pumps.iter().map(|p| p.schedule.eval(t)).collect()
    }

    /// Boundary velocity `φ_g(t) = Σ g_k(t) ψ_k` as a full velocity coefficient vector.
    pub fn phi_g(&self, space: &MixedSpace, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; space.n_velocity()];
        for (pump, (g, _)) in self.pumps.iter().zip(self.rates(t)?) {
            crate::linalg::axpy(&mut out, g, &pump.psi);
        }
        Ok(out)
    }
}
