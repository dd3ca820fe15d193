//! Run configuration: JSON schema, validation with paths, presets and problem construction.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::discretization::{build_rect_mesh, BoundaryTag, MixedSpace, Segment, Side, TaggedMesh};
use crate::error::{ConfigIssue, Error, Result};
use crate::galerkin::{Problem, Scheme};
use crate::lifting::{Forcing, ZeroForcing};
use crate::manufactured::ManufacturedSwirl;
use crate::pumps::{ProfileKind, PumpSet, PumpSpec, Schedule};
use crate::saddle::LerayProjector;
use crate::turbulence::ClosureParams;

const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(rename = "Lx")]
    pub lx: f64,
    #[serde(rename = "Ly")]
    pub ly: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidConfig {
    pub nu: f64,
    pub nu_tur: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub side: Side,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpConfig {
    pub injector: SegmentConfig,
    pub collector: SegmentConfig,
    pub profile: ProfileKind,
    /// `[t, g]` samples, linearly interpolated.
    pub schedule: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    #[default]
    Zero,
    ManufacturedSwirl,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Initial {
    #[default]
    Zero,
    /// Discretely divergence-free projection of the single-cell vortex `curl(A sin² sin²)`.
    Vortex { amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub end: f64,
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GalerkinConfig {
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    /// VTK snapshot stride in steps.
    #[serde(default = "default_every")]
    pub every: usize,
}

fn default_dir() -> String {
    "out".into()
}

fn default_every() -> usize {
    10
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), every: default_every() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub mesh: MeshConfig,
    pub fluid: FluidConfig,
    #[serde(default)]
    pub pumps: Vec<PumpConfig>,
    #[serde(default)]
    pub source: Source,
    #[serde(default)]
    pub initial: Initial,
    pub time: TimeConfig,
    pub galerkin: GalerkinConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

pub const PRESETS: [(&str, &str); 4] = [
    ("four-pump", include_str!("../presets/four_pump.json")),
    ("zero-data", include_str!("../presets/zero_data.json")),
    ("vortex-decay", include_str!("../presets/vortex_decay.json")),
    ("manufactured", include_str!("../presets/manufactured.json")),
];

/// Parsed and validated shipped preset.
pub fn preset(name: &str) -> Result<RunConfig> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown preset '{name}'")))?;
    RunConfig::from_json(text)
}

fn issue(path: impl Into<String>, message: impl Into<String>) -> ConfigIssue {
    ConfigIssue { path: path.into(), message: message.into() }
}

/// Dimension of the discretely divergence-free, boundary-zero velocity space of an
/// `nx × ny` mesh.
pub fn mode_capacity(nx: usize, ny: usize) -> usize {
    let interior = 2 * (2 * nx).saturating_sub(1) * (2 * ny).saturating_sub(1);
    (interior + 1).saturating_sub((nx + 1) * (ny + 1))
}

impl RunConfig {
    /// Parses and validates. Structural and semantic problems are both reported as
    /// [`Error::Config`].
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(vec![issue(if path == "." { String::new() } else { path }, e.inner().to_string())])
        })?;
        let issues = cfg.validate();
        if issues.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(issues))
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Every semantic problem, each with its location in the document.
    pub fn validate(&self) -> Vec<ConfigIssue> {
        let mut out = vec![];
        let positive = |out: &mut Vec<ConfigIssue>, path: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                out.push(issue(path, format!("must be positive, got {v}")));
            }
        };
        positive(&mut out, "domain.Lx", self.domain.lx);
        positive(&mut out, "domain.Ly", self.domain.ly);
        if self.mesh.nx == 0 {
            out.push(issue("mesh.nx", "must be at least 1"));
        }
        if self.mesh.ny == 0 {
            out.push(issue("mesh.ny", "must be at least 1"));
        }
        positive(&mut out, "fluid.nu", self.fluid.nu);
        if !(self.fluid.nu_tur >= 0.0 && self.fluid.nu_tur.is_finite()) {
            out.push(issue("fluid.nu_tur", format!("must be nonnegative, got {}", self.fluid.nu_tur)));
        }
        positive(&mut out, "time.T", self.time.end);
        positive(&mut out, "time.dt", self.time.dt);
        if out.iter().all(|i| !i.path.starts_with("time")) {
            let n = (self.time.end / self.time.dt).round();
            if n < 1.0 || (n * self.time.dt - self.time.end).abs() > 1e-9 * self.time.end {
                out.push(issue("time.dt", "T must be an integer multiple of dt"));
            }
        }
        let capacity = mode_capacity(self.mesh.nx, self.mesh.ny);
        if self.galerkin.modes == 0 {
            out.push(issue("galerkin.modes", "must be at least 1"));
        } else if self.mesh.nx > 0 && self.mesh.ny > 0 && self.galerkin.modes > capacity {
            out.push(issue(
                "galerkin.modes",
                format!("{} modes requested but the mesh supports at most {capacity}", self.galerkin.modes),
            ));
        }
        if self.output.every == 0 {
            out.push(issue("output.every", "must be at least 1"));
        }
        if let Initial::Vortex { amplitude } = self.initial {
            if !amplitude.is_finite() {
                out.push(issue("initial.amplitude", "must be finite"));
            }
        }
        if self.source == Source::ManufacturedSwirl && !self.pumps.is_empty() {
            out.push(issue("source", "the manufactured source needs homogeneous boundary data (no pumps)"));
        }
        self.validate_pumps(&mut out);
        out
    }

    fn validate_pumps(&self, out: &mut Vec<ConfigIssue>) {
        let mut placed: Vec<(String, Segment)> = vec![];
        for (k, pump) in self.pumps.iter().enumerate() {
            let base = format!("pumps[{k}]");
            for (role, seg, tag) in [
                ("injector", &pump.injector, BoundaryTag::Injector(k)),
                ("collector", &pump.collector, BoundaryTag::Collector(k)),
            ] {
                let path = format!("{base}.{role}");
                let before = out.len();
                self.check_segment(&path, seg, out);
                if let ProfileKind::Mollified { width } = pump.profile {
                    let len = seg.end - seg.start;
                    if !(width > 0.0 && width < len / 2.0) {
                        out.push(issue(
                            format!("{base}.profile.width"),
                            format!("mollifier width must lie in (0, {}) for the {role}, got {width}", len / 2.0),
                        ));
                    }
                }
                if out.len() == before {
                    let s = Segment { side: seg.side, start: seg.start, end: seg.end, tag };
                    for (other, o) in &placed {
                        if o.side == s.side && o.start < s.end && s.start < o.end {
                            out.push(issue(&path, format!("conflict: overlaps {other}")));
                        }
                    }
                    placed.push((path, s));
                }
            }
            self.check_schedule(&format!("{base}.schedule"), &pump.schedule, out);
        }
    }

    fn check_segment(&self, path: &str, seg: &SegmentConfig, out: &mut Vec<ConfigIssue>) {
        let len = seg.side.length(self.domain.lx, self.domain.ly);
        if !(seg.start.is_finite() && seg.end.is_finite() && seg.start < seg.end) {
            out.push(issue(path, format!("needs start < end, got [{}, {}]", seg.start, seg.end)));
            return;
        }
        if seg.start < -ALIGN_TOL || seg.end > len + ALIGN_TOL {
            out.push(issue(path, format!("[{}, {}] leaves the {} side of length {len}", seg.start, seg.end, seg.side)));
            return;
        }
        let cells = match seg.side {
            Side::Bottom | Side::Top => self.mesh.nx,
            Side::Left | Side::Right => self.mesh.ny,
        };
        if cells == 0 || !(len > 0.0) {
            return;
        }
        let h = len / cells as f64;
        for (name, v) in [("start", seg.start), ("end", seg.end)] {
            if ((v / h).round() * h - v).abs() > ALIGN_TOL * len.max(1.0) {
                out.push(issue(format!("{path}.{name}"), format!("{v} is not on a mesh vertex (spacing {h})")));
            }
        }
    }

    fn check_schedule(&self, path: &str, knots: &[[f64; 2]], out: &mut Vec<ConfigIssue>) {
        if knots.len() < 2 {
            out.push(issue(path, "needs at least two samples"));
            return;
        }
        if knots[0][0] != 0.0 {
            out.push(issue(format!("{path}[0]"), "schedule must start at t = 0"));
        }
        if knots[0][1] != 0.0 {
            out.push(issue(format!("{path}[0]"), "g(0) must be 0"));
        }
        for (i, k) in knots.iter().enumerate() {
            if !(k[0].is_finite() && k[1].is_finite()) {
                out.push(issue(format!("{path}[{i}]"), "samples must be finite"));
            } else if k[1] < 0.0 {
                out.push(issue(format!("{path}[{i}]"), format!("flow rate must be nonnegative, got {}", k[1])));
            }
            if i > 0 && !(k[0] > knots[i - 1][0]) {
                out.push(issue(format!("{path}[{i}]"), "times must be strictly increasing"));
            }
        }
        let last = knots[knots.len() - 1][0];
        if last < self.time.end * (1.0 - 1e-12) {
            out.push(issue(path, format!("ends at t = {last} before T = {}", self.time.end)));
        }
    }

    /// SHA-256 of the canonical serialisation.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serialises");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn params(&self) -> Result<ClosureParams> {
        ClosureParams::new(self.fluid.nu, self.fluid.nu_tur)
    }

    pub fn segments(&self) -> Vec<Segment> {
        let mut segs = vec![];
        for (k, p) in self.pumps.iter().enumerate() {
            let s = |c: &SegmentConfig, tag| Segment { side: c.side, start: c.start, end: c.end, tag };
            segs.push(s(&p.injector, BoundaryTag::Injector(k)));
            segs.push(s(&p.collector, BoundaryTag::Collector(k)));
        }
        segs
    }

    /// Tagged mesh at the configured resolution.
    pub fn build_mesh(&self) -> Result<TaggedMesh> {
        self.build_mesh_at(self.mesh.nx, self.mesh.ny)
    }

    pub fn build_mesh_at(&self, nx: usize, ny: usize) -> Result<TaggedMesh> {
        build_rect_mesh(self.domain.lx, self.domain.ly, nx, ny)?.tag_boundary(&self.segments())
    }

    pub fn pump_specs(&self) -> Result<Vec<PumpSpec>> {
        self.pumps
            .iter()
            .map(|p| {
                Ok(PumpSpec {
                    profile: p.profile,
                    schedule: Schedule::new(p.schedule.iter().map(|k| (k[0], k[1])).collect())?,
                })
            })
            .collect()
    }

    pub fn forcing(&self) -> Result<Box<dyn Forcing>> {
        Ok(match self.source {
            Source::Zero => Box::new(ZeroForcing),
            Source::ManufacturedSwirl => {
                Box::new(ManufacturedSwirl::new(self.domain.lx, self.domain.ly, self.params()?))
            }
        })
    }

    /// The manufactured solution, when the source is one.
    pub fn manufactured(&self) -> Result<Option<ManufacturedSwirl>> {
        Ok(match self.source {
            Source::Zero => None,
            Source::ManufacturedSwirl => Some(ManufacturedSwirl::new(self.domain.lx, self.domain.ly, self.params()?)),
        })
    }

    pub fn build_problem(&self) -> Result<Problem> {
        self.build_problem_at(self.mesh.nx, self.mesh.ny)
    }

    pub fn build_problem_at(&self, nx: usize, ny: usize) -> Result<Problem> {
        let space = MixedSpace::new(self.build_mesh_at(nx, ny)?)?;
        let pumps = PumpSet::build(&space, &self.pump_specs()?)?;
        Problem::new(space, pumps, self.forcing()?, self.params()?)
    }

    /// Initial velocity `v₀` on the problem's space.
    pub fn initial_velocity(&self, space: &MixedSpace) -> Result<Vec<f64>> {
        match self.initial {
            Initial::Zero => Ok(vec![0.0; space.n_velocity()]),
            Initial::Vortex { amplitude } => {
                let mut shape = ManufacturedSwirl::new(self.domain.lx, self.domain.ly, self.params()?);
                shape.amplitude = amplitude;
                let v = space.interpolate(|x| shape.velocity(x, 1.0));
                LerayProjector::new(space)?.project(space, &v)
            }
        }
    }
}
