//! Structured triangulation of a rectangular tank with labelled boundary segments.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SNAP_TOL: f64 = 1e-9;
const DEGENERATE_AREA: f64 = 1e-14;

/// One side of the rectangle `[0, lx] x [0, ly]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }

    /// Coordinate that varies along the side (x for bottom/top, y for left/right).
    pub fn coordinate(self, p: [f64; 2]) -> f64 {
        match self {
            Side::Bottom | Side::Top => p[0],
            Side::Left | Side::Right => p[1],
        }
    }

    pub fn length(self, lx: f64, ly: f64) -> f64 {
        match self {
            Side::Bottom | Side::Top => lx,
            Side::Left | Side::Right => ly,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Side::Bottom => "bottom",
            Side::Right => "right",
            Side::Top => "top",
            Side::Left => "left",
        };
        f.write_str(s)
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bottom" => Ok(Side::Bottom),
            "right" => Ok(Side::Right),
            "top" => Ok(Side::Top),
            "left" => Ok(Side::Left),
            other => Err(Error::InvalidArgument(format!("unknown side '{other}'"))),
        }
    }
}

/// Boundary label: collector `C^k`, injector `T^k`, or the neutral remainder `Γ_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Neutral,
    Collector(usize),
    Injector(usize),
}

impl BoundaryTag {
    pub fn is_collector(self) -> bool {
        matches!(self, BoundaryTag::Collector(_))
    }

    pub fn is_injector(self) -> bool {
        matches!(self, BoundaryTag::Injector(_))
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryTag::Neutral => f.write_str("N"),
            BoundaryTag::Collector(k) => write!(f, "C{k}"),
            BoundaryTag::Injector(k) => write!(f, "T{k}"),
        }
    }
}

/// A straight piece of one side, `start < end` measured along [`Side::coordinate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub side: Side,
    pub start: f64,
    pub end: f64,
    pub tag: BoundaryTag,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    /// Endpoints ordered by increasing coordinate along the side.
    pub vertices: [usize; 2],
    pub side: Side,
    pub tag: BoundaryTag,
    pub cell: usize,
}

#[derive(Debug, Clone)]
pub struct TaggedMesh {
    lx: f64,
    ly: f64,
    vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    cells: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    segments: Vec<Segment>,
}

/// Union-jack triangulation: every rectangle is cut along one diagonal, alternating with
/// the parity of `i + j`, so that for even `nx`, `ny` every corner cell is cut through the
/// domain corner and no triangle has two edges on the boundary.
pub fn build_rect_mesh(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<TaggedMesh> {
    if !(lx > 0.0 && lx.is_finite() && ly > 0.0 && ly.is_finite()) {
        return Err(Error::InvalidArgument(format!("domain dimensions must be positive, got {lx} x {ly}")));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument(format!("cell counts must be at least 1, got {nx} x {ny}")));
    }
    let hx = lx / nx as f64;
    let hy = ly / ny as f64;
    let vid = |i: usize, j: usize| j * (nx + 1) + i;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // Pin the last row/column to the exact extent so side lengths sum exactly.
            let x = if i == nx { lx } else { i as f64 * hx };
            let y = if j == ny { ly } else { j as f64 * hy };
            vertices.push([x, y]);
        }
    }

    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            if (i + j) % 2 == 0 {
                cells.push([a, b, c]);
                cells.push([a, c, d]);
            } else {
                cells.push([a, b, d]);
                cells.push([b, c, d]);
            }
        }
    }
    TaggedMesh::from_raw(lx, ly, vertices, cells)
}

impl TaggedMesh {
    /// Builds a mesh from explicit vertices and cells covering `[0, lx] x [0, ly]`.
    /// Boundary edges are detected topologically and all tagged neutral.
    pub fn from_raw(lx: f64, ly: f64, vertices: Vec<[f64; 2]>, mut cells: Vec<[usize; 3]>) -> Result<Self> {
        for (k, c) in cells.iter_mut().enumerate() {
            if c.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Mesh(format!("cell {k} references a missing vertex")));
            }
            if signed_area(&vertices, *c) < 0.0 {
                c.swap(1, 2);
            }
        }

        let mut edge_count: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for (k, c) in cells.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (c[e], c[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                edge_count.entry(key).or_insert((0, k)).0 += 1;
            }
        }
        let scale = lx.max(ly);
        let mut boundary = Vec::new();
        let mut keys: Vec<_> =
            edge_count.iter().filter(|(_, (n, _))| *n == 1).map(|(k, (_, cell))| (*k, *cell)).collect();
        keys.sort_unstable();
        for ((a, b), cell) in keys {
            let (pa, pb) = (vertices[a], vertices[b]);
            let side = Side::ALL
                .into_iter()
                .find(|s| on_side(*s, pa, lx, ly, scale) && on_side(*s, pb, lx, ly, scale))
                .ok_or_else(|| Error::Mesh(format!("boundary edge ({a}, {b}) does not lie on the rectangle")))?;
            let ordered = if side.coordinate(pa) <= side.coordinate(pb) { [a, b] } else { [b, a] };
            boundary.push(BoundaryEdge { vertices: ordered, side, tag: BoundaryTag::Neutral, cell });
        }
        boundary.sort_by(|e, f| {
            (e.side as u8)
                .cmp(&(f.side as u8))
                .then(e_coord(&vertices, e).partial_cmp(&e_coord(&vertices, f)).unwrap_or(std::cmp::Ordering::Equal))
        });

        Ok(Self { lx, ly, vertices, cells, boundary, segments: Vec::new() })
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, tag: BoundaryTag) -> Option<&Segment> {
        self.segments.iter().find(|s| s.tag == tag)
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        signed_area(&self.vertices, self.cells[cell])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.cells.len()).map(|c| self.cell_area(c)).sum()
    }

    pub fn edge_length(&self, edge: &BoundaryEdge) -> f64 {
        let [a, b] = edge.vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt()
    }

    pub fn perimeter(&self) -> f64 {
        self.boundary.iter().map(|e| self.edge_length(e)).sum()
    }

    pub fn outward_normal(&self, edge: &BoundaryEdge) -> [f64; 2] {
        edge.side.outward_normal()
    }

    /// μ(S) for every edge whose tag satisfies `pred`.
    pub fn measure_where(&self, pred: impl Fn(BoundaryTag) -> bool) -> f64 {
        self.boundary.iter().filter(|e| pred(e.tag)).map(|e| self.edge_length(e)).sum()
    }

    pub fn measure(&self, tag: BoundaryTag) -> f64 {
        self.measure_where(|t| t == tag)
    }

    /// Fails with [`Error::Mesh`] if any cell is degenerate.
    pub fn check_cells(&self) -> Result<()> {
        for c in 0..self.cells.len() {
            let a = self.cell_area(c);
            if a < DEGENERATE_AREA {
                return Err(Error::Mesh(format!("cell {c} is degenerate (area {a:e})")));
            }
        }
        Ok(())
    }

    /// Stable digest of geometry and connectivity, used to guard cached bases.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.lx.to_le_bytes());
        h.update(self.ly.to_le_bytes());
        for v in &self.vertices {
            h.update(v[0].to_le_bytes());
            h.update(v[1].to_le_bytes());
        }
        for c in &self.cells {
            for &i in c {
                h.update((i as u64).to_le_bytes());
            }
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Re-tags the boundary edges covered by `segments`; everything else keeps its tag.
    pub fn tag_boundary(mut self, segments: &[Segment]) -> Result<Self> {
        for seg in segments {
            if seg.tag == BoundaryTag::Neutral {
                return Err(Error::InvalidArgument(format!(
                    "segment on {} cannot be tagged neutral explicitly",
                    seg.side
                )));
            }
            if self.segments.iter().any(|s| s.tag == seg.tag) {
                return Err(Error::Conflict(format!("tag {} assigned twice", seg.tag)));
            }
            let len = seg.side.length(self.lx, self.ly);
            if !(seg.start.is_finite() && seg.end.is_finite()) || seg.start >= seg.end {
                return Err(Error::InvalidArgument(format!(
                    "segment {} on {} needs start < end, got [{}, {}]",
                    seg.tag, seg.side, seg.start, seg.end
                )));
            }
            if seg.start < -SNAP_TOL || seg.end > len + SNAP_TOL {
                return Err(Error::InvalidArgument(format!(
                    "segment {} [{}, {}] leaves the {} side of length {len}",
                    seg.tag, seg.start, seg.end, seg.side
                )));
            }
            let start = self.snap(seg.side, seg.start)?;
            let end = self.snap(seg.side, seg.end)?;

            let mut touched = 0;
            for e in self.boundary.iter_mut().filter(|e| e.side == seg.side) {
                let a = seg.side.coordinate(self.vertices[e.vertices[0]]);
                let b = seg.side.coordinate(self.vertices[e.vertices[1]]);
                if a >= start - SNAP_TOL && b <= end + SNAP_TOL {
                    if e.tag != BoundaryTag::Neutral {
                        return Err(Error::Conflict(format!(
                            "segment {} overlaps {} on the {} side",
                            seg.tag, e.tag, seg.side
                        )));
                    }
                    e.tag = seg.tag;
                    touched += 1;
                }
            }
            if touched == 0 {
                return Err(Error::InvalidArgument(format!("segment {} covers no mesh edge", seg.tag)));
            }
            self.segments.push(Segment { start, end, ..*seg });
        }
        Ok(self)
    }

    fn snap(&self, side: Side, coord: f64) -> Result<f64> {
        let nearest = self
            .boundary
            .iter()
            .filter(|e| e.side == side)
            .flat_map(|e| e.vertices)
            .map(|v| side.coordinate(self.vertices[v]))
            .min_by(|a, b| (a - coord).abs().total_cmp(&(b - coord).abs()))
            .ok_or_else(|| Error::Mesh(format!("no boundary vertices on the {side} side")))?;
        if (nearest - coord).abs() > SNAP_TOL {
            return Err(Error::InvalidArgument(format!(
                "segment endpoint {coord} on the {side} side is not at a mesh vertex (nearest {nearest})"
            )));
        }
        Ok(nearest)
    }
}

fn e_coord(vertices: &[[f64; 2]], e: &BoundaryEdge) -> f64 {
    e.side.coordinate(vertices[e.vertices[0]])
}

fn on_side(side: Side, p: [f64; 2], lx: f64, ly: f64, scale: f64) -> bool {
    let tol = 1e-12 * scale;
    match side {
        Side::Bottom => p[1].abs() <= tol,
        Side::Top => (p[1] - ly).abs() <= tol,
        Side::Left => p[0].abs() <= tol,
        Side::Right => (p[0] - lx).abs() <= tol,
    }
}

fn signed_area(vertices: &[[f64; 2]], c: [usize; 3]) -> f64 {
    let (a, b, d) = (vertices[c[0]], vertices[c[1]], vertices[c[2]]);
    0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]))
}
