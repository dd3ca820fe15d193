//! Taylor-Hood pair: continuous quadratic velocity, continuous linear pressure.
//!
//! Velocity degrees of freedom are interleaved per node (`2 * node + component`). Nodes are
//! the mesh vertices followed by one midpoint per mesh edge. Pressure degrees of freedom are
//! the mesh vertices.
//!
//! Every weak form in the crate is assembled through two primitives:
//!
//! * [`MixedSpace::assemble_load`] integrates `s·φ + G:∇φ` against every velocity basis
//!   function, where `s` and `G` are supplied per quadrature point;
//! * [`MixedSpace::assemble_matrix`] integrates a per-point linear map acting on the
//!   6-vector `(u₀, u₁, ∂₀u₀, ∂₁u₀, ∂₀u₁, ∂₁u₁)` of the trial function, tested the same way.

use std::collections::HashMap;

use super::mesh::{BoundaryTag, Side, TaggedMesh};
use super::quadrature::{edge_rule, triangle_rule};
use crate::error::Result;
use crate::linalg::CsrMatrix;

pub const QP_PER_CELL: usize = 7;

pub type Vec2 = [f64; 2];
/// `g[i][j] = ∂_j u_i`
pub type Mat2 = [[f64; 2]; 2];
/// Linear map on `(u, ∇u)` flattened as `[u0, u1, g00, g01, g10, g11]`.
pub type PointOperator = [[f64; 6]; 6];

#[derive(Debug, Clone)]
pub struct Operators {
    /// Vector mass matrix `∫ u·v`.
    pub mass: CsrMatrix,
    /// Strain stiffness `∫ 2 ε(u):ε(v)`.
    pub k_eps: CsrMatrix,
    /// Gradient stiffness `∫ ∇u:∇v`.
    pub k_grad: CsrMatrix,
    /// Divergence `B[q, u] = ∫ q ∇·u`, pressure rows by velocity columns.
    pub div: CsrMatrix,
    /// `∫ q_i`, used for the zero-mean pressure gauge.
    pub pressure_mass: Vec<f64>,
}

#[derive(Debug, Clone)]
struct CellGeometry {
    area: f64,
    grad_lambda: [Vec2; 3],
}

/// Boundary information for one P2 node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub side: Side,
    /// Second side for corner vertices.
    pub corner_with: Option<Side>,
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone)]
pub struct MixedSpace {
    mesh: TaggedMesh,
    nodes: Vec<Vec2>,
    cell_nodes: Vec<[usize; 6]>,
    geometry: Vec<CellGeometry>,
    /// Per boundary edge: `[start vertex, midpoint, end vertex]`.
    edge_nodes: Vec<[usize; 3]>,
    boundary_nodes: Vec<Option<BoundaryNode>>,
    interior_dofs: Vec<usize>,
    interior_index: Vec<Option<usize>>,
    qp_weights: Vec<f64>,
    qp_points: Vec<Vec2>,
    qp_shape: [[f64; 6]; QP_PER_CELL],
    qp_grads: Vec<[Vec2; 6]>,
    ops: Operators,
}

pub fn shape_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

fn shape_grads(l: [f64; 3], g: &[Vec2; 3]) -> [Vec2; 6] {
    let comb = |a: f64, ga: Vec2, b: f64, gb: Vec2| [4.0 * (a * ga[0] + b * gb[0]), 4.0 * (a * ga[1] + b * gb[1])];
    [
        [(4.0 * l[0] - 1.0) * g[0][0], (4.0 * l[0] - 1.0) * g[0][1]],
        [(4.0 * l[1] - 1.0) * g[1][0], (4.0 * l[1] - 1.0) * g[1][1]],
        [(4.0 * l[2] - 1.0) * g[2][0], (4.0 * l[2] - 1.0) * g[2][1]],
        comb(l[1], g[0], l[0], g[1]),
        comb(l[2], g[1], l[1], g[2]),
        comb(l[0], g[2], l[2], g[0]),
    ]
}

/// Assembles the four operators of the mixed space.
pub fn assemble(space: &MixedSpace) -> Operators {
    let mut mass_op = [[0.0; 6]; 6];
    mass_op[0][0] = 1.0;
    mass_op[1][1] = 1.0;
    let mut grad_op = [[0.0; 6]; 6];
    for i in 2..6 {
        grad_op[i][i] = 1.0;
    }
    // 2ε(u):ε(v) = ∇u:∇v + ∇u:∇vᵀ ; index of g_ij is 2 + 2i + j
    let mut eps_op = grad_op;
    for i in 0..2 {
        for j in 0..2 {
            eps_op[2 + 2 * i + j][2 + 2 * j + i] += 1.0;
        }
    }
    let mass = space.assemble_matrix(|_| mass_op);
    let k_grad = space.assemble_matrix(|_| grad_op);
    let k_eps = space.assemble_matrix(|_| eps_op);

    let rule = triangle_rule();
    let n_p = space.mesh.vertices().len();
    let mut trip = Vec::with_capacity(space.mesh.cells().len() * 36);
    let mut pressure_mass = vec![0.0; n_p];
    for (c, cell) in space.mesh.cells().iter().enumerate() {
        let geo = &space.geometry[c];
        let nodes = space.cell_nodes[c];
        let mut local = [[[0.0; 2]; 6]; 3];
        for (k, qp) in rule.iter().enumerate() {
            let w = qp.weight * geo.area;
            let grads = &space.qp_grads[c * QP_PER_CELL + k];
            for (a, la) in qp.bary.iter().enumerate() {
                for j in 0..6 {
                    for d in 0..2 {
                        local[a][j][d] += w * la * grads[j][d];
                    }
                }
            }
        }
        for a in 0..3 {
            pressure_mass[cell[a]] += geo.area / 3.0;
            for j in 0..6 {
                for d in 0..2 {
                    trip.push((cell[a], 2 * nodes[j] + d, local[a][j][d]));
                }
            }
        }
    }
    let div = CsrMatrix::from_triplets(n_p, 2 * space.nodes.len(), trip);
    Operators { mass, k_eps, k_grad, div, pressure_mass }
}

impl MixedSpace {
    pub fn new(mesh: TaggedMesh) -> Result<Self> {
        mesh.check_cells()?;
        let nv = mesh.vertices().len();
        let mut nodes: Vec<Vec2> = mesh.vertices().to_vec();
        let mut edge_mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cell_nodes = Vec::with_capacity(mesh.cells().len());
        for cell in mesh.cells() {
            let mut cn = [cell[0], cell[1], cell[2], 0, 0, 0];
            for (slot, (a, b)) in [(cell[0], cell[1]), (cell[1], cell[2]), (cell[2], cell[0])].into_iter().enumerate() {
                let key = (a.min(b), a.max(b));
                let id = *edge_mid.entry(key).or_insert_with(|| {
                    let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
                    nodes.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                    nodes.len() - 1
                });
                cn[3 + slot] = id;
            }
            cell_nodes.push(cn);
        }
        debug_assert!(nodes.len() > nv);

        let mut boundary_nodes: Vec<Option<BoundaryNode>> = vec![None; nodes.len()];
        let mut edge_nodes = Vec::with_capacity(mesh.boundary_edges().len());
        for e in mesh.boundary_edges() {
            let [a, b] = e.vertices;
            let m = edge_mid[&(a.min(b), a.max(b))];
            edge_nodes.push([a, m, b]);
            boundary_nodes[m] = Some(BoundaryNode { side: e.side, corner_with: None, tag: e.tag });
            for v in [a, b] {
                match &mut boundary_nodes[v] {
                    None => boundary_nodes[v] = Some(BoundaryNode { side: e.side, corner_with: None, tag: e.tag }),
                    Some(bn) => {
                        if bn.side != e.side {
                            bn.corner_with = Some(e.side);
                        }
                        if bn.tag != e.tag {
                            // segment endpoint: belongs to neither segment exclusively
                            bn.tag = BoundaryTag::Neutral;
                        }
                    }
                }
            }
        }

        let n_dofs = 2 * nodes.len();
        let mut interior_dofs = Vec::new();
        let mut interior_index = vec![None; n_dofs];
        for (node, bn) in boundary_nodes.iter().enumerate() {
            if bn.is_none() {
                for c in 0..2 {
                    interior_index[2 * node + c] = Some(interior_dofs.len());
                    interior_dofs.push(2 * node + c);
                }
            }
        }

        let rule = triangle_rule();
        let mut geometry = Vec::with_capacity(mesh.cells().len());
        let mut qp_weights = Vec::with_capacity(mesh.cells().len() * QP_PER_CELL);
        let mut qp_points = Vec::with_capacity(mesh.cells().len() * QP_PER_CELL);
        let mut qp_grads = Vec::with_capacity(mesh.cells().len() * QP_PER_CELL);
        for (c, cell) in mesh.cells().iter().enumerate() {
            let p = cell.map(|v| mesh.vertices()[v]);
            let area = mesh.cell_area(c);
            let two_a = 2.0 * area;
            let grad_lambda = [
                [(p[1][1] - p[2][1]) / two_a, (p[2][0] - p[1][0]) / two_a],
                [(p[2][1] - p[0][1]) / two_a, (p[0][0] - p[2][0]) / two_a],
                [(p[0][1] - p[1][1]) / two_a, (p[1][0] - p[0][0]) / two_a],
            ];
            for qp in &rule {
                qp_weights.push(qp.weight * area);
                let b = qp.bary;
                qp_points.push([
                    b[0] * p[0][0] + b[1] * p[1][0] + b[2] * p[2][0],
                    b[0] * p[0][1] + b[1] * p[1][1] + b[2] * p[2][1],
                ]);
                qp_grads.push(shape_grads(b, &grad_lambda));
            }
            geometry.push(CellGeometry { area, grad_lambda });
        }
        let mut qp_shape = [[0.0; 6]; QP_PER_CELL];
        for (k, qp) in rule.iter().enumerate() {
            qp_shape[k] = shape_values(qp.bary);
        }

        let mut space = Self {
            mesh,
            nodes,
            cell_nodes,
            geometry,
            edge_nodes,
            boundary_nodes,
            interior_dofs,
            interior_index,
            qp_weights,
            qp_points,
            qp_shape,
            qp_grads,
            ops: Operators {
                mass: CsrMatrix::from_triplets(0, 0, vec![]),
                k_eps: CsrMatrix::from_triplets(0, 0, vec![]),
                k_grad: CsrMatrix::from_triplets(0, 0, vec![]),
                div: CsrMatrix::from_triplets(0, 0, vec![]),
                pressure_mass: vec![],
            },
        };
        space.ops = assemble(&space);
        Ok(space)
    }

    pub fn mesh(&self) -> &TaggedMesh {
        &self.mesh
    }

    pub fn ops(&self) -> &Operators {
        &self.ops
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_velocity(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn n_pressure(&self) -> usize {
        self.mesh.vertices().len()
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn cell_nodes(&self) -> &[[usize; 6]] {
        &self.cell_nodes
    }

    pub fn boundary_node(&self, node: usize) -> Option<&BoundaryNode> {
        self.boundary_nodes[node].as_ref()
    }

    pub fn boundary_edge_nodes(&self) -> &[[usize; 3]] {
        &self.edge_nodes
    }

    /// Velocity dofs not on ∂Ω, in increasing order.
    pub fn interior_dofs(&self) -> &[usize] {
        &self.interior_dofs
    }

    pub fn interior_index(&self, dof: usize) -> Option<usize> {
        self.interior_index[dof]
    }

    pub fn is_boundary_dof(&self, dof: usize) -> bool {
        self.interior_index[dof].is_none()
    }

    pub fn n_qp(&self) -> usize {
        self.qp_weights.len()
    }

    /// Quadrature weights including the cell area.
    pub fn qp_weights(&self) -> &[f64] {
        &self.qp_weights
    }

    pub fn qp_points(&self) -> &[Vec2] {
        &self.qp_points
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        self.geometry[cell].area
    }

    /// Value and gradient of a velocity field at barycentric coordinates of a cell.
    pub fn eval_in_cell(&self, u: &[f64], cell: usize, bary: [f64; 3]) -> (Vec2, Mat2) {
        let phi = shape_values(bary);
        let grads = shape_grads(bary, &self.geometry[cell].grad_lambda);
        let mut val = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for (j, &node) in self.cell_nodes[cell].iter().enumerate() {
            for c in 0..2 {
                let coef = u[2 * node + c];
                val[c] += coef * phi[j];
                g[c][0] += coef * grads[j][0];
                g[c][1] += coef * grads[j][1];
            }
        }
        (val, g)
    }

    /// Values and gradients of a velocity field at every quadrature point.
    pub fn eval_qp(&self, u: &[f64]) -> QpField {
        assert_eq!(u.len(), self.n_velocity());
        let n = self.n_qp();
        let mut vals = Vec::with_capacity(n);
        let mut grads = Vec::with_capacity(n);
        for (c, nodes) in self.cell_nodes.iter().enumerate() {
            let mut local = [[0.0; 2]; 6];
            for (j, &node) in nodes.iter().enumerate() {
                local[j] = [u[2 * node], u[2 * node + 1]];
            }
            for k in 0..QP_PER_CELL {
                let phi = &self.qp_shape[k];
                let dphi = &self.qp_grads[c * QP_PER_CELL + k];
                let mut val = [0.0; 2];
                let mut g = [[0.0; 2]; 2];
                for j in 0..6 {
                    for comp in 0..2 {
                        val[comp] += local[j][comp] * phi[j];
                        g[comp][0] += local[j][comp] * dphi[j][0];
                        g[comp][1] += local[j][comp] * dphi[j][1];
                    }
                }
                vals.push(val);
                grads.push(g);
            }
        }
        QpField { vals, grads }
    }

    /// Load vector `L_a = Σ_q w_q (s_q·φ_a + G_q:∇φ_a)` over all velocity basis functions.
    /// The closure receives the quadrature point index and returns `(s, G)` with
    /// `G[c][j]` multiplying `∂_j` of the component-`c` basis function.
    pub fn assemble_load(&self, mut integrand: impl FnMut(usize) -> (Vec2, Mat2)) -> Vec<f64> {
        let mut load = vec![0.0; self.n_velocity()];
        for (c, nodes) in self.cell_nodes.iter().enumerate() {
            let mut local = [[0.0; 2]; 6];
            for k in 0..QP_PER_CELL {
                let q = c * QP_PER_CELL + k;
                let (s, g) = integrand(q);
                let w = self.qp_weights[q];
                let phi = &self.qp_shape[k];
                let dphi = &self.qp_grads[q];
                for j in 0..6 {
                    for comp in 0..2 {
                        local[j][comp] += w * (s[comp] * phi[j] + g[comp][0] * dphi[j][0] + g[comp][1] * dphi[j][1]);
                    }
                }
            }
            for (j, &node) in nodes.iter().enumerate() {
                load[2 * node] += local[j][0];
                load[2 * node + 1] += local[j][1];
            }
        }
        load
    }

    /// Sparse matrix `A[a, b] = Σ_q w_q test_aᵀ T_q trial_b` with the 6-vector layout of
    /// [`PointOperator`].
    pub fn assemble_matrix(&self, mut point_op: impl FnMut(usize) -> PointOperator) -> CsrMatrix {
        let n = self.n_velocity();
        let mut trip = Vec::with_capacity(self.cell_nodes.len() * 144);
        for (c, nodes) in self.cell_nodes.iter().enumerate() {
            let mut local = [[0.0; 12]; 12];
            for k in 0..QP_PER_CELL {
                let q = c * QP_PER_CELL + k;
                let t = point_op(q);
                let w = self.qp_weights[q];
                let phi = &self.qp_shape[k];
                let dphi = &self.qp_grads[q];
                for jb in 0..6 {
                    for d in 0..2 {
                        // T * trial, trial = φ e_d with gradient row d = ∇φ
                        let mut tt = [0.0; 6];
                        for (r, row) in t.iter().enumerate() {
                            tt[r] = row[d] * phi[jb] + row[2 + 2 * d] * dphi[jb][0] + row[3 + 2 * d] * dphi[jb][1];
                        }
                        for ia in 0..6 {
                            for cc in 0..2 {
                                let v = tt[cc] * phi[ia] + tt[2 + 2 * cc] * dphi[ia][0] + tt[3 + 2 * cc] * dphi[ia][1];
                                local[2 * ia + cc][2 * jb + d] += w * v;
                            }
                        }
                    }
                }
            }
            for a in 0..12 {
                for b in 0..12 {
                    if local[a][b] != 0.0 {
                        trip.push((2 * nodes[a / 2] + a % 2, 2 * nodes[b / 2] + b % 2, local[a][b]));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(n, n, trip)
    }

    /// Nodal interpolant of a vector field.
    pub fn interpolate(&self, f: impl Fn(Vec2) -> Vec2) -> Vec<f64> {
        let mut u = vec![0.0; self.n_velocity()];
        for (i, p) in self.nodes.iter().enumerate() {
            let v = f(*p);
            u[2 * i] = v[0];
            u[2 * i + 1] = v[1];
        }
        u
    }

    /// Nodal interpolant of a scalar field in the pressure space.
    pub fn interpolate_pressure(&self, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
        self.mesh.vertices().iter().map(|p| f(*p)).collect()
    }

    /// `∫_{∂Ω} u·n dγ`, exact for the quadratic trace (Simpson on every edge).
    pub fn net_flux(&self, u: &[f64]) -> f64 {
        self.mesh
            .boundary_edges()
            .iter()
            .zip(&self.edge_nodes)
            .map(|(e, nodes)| {
                let n = e.side.outward_normal();
                let un = |node: usize| u[2 * node] * n[0] + u[2 * node + 1] * n[1];
                self.mesh.edge_length(e) / 6.0 * (un(nodes[0]) + 4.0 * un(nodes[1]) + un(nodes[2]))
            })
            .sum()
    }

    /// Boundary quadrature: calls `f(point, weight, edge index, trace value)` at three
    /// Gauss points of every boundary edge.
    pub fn for_each_boundary_qp(&self, u: &[f64], mut f: impl FnMut(Vec2, f64, usize, Vec2)) {
        for (ei, (e, nodes)) in self.mesh.boundary_edges().iter().zip(&self.edge_nodes).enumerate() {
            let h = self.mesh.edge_length(e);
            let (pa, pb) = (self.nodes[nodes[0]], self.nodes[nodes[2]]);
            for (s, w) in edge_rule() {
                let shape = [(1.0 - s) * (1.0 - 2.0 * s), 4.0 * s * (1.0 - s), s * (2.0 * s - 1.0)];
                let mut val = [0.0; 2];
                for (k, &node) in nodes.iter().enumerate() {
                    val[0] += shape[k] * u[2 * node];
                    val[1] += shape[k] * u[2 * node + 1];
                }
                let p = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                f(p, w * h, ei, val);
            }
        }
    }

    /// Mean-free version of a pressure vector.
    pub fn remove_pressure_mean(&self, p: &mut [f64]) {
        let area: f64 = self.ops.pressure_mass.iter().sum();
        let mean = crate::linalg::dot(&self.ops.pressure_mass, p) / area;
        p.iter_mut().for_each(|v| *v -= mean);
    }
}

/// A velocity field sampled at all quadrature points.
#[derive(Debug, Clone)]
pub struct QpField {
    pub vals: Vec<Vec2>,
    pub grads: Vec<Mat2>,
}

impl QpField {
    pub fn zeros(n: usize) -> Self {
        Self { vals: vec![[0.0; 2]; n], grads: vec![[[0.0; 2]; 2]; n] }
    }

    pub fn add(&self, other: &QpField) -> QpField {
        QpField {
            vals: self.vals.iter().zip(&other.vals).map(|(a, b)| [a[0] + b[0], a[1] + b[1]]).collect(),
            grads: self
                .grads
                .iter()
                .zip(&other.grads)
                .map(|(a, b)| [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]])
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::mesh::build_rect_mesh;
    use crate::linalg::dot;

    fn space(n: usize) -> MixedSpace {
        MixedSpace::new(build_rect_mesh(1.0, 1.0, n, n).unwrap()).unwrap()
    }

    #[test]
    fn dof_counts() {
        let s = space(2);
        // 9 vertices + 16 edges
        assert_eq!(s.n_nodes(), 25);
        assert_eq!(s.n_pressure(), 9);
        let interior_nodes = (0..s.n_nodes()).filter(|&i| s.boundary_node(i).is_none()).count();
        assert_eq!(s.interior_dofs().len(), 2 * interior_nodes);
    }

    #[test]
    fn constants_are_in_the_kernels() {
        let s = space(4);
        let c = s.interpolate(|_| [0.7, -1.3]);
        let ke = s.ops().k_eps.mul_vec(&c);
        let kg = s.ops().k_grad.mul_vec(&c);
        assert!(ke.iter().all(|v| v.abs() < 1e-12));
        assert!(kg.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rigid_rotation() {
        let s = space(4);
        let v = s.interpolate(|p| [-p[1], p[0]]);
        assert!(s.ops().k_eps.bilinear(&v, &v).abs() < 1e-12);
        assert!((s.ops().k_grad.bilinear(&v, &v) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn operators_symmetric() {
        let s = space(3);
        assert!(s.ops().mass.max_asymmetry() < 1e-15);
        assert!(s.ops().k_eps.max_asymmetry() < 1e-12);
        assert!(s.ops().k_grad.max_asymmetry() < 1e-12);
    }

    #[test]
    fn divergence_of_linear_field() {
        // u = (x, y) has div 2 everywhere: 1ᵀ B u = 2 |Ω|
        let s = space(4);
        let u = s.interpolate(|p| [p[0], p[1]]);
        let bu = s.ops().div.mul_vec(&u);
        let ones = vec![1.0; s.n_pressure()];
        assert!((dot(&ones, &bu) - 2.0).abs() < 1e-12);
        assert!((s.net_flux(&u) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pressure_mass_sums_to_area() {
        let s = MixedSpace::new(build_rect_mesh(2.0, 0.5, 4, 2).unwrap()).unwrap();
        let total: f64 = s.ops().pressure_mass.iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn eval_reproduces_quadratics() {
        let s = space(2);
        let f = |p: Vec2| [p[0] * p[0] - p[1], p[0] * p[1]];
        let u = s.interpolate(f);
        let qp = s.eval_qp(&u);
        for (q, p) in s.qp_points().iter().enumerate() {
            let e = f(*p);
            assert!((qp.vals[q][0] - e[0]).abs() < 1e-13);
            assert!((qp.vals[q][1] - e[1]).abs() < 1e-13);
            assert!((qp.grads[q][0][0] - 2.0 * p[0]).abs() < 1e-12);
            assert!((qp.grads[q][0][1] + 1.0).abs() < 1e-12);
            assert!((qp.grads[q][1][0] - p[1]).abs() < 1e-12);
        }
    }
}
