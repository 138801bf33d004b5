//! Taylor-Hood P2/P1 function space on a [`TriMesh`].
//!
//! P2 nodes are the mesh vertices (ids `0..nv`) followed by one midpoint per
//! edge. Velocity nodes on the closure of Γ^D carry no unknowns; every other node
//! carries two (one per component). Pressure unknowns are the vertex values.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DVector, Matrix2, Vector2};

use crate::flow::Point;
use crate::mesh::{BoundaryTag, TriMesh};

/// Local P2 node order: the three vertices, then midpoints of edges (0,1), (1,2), (2,0).
pub const LOCAL_EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

/// P2 basis values and gradients at one point of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct P2Eval {
    pub phi: [f64; 6],
    pub grad: [Vector2<f64>; 6],
}

/// Affine geometry of a triangle: area and the constant barycentric gradients.
#[derive(Debug, Clone, Copy)]
pub struct TriGeometry {
    pub points: [Point; 3],
    pub area: f64,
    pub grad_bary: [Vector2<f64>; 3],
}

impl TriGeometry {
    pub fn new(points: [Point; 3]) -> Self {
        let [p0, p1, p2] = points;
        let det = (p1 - p0).perp(&(p2 - p0));
        let grad_bary = [
            Vector2::new(p1[1] - p2[1], p2[0] - p1[0]) / det,
            Vector2::new(p2[1] - p0[1], p0[0] - p2[0]) / det,
            Vector2::new(p0[1] - p1[1], p1[0] - p0[0]) / det,
        ];
        Self { points, area: 0.5 * det, grad_bary }
    }

    pub fn point_at(&self, bary: &[f64; 3]) -> Point {
        self.points[0] * bary[0] + self.points[1] * bary[1] + self.points[2] * bary[2]
    }

    pub fn p2(&self, l: &[f64; 3]) -> P2Eval {
        let g = &self.grad_bary;
        let mut phi = [0.0; 6];
        let mut grad = [Vector2::zeros(); 6];
        for i in 0..3 {
            phi[i] = l[i] * (2.0 * l[i] - 1.0);
            grad[i] = g[i] * (4.0 * l[i] - 1.0);
        }
        for (k, &(a, b)) in LOCAL_EDGES.iter().enumerate() {
            phi[3 + k] = 4.0 * l[a] * l[b];
            grad[3 + k] = (g[b] * l[a] + g[a] * l[b]) * 4.0;
        }
        P2Eval { phi, grad }
    }
}

#[derive(Debug, Clone)]
pub struct FunctionSpace {
    mesh: TriMesh,
    element_nodes: Vec<[usize; 6]>,
    /// `(min vertex, max vertex)` of each edge node, indexed by `node - nv`.
    edge_vertices: Vec<(usize, usize)>,
    /// Position of each free node in the unknown ordering; `None` on Γ^D.
    node_slot: Vec<Option<usize>>,
    n_free_nodes: usize,
}

impl FunctionSpace {
    pub fn new(mesh: &TriMesh) -> Self {
        let nv = mesh.vertices().len();
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edge_vertices = Vec::new();
        let mut element_nodes = Vec::with_capacity(mesh.triangles().len());
        for tri in mesh.triangles() {
            let mut nodes = [tri[0], tri[1], tri[2], 0, 0, 0];
            for (k, &(a, b)) in LOCAL_EDGES.iter().enumerate() {
                let key = (tri[a].min(tri[b]), tri[a].max(tri[b]));
                let id = *edge_index.entry(key).or_insert_with(|| {
                    edge_vertices.push(key);
                    nv + edge_vertices.len() - 1
                });
                nodes[3 + k] = id;
            }
            element_nodes.push(nodes);
        }
        let n_nodes = nv + edge_vertices.len();

        let mut constrained = vec![false; n_nodes];
        for e in mesh.edges_with_tag(BoundaryTag::Dirichlet) {
            let (a, b) = (e.v[0], e.v[1]);
            constrained[a] = true;
            constrained[b] = true;
            constrained[edge_index[&(a.min(b), a.max(b))]] = true;
        }

        let order = reverse_cuthill_mckee(n_nodes, &element_nodes, &constrained);
        let mut node_slot = vec![None; n_nodes];
        for (slot, &node) in order.iter().enumerate() {
            node_slot[node] = Some(slot);
        }
        Self {
            mesh: mesh.clone(),
            element_nodes,
            edge_vertices,
            node_slot,
            n_free_nodes: order.len(),
        }
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn element_nodes(&self, t: usize) -> &[usize; 6] {
        &self.element_nodes[t]
    }

    pub fn n_nodes(&self) -> usize {
        self.node_slot.len()
    }

    /// Number of velocity unknowns.
    pub fn n_u(&self) -> usize {
        2 * self.n_free_nodes
    }

    /// Number of pressure unknowns.
    pub fn n_p(&self) -> usize {
        self.mesh.vertices().len()
    }

    /// Velocity unknown of `node` in component `comp`, if the node is free.
    pub fn velocity_dof(&self, node: usize, comp: usize) -> Option<usize> {
        self.node_slot[node].map(|s| 2 * s + comp)
    }

    pub fn is_dirichlet_node(&self, node: usize) -> bool {
        self.node_slot[node].is_none()
    }

    pub fn geometry(&self, t: usize) -> TriGeometry {
        TriGeometry::new(self.mesh.triangle_points(t))
    }

    pub fn node_point(&self, node: usize) -> Point {
        let nv = self.mesh.vertices().len();
        let v = self.mesh.vertices();
        if node < nv {
            v[node]
        } else {
            let (a, b) = self.edge_vertices[node - nv];
            (v[a] + v[b]) * 0.5
        }
    }

    /// P2 node ids lying on the edge `a -> b` in the order (a, b, midpoint).
    pub fn edge_nodes(&self, a: usize, b: usize) -> Option<[usize; 3]> {
        let nv = self.mesh.vertices().len();
        let key = (a.min(b), a.max(b));
        // Edge nodes are few per boundary; the linear scan runs once per assembly.
        self.edge_vertices.iter().position(|&e| e == key).map(|k| [a, b, nv + k])
    }

    /// Nodal interpolant of a velocity field (Dirichlet nodes are dropped).
    pub fn interpolate_velocity(&self, u: impl Fn(&Point) -> Vector2<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_u());
        for node in 0..self.n_nodes() {
            let value = u(&self.node_point(node));
            for c in 0..2 {
                if let Some(d) = self.velocity_dof(node, c) {
                    out[d] = value[c];
                }
            }
        }
        out
    }

    pub fn interpolate_pressure(&self, p: impl Fn(&Point) -> f64) -> DVector<f64> {
        DVector::from_iterator(self.n_p(), self.mesh.vertices().iter().map(p))
    }

    /// Local velocity coefficients of triangle `t`, `[node][comp]`.
    pub fn local_velocity(&self, u: &DVector<f64>, t: usize) -> [[f64; 2]; 6] {
        let mut out = [[0.0; 2]; 6];
        for (k, &node) in self.element_nodes[t].iter().enumerate() {
            for c in 0..2 {
                if let Some(d) = self.velocity_dof(node, c) {
                    out[k][c] = u[d];
                }
            }
        }
        out
    }

    /// Discrete velocity and its gradient (`(i, j)` is `∂u_i/∂x_j`).
    pub fn velocity_at(local: &[[f64; 2]; 6], eval: &P2Eval) -> (Vector2<f64>, Matrix2<f64>) {
        let mut val = Vector2::zeros();
        let mut grad = Matrix2::zeros();
        for k in 0..6 {
            for c in 0..2 {
                val[c] += local[k][c] * eval.phi[k];
                grad[(c, 0)] += local[k][c] * eval.grad[k][0];
                grad[(c, 1)] += local[k][c] * eval.grad[k][1];
            }
        }
        (val, grad)
    }

    pub fn pressure_at(&self, lambda: &DVector<f64>, t: usize, bary: &[f64; 3]) -> f64 {
        let tri = self.mesh.triangles()[t];
        (0..3).map(|k| lambda[tri[k]] * bary[k]).sum()
    }
}

/// Orders the free nodes to keep the Cholesky profile narrow.
fn reverse_cuthill_mckee(n_nodes: usize, elements: &[[usize; 6]], constrained: &[bool]) -> Vec<usize> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for nodes in elements {
        for &a in nodes.iter().filter(|&&a| !constrained[a]) {
            for &b in nodes.iter().filter(|&&b| b != a && !constrained[b]) {
                adj[a].push(b);
            }
        }
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited: Vec<bool> = constrained.to_vec();
    let mut order = Vec::with_capacity(n_nodes);
    loop {
        let start = (0..n_nodes).filter(|&i| !visited[i]).min_by_key(|&i| (degree[i], i));
        let Some(start) = start else { break };
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            order.push(node);
            let mut next: Vec<usize> = adj[node].iter().copied().filter(|&m| !visited[m]).collect();
            next.sort_by_key(|&m| (degree[m], m));
            for m in next {
                visited[m] = true;
                queue.push_back(m);
            }
        }
    }
    order.reverse();
    order
}
