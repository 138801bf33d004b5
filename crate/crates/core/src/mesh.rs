//! Triangle meshes with Dirichlet/Neumann boundary tags.
//!
//! Text format (`tri-mesh v1`):
//!
//! ```text
//! tri-mesh v1
//! V <count>
//! <x> <y>          one line per vertex, 17 significant digits
//! T <count>
//! <i> <j> <k>      counterclockwise vertex indices
//! E <count>
//! <i> <j> <D|N>    boundary edge and its tag
//! ```

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::Vector2;
use thiserror::Error;

use crate::flow::{integrate_flow, FlowError, Point, VelocityField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("triangle {0} has non-positive signed area {1:e}")]
    InvertedElement(usize, f64),
    #[error("triangle {0} references vertex {1} which does not exist")]
    BadVertexIndex(usize, usize),
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonConforming(usize, usize),
    #[error("boundary edge list does not match the mesh boundary: {0}")]
    BoundaryMismatch(String),
    #[error("mesh file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Flow(#[from] FlowError),
}

pub type Result<T> = std::result::Result<T, MeshError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

impl BoundaryTag {
    fn code(self) -> char {
        match self {
            BoundaryTag::Dirichlet => 'D',
            BoundaryTag::Neumann => 'N',
        }
    }
}

/// Boundary edge oriented along the counterclockwise traversal of its triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Top,
    Bottom,
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            "top" => Ok(Side::Top),
            "bottom" => Ok(Side::Bottom),
            other => Err(format!("unknown side `{other}`")),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Top => "top",
            Side::Bottom => "bottom",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
}

fn signed_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b - a).perp(&(c - a)))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl TriMesh {
    /// Validates orientation, conformity and that the tagged edges cover the boundary.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, boundary: Vec<BoundaryEdge>) -> Result<Self> {
        let nv = vertices.len();
        // Count triangles per undirected edge, remembering the ccw direction.
        let mut edges: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(MeshError::BadVertexIndex(t, v));
                }
            }
            let area = signed_area(&vertices[tri[0]], &vertices[tri[1]], &vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(MeshError::InvertedElement(t, area));
            }
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let entry = edges.entry(edge_key(a, b)).or_insert((0, [a, b]));
                entry.0 += 1;
                if entry.0 > 2 {
                    return Err(MeshError::NonConforming(a, b));
                }
            }
        }
        let mut open: HashMap<(usize, usize), [usize; 2]> = edges
            .into_iter()
            .filter(|(_, (count, _))| *count == 1)
            .map(|(k, (_, dir))| (k, dir))
            .collect();
        let mut boundary = boundary;
        for e in boundary.iter_mut() {
            match open.remove(&edge_key(e.v[0], e.v[1])) {
                Some(dir) => e.v = dir,
                None => {
                    return Err(MeshError::BoundaryMismatch(format!(
                        "({}, {}) is not an untagged boundary edge",
                        e.v[0], e.v[1]
                    )))
                }
            }
        }
        if let Some(((a, b), _)) = open.into_iter().min() {
            return Err(MeshError::BoundaryMismatch(format!("edge ({a}, {b}) has no tag")));
        }
        Ok(Self { vertices, triangles, boundary })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(&a, &b, &c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Outward unit normal of a boundary edge.
    pub fn outward_normal(&self, edge: &BoundaryEdge) -> Vector2<f64> {
        let d = self.vertices[edge.v[1]] - self.vertices[edge.v[0]];
        Vector2::new(d[1], -d[0]).normalize()
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary.iter().filter(move |e| e.tag == tag)
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.edges_with_tag(tag).next().is_some()
    }

    /// Same connectivity and tags on new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Point>) -> Result<Self> {
        assert_eq!(vertices.len(), self.vertices.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let area = signed_area(&vertices[tri[0]], &vertices[tri[1]], &vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(MeshError::InvertedElement(t, area));
            }
        }
        Ok(Self {
            vertices,
            triangles: self.triangles.clone(),
            boundary: self.boundary.clone(),
        })
    }

    /// Retags every boundary edge.
    pub fn retagged(&self, tag_of: impl Fn(&Point, &Point) -> BoundaryTag) -> Self {
        let boundary = self
            .boundary
            .iter()
            .map(|e| BoundaryEdge {
                v: e.v,
                tag: tag_of(&self.vertices[e.v[0]], &self.vertices[e.v[1]]),
            })
            .collect();
        Self { boundary, ..self.clone() }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("tri-mesh v1\n");
        let _ = writeln!(out, "V {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(out, "{:.16e} {:.16e}", v[0], v[1]);
        }
        let _ = writeln!(out, "T {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(out, "E {}", self.boundary.len());
        for e in &self.boundary {
            let _ = writeln!(out, "{} {} {}", e.v[0], e.v[1], e.tag.code());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| MeshError::Parse {
                line: 0,
                msg: format!("unexpected end of file, missing {what}"),
            })
        };

        let (line, header) = next("header")?;
        if header != "tri-mesh v1" {
            return Err(parse_err(line, "expected header `tri-mesh v1`"));
        }
        let nv = section_count(next("vertex section")?, "V")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (line, l) = next("vertex")?;
            let xy: Vec<f64> = parse_fields(line, l, "bad coordinate")?;
            if xy.len() != 2 {
                return Err(parse_err(line, "expected two coordinates"));
            }
            vertices.push(Point::new(xy[0], xy[1]));
        }
        let nt = section_count(next("triangle section")?, "T")?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (line, l) = next("triangle")?;
            let ids: Vec<usize> = parse_fields(line, l, "bad vertex index")?;
            if ids.len() != 3 {
                return Err(parse_err(line, "expected three vertex indices"));
            }
            triangles.push([ids[0], ids[1], ids[2]]);
        }
        let ne = section_count(next("edge section")?, "E")?;
        let mut boundary = Vec::with_capacity(ne);
        for _ in 0..ne {
            let (line, l) = next("boundary edge")?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(parse_err(line, "expected `i j D|N`"));
            }
            let ids: Vec<usize> = parse_fields(line, &parts[..2].join(" "), "bad vertex index")?;
            let tag = match parts[2] {
                "D" => BoundaryTag::Dirichlet,
                "N" => BoundaryTag::Neumann,
                _ => return Err(parse_err(line, "tag must be D or N")),
            };
            boundary.push(BoundaryEdge { v: [ids[0], ids[1]], tag });
        }
        if let Some((line, _)) = lines.next() {
            return Err(parse_err(line, "trailing content"));
        }
        Self::new(vertices, triangles, boundary)
    }
}

fn parse_err(line: usize, msg: &str) -> MeshError {
    MeshError::Parse { line, msg: msg.to_string() }
}

fn parse_fields<T: FromStr>(line: usize, l: &str, msg: &str) -> Result<Vec<T>> {
    l.split_whitespace()
        .map(|t| t.parse::<T>().map_err(|_| parse_err(line, msg)))
        .collect()
}

fn section_count((line, l): (usize, &str), key: &str) -> Result<usize> {
    let mut parts = l.split_whitespace();
    if parts.next() != Some(key) {
        return Err(parse_err(line, &format!("expected section `{key}`")));
    }
    match (parts.next().and_then(|c| c.parse().ok()), parts.next()) {
        (Some(count), None) => Ok(count),
        _ => Err(parse_err(line, "bad section count")),
    }
}

/// Structured mesh of the unit square with `n` cells per side, each split along
/// its lower-left to upper-right diagonal. Listed sides are Neumann.
pub fn unit_square_mesh(n: usize, neumann_sides: &[Side]) -> TriMesh {
    assert!(n >= 1, "unit_square_mesh needs n >= 1");
    let h = 1.0 / n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = if i == n { 1.0 } else { i as f64 * h };
            let y = if j == n { 1.0 } else { j as f64 * h };
            vertices.push(Point::new(x, y));
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let tag = |side: Side| {
        if neumann_sides.contains(&side) {
            BoundaryTag::Neumann
        } else {
            BoundaryTag::Dirichlet
        }
    };
    let mut boundary = Vec::with_capacity(4 * n);
    for i in 0..n {
        boundary.push(BoundaryEdge { v: [idx(i, 0), idx(i + 1, 0)], tag: tag(Side::Bottom) });
    }
    for j in 0..n {
        boundary.push(BoundaryEdge { v: [idx(n, j), idx(n, j + 1)], tag: tag(Side::Right) });
    }
    for i in (0..n).rev() {
        boundary.push(BoundaryEdge { v: [idx(i + 1, n), idx(i, n)], tag: tag(Side::Top) });
    }
    for j in (0..n).rev() {
        boundary.push(BoundaryEdge { v: [idx(0, j + 1), idx(0, j)], tag: tag(Side::Left) });
    }
    TriMesh::new(vertices, triangles, boundary).expect("structured square mesh is valid")
}

/// Polygonal unit disk: ring `k` carries `6k` equally spaced vertices at radius
/// `k / rings`; consecutive rings are zipped together by angle. All boundary
/// edges are Dirichlet.
pub fn disk_mesh(rings: usize) -> TriMesh {
    assert!(rings >= 1, "disk_mesh needs rings >= 1");
    use std::f64::consts::TAU;
    let mut vertices = vec![Point::zeros()];
    let mut ring_start = vec![0usize];
    for k in 1..=rings {
        ring_start.push(vertices.len());
        let r = k as f64 / rings as f64;
        let count = 6 * k;
        for j in 0..count {
            let theta = TAU * j as f64 / count as f64;
            vertices.push(Point::new(r * theta.cos(), r * theta.sin()));
        }
    }
    let mut triangles = Vec::new();
    for k in 1..=rings {
        let outer_n = 6 * k;
        let outer = |j: usize| ring_start[k] + j % outer_n;
        if k == 1 {
            for j in 0..outer_n {
                triangles.push([0, outer(j), outer(j + 1)]);
            }
            continue;
        }
        let inner_n = 6 * (k - 1);
        let inner = |i: usize| ring_start[k - 1] + i % inner_n;
        let (mut i, mut j) = (0usize, 0usize);
        while i < inner_n || j < outer_n {
            // Angles (in units of a full turn) of the next vertex on each ring.
            let next_outer = (j + 1) as f64 / outer_n as f64;
            let next_inner = (i + 1) as f64 / inner_n as f64;
            if j < outer_n && (i == inner_n || next_outer <= next_inner) {
                triangles.push([inner(i), outer(j), outer(j + 1)]);
                j += 1;
            } else {
                triangles.push([inner(i), outer(j), inner(i + 1)]);
                i += 1;
            }
        }
    }
    let outer_n = 6 * rings;
    let boundary = (0..outer_n)
        .map(|j| BoundaryEdge {
            v: [ring_start[rings] + j, ring_start[rings] + (j + 1) % outer_n],
            tag: BoundaryTag::Dirichlet,
        })
        .collect();
    TriMesh::new(vertices, triangles, boundary).expect("disk mesh is valid")
}

/// Maps every vertex through `φ_s`; connectivity and tags are kept.
pub fn transport_mesh(mesh: &TriMesh, field: &VelocityField, s: f64, steps: usize) -> Result<TriMesh> {
    let vertices = mesh
        .vertices
        .iter()
        .map(|x| integrate_flow(field, x, s, steps).map(|f| f.point))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    mesh.with_vertices(vertices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::DEFAULT_STEPS;
    use approx::assert_abs_diff_eq;

    #[test]
    fn square_counts() {
        let m = unit_square_mesh(1, &[]);
        assert_eq!((m.vertices().len(), m.triangles().len()), (4, 2));
        assert_eq!(m.edges_with_tag(BoundaryTag::Dirichlet).count(), 4);

        let m = unit_square_mesh(2, &[Side::Right]);
        assert_eq!((m.vertices().len(), m.triangles().len()), (9, 8));
        let neumann: Vec<_> = m.edges_with_tag(BoundaryTag::Neumann).collect();
        assert_eq!(neumann.len(), 2);
        for e in neumann {
            assert_eq!(m.vertices()[e.v[0]][0], 1.0);
            assert_eq!(m.vertices()[e.v[1]][0], 1.0);
            assert_abs_diff_eq!(m.outward_normal(e), Vector2::new(1.0, 0.0));
        }
        assert_abs_diff_eq!(unit_square_mesh(8, &[]).total_area(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn disk_counts_and_area() {
        let m = disk_mesh(1);
        assert_eq!((m.vertices().len(), m.triangles().len()), (7, 6));
        let m = disk_mesh(2);
        assert_eq!(m.boundary().len(), 12);
        assert!(m.boundary().iter().all(|e| e.tag == BoundaryTag::Dirichlet));
        let m = disk_mesh(4);
        // Inscribed 24-gon.
        let polygon = 12.0 * (std::f64::consts::TAU / 24.0).sin();
        assert_abs_diff_eq!(m.total_area(), polygon, epsilon = 1e-12);
        assert!((m.total_area() - std::f64::consts::PI).abs() < 0.02 * std::f64::consts::PI);
    }

    #[test]
    fn disk_triangles_touch_the_interior() {
        let m = disk_mesh(5);
        let on_boundary: Vec<bool> = m.vertices().iter().map(|v| (v.norm() - 1.0).abs() < 1e-12).collect();
        for t in m.triangles() {
            assert!(t.iter().any(|&v| !on_boundary[v]));
        }
    }

    #[test]
    fn validation_errors() {
        let v = vec![Point::new(0., 0.), Point::new(1., 0.), Point::new(0., 1.)];
        let edges = |tag| {
            vec![
                BoundaryEdge { v: [0, 1], tag },
                BoundaryEdge { v: [1, 2], tag },
                BoundaryEdge { v: [2, 0], tag },
            ]
        };
        assert!(TriMesh::new(v.clone(), vec![[0, 1, 2]], edges(BoundaryTag::Dirichlet)).is_ok());
        assert!(matches!(
            TriMesh::new(v.clone(), vec![[0, 2, 1]], edges(BoundaryTag::Dirichlet)),
            Err(MeshError::InvertedElement(0, _))
        ));
        assert!(matches!(
            TriMesh::new(v.clone(), vec![[0, 1, 2]], edges(BoundaryTag::Dirichlet)[..2].to_vec()),
            Err(MeshError::BoundaryMismatch(_))
        ));
        assert!(matches!(
            TriMesh::new(v, vec![[0, 1, 3]], vec![]),
            Err(MeshError::BadVertexIndex(0, 3))
        ));
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let m = transport_mesh(&disk_mesh(3), &VelocityField::rotation(0.3), 0.7, DEFAULT_STEPS).unwrap();
        let text = m.to_text();
        let back = TriMesh::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn text_parse_errors() {
        assert!(matches!(TriMesh::from_text("tri-mesh v2\n"), Err(MeshError::Parse { line: 1, .. })));
        let bad = "tri-mesh v1\nV 1\n0 0\nT 0\nE 1\n0 0 X\n";
        assert!(matches!(TriMesh::from_text(bad), Err(MeshError::Parse { line: 6, .. })));
    }

    #[test]
    fn transport_by_constant_field_translates() {
        let m = unit_square_mesh(3, &[Side::Top]);
        assert_eq!(transport_mesh(&m, &VelocityField::zero(), 0.4, 8).unwrap(), m);
        let t = transport_mesh(&m, &VelocityField::constant([1.0, -2.0]), 0.25, 1).unwrap();
        for (a, b) in m.vertices().iter().zip(t.vertices()) {
            assert_abs_diff_eq!(b - a, Vector2::new(0.25, -0.5), epsilon = 1e-15);
        }
        for k in 0..m.triangles().len() {
            assert_abs_diff_eq!(m.triangle_area(k), t.triangle_area(k), epsilon = 1e-15);
        }
        assert_eq!(t.boundary(), m.boundary());
    }

    #[test]
    fn transport_detects_inversion() {
        let m = unit_square_mesh(2, &[]);
        // Shear that swaps the order of vertices along x1 for large s.
        let field = VelocityField::quadratic([[0.0, 0.0, 0.0, -1.0, 0.0, 0.0], [0.0; 6]]);
        assert!(transport_mesh(&m, &field, 2.0, 1).is_err());
    }
}
