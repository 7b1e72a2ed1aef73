use std::collections::HashMap;

use super::implicit::ImplicitSurface;
use crate::{Error, Result, Vec3};

/// Triangulated surface `M_h` embedded in ambient 3-space.
///
/// Immutable after construction; refinement builds a new mesh. Edges are
/// stored with sorted endpoints and numbered in order of first appearance
/// while scanning triangles, so edge numbering is deterministic.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_triangles: Vec<Vec<usize>>,
    triangle_edges: Vec<[usize; 3]>,
    vertex_triangles: Vec<Vec<usize>>,
    vertex_neighbors: Vec<Vec<usize>>,
}

impl SurfaceMesh {
    /// Builds the mesh and its adjacency. Rejects out-of-range indices,
    /// repeated vertices within a triangle and edges shared by more than two
    /// triangles. Meshes with boundary are accepted; see [`Self::is_closed`].
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::with_capacity(triangles.len() * 3 / 2 + 1);
        let mut edges = Vec::new();
        let mut edge_triangles: Vec<Vec<usize>> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        let mut vertex_triangles = vec![Vec::new(); nv];

        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(Error::InvalidMesh(format!("triangle {t} references vertex {v} of {nv}")));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
            let mut te = [0; 3];
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = [a.min(b), a.max(b)];
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_triangles.push(Vec::with_capacity(2));
                    edges.len() - 1
                });
                edge_triangles[e].push(t);
                if edge_triangles[e].len() > 2 {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({}, {}) is shared by more than two triangles",
                        key[0], key[1]
                    )));
                }
                // local edge k is opposite local vertex k
                te[k] = e;
            }
            triangle_edges.push(te);
            for &v in tri {
                vertex_triangles[v].push(t);
            }
        }

        let mut vertex_neighbors = vec![Vec::new(); nv];
        for &[a, b] in &edges {
            vertex_neighbors[a].push(b);
            vertex_neighbors[b].push(a);
        }
        for n in &mut vertex_neighbors {
            n.sort_unstable();
        }

        Ok(Self {
            vertices,
            triangles,
            edges,
            edge_triangles,
            triangle_edges,
            vertex_triangles,
            vertex_neighbors,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> &Vec3 {
        &self.vertices[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Triangles incident to edge `e` (one or two).
    pub fn edge_triangles(&self, e: usize) -> &[usize] {
        &self.edge_triangles[e]
    }

    /// Edge ids of triangle `t`; entry `k` is the edge opposite local vertex `k`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_triangles[v]
    }

    /// Sorted 1-ring neighbours of `v`.
    pub fn vertex_neighbors(&self, v: usize) -> &[usize] {
        &self.vertex_neighbors[v]
    }

    /// Every edge has exactly two incident triangles and every vertex is used.
    pub fn is_closed(&self) -> bool {
        self.edge_triangles.iter().all(|t| t.len() == 2) && self.vertex_triangles.iter().all(|t| !t.is_empty())
    }

    pub fn require_closed(&self) -> Result<()> {
        if let Some(e) = self.edge_triangles.iter().position(|t| t.len() != 2) {
            let [a, b] = self.edges[e];
            return Err(Error::InvalidMesh(format!("boundary edge ({a}, {b}): mesh is not closed")));
        }
        if let Some(v) = self.vertex_triangles.iter().position(|t| t.is_empty()) {
            return Err(Error::InvalidMesh(format!("vertex {v} is not used by any triangle")));
        }
        Ok(())
    }

    /// Euler characteristic `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_triangles() as i64
    }

    pub fn triangle_points(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// `(p1 - p0) × (p2 - p0)`; its length is twice the area.
    pub fn triangle_cross(&self, t: usize) -> Vec3 {
        let [p0, p1, p2] = self.triangle_points(t);
        (p1 - p0).cross(&(p2 - p0))
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        0.5 * self.triangle_cross(t).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        (self.vertices[a] - self.vertices[b]).norm()
    }

    /// Mesh size `h`: the longest edge.
    pub fn max_edge_length(&self) -> f64 {
        (0..self.n_edges()).map(|e| self.edge_length(e)).fold(0.0, f64::max)
    }

    /// Largest circumradius/inradius ratio over all triangles (2 for equilateral).
    pub fn shape_regularity(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| {
                let [p0, p1, p2] = self.triangle_points(t);
                let (a, b, c) = ((p1 - p2).norm(), (p2 - p0).norm(), (p0 - p1).norm());
                let area = self.triangle_area(t);
                let circum = a * b * c / (4.0 * area);
                let inr = 2.0 * area / (a + b + c);
                circum / inr
            })
            .fold(0.0, f64::max)
    }

    /// Flips triangles whose normal disagrees with `∇φ` at the centroid.
    pub fn orient_outward(mut self, surf: &dyn ImplicitSurface) -> Self {
        for t in 0..self.triangles.len() {
            let [p0, p1, p2] = self.triangle_points(t);
            let centroid = (p0 + p1 + p2) / 3.0;
            if self.triangle_cross(t).dot(&surf.grad_phi(&centroid)) < 0.0 {
                self.triangles[t].swap(1, 2);
                let te = &mut self.triangle_edges[t];
                te.swap(1, 2);
            }
        }
        self
    }

    /// Fraction of edges whose two triangles traverse the edge in opposite
    /// directions (1 for a consistently oriented mesh).
    pub fn orientation_consistency(&self) -> f64 {
        let mut good = 0usize;
        let mut total = 0usize;
        for (e, tris) in self.edge_triangles.iter().enumerate() {
            if tris.len() != 2 {
                continue;
            }
            total += 1;
            let [a, b] = self.edges[e];
            let dir = |t: usize| {
                let tri = self.triangles[t];
                (0..3).any(|k| tri[k] == a && tri[(k + 1) % 3] == b)
            };
            if dir(tris[0]) != dir(tris[1]) {
                good += 1;
            }
        }
        if total == 0 {
            1.0
        } else {
            good as f64 / total as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> SurfaceMesh {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        SurfaceMesh::new(v, vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]]).unwrap()
    }

    #[test]
    fn tetrahedron_is_closed_sphere() {
        let m = tetra();
        assert!(m.is_closed());
        assert_eq!(m.n_edges(), 6);
        assert_eq!(m.euler_characteristic(), 2);
        assert_eq!(m.vertex_neighbors(0), &[1, 2, 3]);
        assert_eq!(m.orientation_consistency(), 1.0);
    }

    #[test]
    fn triangle_edges_are_opposite_vertices() {
        let m = tetra();
        for t in 0..m.n_triangles() {
            let tri = m.triangle(t);
            for (k, &e) in m.triangle_edges(t).iter().enumerate() {
                assert!(!m.edges()[e].contains(&tri[k]));
            }
        }
    }

    #[test]
    fn rejects_bad_indices_and_non_manifold_edges() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z(), -Vec3::z()];
        assert!(SurfaceMesh::new(v.clone(), vec![[0, 1, 7]]).is_err());
        assert!(SurfaceMesh::new(v.clone(), vec![[0, 1, 1]]).is_err());
        assert!(SurfaceMesh::new(v, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]).is_err());
    }

    #[test]
    fn open_mesh_is_not_closed() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        let m = SurfaceMesh::new(v, vec![[0, 1, 2]]).unwrap();
        assert!(!m.is_closed());
        assert!(m.require_closed().is_err());
        assert!((m.shape_regularity() - (1.0 + 2.0_f64.sqrt())).abs() < 1e-12);
    }
}
