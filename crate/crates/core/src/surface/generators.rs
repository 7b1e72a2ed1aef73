use std::collections::HashMap;
use std::f64::consts::PI;

use super::mesh::SurfaceMesh;
use crate::{Error, Result, Vec3};

/// Structured torus triangulation from an `n_major × n_minor` parameter grid.
///
/// Vertex `j·n_minor + k` sits at angles `(2πj/n_major, 2πk/n_minor)` on the
/// chart `(θ, ψ) ↦ ((R + r cos ψ) cos θ, (R + r cos ψ) sin θ, r sin ψ)`. Each
/// parameter cell is split along the same diagonal, with triangles oriented
/// along the outward normal.
pub fn make_torus_mesh(n_major: usize, n_minor: usize, major: f64, minor: f64) -> Result<SurfaceMesh> {
    if n_major < 3 || n_minor < 3 {
        return Err(Error::InvalidArgument(format!(
            "torus grid needs at least 3x3 cells, got {n_major}x{n_minor}"
        )));
    }
    if !(major > minor && minor > 0.0) {
        return Err(Error::InvalidArgument(format!("torus radii need R > r > 0, got R={major}, r={minor}")));
    }
    let mut vertices = Vec::with_capacity(n_major * n_minor);
    for j in 0..n_major {
        let theta = 2.0 * PI * j as f64 / n_major as f64;
        for k in 0..n_minor {
            let psi = 2.0 * PI * k as f64 / n_minor as f64;
            vertices.push(torus_point(theta, psi, major, minor));
        }
    }
    let id = |j: usize, k: usize| (j % n_major) * n_minor + (k % n_minor);
    let mut triangles = Vec::with_capacity(2 * n_major * n_minor);
    for j in 0..n_major {
        for k in 0..n_minor {
            let (v00, v10, v11, v01) = (id(j, k), id(j + 1, k), id(j + 1, k + 1), id(j, k + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    SurfaceMesh::new(vertices, triangles)
}

/// Point of the torus chart at angles `(θ, ψ)`.
pub fn torus_point(theta: f64, psi: f64, major: f64, minor: f64) -> Vec3 {
    let rho = major + minor * psi.cos();
    Vec3::new(rho * theta.cos(), rho * theta.sin(), minor * psi.sin())
}

/// Flat `nx × ny` grid of right triangles in the plane `z = 0`, spacing
/// `(dx, dy)`, every cell split along the same diagonal. Has a boundary.
pub fn make_planar_grid(nx: usize, ny: usize, dx: f64, dy: f64) -> Result<SurfaceMesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument("planar grid needs at least one cell".into()));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Vec3::new(i as f64 * dx, j as f64 * dy, 0.0));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    SurfaceMesh::new(vertices, triangles)
}

/// Geodesic sphere: each icosahedron face split into `frequency²`
/// triangles, vertices pushed radially to the sphere. `10·f² + 2` vertices.
pub fn make_icosphere(frequency: usize, radius: f64) -> Result<SurfaceMesh> {
    if frequency == 0 {
        return Err(Error::InvalidArgument("icosphere frequency must be positive".into()));
    }
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let base = [
        Vec3::new(-1.0, g, 0.0),
        Vec3::new(1.0, g, 0.0),
        Vec3::new(-1.0, -g, 0.0),
        Vec3::new(1.0, -g, 0.0),
        Vec3::new(0.0, -1.0, g),
        Vec3::new(0.0, 1.0, g),
        Vec3::new(0.0, -1.0, -g),
        Vec3::new(0.0, 1.0, -g),
        Vec3::new(g, 0.0, -1.0),
        Vec3::new(g, 0.0, 1.0),
        Vec3::new(-g, 0.0, -1.0),
        Vec3::new(-g, 0.0, 1.0),
    ];
    let faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    let n = frequency;
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for face in faces {
        let (a, b, c) = (base[face[0]], base[face[1]], base[face[2]]);
        let mut local = vec![vec![0usize; n + 1]; n + 1];
        for i in 0..=n {
            for j in 0..=(n - i) {
                let p = a + (b - a) * (i as f64 / n as f64) + (c - a) * (j as f64 / n as f64);
                let p = p.normalize() * radius;
                let key = [
                    (p.x * 1e9).round() as i64,
                    (p.y * 1e9).round() as i64,
                    (p.z * 1e9).round() as i64,
                ];
                local[i][j] = *index.entry(key).or_insert_with(|| {
                    vertices.push(p);
                    vertices.len() - 1
                });
            }
        }
        for i in 0..n {
            for j in 0..(n - i) {
                triangles.push([local[i][j], local[i + 1][j], local[i][j + 1]]);
                if i + j + 1 < n {
                    triangles.push([local[i + 1][j], local[i + 1][j + 1], local[i][j + 1]]);
                }
            }
        }
    }
    let mesh = SurfaceMesh::new(vertices, triangles)?;
    Ok(mesh.orient_outward(&crate::benchmarks::Sphere::new(radius)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::Torus;
    use crate::surface::ImplicitSurface;

    #[test]
    fn torus_20x10_counts() {
        let m = make_torus_mesh(20, 10, 4.0, 1.0).unwrap();
        assert_eq!(m.n_vertices(), 200);
        assert_eq!(m.n_triangles(), 400);
        assert_eq!(m.n_edges(), 600);
        assert!(m.is_closed());
        assert_eq!(m.euler_characteristic(), 0);
    }

    #[test]
    fn minimal_torus_grid_is_closed() {
        let m = make_torus_mesh(3, 3, 4.0, 1.0).unwrap();
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.n_triangles(), 18);
        assert!((0..m.n_edges()).all(|e| m.edge_triangles(e).len() == 2));
    }

    #[test]
    fn torus_mesh_size_halves() {
        let h1 = make_torus_mesh(20, 10, 4.0, 1.0).unwrap().max_edge_length();
        let h2 = make_torus_mesh(40, 20, 4.0, 1.0).unwrap().max_edge_length();
        let ratio = h2 / h1;
        assert!((0.45..=0.55).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn torus_triangles_point_outward() {
        let torus = Torus::new(4.0, 1.0);
        let m = make_torus_mesh(12, 8, 4.0, 1.0).unwrap();
        for t in 0..m.n_triangles() {
            let [a, b, c] = m.triangle_points(t);
            let centroid = (a + b + c) / 3.0;
            assert!(m.triangle_cross(t).dot(&torus.grad_phi(&centroid)) > 0.0);
        }
        assert_eq!(m.orientation_consistency(), 1.0);
    }

    #[test]
    fn icosphere_counts() {
        for f in [1, 2, 5] {
            let m = make_icosphere(f, 1.0).unwrap();
            assert_eq!(m.n_vertices(), 10 * f * f + 2);
            assert!(m.is_closed());
            assert_eq!(m.euler_characteristic(), 2);
            assert_eq!(m.orientation_consistency(), 1.0);
        }
    }

    #[test]
    fn planar_grid_has_boundary() {
        let m = make_planar_grid(3, 2, 1.0, 1.0).unwrap();
        assert_eq!(m.n_vertices(), 12);
        assert!(!m.is_closed());
    }
}
