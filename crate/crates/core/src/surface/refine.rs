use rayon::prelude::*;

use super::implicit::{first_order_step, project_point, ImplicitSurface};
use super::mesh::SurfaceMesh;
use crate::{Error, Result, Vec3};

/// How new midpoint vertices are moved towards the exact surface.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionOrder {
    /// Full closest-point projection.
    Exact,
    /// A single step `x - φ ∇φ/|∇φ|²`.
    FirstOrder,
}

impl std::str::FromStr for ProjectionOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "first_order" | "first-order" => Ok(Self::FirstOrder),
            other => Err(Error::InvalidArgument(format!("unknown projection order '{other}'"))),
        }
    }
}

/// Uniform 1→4 refinement at edge midpoints followed by moving the new
/// vertices onto (or towards) the surface. Old vertices are kept as they are.
///
/// New vertex for edge `e` gets index `N_v + e`; child triangles preserve
/// the parent orientation.
pub fn refine_project(mesh: &SurfaceMesh, surf: &dyn ImplicitSurface, order: ProjectionOrder) -> Result<SurfaceMesh> {
    mesh.require_closed()?;
    let nv = mesh.n_vertices();
    let midpoints: Vec<Vec3> = mesh
        .edges()
        .par_iter()
        .map(|&[a, b]| {
            let m = (mesh.vertex(a) + mesh.vertex(b)) * 0.5;
            match order {
                ProjectionOrder::Exact => project_point(surf, &m),
                ProjectionOrder::FirstOrder => first_order_step(surf, &m),
            }
        })
        .collect::<Result<_>>()?;

    let mut vertices = Vec::with_capacity(nv + midpoints.len());
    vertices.extend_from_slice(mesh.vertices());
    vertices.extend(midpoints);

    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let [a, b, c] = mesh.triangle(t);
        let [ea, eb, ec] = mesh.triangle_edges(t);
        // edge k is opposite vertex k: ea = bc, eb = ca, ec = ab
        let (bc, ca, ab) = (nv + ea, nv + eb, nv + ec);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    let refined = SurfaceMesh::new(vertices, triangles)?;
    refined.require_closed()?;
    Ok(refined)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::Torus;
    use crate::surface::make_torus_mesh;

    #[test]
    fn refine_torus_200_gives_800() {
        let torus = Torus::new(4.0, 1.0);
        let m = make_torus_mesh(20, 10, 4.0, 1.0).unwrap();
        let r = refine_project(&m, &torus, ProjectionOrder::Exact).unwrap();
        assert_eq!(m.n_edges(), 600);
        assert_eq!(r.n_vertices(), 800);
        assert_eq!(r.n_triangles(), 1600);
        assert!(r.is_closed());
        assert_eq!(r.orientation_consistency(), 1.0);
    }

    #[test]
    fn exact_refinement_keeps_old_vertices() {
        let torus = Torus::new(4.0, 1.0);
        let m = make_torus_mesh(8, 6, 4.0, 1.0).unwrap();
        let r = refine_project(&m, &torus, ProjectionOrder::Exact).unwrap();
        assert_eq!(&r.vertices()[..m.n_vertices()], m.vertices());
        for v in r.vertices() {
            assert!(torus.phi(v).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_refinement_halves_h() {
        let torus = Torus::new(4.0, 1.0);
        let mut m = make_torus_mesh(20, 10, 4.0, 1.0).unwrap();
        for _ in 0..2 {
            let r = refine_project(&m, &torus, ProjectionOrder::Exact).unwrap();
            let ratio = r.max_edge_length() / m.max_edge_length();
            assert!((ratio - 0.5).abs() <= 0.05 * 0.5, "ratio {ratio}");
            assert!(r.is_closed());
            m = r;
        }
    }
}
