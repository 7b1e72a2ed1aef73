use rayon::prelude::*;

use super::implicit::{project_point_with, ImplicitSurface, ProjectionOptions};
use super::mesh::SurfaceMesh;
use crate::Result;

/// Mesh quality statistics relative to the exact surface.
#[derive(Clone, Debug)]
pub struct MeshDiagnostics {
    /// Longest edge.
    pub h: f64,
    /// Largest distance of a vertex from the exact surface.
    pub max_vertex_distance: f64,
    /// Per interior edge: `max | |a| - |a'| | / h` over the two pairs of
    /// opposite edges of the quadrilateral formed by the adjacent triangles.
    /// Indexed like the mesh edges; boundary edges get 0.
    pub parallelogram_deviation: Vec<f64>,
    pub max_parallelogram_deviation: f64,
    /// Area fraction of triangle pairs whose deviation exceeds `constant · h`.
    pub irregular_area_fraction: f64,
    /// Largest circumradius/inradius ratio.
    pub shape_regularity: f64,
}

/// [`diagnostics_with`] with irregularity constant 1.
pub fn diagnostics(mesh: &SurfaceMesh, surf: &dyn ImplicitSurface) -> Result<MeshDiagnostics> {
    diagnostics_with(mesh, surf, 1.0)
}

pub fn diagnostics_with(mesh: &SurfaceMesh, surf: &dyn ImplicitSurface, irregular_constant: f64) -> Result<MeshDiagnostics> {
    let h = mesh.max_edge_length();
    let opts = ProjectionOptions {
        tube_width: f64::INFINITY,
        ..Default::default()
    };
    let max_vertex_distance = mesh
        .vertices()
        .par_iter()
        .map(|x| project_point_with(surf, x, &opts).map(|p| (p.point - x).norm()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let parallelogram_deviation: Vec<f64> = (0..mesh.n_edges())
        .map(|e| parallelogram_deviation(mesh, e) / h)
        .collect();
    let max_parallelogram_deviation = parallelogram_deviation.iter().copied().fold(0.0, f64::max);

    let total_area = mesh.total_area();
    let mut irregular = vec![false; mesh.n_triangles()];
    for (e, &d) in parallelogram_deviation.iter().enumerate() {
        if d > irregular_constant * h {
            for &t in mesh.edge_triangles(e) {
                irregular[t] = true;
            }
        }
    }
    let irregular_area: f64 = irregular
        .iter()
        .enumerate()
        .filter(|(_, &flag)| flag)
        .map(|(t, _)| mesh.triangle_area(t))
        .sum();

    Ok(MeshDiagnostics {
        h,
        max_vertex_distance,
        parallelogram_deviation,
        max_parallelogram_deviation,
        irregular_area_fraction: irregular_area / total_area,
        shape_regularity: mesh.shape_regularity(),
    })
}

/// Absolute opposite-edge length mismatch for the two triangles sharing `e`.
fn parallelogram_deviation(mesh: &SurfaceMesh, e: usize) -> f64 {
    let tris = mesh.edge_triangles(e);
    if tris.len() != 2 {
        return 0.0;
    }
    let [a, b] = mesh.edges()[e];
    let apex = |t: usize| {
        let tri = mesh.triangle(t);
        *tri.iter().find(|&&v| v != a && v != b).expect("triangle has a third vertex")
    };
    let (c, d) = (apex(tris[0]), apex(tris[1]));
    let len = |i: usize, j: usize| (mesh.vertex(i) - mesh.vertex(j)).norm();
    // quadrilateral a-c-b-d: opposite pairs (ac, bd) and (cb, da)
    let d1 = (len(a, c) - len(b, d)).abs();
    let d2 = (len(c, b) - len(d, a)).abs();
    d1.max(d2)
}
