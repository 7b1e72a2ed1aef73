//! Polynomial preserving recovery of derivatives.
//!
//! In time, nodal derivatives come from quadratic least-squares fits over
//! three-node patches. On the surface, each vertex gets a local tangent
//! frame; quadratic fits of the vertex heights and of the nodal values give a
//! recovered surface Jacobian `J_r` and a parametric gradient, combined as
//! `J_r (J_rᵀ J_r)⁻¹ ∇w`. Both recoveries are linear, so their weights are
//! computed once per grid or mesh.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rayon::prelude::*;

use crate::metric::element_geometry;
use crate::solver::SpaceTimeField;
use crate::surface::SurfaceMesh;
use crate::timedisc::TimeGrid;
use crate::{Error, Result, Vec3};

/// Least-squares quadratic fit over `points`; returns the weights `c_k`
/// such that `p'(at) = Σ c_k ω_k`.
fn derivative_weights(points: &[f64], at: f64, scale: f64) -> Vec<f64> {
    let v = DMatrix::from_fn(points.len(), 3, |k, c| ((points[k] - at) / scale).powi(c as i32));
    let pinv = v.pseudo_inverse(1e-14).expect("svd of a small Vandermonde matrix");
    pinv.row(1).iter().map(|w| w / scale).collect()
}

/// Nodes used to recover `∂_t` at node `node`.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalPatch {
    pub node: usize,
    pub stencil: [usize; 3],
    pub weights: [f64; 3],
}

impl TemporalPatch {
    pub fn new(grid: &TimeGrid, node: usize) -> Result<Self> {
        let n = grid.intervals();
        if n < 2 {
            return Err(Error::TooFewNodes(n + 1));
        }
        let stencil = if node == 0 {
            [0, 1, 2]
        } else if node == n {
            [n - 2, n - 1, n]
        } else {
            [node - 1, node, node + 1]
        };
        let pts = stencil.map(|k| grid.node(k));
        let w = derivative_weights(&pts, grid.node(node), grid.tau());
        Ok(Self {
            node,
            stencil,
            weights: [w[0], w[1], w[2]],
        })
    }

    pub fn apply(&self, samples: &[f64]) -> f64 {
        self.stencil.iter().zip(&self.weights).map(|(&k, w)| w * samples[k]).sum()
    }
}

/// Recovery operator in time, all patches of a grid.
#[derive(Clone, Debug)]
pub struct TimeRecovery {
    grid: TimeGrid,
    patches: Vec<TemporalPatch>,
}

impl TimeRecovery {
    pub fn new(grid: &TimeGrid) -> Result<Self> {
        let patches = (0..grid.n_nodes()).map(|i| TemporalPatch::new(grid, i)).collect::<Result<_>>()?;
        Ok(Self { grid: *grid, patches })
    }

    pub fn patches(&self) -> &[TemporalPatch] {
        &self.patches
    }

    pub fn apply(&self, samples: &[f64]) -> Result<Vec<f64>> {
        if samples.len() != self.grid.n_nodes() {
            return Err(Error::LengthMismatch {
                expected: self.grid.n_nodes(),
                found: samples.len(),
            });
        }
        Ok(self.patches.iter().map(|p| p.apply(samples)).collect())
    }

    /// Dense `(N+1) × (N+1)` matrix of the operator.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.grid.n_nodes();
        let mut g = DMatrix::zeros(n, n);
        for p in &self.patches {
            for (&k, &w) in p.stencil.iter().zip(&p.weights) {
                g[(p.node, k)] += w;
            }
        }
        g
    }
}

/// Recovered `∂_t` at every time node.
pub fn ppr_time(grid: &TimeGrid, samples: &[f64]) -> Result<Vec<f64>> {
    TimeRecovery::new(grid)?.apply(samples)
}

/// Applies [`ppr_time`] to every vertex trace.
pub fn ppr_time_field(field: &SpaceTimeField) -> Result<SpaceTimeField> {
    let grid = *field.grid();
    let rec = TimeRecovery::new(&grid)?;
    let mut out = SpaceTimeField::zeros(grid, field.n_vertices());
    for p in rec.patches() {
        let row = out.row_mut(p.node);
        for (&k, &w) in p.stencil.iter().zip(&p.weights) {
            for (o, v) in row.iter_mut().zip(field.row(k)) {
                *o += w * v;
            }
        }
    }
    Ok(out)
}

/// Local fitting data around one vertex.
#[derive(Clone, Debug)]
pub struct SurfacePatch {
    pub vertex: usize,
    /// Fit vertices, the center first.
    pub stencil: Vec<usize>,
    pub e1: Vec3,
    pub e2: Vec3,
    pub normal: Vec3,
    /// `(ξ, η)` of the stencil vertices.
    pub coords: Vec<Vector2<f64>>,
    pub heights: Vec<f64>,
    /// Largest `|(ξ, η)|`, used to scale the fit.
    pub radius: f64,
    /// Condition number of the scaled quadratic Vandermonde matrix.
    pub condition: f64,
}

const MIN_STENCIL: usize = 6;
const MAX_CONDITION: f64 = 1e8;

impl SurfacePatch {
    /// One-ring patch, extended to the two-ring when it is too small or
    /// badly conditioned.
    pub fn new(mesh: &SurfaceMesh, vertex: usize) -> Self {
        let ring1 = ring(mesh, vertex, 1);
        let patch = Self::with_stencil(mesh, vertex, ring1);
        if patch.is_usable() {
            return patch;
        }
        Self::with_stencil(mesh, vertex, ring(mesh, vertex, 2))
    }

    fn with_stencil(mesh: &SurfaceMesh, vertex: usize, stencil: Vec<usize>) -> Self {
        let normal = averaged_normal(mesh, vertex);
        let (e1, e2) = tangent_basis(&normal);
        let x0 = mesh.vertex(vertex);
        let rel: Vec<Vec3> = stencil.iter().map(|&k| mesh.vertex(k) - x0).collect();
        let coords: Vec<Vector2<f64>> = rel.iter().map(|d| Vector2::new(d.dot(&e1), d.dot(&e2))).collect();
        let heights = rel.iter().map(|d| d.dot(&normal)).collect();
        let radius = coords.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let condition = if stencil.len() >= MIN_STENCIL && radius > 0.0 {
            let sv = vandermonde(&coords, radius).singular_values();
            let (max, min) = (sv.max(), sv.min());
            if min > 0.0 {
                max / min
            } else {
                f64::INFINITY
            }
        } else {
            f64::INFINITY
        };
        Self {
            vertex,
            stencil,
            e1,
            e2,
            normal,
            coords,
            heights,
            radius,
            condition,
        }
    }

    pub fn is_usable(&self) -> bool {
        self.stencil.len() >= MIN_STENCIL && self.condition <= MAX_CONDITION
    }

    /// Weights of `(∂_ξ, ∂_η)` at the origin for the quadratic fit.
    fn derivative_weights(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        let v = vandermonde(&self.coords, self.radius);
        let pinv = v.pseudo_inverse(1e-14).ok()?;
        Some((pinv.row(1).transpose() / self.radius, pinv.row(2).transpose() / self.radius))
    }

    /// Recovered surface Jacobian `[e₁ + ζ_ξ n, e₂ + ζ_η n]`.
    pub fn recovered_jacobian(&self) -> Option<nalgebra::Matrix3x2<f64>> {
        let (dx, dy) = self.derivative_weights()?;
        let h = DVector::from_column_slice(&self.heights);
        let (zx, zy) = (dx.dot(&h), dy.dot(&h));
        Some(nalgebra::Matrix3x2::from_columns(&[self.e1 + self.normal * zx, self.e2 + self.normal * zy]))
    }

    /// Parametric gradient `(w_ξ, w_η)` of the quadratic fit to `values`
    /// (indexed by mesh vertex) at the origin.
    pub fn planar_gradient(&self, values: &[f64]) -> Option<Vector2<f64>> {
        let (dx, dy) = self.derivative_weights()?;
        let w = DVector::from_iterator(self.stencil.len(), self.stencil.iter().map(|&k| values[k]));
        Some(Vector2::new(dx.dot(&w), dy.dot(&w)))
    }
}

fn vandermonde(coords: &[Vector2<f64>], radius: f64) -> DMatrix<f64> {
    DMatrix::from_fn(coords.len(), 6, |k, c| {
        let (x, y) = (coords[k].x / radius, coords[k].y / radius);
        match c {
            0 => 1.0,
            1 => x,
            2 => y,
            3 => x * x,
            4 => x * y,
            _ => y * y,
        }
    })
}

/// Center followed by all vertices within `depth` edges, in ascending order.
fn ring(mesh: &SurfaceMesh, vertex: usize, depth: usize) -> Vec<usize> {
    let mut seen = vec![vertex];
    let mut frontier = vec![vertex];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &v in &frontier {
            for &w in mesh.vertex_neighbors(v) {
                if !seen.contains(&w) && !next.contains(&w) {
                    next.push(w);
                }
            }
        }
        seen.extend_from_slice(&next);
        frontier = next;
    }
    seen[1..].sort_unstable();
    seen
}

fn averaged_normal(mesh: &SurfaceMesh, vertex: usize) -> Vec3 {
    let sum: Vec3 = mesh.vertex_triangles(vertex).iter().map(|&t| mesh.triangle_cross(t).normalize()).sum();
    sum.normalize()
}

fn tangent_basis(n: &Vec3) -> (Vec3, Vec3) {
    let pick = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = (pick - n * n.dot(&pick)).normalize();
    (e1, n.cross(&e1))
}

/// Surface gradient recovery as a sparse linear map from nodal values to
/// per-vertex ambient vectors.
#[derive(Clone, Debug)]
pub struct SurfaceRecovery {
    offsets: Vec<usize>,
    indices: Vec<usize>,
    weights: Vec<Vec3>,
    fallback: Vec<bool>,
}

impl SurfaceRecovery {
    pub fn new(mesh: &SurfaceMesh) -> Result<Self> {
        let per_vertex: Vec<(Vec<(usize, Vec3)>, bool)> = (0..mesh.n_vertices())
            .into_par_iter()
            .map(|a| {
                let patch = SurfacePatch::new(mesh, a);
                match patch_weights(&patch) {
                    Some(w) if patch.is_usable() => Ok((w, false)),
                    _ => Ok((averaging_weights(mesh, a)?, true)),
                }
            })
            .collect::<Result<_>>()?;
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        let mut weights = Vec::new();
        let mut fallback = Vec::with_capacity(per_vertex.len());
        for (w, fb) in per_vertex {
            for (k, g) in w {
                indices.push(k);
                weights.push(g);
            }
            offsets.push(indices.len());
            fallback.push(fb);
        }
        Ok(Self {
            offsets,
            indices,
            weights,
            fallback,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.fallback.len()
    }

    /// Number of vertices recovered by element-gradient averaging.
    pub fn fallback_count(&self) -> usize {
        self.fallback.iter().filter(|&&f| f).count()
    }

    pub fn is_fallback(&self, a: usize) -> bool {
        self.fallback[a]
    }

    pub fn vertex(&self, a: usize, values: &[f64]) -> Vec3 {
        let r = self.offsets[a]..self.offsets[a + 1];
        self.indices[r.clone()].iter().zip(&self.weights[r]).map(|(&k, g)| g * values[k]).sum()
    }

    pub fn apply(&self, values: &[f64]) -> Result<Vec<Vec3>> {
        if values.len() != self.n_vertices() {
            return Err(Error::LengthMismatch {
                expected: self.n_vertices(),
                found: values.len(),
            });
        }
        Ok((0..self.n_vertices()).map(|a| self.vertex(a, values)).collect())
    }
}

fn patch_weights(patch: &SurfacePatch) -> Option<Vec<(usize, Vec3)>> {
    let (dx, dy) = patch.derivative_weights()?;
    let jr = patch.recovered_jacobian()?;
    let g: Matrix2<f64> = jr.transpose() * jr;
    let map = jr * g.try_inverse()?;
    Some(
        patch
            .stencil
            .iter()
            .enumerate()
            .map(|(k, &v)| (v, map * Vector2::new(dx[k], dy[k])))
            .collect(),
    )
}

/// Area-weighted average of the incident element gradients.
fn averaging_weights(mesh: &SurfaceMesh, a: usize) -> Result<Vec<(usize, Vec3)>> {
    let mut acc: Vec<(usize, Vec3)> = Vec::new();
    let mut total = 0.0;
    for &t in mesh.vertex_triangles(a) {
        let geom = element_geometry(mesh, t)?;
        let area = geom.area();
        total += area;
        for (k, g) in mesh.triangle(t).iter().zip(geom.basis_gradients()) {
            match acc.iter_mut().find(|(v, _)| v == k) {
                Some(entry) => entry.1 += g * area,
                None => acc.push((*k, g * area)),
            }
        }
    }
    acc.sort_by_key(|(v, _)| *v);
    acc.iter_mut().for_each(|(_, g)| *g /= total);
    Ok(acc)
}

/// Recovered gradient at vertex `patch.vertex`, computed directly from the
/// patch (no fallback).
pub fn pppr_vertex(patch: &SurfacePatch, values: &[f64]) -> Result<Vec3> {
    let w = patch_weights(patch).ok_or_else(|| Error::InvalidArgument(format!("rank-deficient patch at vertex {}", patch.vertex)))?;
    Ok(w.iter().map(|(k, g)| g * values[*k]).sum())
}

/// Recovered gradients for every time row of `field`.
#[derive(Clone, Debug)]
pub struct RecoveredGradients {
    /// `rows[i][a]` is the recovered gradient at vertex `a`, time node `i`.
    pub rows: Vec<Vec<Vec3>>,
    pub fallback_count: usize,
}

pub fn pppr_field(mesh: &SurfaceMesh, field: &SpaceTimeField) -> Result<RecoveredGradients> {
    let rec = SurfaceRecovery::new(mesh)?;
    pppr_field_with(&rec, field)
}

pub fn pppr_field_with(rec: &SurfaceRecovery, field: &SpaceTimeField) -> Result<RecoveredGradients> {
    let rows = field.rows().map(|r| rec.apply(r)).collect::<Result<_>>()?;
    Ok(RecoveredGradients {
        rows,
        fallback_count: rec.fallback_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{make_planar_grid, make_torus_mesh};
    use approx::assert_relative_eq;

    #[test]
    fn time_stencils() {
        let g = TimeGrid::new(4).unwrap();
        let rec = TimeRecovery::new(&g).unwrap();
        let tau = g.tau();
        let p0 = &rec.patches()[0];
        assert_eq!(p0.stencil, [0, 1, 2]);
        for (w, e) in p0.weights.iter().zip([-3.0, 4.0, -1.0]) {
            assert_relative_eq!(*w, e / (2.0 * tau), epsilon = 1e-10);
        }
        let p2 = &rec.patches()[2];
        for (w, e) in p2.weights.iter().zip([-1.0, 0.0, 1.0]) {
            assert_relative_eq!(*w, e / (2.0 * tau), epsilon = 1e-10);
        }
        let p4 = &rec.patches()[4];
        for (w, e) in p4.weights.iter().zip([1.0, -4.0, 3.0]) {
            assert_relative_eq!(*w, e / (2.0 * tau), epsilon = 1e-10);
        }
    }

    #[test]
    fn time_examples() {
        let g = TimeGrid::new(4).unwrap();
        let sq: Vec<f64> = g.nodes().iter().map(|t| t * t).collect();
        for (d, t) in ppr_time(&g, &sq).unwrap().iter().zip(g.nodes()) {
            assert_relative_eq!(*d, 2.0 * t, epsilon = 1e-12);
        }
        assert!(ppr_time(&g, &[2.0; 5]).unwrap().iter().all(|d| d.abs() < 1e-12));
        let g8 = TimeGrid::new(8).unwrap();
        let cube: Vec<f64> = g8.nodes().iter().map(|t| t * t * t).collect();
        assert_relative_eq!(ppr_time(&g8, &cube).unwrap()[0], -1.0 / 32.0, epsilon = 1e-12);
        assert!(matches!(ppr_time(&TimeGrid::new(1).unwrap(), &[0.0, 1.0]), Err(Error::TooFewNodes(2))));
    }

    #[test]
    fn time_field_recovery() {
        let g = TimeGrid::new(5).unwrap();
        let v = [1.0, -2.0, 0.5];
        let rows: Vec<Vec<f64>> = g.nodes().iter().map(|t| v.iter().map(|c| c * t * t).collect()).collect();
        let f = SpaceTimeField::from_rows(g, &rows).unwrap();
        let r = ppr_time_field(&f).unwrap();
        for (i, t) in g.nodes().iter().enumerate() {
            for (a, c) in v.iter().enumerate() {
                assert_relative_eq!(r.row(i)[a], 2.0 * t * c, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn flat_patch_reproduces_quadratics() {
        let mesh = make_planar_grid(7, 7, 0.1, 0.13).unwrap();
        let a = 3 * 8 + 3;
        let patch = SurfacePatch::new(&mesh, a);
        assert!(patch.is_usable());
        let x0 = mesh.vertex(a);
        let coef = [0.3, -1.1, 0.7, 2.0, -0.4, 1.3];
        let values: Vec<f64> = mesh
            .vertices()
            .iter()
            .map(|p| {
                let d = p - x0;
                let (x, y) = (d.dot(&patch.e1), d.dot(&patch.e2));
                coef[0] + coef[1] * x + coef[2] * y + coef[3] * x * x + coef[4] * x * y + coef[5] * y * y
            })
            .collect();
        let g = patch.planar_gradient(&values).unwrap();
        assert_relative_eq!(g, Vector2::new(coef[1], coef[2]), epsilon = 1e-10);
        let full = pppr_vertex(&patch, &values).unwrap();
        assert_relative_eq!(full, patch.e1 * coef[1] + patch.e2 * coef[2], epsilon = 1e-10);
    }

    #[test]
    fn constants_recover_to_zero_and_output_is_tangent() {
        let mesh = make_torus_mesh(16, 8, 4.0, 1.0).unwrap();
        let rec = SurfaceRecovery::new(&mesh).unwrap();
        assert_eq!(rec.fallback_count(), 0);
        let c = rec.apply(&vec![2.5; mesh.n_vertices()]).unwrap();
        assert!(c.iter().all(|g| g.norm() < 1e-10));
        let values: Vec<f64> = mesh.vertices().iter().map(|p| p.x * p.y + p.z).collect();
        for a in 0..mesh.n_vertices() {
            let patch = SurfacePatch::new(&mesh, a);
            let jr = patch.recovered_jacobian().unwrap();
            let nr = jr.column(0).cross(&jr.column(1)).normalize();
            let g = rec.vertex(a, &values);
            assert!(nr.dot(&g).abs() <= 1e-10 * g.norm().max(1e-300));
        }
    }
}
