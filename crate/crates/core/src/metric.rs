//! Element metrics, quadrature and the lift of exact-surface data to `M_h`.
//!
//! Each triangle is parametrized over the reference triangle
//! `{(s, t): s, t ≥ 0, s + t ≤ 1}` by the affine map
//! `(s, t) ↦ p0 + s (p1 - p0) + t (p2 - p0)`. Its Jacobian gives the discrete
//! metric `g_h = JᵀJ`; tangential gradients embed in ambient space as
//! `J g_h⁻¹ ∇̂`.

use nalgebra::{Matrix2, Matrix3x2, Vector2};
use rayon::prelude::*;

use crate::surface::{project_point, project_point_with, ImplicitSurface, ProjectionOptions, SurfaceMesh};
use crate::{Error, Mat3, Result, Vec3};

/// Reference gradients of the barycentric coordinates `λ0 = 1 - s - t`, `λ1 = s`, `λ2 = t`.
pub const REFERENCE_GRADIENTS: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    /// Columns are the edge vectors `p1 - p0`, `p2 - p0`.
    pub jac: Matrix3x2<f64>,
    pub metric: Matrix2<f64>,
    pub metric_inv: Matrix2<f64>,
    /// `√det g_h`, twice the triangle area.
    pub sqrt_det: f64,
}

impl ElementGeometry {
    /// Geometry of the triangle `(p0, p1, p2)`; `None` when degenerate.
    pub fn from_points(p0: &Vec3, p1: &Vec3, p2: &Vec3) -> Option<Self> {
        let e1 = p1 - p0;
        let e2 = p2 - p0;
        let jac = Matrix3x2::from_columns(&[e1, e2]);
        let metric = jac.transpose() * jac;
        let det = metric[(0, 0)] * metric[(1, 1)] - metric[(0, 1)] * metric[(1, 0)];
        let scale = e1.norm_squared().max(e2.norm_squared()).max((p2 - p1).norm_squared());
        let sqrt_det = det.max(0.0).sqrt();
        if !(sqrt_det >= 1e-14 * scale) || sqrt_det == 0.0 {
            return None;
        }
        let metric_inv = Matrix2::new(metric[(1, 1)], -metric[(0, 1)], -metric[(1, 0)], metric[(0, 0)]) / det;
        Some(Self {
            jac,
            metric,
            metric_inv,
            sqrt_det,
        })
    }

    pub fn area(&self) -> f64 {
        0.5 * self.sqrt_det
    }

    /// Embeds a reference-coordinate gradient as an ambient tangent vector.
    pub fn embed_gradient(&self, reference: &Vector2<f64>) -> Vec3 {
        self.jac * (self.metric_inv * reference)
    }

    /// Ambient gradients of the three P1 basis functions (constant per element).
    pub fn basis_gradients(&self) -> [Vec3; 3] {
        REFERENCE_GRADIENTS.map(|g| self.embed_gradient(&Vector2::new(g[0], g[1])))
    }

    /// Ambient gradient of the linear function with nodal values `values`.
    pub fn gradient(&self, values: [f64; 3]) -> Vec3 {
        self.embed_gradient(&Vector2::new(values[1] - values[0], values[2] - values[0]))
    }
}

pub fn element_geometry(mesh: &SurfaceMesh, t: usize) -> Result<ElementGeometry> {
    let [p0, p1, p2] = mesh.triangle_points(t);
    ElementGeometry::from_points(&p0, &p1, &p2).ok_or_else(|| Error::DegenerateTriangle {
        index: t,
        sqrt_det: mesh.triangle_cross(t).norm(),
    })
}

pub fn element_geometries(mesh: &SurfaceMesh) -> Result<Vec<ElementGeometry>> {
    (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| element_geometry(mesh, t))
        .collect()
}

/// Symmetric rule on the reference triangle; weights sum to ½.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    /// Barycentric coordinates `(λ0, λ1, λ2)`.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// One-point centroid rule, exact for degree 1.
    pub fn centroid() -> Self {
        Self {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![0.5],
            degree: 1,
        }
    }

    /// Edge-midpoint rule, exact for degree 2.
    pub fn degree2() -> Self {
        Self {
            points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
            weights: vec![1.0 / 6.0; 3],
            degree: 2,
        }
    }

    /// Six-point Dunavant rule, exact for degree 4.
    pub fn degree4() -> Self {
        let a = 0.445_948_490_915_964_9;
        let wa = 0.223_381_589_678_011_5 / 2.0;
        let b = 0.091_576_213_509_770_74;
        let wb = 0.109_951_743_655_321_9 / 2.0;
        let (ca, cb) = (1.0 - 2.0 * a, 1.0 - 2.0 * b);
        Self {
            points: vec![[ca, a, a], [a, ca, a], [a, a, ca], [cb, b, b], [b, cb, b], [b, b, cb]],
            weights: vec![wa, wa, wa, wb, wb, wb],
            degree: 4,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Named quadrature choice for configuration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum QuadratureKind {
    Degree2,
    #[default]
    Degree4,
}

impl QuadratureKind {
    pub fn rule(&self) -> QuadratureRule {
        match self {
            Self::Degree2 => QuadratureRule::degree2(),
            Self::Degree4 => QuadratureRule::degree4(),
        }
    }
}

impl std::str::FromStr for QuadratureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "degree2" | "2" => Ok(Self::Degree2),
            "degree4" | "4" => Ok(Self::Degree4),
            other => Err(Error::InvalidArgument(format!("unknown quadrature '{other}'"))),
        }
    }
}

/// Metric of the torus chart `(θ, ψ) ↦ ((R + r cos ψ) cos θ, (R + r cos ψ) sin θ, r sin ψ)`.
pub fn exact_metric_torus(_theta: f64, psi: f64, major: f64, minor: f64) -> Matrix2<f64> {
    let rho = major + minor * psi.cos();
    Matrix2::new(rho * rho, 0.0, 0.0, minor * minor)
}

/// Evaluates exact-surface data at the lift of a point of `M_h`, `f(π(x))`.
pub fn lift_eval<T>(surf: &dyn ImplicitSurface, f: impl Fn(&Vec3) -> T, x: &Vec3) -> Result<T> {
    Ok(f(&project_point(surf, x)?))
}

/// One quadrature node of `M_h` with its lift onto the exact surface.
#[derive(Clone, Copy, Debug)]
pub struct LiftedPoint {
    pub bary: [f64; 3],
    /// Quadrature weight times `√det g_h`: integrates over `M_h`.
    pub weight: f64,
    /// Node on the discrete surface.
    pub mesh_point: Vec3,
    /// Closest point on the exact surface.
    pub surface_point: Vec3,
    /// Unit normal of the exact surface at `surface_point`.
    pub normal: Vec3,
}

/// Quadrature nodes of every triangle together with their projections,
/// computed once per mesh and shared by load assembly and error norms.
#[derive(Clone, Debug)]
pub struct LiftedQuadrature {
    points_per_triangle: usize,
    points: Vec<LiftedPoint>,
    geometry: Vec<ElementGeometry>,
}

impl LiftedQuadrature {
    pub fn new(mesh: &SurfaceMesh, surf: &dyn ImplicitSurface, rule: &QuadratureRule) -> Result<Self> {
        let geometry = element_geometries(mesh)?;
        let opts = ProjectionOptions::default();
        let per_tri: Vec<Vec<LiftedPoint>> = (0..mesh.n_triangles())
            .into_par_iter()
            .map(|t| {
                let [p0, p1, p2] = mesh.triangle_points(t);
                let g = &geometry[t];
                rule.points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&bary, &w)| {
                        let x = p0 * bary[0] + p1 * bary[1] + p2 * bary[2];
                        let proj = project_point_with(surf, &x, &opts)?;
                        Ok(LiftedPoint {
                            bary,
                            weight: w * g.sqrt_det,
                            mesh_point: x,
                            surface_point: proj.point,
                            normal: proj.normal,
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            points_per_triangle: rule.len(),
            points: per_tri.into_iter().flatten().collect(),
            geometry,
        })
    }

    pub fn points_per_triangle(&self) -> usize {
        self.points_per_triangle
    }

    pub fn n_triangles(&self) -> usize {
        self.geometry.len()
    }

    /// Lifted nodes of triangle `t`.
    pub fn triangle(&self, t: usize) -> &[LiftedPoint] {
        let k = self.points_per_triangle;
        &self.points[t * k..(t + 1) * k]
    }

    pub fn geometry(&self, t: usize) -> &ElementGeometry {
        &self.geometry[t]
    }

    pub fn geometries(&self) -> &[ElementGeometry] {
        &self.geometry
    }

    /// `∫_{M_h} f∘π dσ_{g_h}`.
    pub fn integrate(&self, f: impl Fn(&LiftedPoint) -> f64) -> f64 {
        self.points.iter().map(|p| p.weight * f(p)).sum()
    }
}

/// Jacobian of the closest-point map at `x`: `(I + d W)⁻¹ (I - ννᵀ)` with
/// `d` the signed distance and `W` the shape operator at `π(x)`.
pub fn closest_point_jacobian(surf: &dyn ImplicitSurface, x: &Vec3) -> Result<Mat3> {
    let proj = project_point_with(surf, x, &ProjectionOptions::default())?;
    let nu = proj.normal;
    let p = Mat3::identity() - nu * nu.transpose();
    let w = surf.shape_operator(&proj.point)?;
    let a = Mat3::identity() + w * proj.distance;
    let inv = a.try_inverse().ok_or(Error::NonConvergence {
        iterations: 0,
        residual: proj.distance,
    })?;
    Ok(inv * p)
}

/// Largest relative deviations between the exact metric pulled back through
/// `π ∘ π_h` and the discrete metric `g_h`, sampled at quadrature nodes.
#[derive(Clone, Copy, Debug)]
pub struct MetricDeviation {
    /// `max ‖g⁻¹(g - g_h)‖_F`.
    pub metric: f64,
    /// `max |√|g| - √|g_h|| / √|g|`.
    pub area_element: f64,
}

pub fn metric_deviation(mesh: &SurfaceMesh, surf: &dyn ImplicitSurface, rule: &QuadratureRule) -> Result<MetricDeviation> {
    let per_tri: Vec<(f64, f64)> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let geom = element_geometry(mesh, t)?;
            let [p0, p1, p2] = mesh.triangle_points(t);
            let mut worst = (0.0f64, 0.0f64);
            for bary in &rule.points {
                let x = p0 * bary[0] + p1 * bary[1] + p2 * bary[2];
                let dpi = closest_point_jacobian(surf, &x)?;
                let j = dpi * geom.jac;
                let g = j.transpose() * j;
                let g_inv = g.try_inverse().ok_or(Error::DegenerateTriangle { index: t, sqrt_det: 0.0 })?;
                let dev = (g_inv * (g - geom.metric)).norm();
                let sqrt_g = g.determinant().sqrt();
                let area = (sqrt_g - geom.sqrt_det).abs() / sqrt_g;
                worst = (worst.0.max(dev), worst.1.max(area));
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let (metric, area_element) = per_tri.iter().fold((0.0f64, 0.0f64), |acc, d| (acc.0.max(d.0), acc.1.max(d.1)));
    Ok(MetricDeviation { metric, area_element })
}
