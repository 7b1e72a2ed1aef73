//! Level-set surfaces and the manufactured test problems.
//!
//! Every problem uses the exact solution `u(t, x) = x₁ x₂ eᵗ`; the source
//! `f = -u_tt - Δ_g u` is produced from the ambient extension through the
//! level-set identity
//!
//! `Δ_g ū = Δū - νᵀ(∇²ū)ν - (div ν)(ν·∇ū)`, `ν = ∇φ/|∇φ|`,
//!
//! with all derivatives in closed form.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::analysis::ExactSolution;
use crate::solver::NeumannData;
use crate::surface::{make_torus_mesh, off, refine_project, ImplicitSurface, ProjectionOrder, SurfaceMesh};
use crate::{Error, Mat3, Result, Vec3};

/// Ring torus `√((√(x₁²+x₂²) - R)² + x₃²) - r`; a signed distance function.
#[derive(Clone, Copy, Debug)]
pub struct Torus {
    pub major: f64,
    pub minor: f64,
}

impl Torus {
    pub fn new(major: f64, minor: f64) -> Self {
        Self { major, minor }
    }

    /// Chart angles `(θ, ψ)` of the closest point to `x`.
    pub fn angles(&self, x: &Vec3) -> (f64, f64) {
        let rho = x.x.hypot(x.y);
        (x.y.atan2(x.x), x.z.atan2(rho - self.major))
    }
}

impl ImplicitSurface for Torus {
    fn phi(&self, x: &Vec3) -> f64 {
        let q = x.x.hypot(x.y) - self.major;
        q.hypot(x.z) - self.minor
    }

    fn grad_phi(&self, x: &Vec3) -> Vec3 {
        let rho = x.x.hypot(x.y);
        let q = rho - self.major;
        let s = q.hypot(x.z);
        Vec3::new(q * x.x / (rho * s), q * x.y / (rho * s), x.z / s)
    }

    fn hess_phi(&self, x: &Vec3) -> Mat3 {
        let rho = x.x.hypot(x.y);
        let q = rho - self.major;
        let s = q.hypot(x.z);
        let (r2, r3) = (rho * rho, rho * rho * rho);
        let w = Vec3::new(q * x.x / rho, q * x.y / rho, x.z);
        let mut dw = Mat3::zeros();
        dw[(0, 0)] = x.x * x.x / r2 + q * x.y * x.y / r3;
        dw[(1, 1)] = x.y * x.y / r2 + q * x.x * x.x / r3;
        dw[(0, 1)] = x.x * x.y / r2 * (1.0 - q / rho);
        dw[(1, 0)] = dw[(0, 1)];
        dw[(2, 2)] = 1.0;
        dw / s - w * w.transpose() / (s * s * s)
    }
}

/// Sphere `|x|² - R²`.
#[derive(Clone, Copy, Debug)]
pub struct Sphere {
    pub radius: f64,
}

impl Sphere {
    pub fn new(radius: f64) -> Self {
        Self { radius }
    }
}

impl ImplicitSurface for Sphere {
    fn phi(&self, x: &Vec3) -> f64 {
        x.norm_squared() - self.radius * self.radius
    }

    fn grad_phi(&self, x: &Vec3) -> Vec3 {
        x * 2.0
    }

    fn hess_phi(&self, _x: &Vec3) -> Mat3 {
        Mat3::identity() * 2.0
    }
}

/// The plane `x₃ = 0`.
#[derive(Clone, Copy, Debug)]
pub struct Plane;

impl ImplicitSurface for Plane {
    fn phi(&self, x: &Vec3) -> f64 {
        x.z
    }

    fn grad_phi(&self, _x: &Vec3) -> Vec3 {
        Vec3::z()
    }

    fn hess_phi(&self, _x: &Vec3) -> Mat3 {
        Mat3::zeros()
    }
}

/// `¼x₁² + x₂² + 4x₃²/(1 + ½ sin(πx₁))² - 1`: an ellipsoid whose thickness
/// oscillates along `x₁`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ModulatedEllipsoid;

impl ModulatedEllipsoid {
    fn thickness(x1: f64) -> (f64, f64, f64) {
        let a = 1.0 + 0.5 * (PI * x1).sin();
        let da = 0.5 * PI * (PI * x1).cos();
        let dda = -0.5 * PI * PI * (PI * x1).sin();
        (a, da, dda)
    }

    /// `c(x₁) = 4/a²` and its first two derivatives.
    fn coefficient(x1: f64) -> (f64, f64, f64) {
        let (a, da, dda) = Self::thickness(x1);
        let c = 4.0 / (a * a);
        let dc = -8.0 * da / (a * a * a);
        let ddc = -8.0 * dda / (a * a * a) + 24.0 * da * da / (a * a * a * a);
        (c, dc, ddc)
    }

    /// Maps the unit sphere onto the surface.
    pub fn from_sphere(y: &Vec3) -> Vec3 {
        let x1 = 2.0 * y.x;
        let (a, _, _) = Self::thickness(x1);
        Vec3::new(x1, y.y, 0.5 * a * y.z)
    }
}

impl ImplicitSurface for ModulatedEllipsoid {
    fn phi(&self, x: &Vec3) -> f64 {
        let (c, _, _) = Self::coefficient(x.x);
        0.25 * x.x * x.x + x.y * x.y + c * x.z * x.z - 1.0
    }

    fn grad_phi(&self, x: &Vec3) -> Vec3 {
        let (c, dc, _) = Self::coefficient(x.x);
        Vec3::new(0.5 * x.x + dc * x.z * x.z, 2.0 * x.y, 2.0 * c * x.z)
    }

    fn hess_phi(&self, x: &Vec3) -> Mat3 {
        let (c, dc, ddc) = Self::coefficient(x.x);
        let mut h = Mat3::zeros();
        h[(0, 0)] = 0.5 + ddc * x.z * x.z;
        h[(0, 2)] = 2.0 * dc * x.z;
        h[(2, 0)] = h[(0, 2)];
        h[(1, 1)] = 2.0;
        h[(2, 2)] = 2.0 * c;
        h
    }
}

/// `(x₁ - x₃²)² + x₂² + x₃² - 1`: the unit sphere sheared along a parabola.
#[derive(Clone, Copy, Debug, Default)]
pub struct ShearedSphere;

impl ShearedSphere {
    /// Maps the unit sphere onto the surface.
    pub fn from_sphere(y: &Vec3) -> Vec3 {
        Vec3::new(y.x + y.z * y.z, y.y, y.z)
    }
}

impl ImplicitSurface for ShearedSphere {
    fn phi(&self, x: &Vec3) -> f64 {
        let q = x.x - x.z * x.z;
        q * q + x.y * x.y + x.z * x.z - 1.0
    }

    fn grad_phi(&self, x: &Vec3) -> Vec3 {
        let q = x.x - x.z * x.z;
        Vec3::new(2.0 * q, 2.0 * x.y, -4.0 * x.z * q + 2.0 * x.z)
    }

    fn hess_phi(&self, x: &Vec3) -> Mat3 {
        let q = x.x - x.z * x.z;
        let mut h = Mat3::zeros();
        h[(0, 0)] = 2.0;
        h[(0, 2)] = -4.0 * x.z;
        h[(2, 0)] = h[(0, 2)];
        h[(1, 1)] = 2.0;
        h[(2, 2)] = -4.0 * q + 8.0 * x.z * x.z + 2.0;
        h
    }
}

/// Surface Laplacian of the restriction of an ambient function, from its
/// ambient gradient and Hessian at a point `x` on the surface.
pub fn surface_laplacian_levelset(surf: &dyn ImplicitSurface, grad_u: &Vec3, hess_u: &Mat3, x: &Vec3) -> Result<f64> {
    let nu = surf.normal(x)?;
    let div_nu = surf.normal_divergence(x)?;
    Ok(hess_u.trace() - nu.dot(&(hess_u * nu)) - div_nu * nu.dot(grad_u))
}

/// Name of a built-in benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BenchmarkName {
    /// Torus `R = 4, r = 1`, structured meshes.
    Torus,
    /// Modulated ellipsoid.
    Ex2,
    /// Sheared sphere.
    Ex3,
}

impl BenchmarkName {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Torus => "torus",
            Self::Ex2 => "ex2",
            Self::Ex3 => "ex3",
        }
    }
}

impl FromStr for BenchmarkName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "torus" | "ex1" => Ok(Self::Torus),
            "ex2" => Ok(Self::Ex2),
            "ex3" => Ok(Self::Ex3),
            other => Err(Error::UnknownBenchmark(other.to_string())),
        }
    }
}

impl std::fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where the level-0 mesh comes from and how finer levels are built.
#[derive(Clone, Debug)]
pub enum MeshSource {
    /// Structured torus grid; level `k` uses `2ᵏ·n_major × 2ᵏ·n_minor`.
    TorusGrid { n_major: usize, n_minor: usize },
    /// OFF text for level 0; level `k` applies `k` refinements.
    Off(String),
}

const EX2_COARSE: &str = include_str!("../meshes/ex2_coarse.off");
const EX3_COARSE: &str = include_str!("../meshes/ex3_coarse.off");

/// A manufactured problem with exact solution `u = x₁x₂eᵗ`.
pub struct BenchmarkProblem {
    pub name: BenchmarkName,
    surface: Box<dyn ImplicitSurface>,
    pub mesh_source: MeshSource,
    /// Projection used for new vertices when refining OFF meshes.
    pub refinement: ProjectionOrder,
}

impl std::fmt::Debug for BenchmarkProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchmarkProblem")
            .field("name", &self.name)
            .field("refinement", &self.refinement)
            .finish_non_exhaustive()
    }
}

pub fn make_benchmark(name: &str) -> Result<BenchmarkProblem> {
    Ok(BenchmarkProblem::new(name.parse()?))
}

impl BenchmarkProblem {
    pub fn new(name: BenchmarkName) -> Self {
        match name {
            BenchmarkName::Torus => Self {
                name,
                surface: Box::new(Torus::new(4.0, 1.0)),
                mesh_source: MeshSource::TorusGrid { n_major: 20, n_minor: 10 },
                refinement: ProjectionOrder::FirstOrder,
            },
            BenchmarkName::Ex2 => Self {
                name,
                surface: Box::new(ModulatedEllipsoid),
                mesh_source: MeshSource::Off(EX2_COARSE.to_string()),
                refinement: ProjectionOrder::FirstOrder,
            },
            BenchmarkName::Ex3 => Self {
                name,
                surface: Box::new(ShearedSphere),
                mesh_source: MeshSource::Off(EX3_COARSE.to_string()),
                refinement: ProjectionOrder::FirstOrder,
            },
        }
    }

    pub fn with_mesh_source(mut self, source: MeshSource) -> Self {
        self.mesh_source = source;
        self
    }

    pub fn surface(&self) -> &dyn ImplicitSurface {
        self.surface.as_ref()
    }

    /// Mesh for refinement level `level` (0 = coarsest).
    pub fn mesh(&self, level: usize) -> Result<SurfaceMesh> {
        match &self.mesh_source {
            MeshSource::TorusGrid { n_major, n_minor } => {
                let k = 1usize << level;
                make_torus_mesh(n_major * k, n_minor * k, 4.0, 1.0)
            }
            MeshSource::Off(text) => {
                let mut mesh = off::read_off_str(text)?.orient_outward(self.surface());
                mesh.require_closed()?;
                for _ in 0..level {
                    mesh = refine_project(&mesh, self.surface(), self.refinement)?;
                }
                Ok(mesh)
            }
        }
    }

    /// All meshes for levels `0..levels`, each refined from the previous one.
    pub fn mesh_ladder(&self, levels: usize) -> Result<Vec<SurfaceMesh>> {
        match &self.mesh_source {
            MeshSource::TorusGrid { .. } => (0..levels).map(|l| self.mesh(l)).collect(),
            MeshSource::Off(_) => {
                let mut out: Vec<SurfaceMesh> = Vec::with_capacity(levels);
                for l in 0..levels {
                    let next = match out.last() {
                        None => self.mesh(0)?,
                        Some(prev) => refine_project(prev, self.surface(), self.refinement)?,
                    };
                    debug_assert!(l == out.len());
                    out.push(next);
                }
                Ok(out)
            }
        }
    }

    pub fn exact_u(&self, t: f64, x: &Vec3) -> f64 {
        x.x * x.y * t.exp()
    }

    pub fn exact_dt_u(&self, t: f64, x: &Vec3) -> f64 {
        self.exact_u(t, x)
    }

    pub fn exact_dtt_u(&self, t: f64, x: &Vec3) -> f64 {
        self.exact_u(t, x)
    }

    /// `eᵗ (I - ννᵀ)(x₂, x₁, 0)ᵀ` with the surface normal at `x`.
    pub fn exact_grad_g_u(&self, t: f64, x: &Vec3) -> Result<Vec3> {
        let nu = self.surface.normal(x)?;
        Ok(tangential_part(&ambient_gradient(x), &nu) * t.exp())
    }

    /// `Δ_g(x₁x₂)` at a surface point.
    pub fn laplacian_x1x2(&self, x: &Vec3) -> Result<f64> {
        surface_laplacian_levelset(self.surface(), &ambient_gradient(x), &ambient_hessian(), x)
    }

    /// Source term `f(t, x) = eᵗ(-x₁x₂ - Δ_g(x₁x₂))`.
    pub fn try_source(&self, t: f64, x: &Vec3) -> Result<f64> {
        Ok(t.exp() * (-x.x * x.y - self.laplacian_x1x2(x)?))
    }

    pub fn mu0(&self, x: &Vec3) -> f64 {
        x.x * x.y
    }

    pub fn mu1(&self, x: &Vec3) -> f64 {
        std::f64::consts::E * x.x * x.y
    }
}

fn ambient_gradient(x: &Vec3) -> Vec3 {
    Vec3::new(x.y, x.x, 0.0)
}

fn ambient_hessian() -> Mat3 {
    let mut h = Mat3::zeros();
    h[(0, 1)] = 1.0;
    h[(1, 0)] = 1.0;
    h
}

fn tangential_part(v: &Vec3, nu: &Vec3) -> Vec3 {
    v - nu * nu.dot(v)
}

impl NeumannData for BenchmarkProblem {
    fn source(&self, t: f64, x: &Vec3) -> f64 {
        self.try_source(t, x).unwrap_or(f64::NAN)
    }

    fn mu0(&self, x: &Vec3) -> f64 {
        BenchmarkProblem::mu0(self, x)
    }

    fn mu1(&self, x: &Vec3) -> f64 {
        BenchmarkProblem::mu1(self, x)
    }
}

impl ExactSolution for BenchmarkProblem {
    fn value(&self, t: f64, x: &Vec3) -> f64 {
        self.exact_u(t, x)
    }

    fn time_derivative(&self, t: f64, x: &Vec3) -> f64 {
        self.exact_dt_u(t, x)
    }

    fn surface_gradient(&self, t: f64, x: &Vec3, normal: &Vec3) -> Vec3 {
        tangential_part(&ambient_gradient(x), normal) * t.exp()
    }
}
