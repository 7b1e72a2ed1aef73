//! Space-time error norms on `(0,1) × M_h` and observed orders.
//!
//! Discrete fields are linear in time on each interval and P1 in space;
//! exact data are evaluated at the closest-point lift of each spatial
//! quadrature node. Time integrals use Gauss-Legendre rules per interval.

use rayon::prelude::*;

use crate::metric::{LiftedPoint, LiftedQuadrature};
use crate::recovery::RecoveredGradients;
use crate::solver::SpaceTimeField;
use crate::surface::SurfaceMesh;
use crate::timedisc::TimeGrid;
use crate::{Error, Result, Vec3};

/// Exact solution evaluated on the exact surface.
pub trait ExactSolution: Sync {
    fn value(&self, t: f64, x: &Vec3) -> f64;
    fn time_derivative(&self, t: f64, x: &Vec3) -> f64;
    /// Tangential gradient at `x` given the unit normal there.
    fn surface_gradient(&self, t: f64, x: &Vec3, normal: &Vec3) -> Vec3;
}

/// Gauss-Legendre nodes and weights mapped to `[0, 1]` (weights sum to 1).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    (0..n)
        .map(|k| {
            // Newton on P_n from the Chebyshev-like initial guess
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for m in 2..=n {
                    let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let p = if n == 1 { x } else { p1 };
                let prev = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * p - prev) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            ((1.0 - x) / 2.0, w / 2.0)
        })
        .collect()
}

/// Shared data for evaluating several norms of fields on one mesh and grid.
pub struct ErrorEvaluator<'a> {
    mesh: &'a SurfaceMesh,
    quad: &'a LiftedQuadrature,
    grid: TimeGrid,
    time_rule: Vec<(f64, f64)>,
}

fn p1(lp: &LiftedPoint, tri: [usize; 3], row: &[f64]) -> f64 {
    lp.bary[0] * row[tri[0]] + lp.bary[1] * row[tri[1]] + lp.bary[2] * row[tri[2]]
}

fn p1_vec(lp: &LiftedPoint, tri: [usize; 3], row: &[Vec3]) -> Vec3 {
    row[tri[0]] * lp.bary[0] + row[tri[1]] * lp.bary[1] + row[tri[2]] * lp.bary[2]
}

impl<'a> ErrorEvaluator<'a> {
    /// Three Gauss points per time interval.
    pub fn new(mesh: &'a SurfaceMesh, quad: &'a LiftedQuadrature, grid: TimeGrid) -> Self {
        Self::with_time_points(mesh, quad, grid, 3)
    }

    pub fn with_time_points(mesh: &'a SurfaceMesh, quad: &'a LiftedQuadrature, grid: TimeGrid, points: usize) -> Self {
        Self {
            mesh,
            quad,
            grid,
            time_rule: gauss_legendre(points),
        }
    }

    fn check(&self, field: &SpaceTimeField) -> Result<()> {
        if field.grid() != &self.grid {
            return Err(Error::LengthMismatch {
                expected: self.grid.n_nodes(),
                found: field.grid().n_nodes(),
            });
        }
        if field.n_vertices() != self.mesh.n_vertices() {
            return Err(Error::LengthMismatch {
                expected: self.mesh.n_vertices(),
                found: field.n_vertices(),
            });
        }
        Ok(())
    }

    /// `Σ_intervals Σ_gauss τ w_g Σ_q weight · f(t, point, interval end i, s, time)`.
    fn integrate(&self, f: impl Fn(usize, &LiftedPoint, usize, f64, f64) -> f64 + Sync) -> f64 {
        let tau = self.grid.tau();
        let per_triangle: Vec<f64> = (0..self.mesh.n_triangles())
            .into_par_iter()
            .map(|t| {
                let mut acc = 0.0;
                for i in 1..self.grid.n_nodes() {
                    for &(s, wg) in &self.time_rule {
                        let time = self.grid.node(i - 1) + s * tau;
                        for lp in self.quad.triangle(t) {
                            acc += tau * wg * lp.weight * f(t, lp, i, s, time);
                        }
                    }
                }
                acc
            })
            .collect();
        per_triangle.iter().sum()
    }

    /// `‖u_h - u∘π‖` in `L²(0,1; L²(M_h))`.
    pub fn error_e(&self, field: &SpaceTimeField, exact: &dyn ExactSolution) -> Result<f64> {
        self.check(field)?;
        Ok(self
            .integrate(|t, lp, i, s, time| {
                let tri = self.mesh.triangle(t);
                let uh = (1.0 - s) * p1(lp, tri, field.row(i - 1)) + s * p1(lp, tri, field.row(i));
                (uh - exact.value(time, &lp.surface_point)).powi(2)
            })
            .sqrt())
    }

    /// Squared time and space parts of the combined derivative error; the
    /// time derivative of `u_h` is the difference quotient per interval and
    /// its spatial gradient the element gradient, linear in time.
    pub fn error_de_parts(&self, field: &SpaceTimeField, exact: &dyn ExactSolution) -> Result<(f64, f64)> {
        self.check(field)?;
        let tau = self.grid.tau();
        let time_part = self.integrate(|t, lp, i, _s, time| {
            let tri = self.mesh.triangle(t);
            let dt = (p1(lp, tri, field.row(i)) - p1(lp, tri, field.row(i - 1))) / tau;
            (dt - exact.time_derivative(time, &lp.surface_point)).powi(2)
        });
        let geoms = self.quad.geometries();
        let space_part = self.integrate(|t, lp, i, s, time| {
            let tri = self.mesh.triangle(t);
            let grad = |row: &[f64]| geoms[t].gradient(tri.map(|k| row[k]));
            let gh = grad(field.row(i - 1)) * (1.0 - s) + grad(field.row(i)) * s;
            (gh - exact.surface_gradient(time, &lp.surface_point, &lp.normal)).norm_squared()
        });
        Ok((time_part, space_part))
    }

    pub fn error_de(&self, field: &SpaceTimeField, exact: &dyn ExactSolution) -> Result<f64> {
        let (a, b) = self.error_de_parts(field, exact)?;
        Ok((a + b).sqrt())
    }

    /// `‖∂_t u∘π - G_τ u_h‖` for nodal time recoveries `recovered`.
    pub fn error_de2t(&self, recovered: &SpaceTimeField, exact: &dyn ExactSolution) -> Result<f64> {
        self.check(recovered)?;
        Ok(self
            .integrate(|t, lp, i, s, time| {
                let tri = self.mesh.triangle(t);
                let g = (1.0 - s) * p1(lp, tri, recovered.row(i - 1)) + s * p1(lp, tri, recovered.row(i));
                (g - exact.time_derivative(time, &lp.surface_point)).powi(2)
            })
            .sqrt())
    }

    /// `‖∇_g u∘π - G_h u_h‖` for per-vertex recovered gradients.
    pub fn error_de2m(&self, recovered: &RecoveredGradients, exact: &dyn ExactSolution) -> Result<f64> {
        if recovered.rows.len() != self.grid.n_nodes() {
            return Err(Error::LengthMismatch {
                expected: self.grid.n_nodes(),
                found: recovered.rows.len(),
            });
        }
        if let Some(bad) = recovered.rows.iter().find(|r| r.len() != self.mesh.n_vertices()) {
            return Err(Error::LengthMismatch {
                expected: self.mesh.n_vertices(),
                found: bad.len(),
            });
        }
        Ok(self
            .integrate(|t, lp, i, s, time| {
                let tri = self.mesh.triangle(t);
                let g = p1_vec(lp, tri, &recovered.rows[i - 1]) * (1.0 - s) + p1_vec(lp, tri, &recovered.rows[i]) * s;
                (g - exact.surface_gradient(time, &lp.surface_point, &lp.normal)).norm_squared()
            })
            .sqrt())
    }
}

pub fn error_e(field: &SpaceTimeField, exact: &dyn ExactSolution, mesh: &SurfaceMesh, quad: &LiftedQuadrature) -> Result<f64> {
    ErrorEvaluator::new(mesh, quad, *field.grid()).error_e(field, exact)
}

pub fn error_de(field: &SpaceTimeField, exact: &dyn ExactSolution, mesh: &SurfaceMesh, quad: &LiftedQuadrature) -> Result<f64> {
    ErrorEvaluator::new(mesh, quad, *field.grid()).error_de(field, exact)
}

pub fn error_de2t(recovered: &SpaceTimeField, exact: &dyn ExactSolution, mesh: &SurfaceMesh, quad: &LiftedQuadrature) -> Result<f64> {
    ErrorEvaluator::new(mesh, quad, *recovered.grid()).error_de2t(recovered, exact)
}

pub fn error_de2m(recovered: &RecoveredGradients, grid: TimeGrid, exact: &dyn ExactSolution, mesh: &SurfaceMesh, quad: &LiftedQuadrature) -> Result<f64> {
    ErrorEvaluator::new(mesh, quad, grid).error_de2m(recovered, exact)
}

/// Errors of one refinement level.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorLevel {
    pub level: usize,
    pub n_vertices: usize,
    pub n_intervals: usize,
    pub h: f64,
    pub tau: f64,
    pub e: f64,
    pub de: f64,
    pub de2t: f64,
    pub de2m: f64,
}

impl ErrorLevel {
    pub fn errors(&self) -> [f64; 4] {
        [self.e, self.de, self.de2t, self.de2m]
    }
}

/// Errors per level and orders between consecutive levels (`None` on the first).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorReport {
    pub levels: Vec<ErrorLevel>,
    pub orders: Vec<Option<[f64; 4]>>,
}

impl ErrorReport {
    /// Orders at the finest pair of levels.
    pub fn finest_orders(&self) -> Option<[f64; 4]> {
        self.orders.last().copied().flatten()
    }
}

/// `log(err_k / err_{k+1}) / log(√(N_v^{k+1} / N_v^k))`.
pub fn order(err_coarse: f64, err_fine: f64, nv_coarse: usize, nv_fine: usize) -> f64 {
    (err_coarse / err_fine).ln() / (nv_fine as f64 / nv_coarse as f64).sqrt().ln()
}

/// Fills in the orders of a list of levels.
pub fn observed_orders(levels: Vec<ErrorLevel>) -> ErrorReport {
    let mut orders = vec![None];
    for w in levels.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let (ea, eb) = (a.errors(), b.errors());
        orders.push(Some(std::array::from_fn(|k| order(ea[k], eb[k], a.n_vertices, b.n_vertices))));
    }
    orders.truncate(levels.len().max(1));
    if levels.is_empty() {
        orders.clear();
    }
    ErrorReport { levels, orders }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_rules_are_exact() {
        for n in 1..=6 {
            let r = gauss_legendre(n);
            assert_relative_eq!(r.iter().map(|p| p.1).sum::<f64>(), 1.0, epsilon = 1e-14);
            for k in 0..2 * n {
                let q: f64 = r.iter().map(|(x, w)| w * x.powi(k as i32)).sum();
                assert_relative_eq!(q, 1.0 / (k as f64 + 1.0), epsilon = 1e-14);
            }
            assert!(r.windows(2).all(|w| w[0].0 < w[1].0));
        }
    }

    #[test]
    fn order_examples() {
        assert_relative_eq!(order(5.262e-1, 1.328e-1, 800, 3200), 1.987, epsilon = 1e-3);
        assert_eq!(order(0.3, 0.3, 200, 800), 0.0);
        assert_relative_eq!(order(1.0, 0.25, 100, 400), 2.0, epsilon = 1e-14);
    }

    fn level(nv: usize, e: f64) -> ErrorLevel {
        ErrorLevel {
            level: 0,
            n_vertices: nv,
            n_intervals: 4,
            h: 1.0,
            tau: 0.25,
            e,
            de: e,
            de2t: e,
            de2m: e,
        }
    }

    #[test]
    fn report_orders() {
        let r = observed_orders(vec![level(200, 1.0)]);
        assert_eq!(r.orders, vec![None]);
        let r = observed_orders(vec![level(200, 1.0), level(800, 0.25), level(3200, 0.0625)]);
        assert_eq!(r.orders.len(), 3);
        assert_relative_eq!(r.finest_orders().unwrap()[2], 2.0, epsilon = 1e-14);
        assert!(observed_orders(vec![]).orders.is_empty());
    }
}
