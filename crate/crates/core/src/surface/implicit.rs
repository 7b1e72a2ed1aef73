use nalgebra::{Matrix4, Vector4};

use crate::{Error, Mat3, Result, Vec3};

/// A closed surface given as the zero level set of a smooth function.
///
/// Implementors supply the level-set value with its analytic gradient and
/// Hessian; the gradient must not vanish in a tubular neighbourhood of the
/// zero level set.
pub trait ImplicitSurface: Send + Sync {
    fn phi(&self, x: &Vec3) -> f64;
    fn grad_phi(&self, x: &Vec3) -> Vec3;
    fn hess_phi(&self, x: &Vec3) -> Mat3;

    /// Unit normal `∇φ/|∇φ|`, pointing towards increasing `φ`.
    fn normal(&self, x: &Vec3) -> Result<Vec3> {
        let g = self.grad_phi(x);
        let n = g.norm();
        if n < GRADIENT_FLOOR {
            return Err(degenerate(x, n));
        }
        Ok(g / n)
    }

    /// Divergence of the unit normal field, `(Δφ - νᵀ(∇²φ)ν)/|∇φ|`.
    ///
    /// On the zero level set this is the sum of the principal curvatures.
    fn normal_divergence(&self, x: &Vec3) -> Result<f64> {
        let g = self.grad_phi(x);
        let n = g.norm();
        if n < GRADIENT_FLOOR {
            return Err(degenerate(x, n));
        }
        let nu = g / n;
        let h = self.hess_phi(x);
        Ok((h.trace() - nu.dot(&(h * nu))) / n)
    }

    /// Shape operator `P (∇²φ) P / |∇φ|` with `P = I - ννᵀ`.
    fn shape_operator(&self, x: &Vec3) -> Result<Mat3> {
        let g = self.grad_phi(x);
        let n = g.norm();
        if n < GRADIENT_FLOOR {
            return Err(degenerate(x, n));
        }
        let nu = g / n;
        let p = Mat3::identity() - nu * nu.transpose();
        Ok(p * self.hess_phi(x) * p / n)
    }
}

pub(crate) const GRADIENT_FLOOR: f64 = 1e-10;

pub(crate) fn degenerate(x: &Vec3, norm: f64) -> Error {
    Error::DegenerateGradient { point: [x.x, x.y, x.z], norm }
}

/// Tuning for [`project_point_with`].
#[derive(Clone, Copy, Debug)]
pub struct ProjectionOptions {
    /// Largest admissible `|φ(x)|/|∇φ(x)|` for the starting point.
    pub tube_width: f64,
    pub max_iterations: usize,
    /// `|φ(p)| ≤ level_tol · (1 + |p|)` on exit.
    pub level_tol: f64,
    /// Sine of the angle between `p - x` and `∇φ(p)` on exit.
    pub angle_tol: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            tube_width: 0.5,
            max_iterations: 50,
            level_tol: 1e-12,
            angle_tol: 1e-8,
        }
    }
}

/// Result of a closest-point projection.
#[derive(Clone, Copy, Debug)]
pub struct Projection {
    pub point: Vec3,
    /// Unit normal at `point`.
    pub normal: Vec3,
    /// Signed distance of the input from the surface, positive on the `φ > 0` side.
    pub distance: f64,
    pub iterations: usize,
}

/// Closest point on the surface to `x`.
pub fn project_point(surf: &dyn ImplicitSurface, x: &Vec3) -> Result<Vec3> {
    project_point_with(surf, x, &ProjectionOptions::default()).map(|p| p.point)
}

/// One first-order normal step `x - φ ∇φ/|∇φ|²`.
pub fn first_order_step(surf: &dyn ImplicitSurface, x: &Vec3) -> Result<Vec3> {
    let g = surf.grad_phi(x);
    let gn2 = g.norm_squared();
    if gn2.sqrt() < GRADIENT_FLOOR {
        return Err(degenerate(x, gn2.sqrt()));
    }
    Ok(x - g * (surf.phi(x) / gn2))
}

/// Closest-point projection onto the zero level set.
///
/// Normal-flow steps `p ← p - φ∇φ/|∇φ|²` (halved when `|φ|` grows) bring the
/// iterate onto the surface; Newton on the Lagrange system
/// `p - x + λ∇φ(p) = 0, φ(p) = 0` then enforces the closest-point condition.
pub fn project_point_with(
    surf: &dyn ImplicitSurface,
    x: &Vec3,
    opts: &ProjectionOptions,
) -> Result<Projection> {
    let g0 = surf.grad_phi(x);
    let g0n = g0.norm();
    if g0n < GRADIENT_FLOOR {
        return Err(degenerate(x, g0n));
    }
    let phi0 = surf.phi(x);
    if phi0 == 0.0 {
        return Ok(Projection {
            point: *x,
            normal: g0 / g0n,
            distance: 0.0,
            iterations: 0,
        });
    }
    let ratio = phi0.abs() / g0n;
    if ratio > opts.tube_width {
        return Err(Error::OutsideTube { point: [x.x, x.y, x.z], ratio });
    }

    let mut p = *x;
    let mut phi = phi0;
    let mut iterations = 0;

    // normal flow until the level residual is small
    let flow_tol = 1e-6 * (1.0 + x.norm());
    while phi.abs() > flow_tol && iterations < opts.max_iterations {
        iterations += 1;
        let g = surf.grad_phi(&p);
        let gn2 = g.norm_squared();
        if gn2.sqrt() < GRADIENT_FLOOR {
            return Err(degenerate(&p, gn2.sqrt()));
        }
        let step = g * (phi / gn2);
        let mut damping = 1.0;
        loop {
            let trial = p - step * damping;
            let trial_phi = surf.phi(&trial);
            if trial_phi.abs() < phi.abs() || damping < 1e-4 {
                p = trial;
                phi = trial_phi;
                break;
            }
            damping *= 0.5;
        }
    }

    // Newton on the closest-point system
    let g = surf.grad_phi(&p);
    let mut lambda = -(p - x).dot(&g) / g.norm_squared();
    loop {
        let g = surf.grad_phi(&p);
        let gn = g.norm();
        if gn < GRADIENT_FLOOR {
            return Err(degenerate(&p, gn));
        }
        let d = p - x;
        let level_ok = phi.abs() <= opts.level_tol * (1.0 + p.norm());
        let dn = d.norm();
        // absolute floor: for inputs almost on the surface `d` is mostly roundoff
        let angle_ok = d.cross(&g).norm() <= (opts.angle_tol * dn + 1e-13 * (1.0 + x.norm())) * gn;
        if level_ok && angle_ok {
            let normal = g / gn;
            return Ok(Projection {
                point: p,
                normal,
                distance: -d.dot(&normal),
                iterations,
            });
        }
        if iterations >= opts.max_iterations {
            return Err(Error::NonConvergence { iterations, residual: phi.abs() });
        }
        iterations += 1;

        let h = surf.hess_phi(&p);
        let r = d + g * lambda;
        let residual = Vector4::new(r.x, r.y, r.z, phi);
        let a = Mat3::identity() + h * lambda;
        #[rustfmt::skip]
        let jac = Matrix4::new(
            a[(0, 0)], a[(0, 1)], a[(0, 2)], g.x,
            a[(1, 0)], a[(1, 1)], a[(1, 2)], g.y,
            a[(2, 0)], a[(2, 1)], a[(2, 2)], g.z,
            g.x,       g.y,       g.z,       0.0,
        );
        let Some(delta) = jac.lu().solve(&residual) else {
            return Err(Error::NonConvergence { iterations, residual: phi.abs() });
        };
        let merit = residual.norm();
        let mut damping = 1.0;
        loop {
            let trial = p - Vec3::new(delta[0], delta[1], delta[2]) * damping;
            let trial_lambda = lambda - delta[3] * damping;
            let trial_phi = surf.phi(&trial);
            let trial_r = trial - x + surf.grad_phi(&trial) * trial_lambda;
            let trial_merit = Vector4::new(trial_r.x, trial_r.y, trial_r.z, trial_phi).norm();
            if trial_merit < merit || damping < 1e-3 {
                p = trial;
                lambda = trial_lambda;
                phi = trial_phi;
                break;
            }
            damping *= 0.5;
        }
    }
}
