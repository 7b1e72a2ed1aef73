//! Coupled space-time solve, diagonalized in time.
//!
//! The fully discrete problem reads `M (A U)_i + K uⁱ = Fⁱ` for every time
//! node, where `A = -D_tt`. Expanding in the time eigenbasis decouples it
//! into `(λ_j M + K) z_j = F̂_j`, one sparse SPD solve per mode; the
//! constant mode is singular and is solved on the mean-free complement.

mod cg;
mod eigen;

pub use cg::{pcg, CgOutcome, IncompleteCholesky, Preconditioner, PreconditionerKind};
pub use eigen::{dense_time_eigenbasis, time_eigenbasis, TimeEigenBasis, TimeTransform};

use log::{debug, warn};
use rayon::prelude::*;

use crate::assembly::{assemble_load_values, assemble_mass, assemble_stiffness, SparseMatrix};
use crate::metric::{LiftedQuadrature, QuadratureKind};
use crate::surface::{ImplicitSurface, SurfaceMesh};
use crate::timedisc::{boundary_coefficient, TimeGrid};
use crate::{Error, Result, Vec3};

/// Right-hand side data of the model problem.
pub trait NeumannData: Sync {
    fn source(&self, t: f64, x: &Vec3) -> f64;
    /// `∂_t u(0, x)`.
    fn mu0(&self, x: &Vec3) -> f64;
    /// `∂_t u(1, x)`.
    fn mu1(&self, x: &Vec3) -> f64;
}

/// [`NeumannData`] from three closures.
pub struct FnData<F, A, B> {
    pub source: F,
    pub mu0: A,
    pub mu1: B,
}

impl<F, A, B> NeumannData for FnData<F, A, B>
where
    F: Fn(f64, &Vec3) -> f64 + Sync,
    A: Fn(&Vec3) -> f64 + Sync,
    B: Fn(&Vec3) -> f64 + Sync,
{
    fn source(&self, t: f64, x: &Vec3) -> f64 {
        (self.source)(t, x)
    }

    fn mu0(&self, x: &Vec3) -> f64 {
        (self.mu0)(x)
    }

    fn mu1(&self, x: &Vec3) -> f64 {
        (self.mu1)(x)
    }
}

/// Nodal values `uⁱ_a` on a time grid × mesh, stored row per time node.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    grid: TimeGrid,
    n_vertices: usize,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: TimeGrid, n_vertices: usize) -> Self {
        Self {
            grid,
            n_vertices,
            values: vec![0.0; grid.n_nodes() * n_vertices],
        }
    }

    pub fn from_rows(grid: TimeGrid, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != grid.n_nodes() {
            return Err(Error::LengthMismatch {
                expected: grid.n_nodes(),
                found: rows.len(),
            });
        }
        let n_vertices = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n_vertices) {
            return Err(Error::LengthMismatch {
                expected: n_vertices,
                found: bad.len(),
            });
        }
        Ok(Self {
            grid,
            n_vertices,
            values: rows.concat(),
        })
    }

    /// Nodal interpolant of `u(t, x)` at the mesh vertices.
    pub fn interpolate(grid: TimeGrid, mesh: &SurfaceMesh, u: impl Fn(f64, &Vec3) -> f64) -> Self {
        let rows: Vec<Vec<f64>> = grid.nodes().iter().map(|&t| mesh.vertices().iter().map(|x| u(t, x)).collect()).collect();
        Self::from_rows(grid, &rows).expect("consistent dimensions")
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_vertices..(i + 1) * self.n_vertices]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.n_vertices..(i + 1) * self.n_vertices]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_vertices)
    }

    /// Rows needed for the second difference at node `i`: `(i, i+1)` at
    /// `i = 0`, `(i-1, i)` at `i = N`, `(i-1, i, i+1)` otherwise.
    fn trace_window(&self, i: usize) -> Vec<&[f64]> {
        let n = self.grid.intervals();
        if i == 0 {
            vec![self.row(0), self.row(1)]
        } else if i == n {
            vec![self.row(n - 1), self.row(n)]
        } else {
            vec![self.row(i - 1), self.row(i), self.row(i + 1)]
        }
    }

    /// Time trace of vertex `a`.
    pub fn trace(&self, a: usize) -> Vec<f64> {
        (0..self.grid.n_nodes()).map(|i| self.values[i * self.n_vertices + a]).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Discrete space-time mean `Σ_i w_i τ 1ᵀ M uⁱ`.
    pub fn weighted_mean(&self, mass: &SparseMatrix) -> f64 {
        let m1 = mass.mul_vec(&vec![1.0; self.n_vertices]);
        self.rows()
            .enumerate()
            .map(|(i, r)| self.grid.weight(i) * self.grid.tau() * r.iter().zip(&m1).map(|(u, m)| u * m).sum::<f64>())
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub cg_tol: f64,
    /// Iteration cap is `cg_max_iter_factor · √N_v`.
    pub cg_max_iter_factor: f64,
    pub preconditioner: PreconditionerKind,
    pub time_transform: TimeTransform,
    /// Relative size of the incompatible part of the data above which the
    /// solve fails.
    pub compat_tol: f64,
    /// Relative size above which the incompatible part is logged.
    pub compat_warn: f64,
    /// The preconditioner is rebuilt when `λ_j / λ_ref` exceeds this ratio.
    pub rebuild_ratio: f64,
    pub quadrature: QuadratureKind,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            cg_tol: 1e-10,
            cg_max_iter_factor: 10.0,
            preconditioner: PreconditionerKind::Ic0,
            time_transform: TimeTransform::Analytic,
            compat_tol: 1e-2,
            compat_warn: 1e-8,
            rebuild_ratio: 1e3,
            quadrature: QuadratureKind::Degree4,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveStats {
    /// CG iterations per time mode.
    pub iterations: Vec<usize>,
    pub max_relative_residual: f64,
    /// `1ᵀF̂_0` removed from the constant-mode load.
    pub incompatibility: f64,
    /// `|1ᵀF̂_0| / ‖F̂_0‖₁`.
    pub relative_incompatibility: f64,
    /// The solved system uses `Fⁱ - load_shift · M·1` for every `i`.
    pub load_shift: f64,
    pub preconditioner_builds: usize,
    pub iteration_cap: usize,
}

impl SolveStats {
    pub fn max_iterations(&self) -> usize {
        self.iterations.iter().copied().max().unwrap_or(0)
    }

    pub fn mean_iterations(&self) -> f64 {
        if self.iterations.is_empty() {
            0.0
        } else {
            self.iterations.iter().sum::<usize>() as f64 / self.iterations.len() as f64
        }
    }
}

/// Stiffness and mass matrices of one mesh.
#[derive(Clone, Debug)]
pub struct SpatialOperators {
    pub stiffness: SparseMatrix,
    pub mass: SparseMatrix,
}

impl SpatialOperators {
    pub fn new(mesh: &SurfaceMesh) -> Result<Self> {
        Ok(Self {
            stiffness: assemble_stiffness(mesh)?,
            mass: assemble_mass(mesh)?,
        })
    }
}

/// Load slices `Fⁱ` for `f(t_i) + bⁱ`, one row per time node.
pub fn space_time_load(mesh: &SurfaceMesh, quad: &LiftedQuadrature, grid: &TimeGrid, data: &dyn NeumannData) -> Result<Vec<Vec<f64>>> {
    let k = quad.points_per_triangle();
    let nt = mesh.n_triangles();
    let points: Vec<Vec3> = (0..nt).flat_map(|t| quad.triangle(t).iter().map(|p| p.surface_point)).collect();
    let mu0: Vec<f64> = points.par_iter().map(|x| data.mu0(x)).collect();
    let mu1: Vec<f64> = points.par_iter().map(|x| data.mu1(x)).collect();
    debug_assert_eq!(points.len(), k * nt);
    (0..grid.n_nodes())
        .map(|i| {
            let t = grid.node(i);
            let c = boundary_coefficient(grid, i);
            let values: Vec<f64> = points
                .par_iter()
                .enumerate()
                .map(|(q, x)| {
                    let b = if i == 0 {
                        c * mu0[q]
                    } else if i == grid.intervals() {
                        c * mu1[q]
                    } else {
                        0.0
                    };
                    data.source(t, x) + b
                })
                .collect();
            if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite data at time node {i}, point {bad}")));
            }
            assemble_load_values(mesh, quad, &values)
        })
        .collect()
}

/// Assembles and solves the problem on `mesh`.
pub fn solve(
    mesh: &SurfaceMesh,
    surf: &dyn ImplicitSurface,
    grid: &TimeGrid,
    data: &dyn NeumannData,
    options: &SolverOptions,
) -> Result<(SpaceTimeField, SolveStats)> {
    let ops = SpatialOperators::new(mesh)?;
    let quad = LiftedQuadrature::new(mesh, surf, &options.quadrature.rule())?;
    let loads = space_time_load(mesh, &quad, grid, data)?;
    solve_system(&ops, grid, &loads, options)
}

/// Solves `M (A U)_i + K uⁱ = Fⁱ` for given load rows, normalized to zero
/// discrete space-time mean.
pub fn solve_system(ops: &SpatialOperators, grid: &TimeGrid, loads: &[Vec<f64>], options: &SolverOptions) -> Result<(SpaceTimeField, SolveStats)> {
    let nv = ops.mass.dim();
    if loads.len() != grid.n_nodes() {
        return Err(Error::LengthMismatch {
            expected: grid.n_nodes(),
            found: loads.len(),
        });
    }
    if let Some(bad) = loads.iter().find(|r| r.len() != nv) {
        return Err(Error::LengthMismatch { expected: nv, found: bad.len() });
    }
    let basis = TimeEigenBasis::new(grid, options.time_transform);
    let mut modes = basis.forward(loads);
    let mut stats = SolveStats {
        iteration_cap: (options.cg_max_iter_factor * (nv as f64).sqrt()).ceil() as usize,
        ..Default::default()
    };

    // constant mode: remove the incompatible part along M·1
    let m1 = ops.mass.mul_vec(&vec![1.0; nv]);
    let area: f64 = m1.iter().sum();
    let delta: f64 = modes[0].iter().sum();
    let l1: f64 = modes[0].iter().map(|v| v.abs()).sum();
    let relative = if l1 > 0.0 { delta.abs() / l1 } else { 0.0 };
    stats.incompatibility = delta;
    stats.relative_incompatibility = relative;
    if relative > options.compat_tol {
        return Err(Error::IncompatibleData { magnitude: delta, relative });
    }
    if relative > options.compat_warn {
        warn!("incompatible data: removing {delta:.3e} (relative {relative:.3e}) from the constant time mode");
    }
    stats.load_shift = delta / area;
    for (f, m) in modes[0].iter_mut().zip(&m1) {
        *f -= stats.load_shift * m;
    }

    let references = preconditioner_references(&basis.eigenvalues, options.rebuild_ratio);
    let mut refs: Vec<f64> = references.clone();
    refs.dedup();
    let preconditioners: Vec<(f64, Preconditioner)> = refs
        .iter()
        .map(|&lambda| {
            let shifted = ops.stiffness.linear_combination(1.0, &ops.mass, lambda)?;
            Ok((lambda, Preconditioner::new(options.preconditioner, &shifted)))
        })
        .collect::<Result<_>>()?;
    stats.preconditioner_builds = preconditioners.len();
    debug!("{} preconditioner(s) for {} modes", preconditioners.len(), basis.n_modes());

    let cap = stats.iteration_cap;
    let solved: Vec<CgOutcome> = (0..basis.n_modes())
        .into_par_iter()
        .map(|j| {
            let lambda = basis.eigenvalues[j];
            let pc = &preconditioners.iter().find(|(l, _)| *l == references[j]).expect("reference built").1;
            let outcome = if j == 0 {
                pcg(&ops.stiffness, pc, &modes[0], options.cg_tol, cap, true)
            } else {
                let a = ops.stiffness.linear_combination(1.0, &ops.mass, lambda)?;
                pcg(&a, pc, &modes[j], options.cg_tol, cap, false)
            };
            outcome.map_err(|e| match e {
                Error::NonConvergence { iterations, residual } => Error::SolverDivergence {
                    mode: j,
                    iterations,
                    residual,
                },
                other => other,
            })
        })
        .collect::<Result<_>>()?;

    stats.iterations = solved.iter().map(|o| o.iterations).collect();
    stats.max_relative_residual = solved.iter().map(|o| o.relative_residual).fold(0.0, f64::max);
    modes = solved.into_iter().map(|o| o.x).collect();

    // only the constant mode carries mean: shift it so that 1ᵀ M z_0 = 0
    let mean0: f64 = modes[0].iter().zip(&m1).map(|(z, m)| z * m).sum::<f64>() / area;
    modes[0].iter_mut().for_each(|z| *z -= mean0);

    let rows = basis.inverse(&modes);
    Ok((SpaceTimeField::from_rows(*grid, &rows)?, stats))
}

/// Relative residual of equation row `(i, a)`: `|M(AU)_i + K uⁱ - Fⁱ + s M·1|_a`
/// over `max_a |Fⁱ_a|`, where `s` is the load shift applied by the solve.
pub fn equation_residual(ops: &SpatialOperators, field: &SpaceTimeField, loads: &[Vec<f64>], load_shift: f64, i: usize, a: usize) -> f64 {
    let grid = field.grid();
    let trace = field.trace_window(i);
    let tau2 = grid.tau() * grid.tau();
    let n = grid.intervals();
    // (A U)_i = -(D_tt U)_i
    let au: Vec<f64> = if i == 0 {
        trace[0].iter().zip(trace[1]).map(|(u0, u1)| 2.0 * (u0 - u1) / tau2).collect()
    } else if i == n {
        trace[1].iter().zip(trace[0]).map(|(un, um)| 2.0 * (un - um) / tau2).collect()
    } else {
        trace[0].iter().zip(trace[1]).zip(trace[2]).map(|((um, u), up)| (2.0 * u - um - up) / tau2).collect()
    };
    let row = |m: &SparseMatrix, x: &[f64]| {
        let (cols, vals) = m.row(a);
        cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum::<f64>()
    };
    let m1: f64 = ops.mass.row(a).1.iter().sum();
    let lhs = row(&ops.mass, &au) + row(&ops.stiffness, field.row(i));
    let rhs = loads[i][a] - load_shift * m1;
    let scale = loads[i].iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    (lhs - rhs).abs() / scale
}

/// Reference shift used to build the preconditioner for each mode. The
/// constant mode shares the first nonzero mode's preconditioner.
fn preconditioner_references(eigenvalues: &[f64], ratio: f64) -> Vec<f64> {
    let mut refs = vec![0.0; eigenvalues.len()];
    let mut current = eigenvalues.get(1).copied().unwrap_or(1.0);
    for (j, &l) in eigenvalues.iter().enumerate().skip(1) {
        if l / current > ratio {
            current = l;
        }
        refs[j] = current;
    }
    refs[0] = refs.get(1).copied().unwrap_or(current);
    refs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preconditioner_reference_schedule() {
        let l = [0.0, 1.0, 10.0, 999.0, 1001.0, 5e5, 2e6];
        assert_eq!(preconditioner_references(&l, 1e3), vec![1.0, 1.0, 1.0, 1.0, 1001.0, 1001.0, 2e6]);
    }

    #[test]
    fn field_layout() {
        let g = TimeGrid::new(2).unwrap();
        let f = SpaceTimeField::from_rows(g, &[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(f.row(1), &[3.0, 4.0]);
        assert_eq!(f.trace(1), vec![2.0, 4.0, 6.0]);
        assert!(SpaceTimeField::from_rows(g, &[vec![1.0]]).is_err());
    }
}
