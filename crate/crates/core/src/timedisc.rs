//! Uniform time grid on `[0, 1]` and the ghost-point second difference.
//!
//! The Neumann data enter through a ghost value `u⁻¹ = u¹ - 2τμ₀` (and its
//! mirror at `t = 1`), which turns the boundary rows of the second difference
//! into `2(u¹ - u⁰)/τ²` plus a correction `b⁰ = -2μ₀/τ`, `bᴺ = 2μ₁/τ` on the
//! right-hand side.

use nalgebra::DMatrix;

use crate::metric::{LiftedQuadrature, QuadratureRule};
use crate::surface::{ImplicitSurface, SurfaceMesh};
use crate::{Error, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    n: usize,
}

impl TimeGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("time grid needs at least one interval".into()));
        }
        Ok(Self { n })
    }

    /// Number of intervals.
    pub fn intervals(&self) -> usize {
        self.n
    }

    pub fn n_nodes(&self) -> usize {
        self.n + 1
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }

    /// Trapezoid weights (without the factor τ).
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n {
            0.5
        } else {
            1.0
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.weight(i)).collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n + 1 {
            return Err(Error::LengthMismatch {
                expected: self.n + 1,
                found: len,
            });
        }
        Ok(())
    }
}

/// Dense matrix `A = -D_tt`.
pub fn time_operator(grid: &TimeGrid) -> DMatrix<f64> {
    let n = grid.intervals();
    let s = 1.0 / (grid.tau() * grid.tau());
    let mut a = DMatrix::zeros(n + 1, n + 1);
    a[(0, 0)] = 2.0 * s;
    a[(0, 1)] = -2.0 * s;
    a[(n, n)] = 2.0 * s;
    a[(n, n - 1)] = -2.0 * s;
    for i in 1..n {
        a[(i, i - 1)] = -s;
        a[(i, i)] = 2.0 * s;
        a[(i, i + 1)] = -s;
    }
    a
}

/// Second difference with ghost-point boundary rows.
pub fn dtt_apply(grid: &TimeGrid, seq: &[f64]) -> Result<Vec<f64>> {
    grid.check_len(seq.len())?;
    let n = grid.intervals();
    let s = 1.0 / (grid.tau() * grid.tau());
    Ok((0..=n)
        .map(|i| {
            if i == 0 {
                2.0 * (seq[1] - seq[0]) * s
            } else if i == n {
                2.0 * (seq[n - 1] - seq[n]) * s
            } else {
                (seq[i + 1] - 2.0 * seq[i] + seq[i - 1]) * s
            }
        })
        .collect())
}

/// Backward difference `D_t α^i = (α^i - α^{i-1})/τ` for `i = 1..=N`.
pub fn dt_apply(grid: &TimeGrid, seq: &[f64]) -> Result<Vec<f64>> {
    grid.check_len(seq.len())?;
    Ok(seq.windows(2).map(|w| (w[1] - w[0]) / grid.tau()).collect())
}

/// Coefficient `c` such that the correction at node `i` is `c·μ₀` (`i = 0`),
/// `c·μ₁` (`i = N`) and zero in between.
pub fn boundary_coefficient(grid: &TimeGrid, i: usize) -> f64 {
    if i == 0 {
        -2.0 / grid.tau()
    } else if i == grid.intervals() {
        2.0 / grid.tau()
    } else {
        0.0
    }
}

/// Boundary correction `bⁱ` at `x`.
pub fn boundary_correction(grid: &TimeGrid, mu0: impl Fn(&Vec3) -> f64, mu1: impl Fn(&Vec3) -> f64, i: usize, x: &Vec3) -> f64 {
    let c = boundary_coefficient(grid, i);
    if i == 0 {
        c * mu0(x)
    } else if i == grid.intervals() {
        c * mu1(x)
    } else {
        0.0
    }
}

/// `|Σ w_i (D_tt α^i, β^i) + Σ_{i≥1} (D_t α^i, D_t β^i)|` with the inner
/// product given by `gram`. `alpha` and `beta` are `(N+1) × k`.
pub fn summation_by_parts_check(grid: &TimeGrid, alpha: &DMatrix<f64>, beta: &DMatrix<f64>, gram: &DMatrix<f64>) -> Result<f64> {
    grid.check_len(alpha.nrows())?;
    grid.check_len(beta.nrows())?;
    let k = gram.nrows();
    if alpha.ncols() != k || beta.ncols() != k || gram.ncols() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            found: alpha.ncols().max(beta.ncols()),
        });
    }
    let n = grid.intervals();
    let tau = grid.tau();
    let inner = |x: &nalgebra::RowDVector<f64>, y: &nalgebra::RowDVector<f64>| (x * gram * y.transpose())[(0, 0)];
    let mut dtt = alpha.clone();
    for c in 0..k {
        let col: Vec<f64> = alpha.column(c).iter().copied().collect();
        for (i, v) in dtt_apply(grid, &col)?.into_iter().enumerate() {
            dtt[(i, c)] = v;
        }
    }
    let lhs: f64 = (0..=n).map(|i| grid.weight(i) * inner(&dtt.row(i).into_owned(), &beta.row(i).into_owned())).sum();
    let rhs: f64 = (1..=n)
        .map(|i| {
            let da = (alpha.row(i) - alpha.row(i - 1)) / tau;
            let db = (beta.row(i) - beta.row(i - 1)) / tau;
            inner(&da, &db)
        })
        .sum();
    Ok((lhs + rhs).abs())
}

/// `|∫_T∫_{M_h} f∘π - ∫_{M_h} (μ₀ - μ₁)∘π|` with trapezoid weights in time
/// and degree-4 quadrature in space.
pub fn compatibility_residual(
    grid: &TimeGrid,
    mesh: &SurfaceMesh,
    surf: &dyn ImplicitSurface,
    f: impl Fn(f64, &Vec3) -> f64,
    mu0: impl Fn(&Vec3) -> f64,
    mu1: impl Fn(&Vec3) -> f64,
) -> Result<f64> {
    let quad = LiftedQuadrature::new(mesh, surf, &QuadratureRule::degree4())?;
    Ok(compatibility_residual_with(grid, &quad, f, mu0, mu1))
}

pub fn compatibility_residual_with(
    grid: &TimeGrid,
    quad: &LiftedQuadrature,
    f: impl Fn(f64, &Vec3) -> f64,
    mu0: impl Fn(&Vec3) -> f64,
    mu1: impl Fn(&Vec3) -> f64,
) -> f64 {
    let source: f64 = (0..grid.n_nodes())
        .map(|i| {
            let t = grid.node(i);
            grid.weight(i) * grid.tau() * quad.integrate(|p| f(t, &p.surface_point))
        })
        .sum();
    let flux = quad.integrate(|p| mu0(&p.surface_point) - mu1(&p.surface_point));
    (source - flux).abs()
}
