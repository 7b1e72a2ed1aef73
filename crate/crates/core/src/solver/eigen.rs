use nalgebra::{DMatrix, DVector};

use crate::timedisc::{time_operator, TimeGrid};

/// Eigen-decomposition `A vʲ = λ_j vʲ` of the time operator `A = -D_tt`,
/// with `W`-orthogonal eigenvectors and `c_j = (vʲ)ᵀ W vʲ`. Mode 0 is the
/// constant mode with `λ_0 = 0`.
#[derive(Clone, Debug)]
pub struct TimeEigenBasis {
    pub eigenvalues: Vec<f64>,
    /// Column `j` is `vʲ`.
    pub vectors: DMatrix<f64>,
    pub norms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TimeTransform {
    /// Closed-form cosine basis.
    #[default]
    Analytic,
    /// Numerical symmetric eigensolver; meant for cross-checking.
    DenseEig,
}

impl std::str::FromStr for TimeTransform {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "analytic" => Ok(Self::Analytic),
            "dense_eig" => Ok(Self::DenseEig),
            other => Err(crate::Error::InvalidArgument(format!("unknown time transform '{other}'"))),
        }
    }
}

impl TimeEigenBasis {
    pub fn new(grid: &TimeGrid, transform: TimeTransform) -> Self {
        match transform {
            TimeTransform::Analytic => time_eigenbasis(grid),
            TimeTransform::DenseEig => dense_time_eigenbasis(grid),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Coefficients `x̂_j = Σ_i w_i vʲ_i x_i / c_j` of rows `x_i`.
    pub fn forward(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let len = rows.first().map_or(0, Vec::len);
        (0..self.n_modes())
            .map(|j| {
                let mut out = vec![0.0; len];
                for (i, row) in rows.iter().enumerate() {
                    let c = self.weights[i] * self.vectors[(i, j)] / self.norms[j];
                    for (o, r) in out.iter_mut().zip(row) {
                        *o += c * r;
                    }
                }
                out
            })
            .collect()
    }

    /// Rows `x_i = Σ_j vʲ_i x̂_j`.
    pub fn inverse(&self, modes: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let len = modes.first().map_or(0, Vec::len);
        (0..self.vectors.nrows())
            .map(|i| {
                let mut out = vec![0.0; len];
                for (j, m) in modes.iter().enumerate() {
                    let c = self.vectors[(i, j)];
                    for (o, v) in out.iter_mut().zip(m) {
                        *o += c * v;
                    }
                }
                out
            })
            .collect()
    }

    /// `max_j ‖A vʲ - λ_j vʲ‖_∞`.
    pub fn eigen_residual(&self, grid: &TimeGrid) -> f64 {
        let a = time_operator(grid);
        (0..self.n_modes())
            .map(|j| {
                let v = self.vectors.column(j);
                (&a * v - v * self.eigenvalues[j]).amax()
            })
            .fold(0.0, f64::max)
    }

    /// `max_{j≠k} |(vʲ)ᵀ W vᵏ| / √(c_j c_k)`.
    pub fn orthogonality_defect(&self) -> f64 {
        let w = DMatrix::from_diagonal(&DVector::from_vec(self.weights.clone()));
        let g = self.vectors.transpose() * w * &self.vectors;
        let mut worst = 0.0f64;
        for j in 0..self.n_modes() {
            for k in 0..self.n_modes() {
                if j != k {
                    worst = worst.max(g[(j, k)].abs() / (self.norms[j] * self.norms[k]).sqrt());
                }
            }
        }
        worst
    }
}

/// Cosine basis: `λ_j = 2(1 - cos(jπ/N))/τ²`, `vʲ_i = cos(jπi/N)`.
pub fn time_eigenbasis(grid: &TimeGrid) -> TimeEigenBasis {
    let n = grid.intervals();
    let tau = grid.tau();
    let pi = std::f64::consts::PI;
    let eigenvalues = (0..=n).map(|j| 2.0 * (1.0 - (j as f64 * pi / n as f64).cos()) / (tau * tau)).collect();
    // exact values at the symmetric points keep modes 0 and N free of roundoff
    let vectors = DMatrix::from_fn(n + 1, n + 1, |i, j| {
        let k = (i * j) % (2 * n);
        if k == 0 {
            1.0
        } else if k == n {
            -1.0
        } else if 2 * k == n || 2 * k == 3 * n {
            0.0
        } else {
            (pi * k as f64 / n as f64).cos()
        }
    });
    let norms = (0..=n).map(|j| if j == 0 || j == n { n as f64 } else { n as f64 / 2.0 }).collect();
    TimeEigenBasis {
        eigenvalues,
        vectors,
        norms,
        weights: grid.weights(),
    }
}

/// Numerical basis from the symmetric matrix `W^{1/2} A W^{-1/2}`.
pub fn dense_time_eigenbasis(grid: &TimeGrid) -> TimeEigenBasis {
    let n = grid.intervals();
    let w = grid.weights();
    let a = time_operator(grid);
    let sym = DMatrix::from_fn(n + 1, n + 1, |i, j| w[i].sqrt() * a[(i, j)] / w[j].sqrt());
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..=n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let lmax = eig.eigenvalues.amax();
    let mut eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    if eigenvalues[0].abs() <= 1e-10 * lmax {
        eigenvalues[0] = 0.0;
    }
    let mut vectors = DMatrix::from_fn(n + 1, n + 1, |i, j| eig.eigenvectors[(i, order[j])] / w[i].sqrt());
    // normalize so that the constant mode is exactly ones
    let scale = vectors[(0, 0)];
    for i in 0..=n {
        vectors[(i, 0)] = if (vectors[(i, 0)] / scale - 1.0).abs() < 1e-8 { 1.0 } else { vectors[(i, 0)] / scale };
    }
    let norms = (0..=n)
        .map(|j| (0..=n).map(|i| w[i] * vectors[(i, j)] * vectors[(i, j)]).sum())
        .collect();
    TimeEigenBasis {
        eigenvalues,
        vectors,
        norms,
        weights: w,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_interval_basis() {
        let g = TimeGrid::new(2).unwrap();
        let b = time_eigenbasis(&g);
        assert_relative_eq!(b.eigenvalues.as_slice(), [0.0, 8.0, 16.0].as_slice(), epsilon = 1e-12);
        assert_eq!(b.vectors.column(0).as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!(b.vectors.column(1).as_slice(), &[1.0, 0.0, -1.0]);
        assert_eq!(b.vectors.column(2).as_slice(), &[1.0, -1.0, 1.0]);
        assert_eq!(b.orthogonality_defect(), 0.0);
    }

    #[test]
    fn analytic_and_dense_agree() {
        for n in [2, 7, 64] {
            let g = TimeGrid::new(n).unwrap();
            let lmax = 4.0 / (g.tau() * g.tau());
            for b in [time_eigenbasis(&g), dense_time_eigenbasis(&g)] {
                assert!(b.eigen_residual(&g) <= 1e-9 * lmax, "n={n}");
                assert!(b.orthogonality_defect() <= 1e-9);
                assert_eq!(b.eigenvalues[0], 0.0);
                assert!(b.vectors.column(0).iter().all(|&v| v == 1.0));
            }
            let a = time_eigenbasis(&g);
            let d = dense_time_eigenbasis(&g);
            for (x, y) in a.eigenvalues.iter().zip(&d.eigenvalues) {
                assert!((x - y).abs() <= 1e-9 * lmax);
            }
        }
    }

    #[test]
    fn forward_inverse_round_trip() {
        let g = TimeGrid::new(9).unwrap();
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64 * 0.1, 1.0]).collect();
        for b in [time_eigenbasis(&g), dense_time_eigenbasis(&g)] {
            let back = b.inverse(&b.forward(&rows));
            for (r, s) in rows.iter().zip(&back) {
                for (x, y) in r.iter().zip(s) {
                    assert_relative_eq!(x, y, epsilon = 1e-11);
                }
            }
        }
    }
}
