//! Preconditioned conjugate gradients on CSR matrices.
//!
//! Dot products are accumulated sequentially so results do not depend on
//! the thread count.

use crate::assembly::SparseMatrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PreconditionerKind {
    Jacobi,
    #[default]
    Ic0,
}

impl std::str::FromStr for PreconditionerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jacobi" => Ok(Self::Jacobi),
            "ic0" => Ok(Self::Ic0),
            other => Err(Error::InvalidArgument(format!("unknown preconditioner '{other}'"))),
        }
    }
}

/// Zero-fill incomplete Cholesky factor `L` with the pattern of `tril(A)`.
#[derive(Clone, Debug)]
pub struct IncompleteCholesky {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    /// Diagonal shift `α` used as `A + α diag(A)` to avoid breakdown.
    pub shift: f64,
}

impl IncompleteCholesky {
    pub fn new(a: &SparseMatrix) -> Self {
        let mut shift = 0.0;
        loop {
            if let Some(f) = Self::try_factor(a, shift) {
                return f;
            }
            shift = if shift == 0.0 { 1e-3 } else { 2.0 * shift };
        }
    }

    fn try_factor(a: &SparseMatrix, shift: f64) -> Option<Self> {
        let n = a.dim();
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            let (ac, av) = a.row(i);
            for (&j, &v) in ac.iter().zip(av) {
                if j <= i {
                    cols.push(j);
                    values.push(if j == i { v * (1.0 + shift) } else { v });
                }
            }
            row_ptr[i + 1] = cols.len();
        }
        for i in 0..n {
            let (start, end) = (row_ptr[i], row_ptr[i + 1]);
            if end == start || cols[end - 1] != i {
                return None;
            }
            for p in start..end {
                let k = cols[p];
                // Σ_{m<k} L[i,m] L[k,m] over the common pattern
                let (ks, ke) = (row_ptr[k], row_ptr[k + 1]);
                let (mut q, mut r) = (start, ks);
                let mut s = 0.0;
                while q < p && r < ke {
                    let (cq, cr) = (cols[q], cols[r]);
                    if cq >= k || cr >= k {
                        break;
                    }
                    match cq.cmp(&cr) {
                        std::cmp::Ordering::Less => q += 1,
                        std::cmp::Ordering::Greater => r += 1,
                        std::cmp::Ordering::Equal => {
                            s += values[q] * values[r];
                            q += 1;
                            r += 1;
                        }
                    }
                }
                if k == i {
                    let d = values[p] - s;
                    if !(d > 0.0) {
                        return None;
                    }
                    values[p] = d.sqrt();
                } else {
                    values[p] = (values[p] - s) / values[ke - 1];
                }
            }
        }
        Some(Self {
            row_ptr,
            cols,
            values,
            shift,
        })
    }

    /// Solves `L Lᵀ z = r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        for i in 0..n {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = r[i];
            for p in s..e - 1 {
                acc -= self.values[p] * z[self.cols[p]];
            }
            z[i] = acc / self.values[e - 1];
        }
        for i in (0..n).rev() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            z[i] /= self.values[e - 1];
            let zi = z[i];
            for p in s..e - 1 {
                z[self.cols[p]] -= self.values[p] * zi;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum Preconditioner {
    Jacobi(Vec<f64>),
    Ic0(IncompleteCholesky),
}

impl Preconditioner {
    pub fn new(kind: PreconditionerKind, a: &SparseMatrix) -> Self {
        match kind {
            PreconditionerKind::Jacobi => Self::Jacobi(a.diagonal().iter().map(|d| 1.0 / d).collect()),
            PreconditionerKind::Ic0 => Self::Ic0(IncompleteCholesky::new(a)),
        }
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Self::Jacobi(inv) => {
                for ((zi, ri), d) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * d;
                }
            }
            Self::Ic0(l) => l.apply(r, z),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `‖b - Ax‖ / ‖b‖`.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Preconditioned CG from a zero initial guess. With `deflate_constants`
/// the iteration runs on the complement of the constant vector, which makes
/// it usable for the singular stiffness matrix with a mean-free right-hand side.
pub fn pcg(a: &SparseMatrix, precond: &Preconditioner, b: &[f64], tol: f64, max_iter: usize, deflate_constants: bool) -> Result<CgOutcome> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: b.len() });
    }
    let mut r = b.to_vec();
    if deflate_constants {
        remove_mean(&mut r);
    }
    let b_norm = dot(&r, &r).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    if deflate_constants {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = 1.0;
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NonConvergence { iterations: it, residual: res });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = dot(&r, &r).sqrt() / b_norm;
        if res <= tol {
            if deflate_constants {
                remove_mean(&mut x);
            }
            return Ok(CgOutcome {
                x,
                iterations: it,
                relative_residual: res,
            });
        }
        precond.apply(&r, &mut z);
        if deflate_constants {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_mass, assemble_stiffness};
    use crate::surface::make_torus_mesh;

    fn check_solution(a: &SparseMatrix, x: &[f64], b: &[f64], tol: f64) {
        let ax = a.mul_vec(x);
        let err: f64 = ax.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err <= tol * bn, "residual {}", err / bn);
    }

    #[test]
    fn ic0_of_tridiagonal_is_exact() {
        // IC(0) on a tridiagonal SPD matrix is the full Cholesky factor
        let n = 6;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 4.0));
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
                trip.push((i + 1, i, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, trip);
        let l = IncompleteCholesky::new(&a);
        assert_eq!(l.shift, 0.0);
        let b: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
        let mut x = vec![0.0; n];
        l.apply(&b, &mut x);
        check_solution(&a, &x, &b, 1e-14);
    }

    #[test]
    fn shifted_system_converges_with_both_preconditioners() {
        let mesh = make_torus_mesh(20, 10, 4.0, 1.0).unwrap();
        let k = assemble_stiffness(&mesh).unwrap();
        let m = assemble_mass(&mesh).unwrap();
        let a = k.linear_combination(1.0, &m, 10.0).unwrap();
        let b: Vec<f64> = (0..mesh.n_vertices()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        for kind in [PreconditionerKind::Jacobi, PreconditionerKind::Ic0] {
            let pc = Preconditioner::new(kind, &a);
            let out = pcg(&a, &pc, &b, 1e-10, 1000, false).unwrap();
            check_solution(&a, &out.x, &b, 1e-9);
        }
    }

    #[test]
    fn deflated_cg_solves_singular_stiffness() {
        let mesh = make_torus_mesh(20, 10, 4.0, 1.0).unwrap();
        let k = assemble_stiffness(&mesh).unwrap();
        let m = assemble_mass(&mesh).unwrap();
        let shifted = k.linear_combination(1.0, &m, 1.0).unwrap();
        let mut b: Vec<f64> = mesh.vertices().iter().map(|v| v.x * v.y + v.z).collect();
        remove_mean(&mut b);
        for kind in [PreconditionerKind::Jacobi, PreconditionerKind::Ic0] {
            let pc = Preconditioner::new(kind, &shifted);
            let out = pcg(&k, &pc, &b, 1e-10, 2000, true).unwrap();
            check_solution(&k, &out.x, &b, 1e-9);
            assert!(out.x.iter().sum::<f64>().abs() < 1e-9);
        }
    }

    #[test]
    fn iteration_cap_is_reported() {
        let mesh = make_torus_mesh(20, 10, 4.0, 1.0).unwrap();
        let k = assemble_stiffness(&mesh).unwrap();
        let pc = Preconditioner::new(PreconditionerKind::Jacobi, &k);
        let mut b: Vec<f64> = mesh.vertices().iter().map(|v| v.x).collect();
        remove_mean(&mut b);
        assert!(matches!(pcg(&k, &pc, &b, 1e-14, 2, true), Err(Error::NonConvergence { iterations: 2, .. })));
    }
}
