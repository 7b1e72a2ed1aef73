//! P1 assembly of stiffness, mass and load on a surface triangulation.

use std::io::Write;

use rayon::prelude::*;

use crate::metric::{element_geometries, LiftedQuadrature, REFERENCE_GRADIENTS};
use crate::surface::SurfaceMesh;
use crate::{Error, Result};

/// Square matrix in compressed sparse row form with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from triplets; duplicates are summed in input order after a
    /// stable sort by `(row, col)`, so the result depends only on the input order.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, cols, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        });
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `a·self + b·other`; both matrices must share the sparsity pattern.
    pub fn linear_combination(&self, a: f64, other: &SparseMatrix, b: f64) -> Result<SparseMatrix> {
        if self.row_ptr != other.row_ptr || self.cols != other.cols {
            return Err(Error::InvalidArgument("sparsity patterns differ".into()));
        }
        Ok(Self {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// Lower triangle in Matrix Market symmetric coordinate format.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        let lower: Vec<(usize, usize, f64)> = (0..self.n)
            .flat_map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).filter(|(&j, _)| j <= i).map(move |(&j, &v)| (i, j, v)).collect::<Vec<_>>()
            })
            .collect();
        writeln!(w, "{} {} {}", self.n, self.n, lower.len())?;
        for (i, j, v) in lower {
            writeln!(w, "{} {} {:?}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

fn assemble_blocks(mesh: &SurfaceMesh, blocks: Vec<[[f64; 3]; 3]>) -> SparseMatrix {
    let triplets = blocks
        .iter()
        .enumerate()
        .flat_map(|(t, block)| {
            let tri = mesh.triangle(t);
            (0..3).flat_map(move |a| (0..3).map(move |b| (tri[a], tri[b], block[a][b])))
        })
        .collect();
    SparseMatrix::from_triplets(mesh.n_vertices(), triplets)
}

/// Stiffness matrix `K_ab = Σ_T (∇̂λ_a)ᵀ g_h⁻¹ ∇̂λ_b √|g_h| / 2`.
pub fn assemble_stiffness(mesh: &SurfaceMesh) -> Result<SparseMatrix> {
    let geoms = element_geometries(mesh)?;
    let blocks = geoms
        .par_iter()
        .map(|g| {
            let mut block = [[0.0; 3]; 3];
            for (a, ga) in REFERENCE_GRADIENTS.iter().enumerate() {
                let ga = nalgebra::Vector2::new(ga[0], ga[1]);
                for (b, gb) in REFERENCE_GRADIENTS.iter().enumerate() {
                    let gb = nalgebra::Vector2::new(gb[0], gb[1]);
                    block[a][b] = ga.dot(&(g.metric_inv * gb)) * g.area();
                }
            }
            block
        })
        .collect();
    Ok(assemble_blocks(mesh, blocks))
}

/// Consistent P1 mass matrix, block `area/12 · (1 + δ_ab)`.
pub fn assemble_mass(mesh: &SurfaceMesh) -> Result<SparseMatrix> {
    let geoms = element_geometries(mesh)?;
    let blocks = geoms
        .par_iter()
        .map(|g| {
            let c = g.area() / 12.0;
            let mut block = [[c; 3]; 3];
            for (a, row) in block.iter_mut().enumerate() {
                row[a] = 2.0 * c;
            }
            block
        })
        .collect();
    Ok(assemble_blocks(mesh, blocks))
}

/// Load vector `F_a = ∫_{M_h} (f∘π) λ_a dσ_{g_h}` given `f` at the lifted
/// quadrature points, laid out triangle by triangle.
pub fn assemble_load_values(mesh: &SurfaceMesh, quad: &LiftedQuadrature, values: &[f64]) -> Result<Vec<f64>> {
    let k = quad.points_per_triangle();
    if values.len() != k * mesh.n_triangles() {
        return Err(Error::LengthMismatch {
            expected: k * mesh.n_triangles(),
            found: values.len(),
        });
    }
    let mut f = vec![0.0; mesh.n_vertices()];
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangle(t);
        for (p, v) in quad.triangle(t).iter().zip(&values[t * k..(t + 1) * k]) {
            for a in 0..3 {
                f[tri[a]] += p.weight * p.bary[a] * v;
            }
        }
    }
    Ok(f)
}

/// Load vector for a field given on the exact surface.
pub fn assemble_load(mesh: &SurfaceMesh, quad: &LiftedQuadrature, f: impl Fn(&crate::Vec3) -> f64 + Sync) -> Result<Vec<f64>> {
    let values: Vec<f64> = (0..mesh.n_triangles())
        .into_par_iter()
        .flat_map_iter(|t| quad.triangle(t).iter().map(|p| f(&p.surface_point)).collect::<Vec<_>>())
        .collect();
    assemble_load_values(mesh, quad, &values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::Torus;
    use crate::metric::QuadratureRule;
    use crate::surface::make_torus_mesh;
    use crate::Vec3;
    use approx::assert_relative_eq;

    fn unit_triangle() -> SurfaceMesh {
        SurfaceMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn unit_triangle_stiffness_block() {
        let k = assemble_stiffness(&unit_triangle()).unwrap().to_dense();
        let expect = nalgebra::DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 1.0, 0.0, -1.0, 0.0, 1.0]) * 0.5;
        assert_relative_eq!(k, expect, epsilon = 1e-15);
    }

    #[test]
    fn unit_triangle_mass_block() {
        let m = assemble_mass(&unit_triangle()).unwrap().to_dense();
        let expect = nalgebra::DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 2.0]) / 24.0;
        assert_relative_eq!(m, expect, epsilon = 1e-15);
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = SparseMatrix::from_triplets(2, vec![(1, 0, 1.0), (0, 0, 2.0), (1, 0, 3.0), (0, 1, -1.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.mul_vec(&[1.0, 2.0]), vec![0.0, 4.0]);
    }

    #[test]
    fn torus_matrix_invariants() {
        let mesh = make_torus_mesh(12, 8, 4.0, 1.0).unwrap();
        let k = assemble_stiffness(&mesh).unwrap();
        let m = assemble_mass(&mesh).unwrap();
        assert!(k.asymmetry() <= 1e-12 * k.max_abs());
        assert!(m.asymmetry() <= 1e-12 * m.max_abs());
        let ones = vec![1.0; mesh.n_vertices()];
        assert!(k.mul_vec(&ones).iter().all(|r| r.abs() <= 1e-10));
        let total: f64 = m.mul_vec(&ones).iter().sum();
        assert_relative_eq!(total, mesh.total_area(), max_relative = 1e-10);
        // Gershgorin: diagonal of the mass matrix dominates its row
        for i in 0..mesh.n_vertices() {
            let (cols, vals) = m.row(i);
            let off: f64 = cols.iter().zip(vals).filter(|(&j, _)| j != i).map(|(_, v)| v.abs()).sum();
            assert!(m.get(i, i) - off > -1e-15 && m.get(i, i) > 0.0);
        }
    }

    #[test]
    fn stiffness_kernel_is_one_dimensional() {
        let mesh = make_torus_mesh(8, 6, 4.0, 1.0).unwrap();
        let k = assemble_stiffness(&mesh).unwrap().to_dense();
        let eig = nalgebra::SymmetricEigen::new(k);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-10);
        assert!(ev[1] > 1e-3, "second eigenvalue {}", ev[1]);
    }

    #[test]
    fn assembly_is_deterministic() {
        let mesh = make_torus_mesh(16, 8, 4.0, 1.0).unwrap();
        assert_eq!(assemble_stiffness(&mesh).unwrap(), assemble_stiffness(&mesh).unwrap());
        assert_eq!(assemble_mass(&mesh).unwrap(), assemble_mass(&mesh).unwrap());
    }

    #[test]
    fn load_examples() {
        let torus = Torus::new(4.0, 1.0);
        let mesh = make_torus_mesh(16, 8, 4.0, 1.0).unwrap();
        let quad = LiftedQuadrature::new(&mesh, &torus, &QuadratureRule::degree4()).unwrap();
        let m = assemble_mass(&mesh).unwrap();
        let ones = vec![1.0; mesh.n_vertices()];
        let f1 = assemble_load(&mesh, &quad, |_| 1.0).unwrap();
        for (a, b) in f1.iter().zip(m.mul_vec(&ones)) {
            assert_relative_eq!(*a, b, max_relative = 1e-12);
        }
        let tau = 0.1;
        let fb = assemble_load(&mesh, &quad, |p| 2.0 / tau * p.x * p.y).unwrap();
        let l1: f64 = fb.iter().map(|v| v.abs()).sum();
        assert!(fb.iter().sum::<f64>().abs() <= 1e-8 * l1);
        let fa = assemble_load(&mesh, &quad, |p| p.z).unwrap();
        let fsum = assemble_load(&mesh, &quad, |p| p.z + p.x * p.x).unwrap();
        let fc = assemble_load(&mesh, &quad, |p| p.x * p.x).unwrap();
        for i in 0..fa.len() {
            assert!((fa[i] + fc[i] - fsum[i]).abs() <= 1e-12 * (1.0 + fsum[i].abs()));
        }
    }

    #[test]
    fn matrix_market_header() {
        let mut buf = Vec::new();
        assemble_mass(&unit_triangle()).unwrap().write_matrix_market(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("%%MatrixMarket matrix coordinate real symmetric"));
        assert_eq!(lines.next(), Some("3 3 6"));
    }
}
