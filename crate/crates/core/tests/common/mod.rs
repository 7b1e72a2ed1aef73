#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stlb::benchmarks::{BenchmarkName, BenchmarkProblem, Torus};
use stlb::solver::NeumannData;
use stlb::surface::SurfaceMesh;
use stlb::Vec3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn torus() -> Torus {
    Torus::new(4.0, 1.0)
}

/// Structured torus mesh of the benchmark ladder (200 · 4^level vertices).
pub fn torus_mesh(level: usize) -> SurfaceMesh {
    BenchmarkProblem::new(BenchmarkName::Torus).mesh(level).unwrap()
}

/// Random smooth space-time data: low-degree polynomials in `x` times
/// `1, t, cos(πt)`, with independent random Neumann traces. Generally
/// incompatible.
#[derive(Clone, Debug)]
pub struct SmoothData {
    source: [[f64; 4]; 3],
    mu0: [f64; 4],
    mu1: [f64; 4],
}

fn poly(c: &[f64; 4], x: &Vec3) -> f64 {
    c[0] + c[1] * x.x + c[2] * x.y * x.z + c[3] * (0.5 * x.x).sin() * x.z
}

impl SmoothData {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut c = || -> [f64; 4] { std::array::from_fn(|_| rng.gen_range(-1.0..1.0)) };
        Self {
            source: [c(), c(), c()],
            mu0: c(),
            mu1: c(),
        }
    }
}

impl NeumannData for SmoothData {
    fn source(&self, t: f64, x: &Vec3) -> f64 {
        poly(&self.source[0], x) + t * poly(&self.source[1], x) + (std::f64::consts::PI * t).cos() * poly(&self.source[2], x)
    }

    fn mu0(&self, x: &Vec3) -> f64 {
        poly(&self.mu0, x)
    }

    fn mu1(&self, x: &Vec3) -> f64 {
        poly(&self.mu1, x)
    }
}

/// Random point on the torus `R = 4, r = 1`.
pub fn torus_point(rng: &mut impl Rng) -> Vec3 {
    let (theta, psi) = (rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.0..std::f64::consts::TAU));
    stlb::surface::torus_point(theta, psi, 4.0, 1.0)
}
