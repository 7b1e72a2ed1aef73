mod common;

use rand::Rng;

use stlb::benchmarks::{BenchmarkName, BenchmarkProblem, ModulatedEllipsoid, ShearedSphere};
use stlb::surface::{project_point_with, ImplicitSurface, ProjectionOptions};
use stlb::Vec3;

use common::rng;

fn random_unit(r: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_surface_point(name: BenchmarkName, r: &mut impl Rng) -> Vec3 {
    match name {
        BenchmarkName::Torus => common::torus_point(r),
        BenchmarkName::Ex2 => ModulatedEllipsoid::from_sphere(&random_unit(r)),
        BenchmarkName::Ex3 => ShearedSphere::from_sphere(&random_unit(r)),
    }
}

/// Surface Laplacian as the ambient Laplacian of the closest-point
/// extension, by a 7-point central difference.
fn central_laplacian(surf: &dyn ImplicitSurface, u: impl Fn(&Vec3) -> f64, x: &Vec3, h: f64) -> f64 {
    let opts = ProjectionOptions {
        angle_tol: 1e-14,
        level_tol: 1e-15,
        ..ProjectionOptions::default()
    };
    let ext = |p: Vec3| u(&project_point_with(surf, &p, &opts).unwrap().point);
    let center = ext(*x);
    (0..3)
        .map(|k| {
            let mut e = Vec3::zeros();
            e[k] = h;
            ext(x + e) - 2.0 * center + ext(x - e)
        })
        .sum::<f64>()
        / (h * h)
}

/// Richardson extrapolation of steps `h` and `h/2`; plain central
/// differences lose accuracy on the thin rim of the modulated ellipsoid.
fn fd_surface_laplacian(surf: &dyn ImplicitSurface, u: impl Fn(&Vec3) -> f64, x: &Vec3, h: f64) -> f64 {
    (4.0 * central_laplacian(surf, &u, x, 0.5 * h) - central_laplacian(surf, &u, x, h)) / 3.0
}

#[test]
fn benchmark_data_satisfy_the_equation() {
    let mut r = rng(17);
    for name in [BenchmarkName::Torus, BenchmarkName::Ex2, BenchmarkName::Ex3] {
        let p = BenchmarkProblem::new(name);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let x = random_surface_point(name, &mut r);
            assert!(p.surface().phi(&x).abs() < 1e-12);
            let t = r.gen_range(0.0..1.0);
            let lap = fd_surface_laplacian(p.surface(), |y| p.exact_u(t, y), &x, 1e-3);
            let res = p.try_source(t, &x).unwrap() + p.exact_dtt_u(t, &x) + lap;
            worst = worst.max(res.abs());
        }
        assert!(worst <= 1e-5, "{name}: {worst:e}");
    }
}

#[test]
fn neumann_traces_are_time_derivatives() {
    let mut r = rng(4);
    for name in [BenchmarkName::Torus, BenchmarkName::Ex2, BenchmarkName::Ex3] {
        let p = BenchmarkProblem::new(name);
        for _ in 0..100 {
            let x = random_surface_point(name, &mut r);
            assert!((p.mu0(&x) - p.exact_dt_u(0.0, &x)).abs() < 1e-14);
            assert!((p.mu1(&x) - p.exact_dt_u(1.0, &x)).abs() < 1e-12);
        }
    }
}

/// Chart form `Δu = u_θθ/ρ² + u_ψψ/r² - sin ψ u_ψ/(rρ)`, `ρ = R + r cos ψ`,
/// for `u = x₁x₂ = ½ρ² sin 2θ`.
#[test]
fn torus_laplacian_matches_chart_formula() {
    let (big, small) = (4.0, 1.0);
    let p = BenchmarkProblem::new(BenchmarkName::Torus);
    let mut r = rng(8);
    for _ in 0..100 {
        let (theta, psi) = (r.gen_range(0.0..std::f64::consts::TAU), r.gen_range(0.0..std::f64::consts::TAU));
        let rho = big + small * psi.cos();
        let s2 = (2.0 * theta).sin();
        let u_tt = -2.0 * rho * rho * s2;
        let u_p = -small * rho * psi.sin() * s2;
        let u_pp = -small * s2 * (rho * psi.cos() - small * psi.sin().powi(2));
        let chart = u_tt / (rho * rho) + u_pp / (small * small) - psi.sin() * u_p / (small * rho);
        let x = stlb::surface::torus_point(theta, psi, big, small);
        let level_set = p.laplacian_x1x2(&x).unwrap();
        assert!((chart - level_set).abs() <= 1e-10 * (1.0 + chart.abs()));
    }
}


