//! Regenerates the built-in coarse meshes of the ex2/ex3 benchmarks:
//! a unit icosphere pushed onto each surface by its sphere map, then
//! snapped with the closest-point projection.
//!
//! cargo run -p stlb-core --example coarse_meshes -- crates/core/meshes

use std::path::PathBuf;

use stlb::benchmarks::{ModulatedEllipsoid, ShearedSphere};
use stlb::surface::{make_icosphere, off, project_point, ImplicitSurface, SurfaceMesh};
use stlb::Vec3;

fn mapped(frequency: usize, map: fn(&Vec3) -> Vec3, surf: &dyn ImplicitSurface) -> stlb::Result<SurfaceMesh> {
    let sphere = make_icosphere(frequency, 1.0)?;
    let vertices = sphere
        .vertices()
        .iter()
        .map(|y| project_point(surf, &map(y)))
        .collect::<stlb::Result<Vec<_>>>()?;
    Ok(SurfaceMesh::new(vertices, sphere.triangles().to_vec())?.orient_outward(surf))
}

fn main() -> stlb::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/core/meshes".into()));
    let ex2 = mapped(10, ModulatedEllipsoid::from_sphere, &ModulatedEllipsoid)?;
    let ex3 = mapped(5, ShearedSphere::from_sphere, &ShearedSphere)?;
    for (name, mesh) in [("ex2_coarse.off", ex2), ("ex3_coarse.off", ex3)] {
        println!("{name}: {} vertices, shape regularity {:.3}", mesh.n_vertices(), mesh.shape_regularity());
        off::write_off_file(&mesh, dir.join(name))?;
    }
    Ok(())
}
