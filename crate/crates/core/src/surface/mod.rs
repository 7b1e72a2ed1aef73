//! Exact and discrete surfaces: implicit level sets with closest-point
//! projection, triangle meshes, refinement, OFF I/O and quality diagnostics.

mod diagnostics;
mod generators;
mod implicit;
mod mesh;
pub mod off;
mod refine;

pub use diagnostics::{diagnostics, diagnostics_with, MeshDiagnostics};
pub use generators::{make_icosphere, make_planar_grid, make_torus_mesh, torus_point};
pub use implicit::{first_order_step, project_point, project_point_with, ImplicitSurface, Projection, ProjectionOptions};
pub use mesh::SurfaceMesh;
pub use refine::{refine_project, ProjectionOrder};
