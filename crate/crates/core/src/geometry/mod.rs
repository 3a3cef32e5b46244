//! Cross-sections, caverns and the structured meshes of the cross-section,
//! the periodicity cell and the truncated half-space.

mod cell_mesh;
mod cross_section_mesh;
mod grid;
mod halfspace_mesh;
mod mesh;
mod shapes;

pub use cell_mesh::{build_cell_mesh, build_filled_cell_mesh};
pub use cross_section_mesh::build_cross_section_mesh;
pub use halfspace_mesh::{build_fullspace_mesh, build_halfspace_mesh, MIN_TRUNCATION_RATIO};
pub use mesh::{BoundaryTag, ElementKind, Mesh, MESH_FORMAT_VERSION};
pub use shapes::{BoundaryFrame, CavernShape, CavernSpec, CrossSectionKind, CrossSectionShape, H_MAX};
