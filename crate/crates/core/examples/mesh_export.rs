//! Writes the cross-section, cell and half-space meshes in the plain-text
//! mesh format.
//!
//! cargo run --release --example mesh_export [dir]

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use waveguide_gap::geometry::{
    build_cell_mesh, build_cross_section_mesh, build_halfspace_mesh, CavernShape, CavernSpec, CrossSectionShape,
};

fn main() -> waveguide_gap::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/meshes".into()));
    std::fs::create_dir_all(&dir)?;
    let square = CrossSectionShape::unit_square();
    let meshes = [
        ("square.mesh", build_cross_section_mesh(&square, 16)?),
        (
            "disk.mesh",
            build_cross_section_mesh(&CrossSectionShape::disk_bottom_anchor(1.0)?, 16)?,
        ),
        (
            "cell.mesh",
            build_cell_mesh(&square, Some(&CavernSpec::hemisphere(1.0, 0.2)?), 8, 1)?,
        ),
        (
            "halfspace.mesh",
            build_halfspace_mesh(&CavernShape::Hemisphere { radius: 1.0 }, 8.0, 4)?,
        ),
    ];
    for (name, mesh) in meshes {
        let path = dir.join(name);
        mesh.write_text(BufWriter::new(File::create(&path)?))?;
        println!(
            "{}: {} nodes, {} elements, {} facets, measure {:.5}",
            path.display(),
            mesh.n_nodes(),
            mesh.n_elements(),
            mesh.n_facets(),
            mesh.measure()
        );
    }
    Ok(())
}
