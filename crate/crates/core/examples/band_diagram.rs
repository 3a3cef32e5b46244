//! Band diagram of the unit-square waveguide with and without a cavern,
//! printed as `eta Lambda_1 Lambda_2 Lambda_3` rows.
//!
//! cargo run --release --example band_diagram [h] [resolution]

use waveguide_gap::floquet::{band_edges, compute_band_diagram, CellProblem, EtaGridSpec};
use waveguide_gap::geometry::{build_cell_mesh, CavernSpec, CrossSectionShape};

fn main() -> waveguide_gap::Result<()> {
    let mut args = std::env::args().skip(1);
    let h: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.3);
    let res: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(12);
    let shape = CrossSectionShape::unit_square();
    let grid = EtaGridSpec::uniform(16);
    for cavern in [None, Some(CavernSpec::hemisphere(1.0, h)?)] {
        let mesh = build_cell_mesh(&shape, cavern.as_ref(), res, 2)?;
        let t = std::time::Instant::now();
        let d = compute_band_diagram(&CellProblem::new(&mesh)?, &grid, 3, 1e-8, true)?;
        println!("# h = {}  nodes {}  ({:.2?})", d.h, mesh.n_nodes(), t.elapsed());
        for (i, eta) in d.eta_grid.iter().enumerate() {
            let l = d.column(i);
            println!("{eta:8.5} {:10.5} {:10.5} {:10.5}", l[0], l[1], l[2]);
        }
        let gaps = band_edges(&d, 1e-6)?;
        println!("# bands {:?}\n# gaps {:?}\n", gaps.bands, gaps.gaps);
    }
    Ok(())
}
