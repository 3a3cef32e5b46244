//! Shared-mesh bracketing: the cavern constraints of a filled cell mesh are
//! toggled to obtain the perturbed and unperturbed problems on one
//! discretization.
//!
//! cargo run --release --example bracketing [h] [resolution]

use waveguide_gap::floquet::{check_bracketing, compute_band_diagram, CellProblem, EtaGridSpec};
use waveguide_gap::geometry::{build_filled_cell_mesh, CavernSpec, CrossSectionShape};

fn main() -> waveguide_gap::Result<()> {
    let mut args = std::env::args().skip(1);
    let h: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.2);
    let res: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(12);
    let mesh = build_filled_cell_mesh(
        &CrossSectionShape::unit_square(),
        &CavernSpec::hemisphere(1.0, h)?,
        res,
        2,
    )?;
    let grid = EtaGridSpec::uniform(8);
    let tol = 1e-8;
    let perturbed = compute_band_diagram(&CellProblem::new(&mesh)?, &grid, 3, tol, true)?;
    let released = compute_band_diagram(&CellProblem::released(&mesh)?, &grid, 3, tol, true)?;
    for (i, eta) in grid.points()?.iter().enumerate() {
        println!(
            "eta {eta:6.3}  unperturbed {:?}  perturbed {:?}",
            released.column(i),
            perturbed.column(i)
        );
    }
    let top = perturbed.lambdas.iter().flatten().copied().fold(0.0, f64::max);
    let r = check_bracketing(&perturbed, &released, 10.0 * tol * top)?;
    println!(
        "lower bound holds: {}  max violation {:.3e}  C_p = {:?}",
        r.lower_bound_holds, r.max_violation, r.constants
    );
    Ok(())
}
