//! Cross-section eigenvalues for the unit square and the unit disk, with a
//! Richardson step over two resolutions.
//!
//! cargo run --release --example cross_section_spectrum [coarse_res]

use std::f64::consts::PI;

use waveguide_gap::cross_section::{check_period_admissibility, richardson, solve_cross_section};
use waveguide_gap::geometry::{build_cross_section_mesh, CrossSectionShape};

fn main() -> waveguide_gap::Result<()> {
    let coarse: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(32);
    let shapes = [
        (
            "unit square",
            CrossSectionShape::unit_square(),
            [2.0 * PI * PI, 5.0 * PI * PI],
        ),
        (
            "unit disk",
            CrossSectionShape::disk_bottom_anchor(1.0)?,
            [2.404825557695773f64.powi(2), 3.831705970207512f64.powi(2)],
        ),
    ];
    for (name, shape, exact) in shapes {
        let mut levels = Vec::new();
        for res in [coarse, 2 * coarse] {
            let mesh = build_cross_section_mesh(&shape, res)?;
            let t = std::time::Instant::now();
            let s = solve_cross_section(&mesh, 4)?;
            println!(
                "{name:12} res {res:4}  nodes {:6}  M = {:?}  dnV1 = {:.6}  ({:.2?})",
                mesh.n_nodes(),
                s.eigenvalues.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>(),
                s.normal_derivative,
                t.elapsed()
            );
            levels.push(s);
        }
        let fine = &levels[1];
        for k in 0..2 {
            let r = richardson(levels[0].eigenvalues[k], fine.eigenvalues[k], 2.0, 2.0);
            println!(
                "{name:12} M{} extrapolated {r:.6}  exact {:.6}  rel err {:.2e}",
                k + 1,
                exact[k],
                (r - exact[k]).abs() / exact[k]
            );
        }
        let period = check_period_admissibility(fine, 1.0)?;
        println!(
            "{name:12} gap condition {}  period threshold {:.6}  T = 1 admissible {}\n",
            fine.gap_condition_ok, period.threshold, period.admissible
        );
    }
    Ok(())
}
