//! The two branches near `η = π` for the unit square with a hemispherical
//! cavern, against the coupling-matrix prediction.
//!
//! cargo run --release --example avoided_crossing [h] [points] [beta_max]

use std::f64::consts::PI;

use waveguide_gap::asymptotics::coupling_constant;
use waveguide_gap::boundary_layer::{compute_polarization, PolarizationOptions};
use waveguide_gap::cross_section::solve_cross_section;
use waveguide_gap::experiment::avoided_crossing_sweep;
use waveguide_gap::floquet::{CellProblem, MAX_WINDOW_HALF_WIDTH};
use waveguide_gap::geometry::{
    build_cross_section_mesh, build_filled_cell_mesh, CavernShape, CavernSpec, CrossSectionShape,
};

fn main() -> waveguide_gap::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>().ok());
    let h = args.next().flatten().unwrap_or(0.2);
    let points = args.next().flatten().unwrap_or(9.0) as i64;
    let shape = CrossSectionShape::unit_square();
    let cavern = CavernShape::Hemisphere { radius: 1.0 };

    let cs = solve_cross_section(&build_cross_section_mesh(&shape, 64)?, 2)?;
    let pol = compute_polarization(&cavern, &PolarizationOptions::default())?;
    let p = coupling_constant(pol.p_theta, cs.normal_derivative)?;
    let beta_max = args
        .next()
        .flatten()
        .unwrap_or((4.0 * p / (2.0 * PI)).min(MAX_WINDOW_HALF_WIDTH / h.powi(3)));
    println!(
        "P_theta = {:.5}  dnV1 = {:.5}  coupling = {p:.4}",
        pol.p_theta, cs.normal_derivative
    );

    let mesh = build_filled_cell_mesh(&shape, &CavernSpec::new(cavern, h)?, 16, 2)?;
    let n = (points - 1).max(1) / 2;
    let betas: Vec<f64> = (-n..=n).map(|k| beta_max * k as f64 / n as f64).collect();
    let t = std::time::Instant::now();
    let sweep = avoided_crossing_sweep(
        &CellProblem::new(&mesh)?,
        &CellProblem::released(&mesh)?,
        p,
        h,
        &betas,
        3,
        1e-8,
    )?;
    let h3 = h.powi(3);
    println!(
        "reference M1 + pi^2 = {:.6} (continuum {:.6})",
        sweep.reference,
        3.0 * PI * PI
    );
    println!(
        "{:>9} {:>10} {:>10} {:>10} {:>10} {:>7} {:>7}",
        "beta", "lower/h3", "pred", "upper/h3", "pred", "dev-", "dev+"
    );
    for r in &sweep.rows {
        println!(
            "{:9.3} {:10.3} {:10.3} {:10.3} {:10.3} {:7.3} {:7.3}",
            r.beta,
            (r.measured.0 - sweep.reference) / h3,
            (r.predicted.0 - sweep.reference) / h3,
            (r.measured.1 - sweep.reference) / h3,
            (r.predicted.1 - sweep.reference) / h3,
            r.deviation.0,
            r.deviation.1
        );
    }
    println!(
        "max deviation {:.3}  ordering {}  evenness {:.2e}  ({:.2?})",
        sweep.max_deviation,
        sweep.ordering_ok,
        sweep.evenness_defect,
        t.elapsed()
    );
    Ok(())
}
