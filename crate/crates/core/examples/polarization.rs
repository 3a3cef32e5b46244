//! Polarization coefficient of a hemispherical and a box-shaped cavern.
//!
//! cargo run --release --example polarization [resolution]

use std::f64::consts::PI;

use waveguide_gap::boundary_layer::{compute_polarization, compute_polarization_symmetrized, PolarizationOptions};
use waveguide_gap::geometry::CavernShape;

fn main() -> waveguide_gap::Result<()> {
    let resolution = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(8);
    let opts = PolarizationOptions {
        resolution,
        ..PolarizationOptions::default()
    };
    for radius in [1.0, 2.0] {
        let t = std::time::Instant::now();
        let p = compute_polarization(&CavernShape::Hemisphere { radius }, &opts)?;
        println!(
            "hemisphere a = {radius}: P = {:.5}  exact 2πa³ = {:.5}  rel err {:.2e}  ({:.2?})",
            p.p_theta,
            2.0 * PI * radius.powi(3),
            (p.p_theta / (2.0 * PI * radius.powi(3)) - 1.0).abs(),
            t.elapsed()
        );
        for (r, est) in &p.radius_estimates {
            println!("    R = {r:4.1}  P(R) = {est:.5}");
        }
    }
    let sym = compute_polarization_symmetrized(&CavernShape::Hemisphere { radius: 1.0 }, &opts)?;
    println!("symmetrized sphere: P = {:.5}", sym.p_theta);
    let cube = CavernShape::Box {
        half_extents: [0.5, 0.5, 0.5],
    };
    let p = compute_polarization(&cube, &opts)?;
    println!("box 1 x 1 x 0.5 deep: P = {:.5}", p.p_theta);
    Ok(())
}
