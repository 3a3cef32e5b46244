//! Coupling matrix spectrum across the validity window and the predicted
//! gap for the unit square with a hemispherical cavern (𝒫 = 8π³).
//!
//! cargo run --release --example coupling_matrix

use std::f64::consts::PI;

use waveguide_gap::asymptotics::{
    beta_window, coupling_constant, coupling_matrix, predict_gap, GapInputs, DEFAULT_BETA0,
};

fn main() -> waveguide_gap::Result<()> {
    let inputs = GapInputs {
        m1: 2.0 * PI * PI,
        m2: 5.0 * PI * PI,
        p_theta: 2.0 * PI,
        dn_v1: -2.0 * PI,
    };
    let p = coupling_constant(inputs.p_theta, inputs.dn_v1)?;
    println!("coupling = {p:.10}");
    for beta in [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0] {
        let c = coupling_matrix(beta, p)?;
        println!(
            "beta {beta:5.2}  lambda = ({:11.5}, {:11.5})  trace {:.5}  det {:.5}",
            c.eigenvalues[0],
            c.eigenvalues[1],
            c.trace(),
            c.determinant()
        );
    }
    for h in [0.1, 0.15, 0.2, 0.3] {
        let g = predict_gap(h, &inputs, 0.0)?;
        println!(
            "h = {h:4}  gap ({:.5}, {:.5})  length {:.5}  |beta| <= {:.3}",
            g.predicted_gap.0,
            g.predicted_gap.1,
            g.predicted_gap_length,
            beta_window(h, DEFAULT_BETA0)
        );
    }
    Ok(())
}
