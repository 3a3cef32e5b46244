//! Gap scaling study from a configuration file; writes `scaling.csv` and the
//! per-scale band files.
//!
//! cargo run --release --example gap_scan [config] [out]

use std::path::PathBuf;

use waveguide_gap::experiment::Experiment;

fn main() -> waveguide_gap::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(args.next().unwrap_or_else(|| "configs/quick.toml".into()));
    let out = args.next().map(PathBuf::from);
    let exp = Experiment::from_path(&config, out, None)?;
    let t = std::time::Instant::now();
    let r = exp.run_gap_scan()?;
    println!("coupling {:.4}  ({:.2?})", r.coupling, t.elapsed());
    for row in &r.rows {
        println!(
            "h = {:5}  l = {:?}  2Ph^3 = {:.5}  ratio = {:?}  Lambda(pi) = {:?}, {:?}",
            row.h, row.l_measured, row.l_predicted, row.ratio, row.lambda1_pi, row.lambda2_pi
        );
    }
    if let Some(f) = r.slope {
        println!("slope {:.3}  95% CI {:?}", f.slope, f.slope_ci95);
    }
    if let Some(f) = r.remainder {
        println!("remainder exponent {:.3}", f.slope);
    }
    println!("written to {}", exp.out_dir.display());
    Ok(())
}
