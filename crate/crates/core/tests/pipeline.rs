use std::f64::consts::PI;
use std::path::Path;

use waveguide_gap::experiment::{loglog_fit, Experiment, ExperimentConfig};
use waveguide_gap::Error;

fn quick(h: &str) -> Experiment {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/quick.toml"))
        .unwrap()
        .replace("h = [0.2, 0.25, 0.3]", h);
    let out = tempfile::tempdir().unwrap().keep();
    Experiment::new(ExperimentConfig::parse(&text).unwrap(), Some(out), None)
}

#[test]
fn synthetic_power_law_rows() {
    let p = 8.0 * PI.powi(3);
    let h: [f64; 4] = [0.15, 0.2, 0.25, 0.3];
    let exact: Vec<f64> = h.iter().map(|h| 2.0 * p * h.powi(3)).collect();
    assert!((loglog_fit(&h, &exact).unwrap().slope - 3.0).abs() < 5e-4);
    let perturbed: Vec<f64> = h.iter().map(|h| 2.0 * p * h.powi(3) + h.powf(3.5)).collect();
    let dev: Vec<f64> = h.iter().zip(&perturbed).map(|(h, l)| l - 2.0 * p * h.powi(3)).collect();
    assert!((loglog_fit(&h, &dev).unwrap().slope - 3.5).abs() < 1e-6);
}

#[test]
fn failing_scale_is_recorded_and_the_study_continues() {
    let exp = quick("h = [0.2, 0.5]");
    let r = exp.run_gap_scan().unwrap();
    assert_eq!(r.rows.len(), 2);
    assert!(r.rows[0].error.is_none());
    assert!(r.rows[0].l_measured.unwrap() > 0.0);
    assert!(r.rows[1].error.is_some());
    assert!(r.slope.is_none(), "fits need three successful scales");
    let csv = std::fs::read_to_string(exp.out_dir.join("scaling.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("h,l_measured,l_predicted,ratio\n"));
}

#[test]
fn every_scale_failing_is_an_error() {
    let exp = quick("h = [0.5]");
    assert!(matches!(exp.run_gap_scan(), Err(Error::GeometryViolation(_))));
}

#[test]
fn bands_include_the_unperturbed_diagram() {
    let exp = quick("h = [0.3]");
    let r = exp.run_bands().unwrap();
    assert_eq!(r.entries.len(), 2);
    assert_eq!(r.entries[0].h, 0.0);
    assert!(r.entries[0].prediction.is_none());
    let first = &r.entries[1];
    assert!(first.gaps.gap_above_first_band());
    assert!(first.prediction.as_ref().unwrap().predicted_gap_length > 0.0);
    let csv = std::fs::read_to_string(exp.out_dir.join("bands_h0p3.csv")).unwrap();
    assert!(csv.starts_with("eta,Lambda_1,Lambda_2,Lambda_3\n"));
    assert!(exp.out_dir.join("bands_h0.dat").exists());
}
