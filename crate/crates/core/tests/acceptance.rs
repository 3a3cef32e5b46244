//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.
//!
//! cargo test --test acceptance [-- <criterion numbers>]

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use waveguide_gap::asymptotics::{coupling_constant, coupling_matrix};
use waveguide_gap::boundary_layer::{compute_polarization, PolarizationOptions};
use waveguide_gap::cross_section::{richardson, solve_cross_section};
use waveguide_gap::experiment::{avoided_crossing_sweep, Experiment, ExperimentConfig};
use waveguide_gap::floquet::{
    check_bracketing, compute_band_diagram, folded_dispersion, CellProblem, EtaGridSpec, MAX_WINDOW_HALF_WIDTH,
};
use waveguide_gap::geometry::{
    build_cell_mesh, build_cross_section_mesh, build_filled_cell_mesh, CavernShape, CavernSpec, CrossSectionShape,
};
use waveguide_gap::Result;

const TOL: f64 = 1e-8;
const M1: f64 = 2.0 * PI * PI;
const M2: f64 = 5.0 * PI * PI;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn hemisphere() -> CavernShape {
    CavernShape::Hemisphere { radius: 1.0 }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

fn cross_section_oracle() -> Result<Verdict> {
    let t = Instant::now();
    let shape = CrossSectionShape::unit_square();
    let coarse = solve_cross_section(&build_cross_section_mesh(&shape, 32)?, 2)?;
    let fine = solve_cross_section(&build_cross_section_mesh(&shape, 64)?, 2)?;
    let m1 = richardson(coarse.m1(), fine.m1(), 2.0, 2.0);
    let m2 = richardson(coarse.m2(), fine.m2(), 2.0, 2.0);
    let elapsed = t.elapsed();
    let (e1, e2) = (rel(m1, M1), rel(m2, M2));
    verdict(
        e1 <= 1e-3 && e2 <= 3e-3 && within(elapsed, Duration::from_secs(10)),
        format!("M1 rel err {e1:.2e} (<= 1e-3), M2 rel err {e2:.2e} (<= 3e-3), {elapsed:.2?} (< 10 s)"),
    )
}

fn normal_derivative_oracle() -> Result<Verdict> {
    let s = solve_cross_section(&build_cross_section_mesh(&CrossSectionShape::unit_square(), 64)?, 2)?;
    let e = rel(s.normal_derivative, -TAU);
    verdict(
        e <= 1e-2,
        format!(
            "dnV1 = {:.6} against -2 pi, rel err {e:.2e} (<= 1e-2)",
            s.normal_derivative
        ),
    )
}

fn unperturbed_dispersion() -> Result<Verdict> {
    let t = Instant::now();
    let mesh = build_cell_mesh(&CrossSectionShape::unit_square(), None, 20, 0)?;
    let problem = CellProblem::new(&mesh)?;
    let mut worst: f64 = 0.0;
    let mut at_pi = (0.0, 0.0);
    for k in 0..=8 {
        let eta = TAU * k as f64 / 8.0;
        let l = problem.solve(eta, 2, TOL)?;
        worst = worst.max(rel(l[0], folded_dispersion(&[M1, M2], eta, 1)[0]));
        if k == 4 {
            at_pi = (l[0], l[1]);
        }
    }
    let split = (at_pi.1 - at_pi.0).abs();
    let elapsed = t.elapsed();
    verdict(
        worst <= 5e-3 && split <= 1e-2 * at_pi.0 && within(elapsed, Duration::from_secs(300)),
        format!(
            "Lambda_1 worst rel err {worst:.2e} at 9 points (<= 5e-3), |Lambda_2 - Lambda_1|(pi) = {split:.2e} (<= {:.2e}), {} nodes, {elapsed:.2?} (< 5 min)",
            1e-2 * at_pi.0,
            mesh.n_nodes()
        ),
    )
}

fn polarization_oracle() -> Result<Verdict> {
    let t = Instant::now();
    let opts = PolarizationOptions::default();
    let p1 = compute_polarization(&hemisphere(), &opts)?.p_theta;
    let p2 = compute_polarization(&CavernShape::Hemisphere { radius: 2.0 }, &opts)?.p_theta;
    let elapsed = t.elapsed();
    let e = rel(p1, TAU);
    let ratio = p2 / p1;
    verdict(
        e <= 0.05 && (7.2..=8.8).contains(&ratio) && within(elapsed, Duration::from_secs(120)),
        format!("P = {p1:.5} against 2 pi, rel err {e:.2e} (<= 0.05), P(2)/P(1) = {ratio:.5} (in [7.2, 8.8]), {elapsed:.2?} (< 2 min)"),
    )
}

fn coupling_identities() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut trace, mut det, mut product, mut ortho) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let beta: f64 = rng.random_range(-5.0..5.0);
        let p: f64 = rng.random_range(0.01..1000.0);
        let c = coupling_matrix(beta, p)?;
        let b2 = 4.0 * PI * PI * beta * beta;
        trace = trace.max(rel(c.trace(), 2.0 * p));
        det = det.max((c.determinant() + b2).abs() / (p * p + b2));
        product = product.max(rel(c.eigenvalues[0] * c.eigenvalues[1], -b2));
        let [u, v] = c.eigenvectors;
        ortho = ortho
            .max((u[0].hypot(u[1]) - 1.0).abs())
            .max((v[0].hypot(v[1]) - 1.0).abs())
            .max((u[0] * v[0] + u[1] * v[1]).abs());
    }
    let worst = trace.max(det).max(product).max(ortho);
    verdict(
        worst <= 1e-12,
        format!(
            "100 pairs: trace {trace:.1e}, determinant {det:.1e}, eigenvalue product {product:.1e}, orthonormality {ortho:.1e} (all <= 1e-12)"
        ),
    )
}

fn bracketing() -> Result<Verdict> {
    let mesh = build_filled_cell_mesh(
        &CrossSectionShape::unit_square(),
        &CavernSpec::new(hemisphere(), 0.2)?,
        16,
        2,
    )?;
    let grid = EtaGridSpec::uniform(8);
    let perturbed = compute_band_diagram(&CellProblem::new(&mesh)?, &grid, 3, TOL, true)?;
    let released = compute_band_diagram(&CellProblem::released(&mesh)?, &grid, 3, TOL, true)?;
    let top = perturbed.lambdas.iter().flatten().copied().fold(0.0, f64::max);
    let r = check_bracketing(&perturbed, &released, 10.0 * TOL * top)?;
    verdict(
        r.lower_bound_holds,
        format!(
            "h = 0.2, p <= 3, {} points: max (Lambda0 - Lambdah) = {:.3e} (<= {:.1e}), C_p = {:?}",
            grid.points()?.len(),
            r.max_violation,
            r.budget,
            r.constants
                .iter()
                .map(|c| c.map(|c| (c * 10.0).round() / 10.0))
                .collect::<Vec<_>>()
        ),
    )
}

fn gap_opening() -> Result<Verdict> {
    let t = Instant::now();
    let loaded = ExperimentConfig::load(&configs().join("unit_square_hemisphere.toml"))?;
    let out = tempfile::tempdir()?;
    let exp = Experiment::new(loaded, Some(out.path().to_path_buf()), None);
    let r = exp.run_gap_scan()?;
    let elapsed = t.elapsed();
    let base = M1 + PI * PI;
    let mut pass = within(elapsed, Duration::from_secs(3600));
    let mut lines = Vec::new();
    for row in &r.rows {
        let nonempty = row.l_measured.is_some_and(|l| l > 0.0);
        let edge = row.gap.map(|g| rel(g.0, base));
        let ok = nonempty && row.gap_above_first_band && edge.is_some_and(|e| e <= 0.05);
        pass &= ok;
        lines.push(format!(
            "h = {}: gap {:?}, above first band {}, lower edge rel dev {} (<= 0.05), ratio {}",
            row.h,
            row.gap.map(|g| ((g.0 * 1e4).round() / 1e4, (g.1 * 1e4).round() / 1e4)),
            row.gap_above_first_band,
            edge.map_or("-".into(), |e| format!("{e:.4}")),
            row.ratio.map_or("-".into(), |q| format!("{q:.4}")),
        ));
    }
    let slope = r.slope.map(|f| f.slope);
    let slope_ok = slope.is_some_and(|s| (2.6..=3.4).contains(&s));
    let smallest = r.rows.iter().find_map(|row| row.ratio);
    let ratio_ok = smallest.is_some_and(|q| (0.5..=1.5).contains(&q));
    pass &= slope_ok && ratio_ok;
    lines.push(format!(
        "slope {} (in [2.6, 3.4]), CI {:?}; ratio at smallest h {} (in [0.5, 1.5]); {elapsed:.2?} (< 1 h)",
        slope.map_or("-".into(), |s| format!("{s:.4}")),
        r.slope.and_then(|f| f.slope_ci95),
        smallest.map_or("-".into(), |q| format!("{q:.4}")),
    ));
    verdict(pass, lines.join("\n    "))
}

fn avoided_crossing() -> Result<Verdict> {
    let h = 0.2;
    let shape = CrossSectionShape::unit_square();
    let cs = solve_cross_section(&build_cross_section_mesh(&shape, 64)?, 2)?;
    let pol = compute_polarization(&hemisphere(), &PolarizationOptions::default())?;
    let p = coupling_constant(pol.p_theta, cs.normal_derivative)?;
    let window = EtaGridSpec::refined(32, 17, 4.0, p, h).window_half_width;
    assert!(window <= MAX_WINDOW_HALF_WIDTH);
    let betas: Vec<f64> = (-8..=8).map(|k| window / h.powi(3) * k as f64 / 8.0).collect();
    let mesh = build_filled_cell_mesh(&shape, &CavernSpec::new(hemisphere(), h)?, 16, 2)?;
    let s = avoided_crossing_sweep(
        &CellProblem::new(&mesh)?,
        &CellProblem::released(&mesh)?,
        p,
        h,
        &betas,
        3,
        TOL,
    )?;
    verdict(
        s.max_deviation <= 0.5 && s.ordering_ok && s.evenness_defect <= 10.0 * TOL,
        format!(
            "h = 0.2, {} values of beta in [-{:.1}, {:.1}]: max rel deviation {:.3} (<= 0.5), ordering {}, evenness {:.1e} (<= {:.0e})",
            betas.len(),
            betas[16],
            betas[16],
            s.max_deviation,
            if s.ordering_ok { "correct" } else { "wrong" },
            s.evenness_defect,
            10.0 * TOL
        ),
    )
}

fn determinism() -> Result<Verdict> {
    let loaded = ExperimentConfig::load(&configs().join("quick.toml"))?;
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
    for d in &dirs {
        Experiment::new(loaded.clone(), Some(d.path().to_path_buf()), None).run_gap_scan()?;
    }
    let mut files: Vec<_> = std::fs::read_dir(dirs[0].path())?
        .filter_map(|e| e.ok().map(|e| e.file_name()))
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    files.sort();
    let mut identical = !files.is_empty();
    for f in &files {
        identical &= std::fs::read(dirs[0].path().join(f))? == std::fs::read(dirs[1].path().join(f))?;
    }
    verdict(
        identical,
        format!(
            "{} CSV files compared byte for byte across two gap-scan runs",
            files.len()
        ),
    )
}

type Criterion = (usize, &'static str, fn() -> Result<Verdict>);

const CRITERIA: [Criterion; 9] = [
    (1, "cross-section oracle", cross_section_oracle),
    (2, "normal derivative oracle", normal_derivative_oracle),
    (3, "unperturbed dispersion", unperturbed_dispersion),
    (4, "polarization oracle", polarization_oracle),
    (5, "coupling-matrix identities", coupling_identities),
    (6, "bracketing", bracketing),
    (7, "gap opening", gap_opening),
    (8, "avoided crossing", avoided_crossing),
    (9, "determinism", determinism),
];

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = match run() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        println!(
            "criterion {n} {name}: {} ({:.1?})\n    {detail}",
            if pass { "PASS" } else { "FAIL" },
            t.elapsed()
        );
        if !pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
