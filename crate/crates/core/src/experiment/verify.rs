use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Check, Experiment};
use crate::asymptotics::{coupling_constant, coupling_matrix};
use crate::boundary_layer::compute_polarization;
use crate::error::{Error, Result};
use crate::floquet::{
    check_bracketing, compute_band_diagram, folded_dispersion, BandDiagram, CellProblem, EtaGridSpec,
};
use crate::geometry::{
    build_cell_mesh, build_filled_cell_mesh, CavernShape, CavernSpec, CrossSectionKind, CrossSectionShape,
};

const J01: f64 = 2.404825557695773;
const J11: f64 = 3.831705970207512;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub check: Check,
    pub passed: bool,
    /// Skipped checks count as passed.
    pub skipped: bool,
    pub detail: String,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub h: f64,
    pub outcomes: Vec<CheckOutcome>,
    pub all_passed: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }
}

/// Analytic `(M₁, M₂, ∂ₙV₁)` where the cross-section has a closed form.
pub fn cross_section_oracle(shape: &CrossSectionShape) -> (f64, f64, f64) {
    match shape.kind {
        CrossSectionKind::Rectangle { width, height } => {
            let mut m: Vec<f64> = (1..=3)
                .flat_map(|j| {
                    (1..=3)
                        .map(move |k| PI * PI * ((j * j) as f64 / (width * width) + (k * k) as f64 / (height * height)))
                })
                .collect();
            m.sort_by(f64::total_cmp);
            let amp = 2.0 / (width * height).sqrt();
            let [x, y] = shape.anchor;
            let tol = shape.tolerance();
            let dn = if y.abs() <= tol || (y - height).abs() <= tol {
                amp * PI / height * (PI * x / width).sin()
            } else {
                amp * PI / width * (PI * y / height).sin()
            };
            (m[0], m[1], -dn)
        }
        CrossSectionKind::Disk { radius } => {
            let r2 = radius * radius;
            (J01 * J01 / r2, J11 * J11 / r2, -J01 / (PI.sqrt() * r2))
        }
    }
}

struct Outcome {
    passed: bool,
    skipped: bool,
    detail: String,
    metrics: BTreeMap<String, f64>,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Self {
            passed,
            skipped: false,
            detail,
            metrics: BTreeMap::new(),
        }
    }

    fn skip(detail: String) -> Self {
        Self {
            passed: true,
            skipped: true,
            detail,
            metrics: BTreeMap::new(),
        }
    }

    fn metric(mut self, name: &str, v: f64) -> Self {
        self.metrics.insert(name.into(), v);
        self
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn top(d: &BandDiagram) -> f64 {
    d.lambdas.iter().flatten().copied().fold(0.0, f64::max)
}

/// Diagrams shared by several checks, computed on first use.
struct Cells<'a> {
    exp: &'a Experiment,
    h: f64,
    perturbed: Option<BandDiagram>,
    released: Option<BandDiagram>,
    plain: Option<BandDiagram>,
    filled: Option<crate::geometry::Mesh>,
}

impl<'a> Cells<'a> {
    fn grid(&self) -> EtaGridSpec {
        EtaGridSpec::uniform(self.exp.config.verify.eta_points)
    }

    fn diagram(&self, problem: &CellProblem, mirror: bool) -> Result<BandDiagram> {
        let s = &self.exp.config.solver;
        compute_band_diagram(problem, &self.grid(), s.bands, s.tol, mirror)
    }

    fn filled(&mut self) -> Result<&crate::geometry::Mesh> {
        if self.filled.is_none() {
            let cfg = &self.exp.config;
            let cavern = CavernSpec::new(cfg.cavern.shape, self.h)?;
            let mesh = build_filled_cell_mesh(
                &cfg.cross_section,
                &cavern,
                cfg.mesh.cell_resolution,
                cfg.mesh.refinement_levels,
            )?;
            info!("verify: filled cell mesh with {} nodes", mesh.n_nodes());
            self.filled = Some(mesh);
        }
        Ok(self.filled.as_ref().unwrap())
    }

    /// The perforated cell, solved on the whole grid without mirroring.
    fn perturbed(&mut self) -> Result<&BandDiagram> {
        if self.perturbed.is_none() {
            let seed = self.exp.seed;
            let problem = CellProblem::new(self.filled()?)?.with_seed(seed);
            self.perturbed = Some(self.diagram(&problem, false)?);
        }
        Ok(self.perturbed.as_ref().unwrap())
    }

    /// The unperturbed problem on the filled mesh.
    fn released(&mut self) -> Result<&BandDiagram> {
        if self.released.is_none() {
            let seed = self.exp.seed;
            let problem = CellProblem::released(self.filled()?)?.with_seed(seed);
            self.released = Some(self.diagram(&problem, true)?);
        }
        Ok(self.released.as_ref().unwrap())
    }

    /// The unperturbed problem on its own uniform mesh.
    fn plain(&mut self) -> Result<&BandDiagram> {
        if self.plain.is_none() {
            let cfg = &self.exp.config;
            let mesh = build_cell_mesh(&cfg.cross_section, None, cfg.mesh.cell_resolution, 0)?;
            let problem = CellProblem::new(&mesh)?.with_seed(self.exp.seed);
            self.plain = Some(self.diagram(&problem, true)?);
        }
        Ok(self.plain.as_ref().unwrap())
    }
}

fn coupling_identities(seed: u64) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut trace, mut det, mut ortho, mut resid) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let beta: f64 = rng.random_range(-3.0..3.0);
        let p: f64 = rng.random_range(0.05..500.0);
        let c = coupling_matrix(beta, p)?;
        let scale = p * p + 4.0 * PI * PI * beta * beta;
        trace = trace.max(rel(c.trace(), 2.0 * p));
        det = det.max((c.determinant() + 4.0 * PI * PI * beta * beta).abs() / scale);
        det = det.max((c.eigenvalues[0] * c.eigenvalues[1] + 4.0 * PI * PI * beta * beta).abs() / scale);
        let [u, v] = c.eigenvectors;
        ortho = ortho
            .max((u[0] * u[0] + u[1] * u[1] - 1.0).abs())
            .max((v[0] * v[0] + v[1] * v[1] - 1.0).abs())
            .max((u[0] * v[0] + u[1] * v[1]).abs());
        for (a, l) in [(u, c.eigenvalues[0]), (v, c.eigenvalues[1])] {
            let m = c.matrix;
            let r0 = m[0][0] * a[0] + m[0][1] * a[1] - l * a[0];
            let r1 = m[1][0] * a[0] + m[1][1] * a[1] - l * a[1];
            resid = resid.max(r0.hypot(r1) / scale.sqrt());
        }
    }
    let worst = trace.max(det).max(ortho).max(resid);
    Ok(Outcome::new(
        worst <= 1e-12,
        format!("100 random pairs, worst relative defect {worst:.2e}"),
    )
    .metric("trace", trace)
    .metric("determinant", det)
    .metric("orthonormality", ortho)
    .metric("eigen_residual", resid))
}

fn cross_section(exp: &Experiment) -> Result<Outcome> {
    let report = exp.analyze_cross_section()?;
    let (m1, m2, dn) = cross_section_oracle(&exp.config.cross_section);
    let budget = exp.config.verify.discretization_budget;
    let (e1, e2, ed) = (
        rel(report.m1, m1),
        rel(report.m2, m2),
        rel(report.normal_derivative, dn),
    );
    let passed = e1 <= budget && e2 <= budget && ed <= budget;
    Ok(Outcome::new(
        passed,
        format!("M1 {e1:.2e}, M2 {e2:.2e}, dnV1 {ed:.2e} relative to the analytic values (budget {budget:.1e})"),
    )
    .metric("m1", report.m1)
    .metric("m2", report.m2)
    .metric("dn_v1", report.normal_derivative))
}

fn polarization(exp: &Experiment) -> Result<Outcome> {
    let opts = exp.polarization_options();
    let shape = exp.config.cavern.shape;
    let p = compute_polarization(&shape, &opts)?.p_theta;
    let p2 = compute_polarization(&shape.scaled(2.0), &opts)?.p_theta;
    let ratio = p2 / p;
    let scaling_ok = (7.2..=8.8).contains(&ratio);
    let out = match shape {
        CavernShape::Hemisphere { radius } => {
            let exact = TAU * radius.powi(3);
            let e = rel(p, exact);
            let tol = exp.config.verify.polarization_tol;
            Outcome::new(
                p > 0.0 && e <= tol && scaling_ok,
                format!("P = {p:.6} against 2 pi a^3 = {exact:.6} ({e:.2e}, tol {tol}); P(2a)/P(a) = {ratio:.4}"),
            )
            .metric("relative_error", e)
        }
        CavernShape::Box { .. } => Outcome::new(
            p > 0.0 && scaling_ok,
            format!("P = {p:.6} (no closed form, positivity only); P(2a)/P(a) = {ratio:.4}"),
        ),
    };
    Ok(out.metric("p_theta", p).metric("scaling_ratio", ratio))
}

fn dispersion(exp: &Experiment, cells: &mut Cells) -> Result<Outcome> {
    let (m1, m2, _) = cross_section_oracle(&exp.config.cross_section);
    let tol = exp.config.verify.dispersion_tol;
    let d = cells.plain()?;
    let mut worst: f64 = 0.0;
    for (i, &eta) in d.eta_grid.iter().enumerate() {
        let exact = folded_dispersion(&[m1, m2], eta, 1)[0];
        worst = worst.max(rel(d.lambdas[0][i], exact));
    }
    let pi = d
        .eta_grid
        .iter()
        .position(|&e| e == PI)
        .expect("uniform grid contains pi");
    let (l1, l2) = (d.lambdas[0][pi], d.lambdas[1][pi]);
    let split = (l2 - l1) / l1;
    let double = m1 + PI * PI < m2;
    let passed = worst <= tol && (!double || split <= 1e-2);
    Ok(Outcome::new(
        passed,
        format!(
            "Lambda_1 worst relative error {worst:.2e} over {} points (tol {tol:.1e}); relative splitting at pi {split:.2e}",
            d.eta_grid.len()
        ),
    )
    .metric("lambda1_error", worst)
    .metric("pi_splitting", split))
}

fn symmetry(exp: &Experiment, cells: &mut Cells) -> Result<Outcome> {
    let s = &exp.config.solver;
    let budget = exp.config.verify.bracketing_budget * s.tol;
    let d = cells.perturbed()?.clone();
    let conj = d.conjugation_defect() / top(&d);
    let problem = CellProblem::new(cells.filled()?)?.with_seed(exp.seed);
    let wrapped = problem.solve(TAU, s.bands, s.tol)?;
    let gauge = wrapped
        .iter()
        .zip(d.column(0))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / top(&d);
    Ok(Outcome::new(
        conj <= budget && gauge <= budget,
        format!("conjugation defect {conj:.2e}, gauge defect {gauge:.2e} (budget {budget:.1e}, relative)"),
    )
    .metric("conjugation", conj)
    .metric("gauge", gauge))
}

fn bracketing(exp: &Experiment, cells: &mut Cells) -> Result<Outcome> {
    let v = &exp.config.verify;
    let tol = exp.config.solver.tol;
    let perturbed = cells.perturbed()?.clone();
    let scale = top(&perturbed);
    let shared = check_bracketing(&perturbed, cells.released()?, v.bracketing_budget * tol * scale)?;
    let independent = check_bracketing(&perturbed, cells.plain()?, v.discretization_budget * scale)?;
    let mut out = Outcome::new(
        shared.lower_bound_holds && independent.lower_bound_holds,
        format!(
            "shared mesh: max violation {:.3e} (budget {:.1e}); independent mesh: max violation {:.3e} (budget {:.1e})",
            shared.max_violation, shared.budget, independent.max_violation, independent.budget
        ),
    )
    .metric("shared_violation", shared.max_violation)
    .metric("independent_violation", independent.max_violation);
    for (p, c) in shared.constants.iter().enumerate() {
        if let Some(c) = c {
            out = out.metric(&format!("c_{}", p + 1), *c);
        }
    }
    Ok(out)
}

fn avoided_crossing(exp: &Experiment, cells: &mut Cells) -> Result<Outcome> {
    let cs = exp.analyze_cross_section()?;
    let pol = compute_polarization(&exp.config.cavern.shape, &exp.polarization_options())?;
    let coupling = coupling_constant(pol.p_theta, cs.normal_derivative)?;
    let h = cells.h;
    let g = &exp.config.eta_grid;
    let window = EtaGridSpec::refined(8, g.window_points.max(5), g.window_factor, coupling, h).window_half_width;
    let n = g.window_points.max(5) / 2;
    let betas: Vec<f64> = (-(n as i64)..=n as i64)
        .map(|k| window / h.powi(3) * k as f64 / n as f64)
        .collect();
    let seed = exp.seed;
    let s = &exp.config.solver;
    let (tol, bands) = (s.tol, s.bands);
    let mesh = cells.filled()?;
    let sweep = super::avoided_crossing_sweep(
        &CellProblem::new(mesh)?.with_seed(seed),
        &CellProblem::released(mesh)?.with_seed(seed),
        coupling,
        h,
        &betas,
        bands,
        tol,
    )?;
    let budget = exp.config.verify.bracketing_budget * tol;
    let passed = sweep.ordering_ok && sweep.max_deviation <= 0.5 && sweep.evenness_defect <= budget;
    Ok(Outcome::new(
        passed,
        format!(
            "{} values of beta: max deviation {:.3} (limit 0.5), ordering {}, evenness defect {:.2e}",
            betas.len(),
            sweep.max_deviation,
            if sweep.ordering_ok { "correct" } else { "wrong" },
            sweep.evenness_defect
        ),
    )
    .metric("max_deviation", sweep.max_deviation)
    .metric("evenness", sweep.evenness_defect))
}

fn skip_reason(e: &Error) -> Option<String> {
    match e {
        Error::InvalidGeometry(m) => Some(format!("unsupported geometry: {m}")),
        _ => None,
    }
}

pub(super) fn run(exp: &Experiment) -> Result<VerifyReport> {
    let checks = &exp.config.verify.checks;
    let h = exp.config.verify_h();
    if checks.is_empty() {
        warn!("no checks selected; nothing to verify");
    }
    let mut cells = Cells {
        exp,
        h,
        perturbed: None,
        released: None,
        plain: None,
        filled: None,
    };
    let mut outcomes = Vec::new();
    for &check in checks {
        info!("verify: running {check:?}");
        let result = match check {
            Check::CouplingIdentities => coupling_identities(exp.seed),
            Check::CrossSection => cross_section(exp),
            Check::Polarization => polarization(exp),
            Check::Dispersion => dispersion(exp, &mut cells),
            Check::Symmetry => symmetry(exp, &mut cells),
            Check::Bracketing => bracketing(exp, &mut cells),
            Check::AvoidedCrossing => avoided_crossing(exp, &mut cells),
        };
        let o = match result {
            Ok(o) => o,
            Err(e) => match skip_reason(&e) {
                Some(reason) => Outcome::skip(reason),
                None if matches!(e, Error::NumericalBreakdown(_) | Error::Precondition(_)) => {
                    Outcome::new(false, format!("solver failure: {e}"))
                }
                None => return Err(e),
            },
        };
        if o.passed {
            info!("{check:?}: {}", o.detail);
        } else {
            warn!("{check:?} failed: {}", o.detail);
        }
        outcomes.push(CheckOutcome {
            check,
            passed: o.passed,
            skipped: o.skipped,
            detail: o.detail,
            metrics: o.metrics,
        });
    }
    Ok(VerifyReport {
        h,
        all_passed: outcomes.iter().all(|o| o.passed),
        outcomes,
    })
}
