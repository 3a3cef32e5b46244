//! Configured end-to-end runs: cross-section analysis, polarization, band
//! diagrams, the gap scaling study and the verification suite.
//!
//! Every run writes its tables and a `report.json` into the output
//! directory. Reports embed the SHA-256 of the configuration text.

mod config;
mod fit;
mod output;
mod verify;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

use crate::asymptotics::{coupling_constant, fit_remainder_constant, predict_gap, AsymptoticPrediction, GapInputs};
use crate::boundary_layer::{compute_polarization, PolarizationOptions, PolarizationResult};
use crate::cross_section::{check_period_admissibility, richardson, solve_cross_section_with, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::fem::EigenOptions;
use crate::floquet::{band_edges, compute_band_diagram, BandDiagram, CellProblem, EtaGridSpec, GapReport};
use crate::geometry::{build_cell_mesh, build_cross_section_mesh, CavernSpec};

pub use config::{
    CavernConfig, Check, EtaGridConfig, ExperimentConfig, LoadedConfig, MeshConfig, OutputConfig, OutputFormat,
    PolarizationConfig, SolverConfig, VerifyConfig, CONFIG_VERSION,
};
pub use fit::{loglog_fit, LogLogFit};
pub use output::{module_versions, sig12, Report, Table};
pub use verify::{CheckOutcome, VerifyReport};

/// A loaded configuration bound to an output directory and seed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub out_dir: PathBuf,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossSectionLevel {
    pub resolution: usize,
    pub nodes: usize,
    pub eigenvalues: Vec<f64>,
    pub normal_derivative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossSectionReport {
    pub levels: Vec<CrossSectionLevel>,
    /// Richardson-extrapolated eigenvalues from the two finest levels.
    pub extrapolated: Option<Vec<f64>>,
    pub m1: f64,
    pub m2: f64,
    pub normal_derivative: f64,
    pub gap_condition_ok: bool,
    pub period_threshold: f64,
    pub unit_period_admissible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandsEntry {
    pub h: f64,
    pub diagram: BandDiagram,
    pub gaps: GapReport,
    pub prediction: Option<AsymptoticPrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandsReport {
    pub coupling: f64,
    pub entries: Vec<BandsEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub h: f64,
    pub l_measured: Option<f64>,
    pub l_predicted: f64,
    pub ratio: Option<f64>,
    pub lambda1_pi: Option<f64>,
    pub lambda2_pi: Option<f64>,
    pub gap: Option<(f64, f64)>,
    pub gap_above_first_band: bool,
    pub first_band: Option<(f64, f64)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingStudyResult {
    pub m1: f64,
    pub p_theta: f64,
    pub normal_derivative: f64,
    pub coupling: f64,
    pub rows: Vec<ScalingRow>,
    /// Power-law fit of `l(h)`; needs three successful scales.
    pub slope: Option<LogLogFit>,
    /// Power-law fit of `|l(h) - 2𝒫h³|`; needs three successful scales.
    pub remainder: Option<LogLogFit>,
    /// Smallest `C` with `|l - 2𝒫h³| ≤ C h^{7/2}` over the measured rows.
    pub fitted_c_lambda: Option<f64>,
}

impl ScalingStudyResult {
    pub fn table(&self) -> Table {
        let mut t = Table::new(["h", "l_measured", "l_predicted", "ratio"]);
        for r in &self.rows {
            if let (Some(l), Some(q)) = (r.l_measured, r.ratio) {
                t.push(vec![r.h, l, r.l_predicted, q]);
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvoidedCrossingRow {
    pub beta: f64,
    pub eta: f64,
    /// Measured `(Λ₋ʰ, Λ₊ʰ)` at `η = π + βh³`.
    pub measured: (f64, f64),
    /// `reference + h³ λ∓(β)`.
    pub predicted: (f64, f64),
    /// Relative deviations of both offsets from the reference. The lower
    /// prediction vanishes at `β = 0`, so each offset is measured against
    /// `max(|h³λ|, h³√(𝒫² + 4π²β²))`.
    pub deviation: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvoidedCrossingSweep {
    pub h: f64,
    pub coupling: f64,
    /// Discrete double eigenvalue `M₁ + π²` of the unperturbed problem on
    /// the same mesh (mean of its two lowest values at `π`).
    pub reference: f64,
    pub rows: Vec<AvoidedCrossingRow>,
    pub max_deviation: f64,
    /// Each measured branch lies closer to its own prediction than to the
    /// other one.
    pub ordering_ok: bool,
    /// Largest `|Λ(π + βh³) - Λ(π - βh³)|` relative to the reference.
    pub evenness_defect: f64,
}

/// Sweeps `η = π + βh³` over `betas` and compares both branches near the
/// crossing with the coupling-matrix prediction.
pub fn avoided_crossing_sweep(
    perturbed: &CellProblem,
    released: &CellProblem,
    coupling: f64,
    h: f64,
    betas: &[f64],
    bands: usize,
    tol: f64,
) -> Result<AvoidedCrossingSweep> {
    use rayon::prelude::*;
    let count = bands.max(2);
    let base = released.solve(PI, count, tol)?;
    let reference = 0.5 * (base[0] + base[1]);
    let h3 = h.powi(3);
    let rows: Vec<AvoidedCrossingRow> = betas
        .par_iter()
        .map(|&beta| {
            let eta = PI + beta * h3;
            let l = perturbed.solve(eta, count, tol)?;
            let c = crate::asymptotics::coupling_matrix(beta, coupling)?;
            let half = h3 * coupling.hypot(2.0 * PI * beta);
            let [lo, hi] = c.eigenvalues.map(|e| h3 * e);
            let predicted = (reference + lo, reference + hi);
            Ok(AvoidedCrossingRow {
                beta,
                eta,
                measured: (l[0], l[1]),
                predicted,
                deviation: (
                    (l[0] - predicted.0).abs() / lo.abs().max(half),
                    (l[1] - predicted.1).abs() / hi.abs().max(half),
                ),
            })
        })
        .collect::<Result<_>>()?;
    let max_deviation = rows
        .iter()
        .map(|r| r.deviation.0.max(r.deviation.1))
        .fold(0.0, f64::max);
    let ordering_ok = rows.iter().all(|r| {
        let (lo, hi) = r.measured;
        let (plo, phi) = r.predicted;
        (lo - plo).abs() < (lo - phi).abs() && (hi - phi).abs() < (hi - plo).abs()
    });
    let mut evenness_defect: f64 = 0.0;
    for r in &rows {
        if let Some(m) = rows
            .iter()
            .find(|m| (m.beta + r.beta).abs() <= 1e-12 * (1.0 + r.beta.abs()))
        {
            let d = (r.measured.0 - m.measured.0)
                .abs()
                .max((r.measured.1 - m.measured.1).abs());
            evenness_defect = evenness_defect.max(d / reference);
        }
    }
    Ok(AvoidedCrossingSweep {
        h,
        coupling,
        reference,
        rows,
        max_deviation,
        ordering_ok,
        evenness_defect,
    })
}

/// Band diagram table: `eta, Lambda_1, …, Lambda_p`.
pub fn band_table(d: &BandDiagram) -> Table {
    let mut header = vec!["eta".to_string()];
    header.extend((1..=d.p_max).map(|p| format!("Lambda_{p}")));
    let mut t = Table::new(header);
    for (i, &eta) in d.eta_grid.iter().enumerate() {
        let mut row = vec![eta];
        row.extend(d.column(i));
        t.push(row);
    }
    t
}

fn h_label(h: f64) -> String {
    format!("{h}").replace('.', "p")
}

impl Experiment {
    pub fn new(loaded: LoadedConfig, out_dir: Option<PathBuf>, seed: Option<u64>) -> Self {
        let out_dir = out_dir.unwrap_or_else(|| loaded.config.output.directory.clone());
        let seed = seed.unwrap_or(loaded.config.seed);
        Self {
            config: loaded.config,
            config_hash: loaded.hash,
            out_dir,
            seed,
        }
    }

    pub fn from_path(path: &Path, out_dir: Option<PathBuf>, seed: Option<u64>) -> Result<Self> {
        Ok(Self::new(ExperimentConfig::load(path)?, out_dir, seed))
    }

    fn wants(&self, f: OutputFormat) -> bool {
        self.config.output.wants(f)
    }

    fn write_table(&self, stem: &str, table: &Table) -> Result<()> {
        if self.wants(OutputFormat::Csv) {
            output::write(&self.out_dir, &format!("{stem}.csv"), &table.to_csv())?;
        }
        if self.wants(OutputFormat::Dat) {
            output::write(&self.out_dir, &format!("{stem}.dat"), &table.to_dat())?;
        }
        Ok(())
    }

    fn write_report<T: Serialize>(&self, command: &str, result: &T) -> Result<()> {
        if !self.wants(OutputFormat::Json) {
            return Ok(());
        }
        let report = Report {
            command,
            config_hash: &self.config_hash,
            seed: self.seed,
            package: env!("CARGO_PKG_VERSION"),
            versions: module_versions(),
            result,
        };
        output::write_json(&self.out_dir, "report.json", &report)?;
        Ok(())
    }

    fn eigen_options(&self, tol: f64) -> EigenOptions {
        EigenOptions {
            tol,
            seed: self.seed,
            ..EigenOptions::default()
        }
    }

    /// Cross-section spectra on every configured resolution.
    pub fn analyze_cross_section(&self) -> Result<CrossSectionReport> {
        let cfg = &self.config;
        let opts = self.eigen_options(DEFAULT_TOL.min(cfg.solver.tol));
        let mut levels = Vec::new();
        let mut finest = None;
        for &res in &cfg.mesh.cross_section_resolutions {
            let mesh = build_cross_section_mesh(&cfg.cross_section, res)?;
            let s = solve_cross_section_with(&mesh, cfg.solver.cross_section_modes, &opts)?;
            info!("cross-section resolution {res}: M = {:?}", s.eigenvalues);
            levels.push(CrossSectionLevel {
                resolution: res,
                nodes: mesh.n_nodes(),
                eigenvalues: s.eigenvalues.clone(),
                normal_derivative: s.normal_derivative,
            });
            finest = Some(s);
        }
        let finest = finest.expect("validated nonempty");
        let extrapolated = (levels.len() >= 2).then(|| {
            let a = &levels[levels.len() - 2];
            let b = &levels[levels.len() - 1];
            let ratio = b.resolution as f64 / a.resolution as f64;
            a.eigenvalues
                .iter()
                .zip(&b.eigenvalues)
                .map(|(c, f)| richardson(*c, *f, ratio, 2.0))
                .collect::<Vec<_>>()
        });
        let values = extrapolated.as_ref().unwrap_or(&finest.eigenvalues);
        let (m1, m2) = (values[0], values[1]);
        let threshold = crate::cross_section::period_threshold(m1, m2);
        let mut spectrum = finest.clone();
        spectrum.period_threshold = threshold;
        Ok(CrossSectionReport {
            m1,
            m2,
            normal_derivative: finest.normal_derivative,
            gap_condition_ok: m1 + PI * PI < m2,
            period_threshold: threshold,
            unit_period_admissible: check_period_admissibility(&spectrum, 1.0)?.admissible,
            levels,
            extrapolated,
        })
    }

    pub fn polarization_options(&self) -> PolarizationOptions {
        let p = &self.config.polarization;
        PolarizationOptions {
            truncation_factor: p.truncation_factor,
            fit_factors: p.fit_factors.clone(),
            resolution: p.resolution,
        }
    }

    pub fn analyze_polarization(&self) -> Result<PolarizationResult> {
        compute_polarization(&self.config.cavern.shape, &self.polarization_options())
    }

    /// `cross-section` subcommand.
    pub fn run_cross_section(&self) -> Result<CrossSectionReport> {
        let report = self.analyze_cross_section()?;
        let modes = report.levels[0].eigenvalues.len();
        let mut header = vec!["resolution".to_string()];
        header.extend((1..=modes).map(|k| format!("M_{k}")));
        header.push("dnV1".into());
        let mut t = Table::new(header);
        for l in &report.levels {
            let mut row = vec![l.resolution as f64];
            row.extend(&l.eigenvalues);
            row.push(l.normal_derivative);
            t.push(row);
        }
        self.write_table("cross_section", &t)?;
        self.write_report("cross-section", &report)?;
        Ok(report)
    }

    /// `polarization` subcommand.
    pub fn run_polarization(&self) -> Result<PolarizationResult> {
        let result = self.analyze_polarization()?;
        let mut t = Table::new(["R", "M_R", "P_R"]);
        for ((r, m), (_, p)) in result.moment_samples.iter().zip(&result.radius_estimates) {
            t.push(vec![*r, *m, *p]);
        }
        self.write_table("polarization", &t)?;
        self.write_report("polarization", &result)?;
        Ok(result)
    }

    fn cell_problem(&self, h: Option<f64>) -> Result<CellProblem> {
        let cfg = &self.config;
        let cavern = h.map(|h| CavernSpec::new(cfg.cavern.shape, h)).transpose()?;
        let mesh = build_cell_mesh(
            &cfg.cross_section,
            cavern.as_ref(),
            cfg.mesh.cell_resolution,
            cfg.mesh.refinement_levels,
        )?;
        info!("cell mesh h = {:?}: {} nodes", h, mesh.n_nodes());
        Ok(CellProblem::new(&mesh)?.with_seed(self.seed))
    }

    fn eta_grid(&self, coupling: f64, h: f64) -> EtaGridSpec {
        let g = &self.config.eta_grid;
        if h > 0.0 {
            EtaGridSpec::refined(g.uniform, g.window_points, g.window_factor, coupling, h)
        } else {
            EtaGridSpec::uniform(g.uniform)
        }
    }

    fn merge_tolerance(&self, d: &BandDiagram) -> f64 {
        let top = d.lambdas.iter().flatten().copied().fold(0.0, f64::max);
        3.0 * self.config.solver.tol * top
    }

    fn diagram(&self, coupling: f64, h: Option<f64>) -> Result<(BandDiagram, GapReport)> {
        let cfg = &self.config;
        let problem = self.cell_problem(h)?;
        let grid = self.eta_grid(coupling, h.unwrap_or(0.0));
        let d = compute_band_diagram(&problem, &grid, cfg.solver.bands, cfg.solver.tol, cfg.eta_grid.mirror)?;
        let gaps = band_edges(&d, self.merge_tolerance(&d))?;
        if !gaps.collapsed_bands.is_empty() {
            warn!("bands {:?} have near-zero width at h = {:?}", gaps.collapsed_bands, h);
        }
        Ok((d, gaps))
    }

    fn gap_inputs(&self) -> Result<(CrossSectionReport, PolarizationResult, GapInputs, f64)> {
        let cs = self.analyze_cross_section()?;
        let pol = self.analyze_polarization()?;
        let inputs = GapInputs {
            m1: cs.m1,
            m2: cs.m2,
            p_theta: pol.p_theta,
            dn_v1: cs.normal_derivative,
        };
        let coupling = coupling_constant(pol.p_theta, cs.normal_derivative)?;
        Ok((cs, pol, inputs, coupling))
    }

    /// `bands` subcommand: the unperturbed diagram and one per cavern scale.
    pub fn run_bands(&self) -> Result<BandsReport> {
        let (_, _, inputs, coupling) = self.gap_inputs()?;
        let mut entries = Vec::new();
        for h in std::iter::once(None).chain(self.config.cavern.h.iter().copied().map(Some)) {
            let (diagram, gaps) = self.diagram(coupling, h)?;
            self.write_table(&format!("bands_h{}", h_label(h.unwrap_or(0.0))), &band_table(&diagram))?;
            let prediction = match h {
                Some(h) => match predict_gap(h, &inputs, 0.0) {
                    Ok(p) => Some(p),
                    Err(Error::NotAdmissible(m)) => {
                        warn!("{m}");
                        None
                    }
                    Err(e) => return Err(e),
                },
                None => None,
            };
            entries.push(BandsEntry {
                h: h.unwrap_or(0.0),
                diagram,
                gaps,
                prediction,
            });
        }
        let report = BandsReport { coupling, entries };
        self.write_report("bands", &report)?;
        Ok(report)
    }

    /// `gap-scan` subcommand: measured first gap against `2𝒫h³` over the
    /// configured scales, with power-law fits.
    pub fn run_gap_scan(&self) -> Result<ScalingStudyResult> {
        let (cs, pol, inputs, coupling) = self.gap_inputs()?;
        if !cs.gap_condition_ok {
            return Err(Error::NotAdmissible(format!(
                "M1 + pi^2 = {} is not below M2 = {}; no gap opens for this cross-section",
                cs.m1 + PI * PI,
                cs.m2
            )));
        }
        let mut rows = Vec::new();
        let mut first_error = None;
        for &h in &self.config.cavern.h {
            let predicted = predict_gap(h, &inputs, 0.0)?.predicted_gap_length;
            match self.diagram(coupling, Some(h)) {
                Ok((d, gaps)) => {
                    self.write_table(&format!("bands_h{}", h_label(h)), &band_table(&d))?;
                    let pi = d.eta_grid.iter().position(|&e| e == PI).expect("grid contains pi");
                    let above = gaps.gap_above_first_band();
                    let gap = gaps.gaps.first().copied();
                    let l = above.then(|| gap.map(|g| g.1 - g.0)).flatten();
                    info!("h = {h}: first gap {gap:?}, predicted length {predicted}");
                    rows.push(ScalingRow {
                        h,
                        l_measured: l,
                        l_predicted: predicted,
                        ratio: l.map(|l| l / predicted),
                        lambda1_pi: Some(d.lambdas[0][pi]),
                        lambda2_pi: Some(d.lambdas[1][pi]),
                        gap,
                        gap_above_first_band: above,
                        first_band: gaps.bands.first().copied(),
                        error: None,
                    });
                }
                Err(e) => {
                    warn!("h = {h} failed: {e}");
                    rows.push(ScalingRow {
                        h,
                        l_measured: None,
                        l_predicted: predicted,
                        ratio: None,
                        lambda1_pi: None,
                        lambda2_pi: None,
                        gap: None,
                        gap_above_first_band: false,
                        first_band: None,
                        error: Some(e.to_string()),
                    });
                    first_error.get_or_insert(e);
                }
            }
        }
        if rows.iter().all(|r| r.error.is_some()) {
            return Err(first_error.expect("at least one scale"));
        }
        let measured: Vec<&ScalingRow> = rows.iter().filter(|r| r.l_measured.is_some()).collect();
        let hs: Vec<f64> = measured.iter().map(|r| r.h).collect();
        let ls: Vec<f64> = measured.iter().filter_map(|r| r.l_measured).collect();
        let dev: Vec<f64> = measured
            .iter()
            .map(|r| (r.l_measured.unwrap() - r.l_predicted).abs())
            .collect();
        let (slope, remainder) = if measured.len() >= 3 {
            (loglog_fit(&hs, &ls), loglog_fit(&hs, &dev))
        } else {
            (None, None)
        };
        let triples: Vec<(f64, f64, f64)> = measured
            .iter()
            .map(|r| (r.h, r.l_measured.unwrap(), r.l_predicted))
            .collect();
        let result = ScalingStudyResult {
            m1: cs.m1,
            p_theta: pol.p_theta,
            normal_derivative: cs.normal_derivative,
            coupling,
            rows,
            slope,
            remainder,
            fitted_c_lambda: (!triples.is_empty()).then(|| fit_remainder_constant(&triples)),
        };
        self.write_table("scaling", &result.table())?;
        self.write_report("gap-scan", &result)?;
        Ok(result)
    }

    /// `verify` subcommand.
    pub fn run_verify(&self) -> Result<VerifyReport> {
        let report = verify::run(self)?;
        self.write_report("verify", &report)?;
        Ok(report)
    }
}
