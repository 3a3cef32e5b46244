use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{CavernShape, CrossSectionShape, H_MAX};

/// Version of the configuration format understood by this build.
pub const CONFIG_VERSION: u32 = 1;

/// Declarative description of an experiment, read from TOML.
///
/// ```toml
/// version = 1
/// seed = 24301
///
/// [cross_section]
/// kind = "rectangle"
/// width = 1.0
/// height = 1.0
/// anchor = [0.5, 0.0]
///
/// [cavern]
/// shape = "hemisphere"
/// radius = 1.0
/// h = [0.15, 0.2, 0.25, 0.3]
/// ```
///
/// Every other table is optional and falls back to the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub cross_section: CrossSectionShape,
    pub cavern: CavernConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub eta_grid: EtaGridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub polarization: PolarizationConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn default_seed() -> u64 {
    0x5eed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavernConfig {
    #[serde(flatten)]
    pub shape: CavernShape,
    /// Cavern scales, ascending.
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    /// Cross-section resolutions, ascending; the last two feed the
    /// Richardson step.
    pub cross_section_resolutions: Vec<usize>,
    pub cell_resolution: usize,
    pub refinement_levels: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            cross_section_resolutions: vec![32, 64],
            cell_resolution: 16,
            refinement_levels: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EtaGridConfig {
    pub uniform: usize,
    pub window_points: usize,
    /// Window half width in units of `𝒫h³/(2π)`.
    pub window_factor: f64,
    /// Solve only `η ≤ π` and mirror the rest.
    pub mirror: bool,
}

impl Default for EtaGridConfig {
    fn default() -> Self {
        Self {
            uniform: 32,
            window_points: 17,
            window_factor: 4.0,
            mirror: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    /// Number of bands per cell solve.
    pub bands: usize,
    /// Number of cross-section eigenvalues.
    pub cross_section_modes: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            bands: 3,
            cross_section_modes: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolarizationConfig {
    pub truncation_factor: f64,
    pub fit_factors: Vec<f64>,
    pub resolution: usize,
}

impl Default for PolarizationConfig {
    fn default() -> Self {
        Self {
            truncation_factor: 8.0,
            fit_factors: vec![3.0, 4.0, 5.0],
            resolution: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Dat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json, OutputFormat::Dat],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    CouplingIdentities,
    CrossSection,
    Polarization,
    Dispersion,
    Symmetry,
    Bracketing,
    AvoidedCrossing,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::CouplingIdentities,
        Check::CrossSection,
        Check::Polarization,
        Check::Dispersion,
        Check::Symmetry,
        Check::Bracketing,
        Check::AvoidedCrossing,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub checks: Vec<Check>,
    /// Cavern scale for the cell checks; defaults to the middle of the list.
    pub h: Option<f64>,
    /// Uniform grid size of the cell checks.
    pub eta_points: usize,
    /// Shared-mesh bracketing slack in units of `tol · Λ`.
    pub bracketing_budget: f64,
    /// Relative slack when the unperturbed problem is discretized on its own
    /// mesh and compared with the perturbed one.
    pub discretization_budget: f64,
    /// Relative tolerance of the unperturbed dispersion check.
    pub dispersion_tol: f64,
    /// Relative tolerance of the polarization oracle.
    pub polarization_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            checks: Check::ALL.to_vec(),
            h: None,
            eta_points: 8,
            bracketing_budget: 10.0,
            discretization_budget: 1e-2,
            dispersion_tol: 5e-3,
            polarization_tol: 0.05,
        }
    }
}

/// A parsed configuration with the digest of its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub hash: String,
    pub source: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut loaded = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })?;
        loaded.source = Some(path.to_path_buf());
        Ok(loaded)
    }

    pub fn parse(text: &str) -> Result<LoadedConfig> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(LoadedConfig {
            config,
            hash: hex::encode(Sha256::digest(text.as_bytes())),
            source: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        self.cross_section
            .validate()
            .map_err(|e| Error::Config(format!("cross_section: {e}")))?;
        self.cavern
            .shape
            .validate()
            .map_err(|e| Error::Config(format!("cavern: {e}")))?;
        if self.cavern.h.is_empty() {
            return bad("cavern.h must list at least one scale".into());
        }
        if self.cavern.h.iter().any(|h| !(*h > 0.0 && *h <= H_MAX)) {
            return bad(format!("cavern.h values must lie in (0, {H_MAX}]"));
        }
        if self.cavern.h.windows(2).any(|w| w[0] >= w[1]) {
            return bad("cavern.h must be strictly ascending".into());
        }
        let m = &self.mesh;
        if m.cross_section_resolutions.is_empty() || m.cross_section_resolutions.iter().any(|r| *r < 2) {
            return bad("mesh.cross_section_resolutions must be nonempty with entries >= 2".into());
        }
        if m.cross_section_resolutions.windows(2).any(|w| w[0] >= w[1]) {
            return bad("mesh.cross_section_resolutions must be strictly ascending".into());
        }
        if m.cell_resolution < 2 {
            return bad("mesh.cell_resolution must be at least 2".into());
        }
        let g = &self.eta_grid;
        if g.uniform < 8 || !g.uniform.is_multiple_of(2) {
            return bad("eta_grid.uniform must be even and at least 8 so that pi is a grid point".into());
        }
        if !(g.window_factor > 0.0) {
            return bad("eta_grid.window_factor must be positive".into());
        }
        let s = &self.solver;
        if !(s.tol > 0.0) || s.bands < 2 || s.cross_section_modes < 2 {
            return bad("solver.tol must be positive, solver.bands and solver.cross_section_modes at least 2".into());
        }
        let p = &self.polarization;
        if !(p.truncation_factor > 0.0) || p.fit_factors.len() < 2 || p.fit_factors.iter().any(|f| !(*f > 0.0)) {
            return bad("polarization needs a positive truncation_factor and at least two positive fit_factors".into());
        }
        if p.resolution < 2 {
            return bad("polarization.resolution must be at least 2".into());
        }
        let v = &self.verify;
        if v.eta_points < 8 || !v.eta_points.is_multiple_of(2) {
            return bad("verify.eta_points must be even and at least 8".into());
        }
        if let Some(h) = v.h {
            if !(h > 0.0 && h <= H_MAX) {
                return bad(format!("verify.h must lie in (0, {H_MAX}]"));
            }
        }
        for (name, x) in [
            ("bracketing_budget", v.bracketing_budget),
            ("discretization_budget", v.discretization_budget),
            ("dispersion_tol", v.dispersion_tol),
            ("polarization_tol", v.polarization_tol),
        ] {
            if !(x > 0.0) {
                return bad(format!("verify.{name} must be positive"));
            }
        }
        Ok(())
    }

    /// Cavern scale used by the verification checks.
    pub fn verify_h(&self) -> f64 {
        self.verify.h.unwrap_or(self.cavern.h[self.cavern.h.len() / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1

[cross_section]
kind = "rectangle"
width = 1.0
height = 1.0
anchor = [0.5, 0.0]

[cavern]
shape = "hemisphere"
radius = 1.0
h = [0.15, 0.2]
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.config.mesh, MeshConfig::default());
        assert_eq!(c.config.cavern.shape, CavernShape::Hemisphere { radius: 1.0 });
        assert_eq!(c.config.seed, 0x5eed);
        assert_eq!(c.hash.len(), 64);
        assert_eq!(c.config.verify_h(), 0.2);
    }

    #[test]
    fn parse_errors_carry_a_location() {
        let err = ExperimentConfig::parse("version = 1\n[cross_section\n").unwrap_err();
        match err {
            Error::Config(m) => assert!(m.contains("line 2"), "{m}"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        for (from, to) in [
            ("h = [0.15, 0.2]", "h = [0.2, 0.15]"),
            ("h = [0.15, 0.2]", "h = [0.15, 0.6]"),
            ("version = 1", "version = 2"),
            ("radius = 1.0", "radius = -1.0"),
        ] {
            let text = MINIMAL.replace(from, to);
            assert!(matches!(ExperimentConfig::parse(&text), Err(Error::Config(_))), "{to}");
        }
        let unknown = format!("{MINIMAL}\n[solver]\ntolerance = 1e-8\n");
        assert!(matches!(ExperimentConfig::parse(&unknown), Err(Error::Config(_))));
    }
}
