//! Closed-form leading-order predictions near the double eigenvalue
//! `M₁ + π²` at `η = π`.
//!
//! With `η = π + βh³` the two lowest cell eigenvalues split as
//! `M₁ + π² + h³ λ±(β)`, where `λ±` are the eigenvalues of the 2×2 coupling
//! matrix built from the coupling constant `𝒫 = P_θ |∂ₙV₁(O')|²`.

use std::f64::consts::PI;

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_BETA0: f64 = 0.5;
pub const DEFAULT_H0: f64 = 0.3;

/// `𝒫 = P_θ · (∂ₙV₁)²`.
pub fn coupling_constant(p_theta: f64, dn_v1: f64) -> Result<f64> {
    if !(p_theta > 0.0) {
        return Err(Error::Precondition(format!(
            "polarization coefficient must be positive, got {p_theta}"
        )));
    }
    if dn_v1 == 0.0 || !dn_v1.is_finite() {
        return Err(Error::Precondition(format!(
            "normal derivative must be nonzero, got {dn_v1}"
        )));
    }
    Ok(p_theta * dn_v1 * dn_v1)
}

/// The coupling matrix at one `β` with its closed-form spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingMatrix {
    pub beta: f64,
    pub coupling: f64,
    pub matrix: [[f64; 2]; 2],
    /// `(λ₋, λ₊) = 𝒫 ∓ √(𝒫² + 4π²β²)`.
    pub eigenvalues: [f64; 2],
    /// Unit eigenvectors `[a⁻, a⁺]`.
    pub eigenvectors: [[f64; 2]; 2],
}

impl CouplingMatrix {
    pub fn trace(&self) -> f64 {
        self.matrix[0][0] + self.matrix[1][1]
    }

    pub fn determinant(&self) -> f64 {
        self.matrix[0][0] * self.matrix[1][1] - self.matrix[0][1] * self.matrix[1][0]
    }
}

fn discriminant(beta: f64, p: f64) -> f64 {
    p.hypot(2.0 * PI * beta)
}

pub fn coupling_matrix(beta: f64, p: f64) -> Result<CouplingMatrix> {
    if !(p > 0.0) {
        return Err(Error::Precondition(format!(
            "coupling constant must be positive, got {p}"
        )));
    }
    let b = 2.0 * PI * beta;
    let s = discriminant(beta, p);
    // second components -b ± s, written without cancellation
    let plus = if b > 0.0 { p * p / (s + b) } else { s - b };
    let minus = if b < 0.0 { -p * p / (s - b) } else { -(s + b) };
    let unit = |v: [f64; 2]| {
        let n = v[0].hypot(v[1]);
        [v[0] / n, v[1] / n]
    };
    Ok(CouplingMatrix {
        beta,
        coupling: p,
        matrix: [[b + p, p], [p, -b + p]],
        // p - s without cancellation
        eigenvalues: [-b * b / (p + s), p + s],
        eigenvectors: [unit([p, minus]), unit([p, plus])],
    })
}

/// Largest `|β|` of the validity window `|β| ≤ β₀ h^{-5/4}`.
pub fn beta_window(h: f64, beta0: f64) -> f64 {
    beta0 * h.powf(-1.25)
}

/// Main terms `(Λ₋, Λ₊)` at `η = π + βh³`.
pub fn predict_eigenvalues(h: f64, beta: f64, m1: f64, p: f64) -> Result<(f64, f64)> {
    if !(h > 0.0) {
        return Err(Error::Precondition(format!("cavern scale must be positive, got {h}")));
    }
    if h > DEFAULT_H0 {
        warn!("h = {h} exceeds h0 = {DEFAULT_H0}; the leading-order prediction degrades");
    }
    if beta.abs() > beta_window(h, DEFAULT_BETA0) {
        warn!("beta = {beta} lies outside the validity window at h = {h}");
    }
    let c = coupling_matrix(beta, p)?;
    let base = m1 + PI * PI;
    let h3 = h.powi(3);
    Ok((base + h3 * c.eigenvalues[0], base + h3 * c.eigenvalues[1]))
}

/// First-order shift of a simple eigenvalue away from `η = π`, equal for
/// both branches.
pub fn simple_point_correction(p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Precondition(format!(
            "coupling constant must be positive, got {p}"
        )));
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticPrediction {
    pub m1: f64,
    pub p_theta: f64,
    pub dn_v1: f64,
    pub coupling: f64,
    pub h: f64,
    pub beta0: f64,
    /// Largest `|β|` of the validity window.
    pub beta_window: f64,
    /// Nominal gap `(M₁ + π², M₁ + π² + 2𝒫h³)`.
    pub predicted_gap: (f64, f64),
    pub predicted_gap_length: f64,
    pub c_lambda: f64,
    /// Nominal gap shrunk by `C_Λ h^{7/2}` at both ends; `None` when that
    /// leaves nothing.
    pub certified_window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapInputs {
    pub m1: f64,
    pub m2: f64,
    pub p_theta: f64,
    pub dn_v1: f64,
}

/// Predicted gap above the first band for cavern scale `h`.
pub fn predict_gap(h: f64, inputs: &GapInputs, c_lambda: f64) -> Result<AsymptoticPrediction> {
    if !(h > 0.0) {
        return Err(Error::Precondition(format!("cavern scale must be positive, got {h}")));
    }
    if !(inputs.m1 + PI * PI < inputs.m2) {
        return Err(Error::NotAdmissible(format!(
            "M1 + pi^2 = {} is not below M2 = {}: the first bands overlap and no gap opens",
            inputs.m1 + PI * PI,
            inputs.m2
        )));
    }
    let p = coupling_constant(inputs.p_theta, inputs.dn_v1)?;
    let lo = inputs.m1 + PI * PI;
    let length = 2.0 * p * h.powi(3);
    let shrink = c_lambda * h.powf(3.5);
    let certified = (lo + shrink < lo + length - shrink).then_some((lo + shrink, lo + length - shrink));
    Ok(AsymptoticPrediction {
        m1: inputs.m1,
        p_theta: inputs.p_theta,
        dn_v1: inputs.dn_v1,
        coupling: p,
        h,
        beta0: DEFAULT_BETA0,
        beta_window: beta_window(h, DEFAULT_BETA0),
        predicted_gap: (lo, lo + length),
        predicted_gap_length: length,
        c_lambda,
        certified_window: certified,
    })
}

/// Smallest `C` with `|measured - predicted| ≤ C h^{7/2}` over the rows
/// `(h, measured, predicted)`.
pub fn fit_remainder_constant(rows: &[(f64, f64, f64)]) -> f64 {
    rows.iter()
        .map(|(h, m, p)| (m - p).abs() / h.powf(3.5))
        .fold(0.0, f64::max)
}
