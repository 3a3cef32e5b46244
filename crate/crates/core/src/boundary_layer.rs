//! Exterior harmonic problem around the unit-scale cavern and the dipole
//! coefficient `P_θ` of its far field.
//!
//! The field `W` is harmonic in `{ξ₁ < 0} \ θ`, equals `-ξ₁` on the cavern
//! and vanishes on the flat face. Far away `W ≈ -P_θ ξ₁ / (2π |ξ|³)`, so the
//! hemispherical moment `∫ W ξ₁/R dS` over `|ξ| = R` tends to `-P_θ / 3`.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::{Mat, Side};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{element, laplace_system, PointLocator};
use crate::geometry::{build_fullspace_mesh, build_halfspace_mesh, BoundaryTag, CavernShape, ElementKind, Mesh};

/// Discrete solution of the exterior problem.
#[derive(Debug, Clone)]
pub struct ExteriorField {
    /// Nodal values, including the prescribed boundary values.
    pub values: Vec<f64>,
    /// Dirichlet energy `∫ |∇W|²` of the discrete field.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarizationResult {
    pub p_theta: f64,
    /// `(R, M_R)` with `M_R` the raw hemispherical moment.
    pub moment_samples: Vec<(f64, f64)>,
    /// `(R, P(R))` after the correction for the truncation sphere.
    pub radius_estimates: Vec<(f64, f64)>,
    pub extrapolated: bool,
    pub truncation_radius: f64,
    /// Root-mean-square residual of the fit in `1/R`.
    pub fit_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarizationOptions {
    /// Truncation radius as a multiple of the cavern's reference radius.
    pub truncation_factor: f64,
    /// Moment radii as multiples of the reference radius.
    pub fit_factors: Vec<f64>,
    pub resolution: usize,
}

impl Default for PolarizationOptions {
    fn default() -> Self {
        Self {
            truncation_factor: 8.0,
            fit_factors: vec![3.0, 4.0, 5.0],
            resolution: 8,
        }
    }
}

/// Solves for `W` on a half-space (or symmetrized full-space) mesh. The
/// truncation sphere carries `W = 0`; every other boundary node carries
/// `W = -ξ₁`.
pub fn solve_exterior(mesh: &Mesh) -> Result<ExteriorField> {
    if mesh.kind != ElementKind::Hex8 || mesh.truncation_radius.is_none() {
        return Err(Error::Precondition(
            "the exterior problem needs a truncated 3D half-space mesh".into(),
        ));
    }
    let dirichlet = mesh.dirichlet_nodes();
    let truncation = mesh.nodes_with_tag(BoundaryTag::Truncation);
    let g: Vec<f64> = mesh
        .nodes
        .iter()
        .enumerate()
        .map(|(i, p)| if dirichlet[i] && !truncation[i] { -p[0] } else { 0.0 })
        .collect();
    let extra: Vec<usize> = (0..mesh.n_nodes()).filter(|&i| truncation[i]).collect();
    let (k, rhs, dofs) = laplace_system(mesh, &g, &extra)?;

    let a = k.as_faer();
    let symbolic = SymbolicLlt::try_new(a.symbolic(), Side::Lower)
        .map_err(|e| Error::NumericalBreakdown(format!("symbolic factorization failed: {e:?}")))?;
    let llt = Llt::try_new_with_symbolic(symbolic, a, Side::Lower)
        .map_err(|e| Error::NumericalBreakdown(format!("exterior stiffness is not positive definite: {e:?}")))?;
    let mut x = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    llt.solve_in_place(x.as_mut());

    let values: Vec<f64> = (0..mesh.n_nodes())
        .map(|i| match dofs.dof(i) {
            Some(d) => x[(d, 0)],
            None => g[i],
        })
        .collect();
    let energy = dirichlet_energy(mesh, &values);
    Ok(ExteriorField { values, energy })
}

pub fn dirichlet_energy(mesh: &Mesh, values: &[f64]) -> f64 {
    (0..mesh.n_elements())
        .map(|e| {
            let el = mesh.element(e);
            let k: Vec<Vec<f64>> = match mesh.kind {
                ElementKind::Hex8 => element::hex_matrices(&mesh.hex_coords(e))
                    .0
                    .iter()
                    .map(|r| r.to_vec())
                    .collect(),
                ElementKind::Quad4 => element::quad_matrices(&mesh.quad_coords(e))
                    .0
                    .iter()
                    .map(|r| r.to_vec())
                    .collect(),
            };
            let mut s = 0.0;
            for (a, &na) in el.iter().enumerate() {
                for (b, &nb) in el.iter().enumerate() {
                    s += values[na] * k[a][b] * values[nb];
                }
            }
            s
        })
        .sum()
}

/// Moment `∫ W ξ₁/R dS` over `|ξ| = R, ξ₁ < 0` for a field given pointwise.
///
/// With `u = -ξ₁/R` the surface element is `R² du dφ`, so a midpoint rule in
/// `(u, φ)` integrates polynomials in `ξ₁` accurately.
pub fn hemisphere_moment(radius: f64, nodes: usize, mut field: impl FnMut([f64; 3]) -> Result<f64>) -> Result<f64> {
    let nu = nodes;
    let nphi = 2 * nodes;
    let du = 1.0 / nu as f64;
    let dphi = std::f64::consts::TAU / nphi as f64;
    let mut sum = 0.0;
    for i in 0..nu {
        let u = (i as f64 + 0.5) * du;
        let rho = (1.0 - u * u).sqrt();
        for j in 0..nphi {
            let phi = (j as f64 + 0.5) * dphi;
            let xi = [-radius * u, radius * rho * phi.cos(), radius * rho * phi.sin()];
            sum += field(xi)? * (-u);
        }
    }
    Ok(sum * radius * radius * du * dphi)
}

const MOMENT_NODES: usize = 48;

/// Fits `P(R) = P∞ + c/R` to the truncation-corrected moment estimates.
///
/// On a sphere of radius `R∞` with `W = 0`, a dipole is accompanied by the
/// image term `ξ₁/R∞³`, which scales the moment at radius `R` by
/// `1 - (R/R∞)³`; each estimate is divided by that factor before the fit.
pub fn extract_polarization(field: &ExteriorField, mesh: &Mesh, fit_radii: &[f64]) -> Result<PolarizationResult> {
    let r_inf = mesh
        .truncation_radius
        .ok_or_else(|| Error::Precondition("mesh has no truncation sphere".into()))?;
    if fit_radii.len() < 2 {
        return Err(Error::Precondition(format!(
            "at least two fit radii are needed, got {}",
            fit_radii.len()
        )));
    }
    let outer_layer = outer_layer_radius(mesh, r_inf);
    let r_cav = cavern_extent(mesh);
    for &r in fit_radii {
        if !(r > r_cav && r < outer_layer) {
            return Err(Error::Precondition(format!(
                "fit radius {r} must lie in ({r_cav}, {outer_layer})"
            )));
        }
    }
    let full = mesh.nodes.iter().any(|p| p[0] > 1e-12 * r_inf);
    let loc = PointLocator::new(mesh);
    let mut moment_samples = Vec::with_capacity(fit_radii.len());
    let mut radius_estimates = Vec::with_capacity(fit_radii.len());
    for &r in fit_radii {
        let m = hemisphere_moment(r, MOMENT_NODES, |xi| {
            loc.evaluate(&field.values, xi)
                .ok_or_else(|| Error::NumericalBreakdown(format!("moment point {xi:?} outside the mesh")))
        })?;
        let m = if full {
            // odd field: the mirrored hemisphere contributes the same moment
            let mirrored = hemisphere_moment(r, MOMENT_NODES, |xi| {
                let p = [-xi[0], xi[1], xi[2]];
                loc.evaluate(&field.values, p)
                    .map(|v| -v)
                    .ok_or_else(|| Error::NumericalBreakdown(format!("moment point {p:?} outside the mesh")))
            })?;
            0.5 * (m + mirrored)
        } else {
            m
        };
        moment_samples.push((r, m));
        radius_estimates.push((r, -3.0 * m / (1.0 - (r / r_inf).powi(3))));
    }
    let xs: Vec<f64> = radius_estimates.iter().map(|(r, _)| 1.0 / r).collect();
    let ys: Vec<f64> = radius_estimates.iter().map(|(_, p)| *p).collect();
    let (intercept, slope) = linear_fit(&xs, &ys);
    let fit_residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    Ok(PolarizationResult {
        p_theta: intercept,
        moment_samples,
        radius_estimates,
        extrapolated: true,
        truncation_radius: r_inf,
        fit_residual,
    })
}

fn cavern_extent(mesh: &Mesh) -> f64 {
    let dirichlet = mesh.dirichlet_nodes();
    mesh.nodes
        .iter()
        .enumerate()
        .filter(|(i, p)| dirichlet[*i] && p[0].abs() > 1e-12)
        .map(|(_, p)| norm3(*p))
        .fold(0.0, f64::max)
}

/// Radius below which the outermost element layer starts.
fn outer_layer_radius(mesh: &Mesh, r_inf: f64) -> f64 {
    let truncation = mesh.nodes_with_tag(BoundaryTag::Truncation);
    let mut inner = 0.0f64;
    for el in mesh.elements() {
        if el.iter().any(|&n| truncation[n]) {
            for &n in el {
                if !truncation[n] {
                    inner = inner.max(norm3(mesh.nodes[n]));
                }
            }
        }
    }
    if inner > 0.0 {
        inner
    } else {
        r_inf
    }
}

fn norm3(p: [f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// Least-squares line `y = a + b x`.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Meshes, solves and extracts `P_θ` for a unit-scale cavern.
pub fn compute_polarization(cavern: &CavernShape, opts: &PolarizationOptions) -> Result<PolarizationResult> {
    let r_ref = cavern.reference_radius();
    let mesh = build_halfspace_mesh(cavern, opts.truncation_factor * r_ref, opts.resolution)?;
    let field = solve_exterior(&mesh)?;
    let radii: Vec<f64> = opts.fit_factors.iter().map(|f| f * r_ref).collect();
    extract_polarization(&field, &mesh, &radii)
}

/// Same as [`compute_polarization`] on the symmetrized full-space mesh.
pub fn compute_polarization_symmetrized(
    cavern: &CavernShape,
    opts: &PolarizationOptions,
) -> Result<PolarizationResult> {
    let r_ref = cavern.reference_radius();
    let mesh = build_fullspace_mesh(cavern, opts.truncation_factor * r_ref, opts.resolution)?;
    let field = solve_exterior(&mesh)?;
    let radii: Vec<f64> = opts.fit_factors.iter().map(|f| f * r_ref).collect();
    extract_polarization(&field, &mesh, &radii)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn hemisphere(resolution: usize) -> (Mesh, ExteriorField) {
        let mesh = build_halfspace_mesh(&CavernShape::Hemisphere { radius: 1.0 }, 8.0, resolution).unwrap();
        let field = solve_exterior(&mesh).unwrap();
        (mesh, field)
    }

    #[test]
    fn exact_dipole_moment() {
        for r in [2.0, 3.5, 7.0] {
            let m = hemisphere_moment(r, 48, |xi| Ok(-xi[0] / norm3(xi).powi(3))).unwrap();
            assert!((m + 2.0 * PI / 3.0).abs() < 1e-3, "{m}");
        }
    }

    #[test]
    fn boundary_values_and_sign() {
        let (mesh, field) = hemisphere(4);
        let dirichlet = mesh.dirichlet_nodes();
        let truncation = mesh.nodes_with_tag(BoundaryTag::Truncation);
        for (i, p) in mesh.nodes.iter().enumerate() {
            if truncation[i] {
                assert_eq!(field.values[i], 0.0);
            } else if dirichlet[i] {
                assert_eq!(field.values[i], -p[0]);
            }
        }
        let min = field.values.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-10, "{min}");
    }

    #[test]
    fn energy_is_half_the_dipole_energy() {
        let (_, field) = hemisphere(6);
        let exact = 4.0 * PI / 3.0;
        assert!((field.energy - exact).abs() / exact < 0.05, "{}", field.energy);
    }

    #[test]
    fn hemisphere_polarization_and_scaling() {
        let opts = PolarizationOptions::default();
        let one = compute_polarization(&CavernShape::Hemisphere { radius: 1.0 }, &opts).unwrap();
        assert!((one.p_theta / (2.0 * PI) - 1.0).abs() < 0.05);
        assert!(one.extrapolated);
        let two = compute_polarization(&CavernShape::Hemisphere { radius: 2.0 }, &opts).unwrap();
        let ratio = two.p_theta / one.p_theta;
        assert!((7.2..=8.8).contains(&ratio), "{ratio}");
    }

    #[test]
    fn truncation_doubling_is_stable() {
        let near = compute_polarization(
            &CavernShape::Hemisphere { radius: 1.0 },
            &PolarizationOptions::default(),
        )
        .unwrap();
        let far = compute_polarization(
            &CavernShape::Hemisphere { radius: 1.0 },
            &PolarizationOptions {
                truncation_factor: 16.0,
                ..PolarizationOptions::default()
            },
        )
        .unwrap();
        assert!((far.p_theta / near.p_theta - 1.0).abs() < 0.02);
    }

    #[test]
    fn odd_extension_matches_half_space() {
        let opts = PolarizationOptions {
            resolution: 4,
            ..PolarizationOptions::default()
        };
        let c = CavernShape::Hemisphere { radius: 1.0 };
        let half = compute_polarization(&c, &opts).unwrap();
        let full = compute_polarization_symmetrized(&c, &opts).unwrap();
        assert!((half.p_theta - full.p_theta).abs() < 1e-8 * half.p_theta);
    }

    #[test]
    fn box_cavern_is_positive() {
        let c = CavernShape::Box {
            half_extents: [0.5, 1.0, 0.5],
        };
        let p = compute_polarization(
            &c,
            &PolarizationOptions {
                resolution: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(p.p_theta > 0.0);
    }

    #[test]
    fn fit_radii_are_checked() {
        let (mesh, field) = hemisphere(3);
        assert!(matches!(
            extract_polarization(&field, &mesh, &[3.0]),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            extract_polarization(&field, &mesh, &[3.0, 7.99]),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            extract_polarization(&field, &mesh, &[0.5, 3.0]),
            Err(Error::Precondition(_))
        ));
    }
}
