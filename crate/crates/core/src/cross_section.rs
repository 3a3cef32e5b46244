//! The Dirichlet eigenproblem on the cross-section: eigenvalues `M_k`, the
//! normalized ground state `V₁`, its normal derivative at the anchor point
//! and the admissibility checks that depend on the first two eigenvalues.

use std::f64::consts::PI;

use faer::c64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{solve_lowest_with, BlochForms, EigenOptions, PointLocator};
use crate::geometry::{BoundaryTag, Mesh};

/// Default relative residual for the cross-section solves.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct CrossSectionSpectrum {
    /// Ascending eigenvalues `M₁ < M₂ ≤ …`.
    pub eigenvalues: Vec<f64>,
    /// Nodal values of the ground state, unit norm in the discrete `L²`
    /// inner product and positive inside.
    #[serde(skip)]
    pub ground_state: Vec<f64>,
    /// Outward normal derivative of the ground state at the anchor.
    pub normal_derivative: f64,
    /// `M₁ + π² < M₂`.
    pub gap_condition_ok: bool,
    /// Smallest admissible period `π (M₂ - M₁)^{-1/2}` (exclusive).
    pub period_threshold: f64,
}

impl CrossSectionSpectrum {
    pub fn m1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn m2(&self) -> f64 {
        self.eigenvalues[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodReport {
    pub period: f64,
    pub threshold: f64,
    pub admissible: bool,
}

/// Solves for the `count` lowest cross-section eigenpairs (`count ≥ 2`).
pub fn solve_cross_section(mesh: &Mesh, count: usize) -> Result<CrossSectionSpectrum> {
    solve_cross_section_with(
        mesh,
        count,
        &EigenOptions {
            tol: DEFAULT_TOL,
            ..EigenOptions::default()
        },
    )
}

pub fn solve_cross_section_with(mesh: &Mesh, count: usize, opts: &EigenOptions) -> Result<CrossSectionSpectrum> {
    if mesh.dimension() != 2 {
        return Err(Error::Precondition("cross-section meshes are two-dimensional".into()));
    }
    if count < 2 {
        return Err(Error::Precondition(format!(
            "at least two eigenvalues are needed, got {count}"
        )));
    }
    let forms = BlochForms::new(mesh, false, &[])?;
    let pencil = forms.pencil(None)?;
    let eig = solve_lowest_with(&pencil, count, opts)?;
    let nodal = forms.dofs().expand(&real_phase(&eig.vectors[0]), 0.0);
    let mut ground_state: Vec<f64> = nodal.iter().map(|v| v.re).collect();

    let centroid = mesh_centroid(mesh);
    let dirichlet = mesh.dirichlet_nodes();
    let probe = (0..mesh.n_nodes())
        .filter(|&i| !dirichlet[i])
        .min_by(|&a, &b| dist2(mesh.nodes[a], centroid).total_cmp(&dist2(mesh.nodes[b], centroid)))
        .ok_or_else(|| Error::Precondition("mesh has no interior nodes".into()))?;
    if ground_state[probe] < 0.0 {
        ground_state.iter_mut().for_each(|v| *v = -*v);
    }

    let m1 = eig.values[0];
    let m2 = eig.values[1];
    let anchor = mesh
        .anchor_node
        .ok_or_else(|| Error::Precondition("mesh carries no anchor node".into()))?;
    let p = mesh.nodes[anchor];
    let mut spectrum = CrossSectionSpectrum {
        eigenvalues: eig.values,
        ground_state,
        normal_derivative: f64::NAN,
        gap_condition_ok: m1 + PI * PI < m2,
        period_threshold: period_threshold(m1, m2),
    };
    spectrum.normal_derivative = normal_derivative_at(&spectrum, mesh, [p[0], p[1]])?;
    Ok(spectrum)
}

/// Rotates a complex eigenvector of a real pencil onto the real axis.
fn real_phase(u: &[c64]) -> Vec<c64> {
    let big = u
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        .unwrap_or(c64::new(1.0, 0.0));
    let rot = big.conj() / big.norm();
    u.iter().map(|v| c64::new((v * rot).re, 0.0)).collect()
}

fn mesh_centroid(mesh: &Mesh) -> [f64; 3] {
    let n = mesh.n_nodes() as f64;
    let mut c = [0.0; 3];
    for p in &mesh.nodes {
        for i in 0..3 {
            c[i] += p[i] / n;
        }
    }
    c
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

/// Outward normal derivative of the ground state at the boundary node `point`.
///
/// `V₁(t)/t` is sampled at `t = δ, 2δ, 3δ` along the inward normal, with `δ`
/// the adjacent boundary edge length, and the quadratic through the samples
/// is evaluated at `t = 0`.
pub fn normal_derivative_at(spectrum: &CrossSectionSpectrum, mesh: &Mesh, point: [f64; 2]) -> Result<f64> {
    if mesh.dimension() != 2 {
        return Err(Error::Precondition("cross-section meshes are two-dimensional".into()));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for q in &mesh.nodes {
        for i in 0..3 {
            lo[i] = lo[i].min(q[i]);
            hi[i] = hi[i].max(q[i]);
        }
    }
    let tol = 1e-10 * dist2(lo, hi).sqrt();
    let p = [point[0], point[1], 0.0];
    let node = (0..mesh.n_nodes())
        .find(|&i| dist2(mesh.nodes[i], p).sqrt() <= tol)
        .ok_or_else(|| Error::Precondition(format!("{point:?} is not a mesh node")))?;

    let mut normal = [0.0; 2];
    let mut delta = 0.0;
    let mut edges = 0;
    for (f, tag) in mesh.facets() {
        if tag != BoundaryTag::Dirichlet || !f.contains(&node) {
            continue;
        }
        let a = mesh.nodes[f[0]];
        let b = mesh.nodes[f[1]];
        let (tx, ty) = (b[0] - a[0], b[1] - a[1]);
        let len = tx.hypot(ty);
        // candidate normal, oriented below against the mesh interior
        normal[0] += ty / len;
        normal[1] -= tx / len;
        delta += len;
        edges += 1;
    }
    if edges == 0 {
        return Err(Error::Precondition(format!(
            "{point:?} is not on the Dirichlet boundary"
        )));
    }
    delta /= edges as f64;
    let len = normal[0].hypot(normal[1]);
    let mut inward = [normal[0] / len, normal[1] / len];
    let c = mesh_centroid(mesh);
    if inward[0] * (c[0] - p[0]) + inward[1] * (c[1] - p[1]) < 0.0 {
        inward = [-inward[0], -inward[1]];
    }

    let loc = PointLocator::new(mesh);
    let mut q = [0.0; 3];
    for (k, qk) in q.iter_mut().enumerate() {
        let t = (k + 1) as f64 * delta;
        let x = [p[0] + t * inward[0], p[1] + t * inward[1], 0.0];
        let v = loc
            .evaluate(&spectrum.ground_state, x)
            .ok_or_else(|| Error::Precondition(format!("normal probe {x:?} left the mesh")))?;
        *qk = v / t;
    }
    // Lagrange extrapolation of q(t) through t = δ, 2δ, 3δ to t = 0
    let slope = 3.0 * q[0] - 3.0 * q[1] + q[2];
    Ok(-slope)
}

pub fn period_threshold(m1: f64, m2: f64) -> f64 {
    PI / (m2 - m1).sqrt()
}

/// Whether the period `T` admits the gap: `T > π (M₂ - M₁)^{-1/2}`.
pub fn check_period_admissibility(spectrum: &CrossSectionSpectrum, period: f64) -> Result<PeriodReport> {
    if !(period > 0.0) {
        return Err(Error::Precondition(format!("period must be positive, got {period}")));
    }
    let threshold = spectrum.period_threshold;
    Ok(PeriodReport {
        period,
        threshold,
        admissible: period > threshold,
    })
}

/// One Richardson step for a quantity converging like `C·size^order`, given
/// the values on a coarse mesh and on one refined by `ratio`.
pub fn richardson(coarse: f64, fine: f64, ratio: f64, order: f64) -> f64 {
    let r = ratio.powf(order);
    (r * fine - coarse) / (r - 1.0)
}
