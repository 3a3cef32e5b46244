//! Quasi-periodic cell problems over a grid of Floquet parameters, band
//! segments and gap detection.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{solve_lowest_with, BlochForms, EigenOptions, EigenResult};
use crate::geometry::Mesh;

/// The forms of one cell mesh, reused for every Floquet parameter.
#[derive(Debug)]
pub struct CellProblem {
    forms: BlochForms,
    h: f64,
    seed: u64,
}

impl CellProblem {
    /// The cell problem of `mesh`. On a filled cell mesh the cavern closure is
    /// constrained, which reproduces the perforated cell.
    pub fn new(mesh: &Mesh) -> Result<Self> {
        Self::build(mesh, &mesh.cavern_closure_nodes)
    }

    /// The unperturbed problem on the same discretization: the cavern of a
    /// filled cell mesh is left unconstrained.
    pub fn released(mesh: &Mesh) -> Result<Self> {
        let mut p = Self::build(mesh, &[])?;
        p.h = 0.0;
        Ok(p)
    }

    fn build(mesh: &Mesh, extra: &[usize]) -> Result<Self> {
        if mesh.dimension() != 3 || mesh.periodic_pairing.is_empty() {
            return Err(Error::Precondition(
                "cell problems need a 3D mesh with periodic pairing".into(),
            ));
        }
        let h = mesh.cavern.map(|(c, _)| c.h).unwrap_or(0.0);
        Ok(Self {
            forms: BlochForms::new(mesh, true, extra)?,
            h,
            seed: EigenOptions::default().seed,
        })
    }

    /// Seed of the eigensolver start vectors.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Cavern scale, zero for an unperturbed problem.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_free(&self) -> usize {
        self.forms.dofs().n_free()
    }

    pub fn eigenpairs(&self, eta: f64, count: usize, tol: f64) -> Result<EigenResult> {
        let pencil = self.forms.pencil(Some(eta))?;
        let opts = EigenOptions {
            tol,
            seed: self.seed,
            ..EigenOptions::default()
        };
        solve_lowest_with(&pencil, count, &opts)
    }

    /// The `count` lowest eigenvalues at `eta`, ascending.
    pub fn solve(&self, eta: f64, count: usize, tol: f64) -> Result<Vec<f64>> {
        Ok(self.eigenpairs(eta, count, tol)?.values)
    }
}

/// Lowest `count` eigenvalues of the cell problem of `mesh` at `eta`.
pub fn solve_cell(mesh: &Mesh, eta: f64, count: usize, tol: f64) -> Result<Vec<f64>> {
    CellProblem::new(mesh)?.solve(eta, count, tol)
}

/// Floquet parameter grid: `uniform` points on `[0, 2π)` plus a symmetric
/// window of `window_points` around `π`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaGridSpec {
    pub uniform: usize,
    pub window_points: usize,
    /// Half width of the window in `η`.
    pub window_half_width: f64,
}

/// Largest half width of the refinement window.
pub const MAX_WINDOW_HALF_WIDTH: f64 = PI / 4.0;

impl EtaGridSpec {
    pub fn uniform(points: usize) -> Self {
        Self {
            uniform: points,
            window_points: 0,
            window_half_width: 0.0,
        }
    }

    /// Grid refined over `|η - π| ≤ factor·𝒫h³/(2π)`, clipped to
    /// [`MAX_WINDOW_HALF_WIDTH`].
    pub fn refined(uniform: usize, window_points: usize, factor: f64, coupling: f64, h: f64) -> Self {
        let w = factor * coupling * h.powi(3) / TAU;
        Self {
            uniform,
            window_points,
            window_half_width: w.min(MAX_WINDOW_HALF_WIDTH),
        }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        if self.uniform < 2 {
            return Err(Error::Precondition("the uniform grid needs at least 2 points".into()));
        }
        let mut eta: Vec<f64> = (0..self.uniform)
            .map(|i| TAU * i as f64 / self.uniform as f64)
            .collect();
        if self.window_points >= 2 && self.window_half_width > 0.0 {
            let n = self.window_points - 1;
            eta.extend(
                (0..=n).map(|i| PI - self.window_half_width + 2.0 * self.window_half_width * i as f64 / n as f64),
            );
        }
        eta.sort_by(f64::total_cmp);
        eta.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
        if eta.len() < 8 {
            return Err(Error::Precondition(format!(
                "grid has {} points, at least 8 are needed",
                eta.len()
            )));
        }
        if !eta.iter().any(|&e| (e - PI).abs() <= 1e-14) {
            return Err(Error::Precondition("grid must contain eta = pi".into()));
        }
        Ok(eta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandDiagram {
    pub eta_grid: Vec<f64>,
    /// `lambdas[p][i]` is the `(p+1)`-th eigenvalue at `eta_grid[i]`.
    pub lambdas: Vec<Vec<f64>>,
    pub h: f64,
    pub p_max: usize,
    /// Largest relative residual over all solves.
    pub max_residual: f64,
}

impl BandDiagram {
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.lambdas.iter().map(|band| band[i]).collect()
    }

    /// Largest `|Λ_p(η) - Λ_p(2π - η)|` over grid points whose mirror image
    /// is also on the grid.
    pub fn conjugation_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, &e) in self.eta_grid.iter().enumerate() {
            let mirror = (TAU - e) % TAU;
            if let Some(j) = self.eta_grid.iter().position(|&f| (f - mirror).abs() <= 1e-12) {
                for band in &self.lambdas {
                    worst = worst.max((band[i] - band[j]).abs());
                }
            }
        }
        worst
    }
}

/// Solves the cell problem over the grid in parallel.
///
/// With `mirror` set, only points with `η ≤ π` are solved and the others
/// take the values of their mirror image `2π - η`, which the quasi-periodic
/// forms satisfy exactly (complex conjugation).
pub fn compute_band_diagram(
    problem: &CellProblem,
    grid: &EtaGridSpec,
    p_max: usize,
    tol: f64,
    mirror: bool,
) -> Result<BandDiagram> {
    let eta_grid = grid.points()?;
    let source: Vec<usize> = eta_grid
        .iter()
        .map(|&e| {
            if mirror && e > PI {
                let m = TAU - e;
                eta_grid
                    .iter()
                    .position(|&f| (f - m).abs() <= 1e-12)
                    .unwrap_or_else(|| eta_grid.iter().position(|&f| f == e).unwrap())
            } else {
                eta_grid.iter().position(|&f| f == e).unwrap()
            }
        })
        .collect();
    let mut needed: Vec<usize> = source.clone();
    needed.sort_unstable();
    needed.dedup();
    let solved: Vec<(usize, EigenResult)> = needed
        .par_iter()
        .map(|&i| problem.eigenpairs(eta_grid[i], p_max, tol).map(|r| (i, r)))
        .collect::<Result<_>>()?;
    let lookup = |i: usize| &solved[solved.binary_search_by_key(&i, |(j, _)| *j).unwrap()].1;
    let mut lambdas = vec![Vec::with_capacity(eta_grid.len()); p_max];
    let mut max_residual: f64 = 0.0;
    for &s in &source {
        let r = lookup(s);
        for (p, band) in lambdas.iter_mut().enumerate() {
            band.push(r.values[p]);
        }
        max_residual = r.residuals.iter().copied().fold(max_residual, f64::max);
    }
    Ok(BandDiagram {
        eta_grid,
        lambdas,
        h: problem.h(),
        p_max,
        max_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    /// Band segments `[Λ_p⁻, Λ_p⁺]`.
    pub bands: Vec<(f64, f64)>,
    /// Open gaps between the merged bands, ascending.
    pub gaps: Vec<(f64, f64)>,
    pub first_gap_length: Option<f64>,
    /// Bands narrower than the merge tolerance.
    pub collapsed_bands: Vec<usize>,
    pub merge_tolerance: f64,
}

impl GapReport {
    /// Whether the first gap starts at the top of the first band.
    pub fn gap_above_first_band(&self) -> bool {
        match (self.bands.first(), self.gaps.first()) {
            (Some(b), Some(g)) => g.0 == b.1,
            _ => false,
        }
    }
}

/// Band segments from grid extrema and the gaps between their union.
///
/// Bands that overlap or are separated by at most `merge_tolerance` are
/// merged before the complement is taken.
pub fn band_edges(diagram: &BandDiagram, merge_tolerance: f64) -> Result<GapReport> {
    if diagram.lambdas.is_empty() || diagram.eta_grid.is_empty() {
        return Err(Error::Precondition("empty band diagram".into()));
    }
    let bands: Vec<(f64, f64)> = diagram
        .lambdas
        .iter()
        .map(|band| {
            band.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
        })
        .collect();
    Ok(gaps_from_bands(bands, merge_tolerance))
}

pub fn gaps_from_bands(bands: Vec<(f64, f64)>, merge_tolerance: f64) -> GapReport {
    let collapsed_bands = bands
        .iter()
        .enumerate()
        .filter(|(_, (lo, hi))| hi - lo <= merge_tolerance)
        .map(|(p, _)| p)
        .collect();
    let mut sorted = bands.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in sorted {
        match merged.last_mut() {
            Some(last) if lo <= last.1 + merge_tolerance => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    let gaps: Vec<(f64, f64)> = merged.windows(2).map(|w| (w[0].1, w[1].0)).collect();
    GapReport {
        first_gap_length: gaps.first().map(|g| g.1 - g.0),
        bands,
        gaps,
        collapsed_bands,
        merge_tolerance,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketingReport {
    /// `Λ_p⁰ ≤ Λ_pʰ + budget` at every grid point.
    pub lower_bound_holds: bool,
    /// Largest `Λ_p⁰ - Λ_pʰ` seen (negative when the bound holds strictly).
    pub max_violation: f64,
    pub budget: f64,
    /// Empirical `C_p = max_η (Λ_pʰ - Λ_p⁰) / h³`; `None` at `h = 0`.
    pub constants: Vec<Option<f64>>,
}

/// Checks `Λ_p⁰(η) ≤ Λ_pʰ(η) ≤ Λ_p⁰(η) + C_p h³` pointwise and records `C_p`.
pub fn check_bracketing(perturbed: &BandDiagram, unperturbed: &BandDiagram, budget: f64) -> Result<BracketingReport> {
    if perturbed.eta_grid != unperturbed.eta_grid || perturbed.p_max != unperturbed.p_max {
        return Err(Error::Precondition("bracketing needs diagrams on the same grid".into()));
    }
    let h3 = perturbed.h.powi(3);
    let mut max_violation = f64::NEG_INFINITY;
    let mut constants = Vec::with_capacity(perturbed.p_max);
    for (ph, p0) in perturbed.lambdas.iter().zip(&unperturbed.lambdas) {
        let mut c: f64 = 0.0;
        for (a, b) in ph.iter().zip(p0) {
            max_violation = max_violation.max(b - a);
            c = c.max(a - b);
        }
        constants.push((h3 > 0.0).then(|| c / h3));
    }
    Ok(BracketingReport {
        lower_bound_holds: max_violation <= budget,
        max_violation,
        budget,
        constants,
    })
}

/// Unperturbed dispersion `M + (η - 2πq)²` folded into `[0, 2π)`: the
/// `count` lowest values over the cross-section eigenvalues `m`.
pub fn folded_dispersion(m: &[f64], eta: f64, count: usize) -> Vec<f64> {
    let mut v: Vec<f64> = m
        .iter()
        .flat_map(|&mk| (-3..=3).map(move |q| mk + (eta - TAU * q as f64).powi(2)))
        .collect();
    v.sort_by(f64::total_cmp);
    v.truncate(count);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_cell_mesh, CrossSectionShape};
    use proptest::prelude::*;

    #[test]
    fn interval_example() {
        let r = gaps_from_bands(vec![(10.0, 20.0), (18.0, 30.0), (35.0, 40.0)], 1e-9);
        assert_eq!(r.gaps, vec![(30.0, 35.0)]);
        assert_eq!(r.first_gap_length, Some(5.0));
        assert!(r.collapsed_bands.is_empty());
    }

    #[test]
    fn hairline_gaps_are_merged_and_points_flagged() {
        let r = gaps_from_bands(vec![(1.0, 2.0), (2.0 + 1e-10, 3.0), (5.0, 5.0)], 1e-9);
        assert_eq!(r.gaps, vec![(3.0, 5.0)]);
        assert_eq!(r.collapsed_bands, vec![2]);
    }

    #[test]
    fn grid_contains_pi_and_window() {
        let g = EtaGridSpec::refined(32, 17, 4.0, 8.0 * PI.powi(3), 0.1)
            .points()
            .unwrap();
        assert!(g.contains(&PI));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g.iter().all(|&e| (0.0..TAU).contains(&e)));
        assert_eq!(g.len(), 32 + 17 - 1);
        assert!(EtaGridSpec::uniform(33).points().is_err());
        assert!(EtaGridSpec::uniform(4).points().is_err());
    }

    #[test]
    fn folded_parabolas_touch() {
        let m = [2.0 * PI * PI, 5.0 * PI * PI];
        let at_pi = folded_dispersion(&m, PI, 2);
        assert!((at_pi[0] - at_pi[1]).abs() < 1e-12);
        let at_zero = folded_dispersion(&m[..1], 0.0, 3);
        assert!((at_zero[1] - at_zero[2]).abs() < 1e-12);
    }

    #[test]
    fn unperturbed_cell_matches_dispersion() {
        let mesh = build_cell_mesh(&CrossSectionShape::unit_square(), None, 6, 0).unwrap();
        let problem = CellProblem::new(&mesh).unwrap();
        let d = compute_band_diagram(&problem, &EtaGridSpec::uniform(8), 3, 1e-9, false).unwrap();
        assert!(d.conjugation_defect() < 1e-8 * d.lambdas[2][0]);
        for i in 0..d.eta_grid.len() {
            let col = d.column(i);
            assert!(col.windows(2).all(|w| w[0] <= w[1]));
            let exact = folded_dispersion(&[2.0 * PI * PI], d.eta_grid[i], 1)[0];
            assert!((col[0] - exact).abs() / exact < 0.05);
        }
        let report = band_edges(&d, 3e-9 * d.lambdas[2][0]).unwrap();
        assert!(report.gaps.iter().all(|g| g.0 > 3.0 * PI * PI + 1.0));
        let again = check_bracketing(&d, &d, 0.0).unwrap();
        assert!(again.lower_bound_holds);
        assert_eq!(again.max_violation, 0.0);
        assert!(again.constants.iter().all(Option::is_none));
    }

    #[test]
    fn gauge_periodicity() {
        let mesh = build_cell_mesh(&CrossSectionShape::unit_square(), None, 5, 0).unwrap();
        let problem = CellProblem::new(&mesh).unwrap();
        let a = problem.solve(1.1, 3, 1e-10).unwrap();
        let b = problem.solve(1.1 + TAU, 3, 1e-10).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-8 * x);
        }
    }

    #[test]
    fn mirrored_diagram_matches_full_solve() {
        let mesh = build_cell_mesh(&CrossSectionShape::unit_square(), None, 4, 0).unwrap();
        let problem = CellProblem::new(&mesh).unwrap();
        let full = compute_band_diagram(&problem, &EtaGridSpec::uniform(8), 2, 1e-10, false).unwrap();
        let half = compute_band_diagram(&problem, &EtaGridSpec::uniform(8), 2, 1e-10, true).unwrap();
        for (a, b) in full.lambdas.iter().flatten().zip(half.lambdas.iter().flatten()) {
            assert!((a - b).abs() < 1e-8 * a);
        }
    }

    proptest! {
        #[test]
        fn gaps_are_disjoint_from_bands(raw in prop::collection::vec((0.0f64..100.0, 0.0f64..10.0), 1..8)) {
            let bands: Vec<(f64, f64)> = raw.iter().map(|(a, w)| (*a, a + w)).collect();
            let r = gaps_from_bands(bands.clone(), 1e-9);
            for g in &r.gaps {
                prop_assert!(g.0 < g.1);
                for b in &bands {
                    prop_assert!(b.1 <= g.0 || b.0 >= g.1);
                }
                prop_assert!(bands.iter().any(|b| b.1 == g.0));
                prop_assert!(bands.iter().any(|b| b.0 == g.1));
            }
        }
    }
}
