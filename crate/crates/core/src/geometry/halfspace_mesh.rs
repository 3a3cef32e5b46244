use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};

use super::grid::{layer_count, radial_shell, uniform, BoxSurface, Ray};
use super::mesh::{BoundaryTag, HexBuilder, Mesh};
use super::shapes::{norm3, CavernShape};

/// Smallest admissible ratio between the truncation radius and `R_ref`.
pub const MIN_TRUNCATION_RATIO: f64 = 4.0;

/// Mesh of `{|ξ| < R∞, ξ₁ < 0} \ θ` at unit cavern scale.
///
/// The cavern surface and the flat face `ξ₁ = 0` are tagged Dirichlet, the
/// outer hemisphere is tagged truncation. Rays start on a direction grid with
/// `resolution` cells per half face of the cavern's direction box and are
/// split geometrically in radius.
pub fn build_halfspace_mesh(cavern: &CavernShape, truncation_radius: f64, resolution: usize) -> Result<Mesh> {
    radial_mesh(cavern, truncation_radius, resolution, false)
}

/// Mesh of the ball `|ξ| < R∞` minus the symmetrized cavern (the cavern and
/// its mirror image in `ξ₁ = 0`). Used to cross-check the half-space problem
/// through odd extension.
pub fn build_fullspace_mesh(cavern: &CavernShape, truncation_radius: f64, resolution: usize) -> Result<Mesh> {
    radial_mesh(cavern, truncation_radius, resolution, true)
}

fn direction_lines(cavern: &CavernShape, extent: f64, lo: f64, cells: usize) -> Vec<f64> {
    match cavern {
        // equiangular spacing keeps the projected cells of a sphere even
        CavernShape::Hemisphere { .. } => {
            let a0 = lo * FRAC_PI_4;
            uniform(a0, FRAC_PI_4, cells)
                .into_iter()
                .map(|a| extent * a.tan())
                .collect()
        }
        CavernShape::Box { .. } => uniform(lo * extent, extent, cells),
    }
}

fn radial_mesh(cavern: &CavernShape, r_inf: f64, resolution: usize, full: bool) -> Result<Mesh> {
    cavern.validate()?;
    if resolution < 2 {
        return Err(Error::InvalidResolution(resolution));
    }
    let r_ref = cavern.reference_radius();
    if !(r_inf >= MIN_TRUNCATION_RATIO * r_ref) {
        return Err(Error::TruncationTooTight {
            radius: r_inf,
            minimum: MIN_TRUNCATION_RATIO * r_ref,
        });
    }
    let m = resolution;
    let a = cavern.direction_box();
    // local coordinates (s, d, z) with ξ = (-d, s, z)
    let lines = [
        direction_lines(cavern, a[1], -1.0, 2 * m),
        if full {
            direction_lines(cavern, a[0], -1.0, 2 * m)
        } else {
            direction_lines(cavern, a[0], 0.0, m)
        },
        direction_lines(cavern, a[2], -1.0, 2 * m),
    ];
    let d_cells = lines[1].len() - 1;
    let surface = BoxSurface::new((0, 2 * m), (0, d_cells), (0, 2 * m), !full);
    let to_xi = |p: [f64; 3]| [-p[1], p[0], p[2]];
    let mut r_min = f64::INFINITY;
    let rays: Vec<Ray> = surface
        .points
        .iter()
        .map(|&[i, j, k]| {
            let xi = to_xi([lines[0][i], lines[1][j], lines[2][k]]);
            let r_inner = cavern.radial_extent(xi);
            r_min = r_min.min(r_inner);
            Ray {
                dir: xi,
                r_inner,
                r_outer: r_inf,
                inner_node: None,
                outer_node: None,
            }
        })
        .collect();
    let mut b = HexBuilder::default();
    let layers = layer_count(m, r_inf / r_min);
    radial_shell(&mut b, &rays, &surface.quads, layers, &|p| p);
    let mut mesh = b.into_mesh();
    let tol = 1e-10 * r_inf;
    mesh.tag_boundary(|p| {
        if p.iter().all(|q| (norm3(*q) - r_inf).abs() <= tol) {
            Some(BoundaryTag::Truncation)
        } else {
            Some(BoundaryTag::Dirichlet)
        }
    });
    mesh.truncation_radius = Some(r_inf);
    mesh.check_jacobians()?;
    Ok(mesh)
}
