use std::collections::HashSet;

use crate::error::{Error, Result};

use super::cross_section_mesh::build_cross_section_mesh;
use super::grid::{graded, join, layer_count, radial_shell, uniform, BoxSurface, Ray};
use super::mesh::{BoundaryTag, HexBuilder, Mesh};
use super::shapes::{norm3, CavernSpec, CrossSectionKind, CrossSectionShape};

/// Ratio between the refinement box around the cavern and the cavern itself.
const BOX_RATIO: f64 = 2.0;
/// Smallest ratio accepted when the box has to shrink to fit in the cell.
const MIN_BOX_RATIO: f64 = 1.25;

/// Hexahedral mesh of the periodicity cell `ω × (-1/2, 1/2)`, with the cavern
/// removed when one is given.
///
/// `resolution` is the number of cells per unit length away from the cavern.
/// Around the cavern a box twice its size is meshed with a radial shell whose
/// face grid has `max(2^(refinement_levels + 1), ...)` cells per half extent,
/// and the tensor grid is graded geometrically from that box out to the bulk
/// spacing.
pub fn build_cell_mesh(
    shape: &CrossSectionShape,
    cavern: Option<&CavernSpec>,
    resolution: usize,
    refinement_levels: usize,
) -> Result<Mesh> {
    match cavern {
        None => extruded(shape, resolution),
        Some(c) => CavernCell::new(shape, c, resolution, refinement_levels)?.build(false),
    }
}

/// The cell mesh of [`build_cell_mesh`] with the cavern filled back in.
///
/// The first nodes and elements coincide with the perforated mesh; the fill
/// is appended after them and listed, together with the cavern surface, in
/// `cavern_closure_nodes`. Constraining those nodes recovers the perforated
/// problem exactly, so both problems share one discretization.
pub fn build_filled_cell_mesh(
    shape: &CrossSectionShape,
    cavern: &CavernSpec,
    resolution: usize,
    refinement_levels: usize,
) -> Result<Mesh> {
    CavernCell::new(shape, cavern, resolution, refinement_levels)?.build(true)
}

fn classify_cell_facet(p: &[[f64; 3]]) -> Option<BoundaryTag> {
    if p.iter().all(|q| q[2] == -0.5) {
        Some(BoundaryTag::PeriodicLo)
    } else if p.iter().all(|q| q[2] == 0.5) {
        Some(BoundaryTag::PeriodicHi)
    } else {
        Some(BoundaryTag::Dirichlet)
    }
}

fn extruded(shape: &CrossSectionShape, resolution: usize) -> Result<Mesh> {
    let base = build_cross_section_mesh(shape, resolution)?;
    let nz = resolution;
    let zs = uniform(-0.5, 0.5, nz);
    let nb = base.n_nodes();
    let mut b = HexBuilder::default();
    for z in &zs {
        for p in &base.nodes {
            b.add_node([p[0], p[1], *z]);
        }
    }
    for k in 0..nz {
        for q in base.elements() {
            let lo = k * nb;
            let hi = (k + 1) * nb;
            b.add_hex([
                lo + q[0],
                lo + q[1],
                lo + q[2],
                lo + q[3],
                hi + q[0],
                hi + q[1],
                hi + q[2],
                hi + q[3],
            ]);
        }
    }
    let mut mesh = b.into_mesh();
    for i in 0..nb {
        mesh.periodic_pairing.insert(i, nz * nb + i);
        mesh.periodic_pairing.insert(nz * nb + i, i);
    }
    mesh.anchor_node = base
        .anchor_node
        .map(|a| nz / 2 * nb + a)
        .filter(|_| nz.is_multiple_of(2));
    mesh.tag_boundary(classify_cell_facet);
    mesh.check_jacobians()?;
    Ok(mesh)
}

/// Tensor grid in the local coordinates `(s, d, z)` of the anchor, with the
/// refinement box `[-Ls, Ls] x [0, Ld] x [-Lz, Lz]` cut out.
struct CavernCell {
    shape: CrossSectionShape,
    cavern: CavernSpec,
    lines: [Vec<f64>; 3],
    s_box: (usize, usize),
    d_box: usize,
    z_box: (usize, usize),
    cells_per_half: usize,
}

impl CavernCell {
    fn new(
        shape: &CrossSectionShape,
        cavern: &CavernSpec,
        resolution: usize,
        refinement_levels: usize,
    ) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidResolution(resolution));
        }
        cavern.validate()?;
        let frame = shape.boundary_frame()?;
        let CrossSectionKind::Rectangle { width, height } = shape.kind else {
            return Err(Error::InvalidGeometry(
                "caverns are only meshed on rectangular cross-sections".into(),
            ));
        };
        // local extents of the rectangle seen from the anchor
        let corners = [[0.0, 0.0], [width, 0.0], [width, height], [0.0, height]];
        let (mut s_lo, mut s_hi, mut depth) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        for c in corners {
            let r = [c[0] - frame.origin[0], c[1] - frame.origin[1]];
            let s = r[0] * frame.tangent[0] + r[1] * frame.tangent[1];
            let d = -(r[0] * frame.normal[0] + r[1] * frame.normal[1]);
            s_lo = s_lo.min(s);
            s_hi = s_hi.max(s);
            depth = depth.max(d);
        }
        let e = cavern.scaled_extents();
        if e[2] >= 0.5 {
            return Err(Error::GeometryViolation(format!(
                "cavern of half-length {} would cross z = ±1/2",
                e[2]
            )));
        }
        if e[1] >= s_hi.min(-s_lo) || e[0] >= depth {
            return Err(Error::GeometryViolation(
                "cavern does not fit inside the cross-section".into(),
            ));
        }
        let spacing = 1.0 / resolution as f64;
        let margin = 0.5 * spacing;
        let fit = ((s_hi.min(-s_lo) - margin) / e[1])
            .min((depth - margin) / e[0])
            .min((0.5 - margin) / e[2]);
        let ratio = BOX_RATIO.min(fit);
        if ratio < MIN_BOX_RATIO {
            return Err(Error::GeometryViolation(format!(
                "cavern too large for the cell: refinement box ratio {ratio:.3} < {MIN_BOX_RATIO}"
            )));
        }
        let (ld, ls, lz) = (ratio * e[0], ratio * e[1], ratio * e[2]);
        let m = (1usize << (refinement_levels + 1)).max((ld.max(ls).max(lz) / spacing).ceil() as usize);

        let (ds, dd, dz) = (ls / m as f64, ld / m as f64, lz / m as f64);
        let rev = |mut v: Vec<f64>| {
            v.reverse();
            v
        };
        let s_lines = join(
            join(rev(graded(-ls, s_lo, ds, spacing)), &uniform(-ls, ls, 2 * m)),
            &graded(ls, s_hi, ds, spacing),
        );
        let d_lines = join(uniform(0.0, ld, m), &graded(ld, depth, dd, spacing));
        let z_lines = join(
            join(rev(graded(-lz, -0.5, dz, spacing)), &uniform(-lz, lz, 2 * m)),
            &graded(lz, 0.5, dz, spacing),
        );
        let is0 = s_lines.len() - 1 - (graded(ls, s_hi, ds, spacing).len() - 1) - 2 * m;
        let kz0 = z_lines.len() - 1 - (graded(lz, 0.5, dz, spacing).len() - 1) - 2 * m;
        debug_assert_eq!(s_lines[is0], -ls);
        debug_assert_eq!(z_lines[kz0], -lz);
        Ok(Self {
            shape: *shape,
            cavern: *cavern,
            lines: [s_lines, d_lines, z_lines],
            s_box: (is0, is0 + 2 * m),
            d_box: m,
            z_box: (kz0, kz0 + 2 * m),
            cells_per_half: m,
        })
    }

    fn inside_box(&self, i: usize, j: usize, k: usize) -> bool {
        i > self.s_box.0 && i < self.s_box.1 && j < self.d_box && k > self.z_box.0 && k < self.z_box.1
    }

    fn cell_in_box(&self, i: usize, j: usize, k: usize) -> bool {
        i >= self.s_box.0 && i < self.s_box.1 && j < self.d_box && k >= self.z_box.0 && k < self.z_box.1
    }

    fn local(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.lines[0][i], self.lines[1][j], self.lines[2][k]]
    }

    /// Distance from `O` to the cavern surface along a local direction.
    fn cavern_radius(&self, dir: [f64; 3]) -> f64 {
        self.cavern.h * self.cavern.shape.radial_extent([dir[1], dir[0], dir[2]])
    }

    fn build(&self, fill: bool) -> Result<Mesh> {
        let frame = self.shape.boundary_frame().expect("validated");
        let to_physical = |p: [f64; 3]| {
            let xy = frame.to_physical(p[0], p[1]);
            [xy[0], xy[1], p[2]]
        };
        let [ns, nd, nz] = [self.lines[0].len(), self.lines[1].len(), self.lines[2].len()];
        let idx = |i: usize, j: usize, k: usize| (k * nd + j) * ns + i;
        let mut id = vec![usize::MAX; ns * nd * nz];
        let mut b = HexBuilder::default();
        for k in 0..nz {
            for j in 0..nd {
                for i in 0..ns {
                    if !self.inside_box(i, j, k) {
                        id[idx(i, j, k)] = b.add_node(to_physical(self.local(i, j, k)));
                    }
                }
            }
        }
        let mut pairing = Vec::new();
        for j in 0..nd {
            for i in 0..ns {
                pairing.push((id[idx(i, j, 0)], id[idx(i, j, nz - 1)]));
            }
        }
        for k in 0..nz - 1 {
            for j in 0..nd - 1 {
                for i in 0..ns - 1 {
                    if self.cell_in_box(i, j, k) {
                        continue;
                    }
                    b.add_hex([
                        id[idx(i, j, k)],
                        id[idx(i + 1, j, k)],
                        id[idx(i + 1, j + 1, k)],
                        id[idx(i, j + 1, k)],
                        id[idx(i, j, k + 1)],
                        id[idx(i + 1, j, k + 1)],
                        id[idx(i + 1, j + 1, k + 1)],
                        id[idx(i, j + 1, k + 1)],
                    ]);
                }
            }
        }

        let surface = BoxSurface::new(self.s_box, (0, self.d_box), self.z_box, true);
        let m = self.cells_per_half;
        let mut max_ratio: f64 = 1.0;
        let rays: Vec<Ray> = surface
            .points
            .iter()
            .map(|&[i, j, k]| {
                let p = self.local(i, j, k);
                let r_outer = norm3(p);
                let r_inner = self.cavern_radius(p);
                max_ratio = max_ratio.max(r_outer / r_inner);
                Ray {
                    dir: p,
                    r_inner,
                    r_outer,
                    inner_node: None,
                    outer_node: Some(id[idx(i, j, k)]),
                }
            })
            .collect();
        let shell = radial_shell(&mut b, &rays, &surface.quads, layer_count(m, max_ratio), &to_physical);
        let cavern_surface: Vec<usize> = shell.iter().map(|r| r[0]).collect();
        let solid_nodes = b.nodes.len();

        if fill {
            let scale = 0.5 * rays.iter().map(|r| r.r_inner / r.r_outer).fold(f64::INFINITY, f64::min);
            let (s0, s1) = self.s_box;
            let (z0, z1) = self.z_box;
            let cn = (s1 - s0 + 1, self.d_box + 1);
            let cidx = |i: usize, j: usize, k: usize| ((k - z0) * cn.1 + j) * cn.0 + (i - s0);
            let mut core = vec![0; cn.0 * cn.1 * (z1 - z0 + 1)];
            for k in z0..=z1 {
                for j in 0..=self.d_box {
                    for i in s0..=s1 {
                        let p = self.local(i, j, k);
                        core[cidx(i, j, k)] = b.add_node(to_physical([scale * p[0], scale * p[1], scale * p[2]]));
                    }
                }
            }
            for k in z0..z1 {
                for j in 0..self.d_box {
                    for i in s0..s1 {
                        b.add_hex([
                            core[cidx(i, j, k)],
                            core[cidx(i + 1, j, k)],
                            core[cidx(i + 1, j + 1, k)],
                            core[cidx(i, j + 1, k)],
                            core[cidx(i, j, k + 1)],
                            core[cidx(i + 1, j, k + 1)],
                            core[cidx(i + 1, j + 1, k + 1)],
                            core[cidx(i, j + 1, k + 1)],
                        ]);
                    }
                }
            }
            let mut fill_ratio: f64 = 1.0;
            let fill_rays: Vec<Ray> = surface
                .points
                .iter()
                .zip(&rays)
                .zip(&cavern_surface)
                .map(|((&[i, j, k], ray), &outer)| {
                    let r_inner = scale * ray.r_outer;
                    fill_ratio = fill_ratio.max(ray.r_inner / r_inner);
                    Ray {
                        dir: ray.dir,
                        r_inner,
                        r_outer: ray.r_inner,
                        inner_node: Some(core[cidx(i, j, k)]),
                        outer_node: Some(outer),
                    }
                })
                .collect();
            radial_shell(
                &mut b,
                &fill_rays,
                &surface.quads,
                layer_count(m, fill_ratio),
                &to_physical,
            );
        }

        let total = b.nodes.len();
        let mut mesh = b.into_mesh();
        for (lo, hi) in pairing {
            mesh.periodic_pairing.insert(lo, hi);
            mesh.periodic_pairing.insert(hi, lo);
        }
        let o = frame.origin;
        mesh.cavern = Some((self.cavern, [o[0], o[1], 0.0]));
        mesh.anchor_node = None;
        if fill {
            let mut closure: Vec<usize> = cavern_surface;
            closure.extend(solid_nodes..total);
            let unique: HashSet<usize> = closure.iter().copied().collect();
            debug_assert_eq!(unique.len(), closure.len());
            mesh.cavern_closure_nodes = closure;
        }
        mesh.tag_boundary(classify_cell_facet);
        mesh.check_jacobians()?;
        Ok(mesh)
    }
}
