use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::error::{Error, Result};
use crate::fem::element;

use super::grid::{index_of, uniform};
use super::mesh::{BoundaryTag, ElementKind, Mesh};
use super::shapes::{CrossSectionKind, CrossSectionShape, RectSide};

/// Conforming quadrilateral mesh of the cross-section with every boundary
/// edge tagged Dirichlet and the anchor `O'` present as a node.
///
/// Rectangles get a tensor grid with `resolution` cells per unit length along
/// the shorter side; the grid line nearest `O'` is moved onto it. Disks get an
/// O-grid (a central square and four curved blocks) rotated so that a
/// boundary node sits at `O'`.
pub fn build_cross_section_mesh(shape: &CrossSectionShape, resolution: usize) -> Result<Mesh> {
    if resolution < 2 {
        return Err(Error::InvalidResolution(resolution));
    }
    shape.validate()?;
    let mut mesh = match shape.kind {
        CrossSectionKind::Rectangle { width, height } => rectangle(shape, width, height, resolution)?,
        CrossSectionKind::Disk { radius } => disk(shape, radius, resolution),
    };
    mesh.tag_boundary(|_| Some(BoundaryTag::Dirichlet));
    mesh.check_jacobians()?;
    Ok(mesh)
}

fn quad_mesh(nodes: Vec<[f64; 3]>, quads: Vec<[usize; 4]>) -> Mesh {
    let mut conn = Vec::with_capacity(4 * quads.len());
    for mut q in quads {
        let x: [[f64; 2]; 4] = std::array::from_fn(|a| [nodes[q[a]][0], nodes[q[a]][1]]);
        if element::quad_det(&x, [0.0, 0.0]) < 0.0 {
            q.swap(1, 3);
        }
        conn.extend_from_slice(&q);
    }
    Mesh::new(ElementKind::Quad4, nodes, conn)
}

fn rectangle(shape: &CrossSectionShape, a: f64, b: f64, res: usize) -> Result<Mesh> {
    let unit = a.min(b);
    let nx = ((res as f64 * a / unit).round() as usize).max(2);
    let ny = ((res as f64 * b / unit).round() as usize).max(2);
    let mut xs = uniform(0.0, a, nx);
    let mut ys = uniform(0.0, b, ny);
    let [ox, oy] = shape.anchor;
    let (lines, target) = match shape.rect_side()? {
        RectSide::Bottom | RectSide::Top => (&mut xs, ox),
        RectSide::Left | RectSide::Right => (&mut ys, oy),
    };
    let i = index_of(lines, target);
    if i == 0 || i + 1 == lines.len() {
        return Err(Error::InvalidGeometry(
            "anchor too close to a corner for this resolution".into(),
        ));
    }
    lines[i] = target;

    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for y in &ys {
        for x in &xs {
            nodes.push([*x, *y, 0.0]);
        }
    }
    let mut quads = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            quads.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut mesh = quad_mesh(nodes, quads);
    mesh.anchor_node = mesh
        .nodes
        .iter()
        .position(|p| p[0] == shape.anchor[0] && p[1] == shape.anchor[1]);
    debug_assert!(mesh.anchor_node.is_some());
    Ok(mesh)
}

fn disk(shape: &CrossSectionShape, radius: f64, res: usize) -> Mesh {
    // n cells along each side of the central square, n/2 across each block.
    let n = 2 * (res / 4).max(1);
    let nr = n / 2;
    let c = 0.5 * radius / std::f64::consts::SQRT_2;
    let alpha = shape.anchor[1].atan2(shape.anchor[0]) + FRAC_PI_2;
    let (sa, ca) = alpha.sin_cos();
    let rot = |p: [f64; 2]| [ca * p[0] - sa * p[1], sa * p[0] + ca * p[1], 0.0];

    let mut nodes = Vec::new();
    let core = |i: usize, j: usize| j * (n + 1) + i;
    for j in 0..=n {
        for i in 0..=n {
            let x = -c + 2.0 * c * i as f64 / n as f64;
            let y = -c + 2.0 * c * j as f64 / n as f64;
            nodes.push(rot([x, y]));
        }
    }
    // Square side k runs counter-clockwise from corner k to corner k+1,
    // starting at the lower-left corner.
    let corners = [[-c, -c], [c, -c], [c, c], [-c, c]];
    let side_node = |k: usize, u: usize| -> usize {
        match k {
            0 => core(u, 0),
            1 => core(n, u),
            2 => core(n - u, n),
            _ => core(0, n - u),
        }
    };
    let base = nodes.len();
    // block k holds columns u = 0..n-1 for v = 1..=nr; column n is column 0
    // of the next block.
    let block = |k: usize, u: usize, v: usize| -> usize {
        if v == 0 {
            return side_node(k, u);
        }
        let (k, u) = if u == n { ((k + 1) % 4, 0) } else { (k, u) };
        base + k * n * nr + (v - 1) * n + u
    };
    for k in 0..4 {
        let a = corners[k];
        let b = corners[(k + 1) % 4];
        let theta0 = -3.0 * FRAC_PI_4 + k as f64 * FRAC_PI_2;
        for v in 1..=nr {
            let t = v as f64 / nr as f64;
            for u in 0..n {
                let s = u as f64 / n as f64;
                let q = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let th = theta0 + s * FRAC_PI_2;
                let circ = [radius * th.cos(), radius * th.sin()];
                let p = if v == nr {
                    circ
                } else {
                    [(1.0 - t) * q[0] + t * circ[0], (1.0 - t) * q[1] + t * circ[1]]
                };
                nodes.push(rot(p));
            }
        }
    }
    let mut quads = Vec::new();
    for j in 0..n {
        for i in 0..n {
            quads.push([core(i, j), core(i + 1, j), core(i + 1, j + 1), core(i, j + 1)]);
        }
    }
    for k in 0..4 {
        for v in 0..nr {
            for u in 0..n {
                quads.push([
                    block(k, u, v),
                    block(k, u + 1, v),
                    block(k, u + 1, v + 1),
                    block(k, u, v + 1),
                ]);
            }
        }
    }
    // Boundary nodes are placed at exact angles; put the anchor exactly on
    // the supplied point.
    let anchor = block(0, n / 2, nr);
    nodes[anchor] = [shape.anchor[0], shape.anchor[1], 0.0];
    let mut mesh = quad_mesh(nodes, quads);
    mesh.anchor_node = Some(anchor);
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_square_counts() {
        let m = build_cross_section_mesh(&CrossSectionShape::unit_square(), 16).unwrap();
        assert_eq!(m.n_nodes(), 289);
        assert_eq!(m.n_elements(), 256);
        assert_eq!(m.count_facets(BoundaryTag::Dirichlet), 64);
        let a = m.anchor_node.unwrap();
        assert_eq!(m.nodes[a], [0.5, 0.0, 0.0]);
        assert!((m.measure() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resolution_one_is_rejected() {
        assert!(matches!(
            build_cross_section_mesh(&CrossSectionShape::unit_square(), 1),
            Err(Error::InvalidResolution(1))
        ));
    }

    #[test]
    fn anchor_off_grid_is_snapped() {
        let s = CrossSectionShape::rectangle(1.0, 1.0, [0.0, 0.37]).unwrap();
        let m = build_cross_section_mesh(&s, 8).unwrap();
        assert_eq!(m.nodes[m.anchor_node.unwrap()], [0.0, 0.37, 0.0]);
        m.check_jacobians().unwrap();
    }

    #[test]
    fn disk_boundary_on_circle() {
        let s = CrossSectionShape::disk_bottom_anchor(1.0).unwrap();
        let m = build_cross_section_mesh(&s, 16).unwrap();
        assert_eq!(m.n_nodes(), 209);
        assert_eq!(m.n_elements(), 192);
        let tol = s.tolerance();
        let on_bnd = m.dirichlet_nodes();
        for (i, p) in m.nodes.iter().enumerate() {
            if on_bnd[i] {
                assert!((p[0].hypot(p[1]) - 1.0).abs() <= tol);
            }
        }
        assert_eq!(m.nodes[m.anchor_node.unwrap()], [0.0, -1.0, 0.0]);
        // polygonal area converges to pi from below
        assert!(m.measure() < PI && m.measure() > 0.98 * PI);
    }

    #[test]
    fn rotated_disk_anchor() {
        let a = [0.6, 0.8];
        let s = CrossSectionShape::disk(1.0, a).unwrap();
        let m = build_cross_section_mesh(&s, 8).unwrap();
        let p = m.nodes[m.anchor_node.unwrap()];
        assert_eq!([p[0], p[1]], a);
    }
}
