//! Building blocks shared by the structured mesh generators: graded 1D line
//! sets, the five- or six-faced box surface grids that carry ray directions,
//! and radial hexahedral shells between two star-shaped surfaces.

use std::collections::HashMap;

use super::mesh::HexBuilder;
use super::shapes::norm3;

/// `n` uniform cells on `[a, b]`, endpoints included.
pub(crate) fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

/// Points from `a` to `b` whose first cell has length close to `first` and
/// whose cells grow by at most `GROWTH` per step until they reach `far`.
/// The cell list is rescaled to end exactly at `b`.
pub(crate) fn graded(a: f64, b: f64, first: f64, far: f64) -> Vec<f64> {
    const GROWTH: f64 = 1.5;
    let len = (b - a).abs();
    if len <= 0.0 {
        return vec![a];
    }
    let mut sizes = Vec::new();
    let mut total = 0.0;
    let mut h = first.min(len);
    while total + 0.5 * h < len {
        sizes.push(h);
        total += h;
        h = (h * GROWTH).min(far.max(first));
    }
    if sizes.is_empty() {
        sizes.push(len);
        total = len;
    }
    let scale = len / total;
    let dir = (b - a).signum();
    let mut pts = Vec::with_capacity(sizes.len() + 1);
    let mut x = a;
    pts.push(a);
    for s in &sizes[..sizes.len() - 1] {
        x += dir * s * scale;
        pts.push(x);
    }
    pts.push(b);
    pts
}

/// Joins two line sets that share an endpoint.
pub(crate) fn join(mut a: Vec<f64>, b: &[f64]) -> Vec<f64> {
    debug_assert!((a[a.len() - 1] - b[0]).abs() < 1e-12);
    a.extend_from_slice(&b[1..]);
    a
}

/// Index of the line closest to `x`.
pub(crate) fn index_of(lines: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, v) in lines.iter().enumerate() {
        if (v - x).abs() < (lines[best] - x).abs() {
            best = i;
        }
    }
    best
}

/// Surface grid of an axis-aligned box in `(s, d, z)` index space.
///
/// The box occupies index ranges `s0..=s1`, `d0..=d1`, `z0..=z1`. When
/// `open_bottom` is set the face `d = d0` is omitted (it lies on the wall).
pub(crate) struct BoxSurface {
    /// Index triples `(i, j, k)` of the surface nodes.
    pub points: Vec<[usize; 3]>,
    /// Surface quads as indices into `points`.
    pub quads: Vec<[usize; 4]>,
}

impl BoxSurface {
    pub fn new(s: (usize, usize), d: (usize, usize), z: (usize, usize), open_bottom: bool) -> Self {
        let mut index: HashMap<[usize; 3], usize> = HashMap::new();
        let mut points = Vec::new();
        let mut quads = Vec::new();
        let mut id = |p: [usize; 3]| -> usize {
            *index.entry(p).or_insert_with(|| {
                points.push(p);
                points.len() - 1
            })
        };
        let mut faces: Vec<[[usize; 3]; 4]> = Vec::new();
        for i in [s.0, s.1] {
            for j in d.0..d.1 {
                for k in z.0..z.1 {
                    faces.push([[i, j, k], [i, j + 1, k], [i, j + 1, k + 1], [i, j, k + 1]]);
                }
            }
        }
        let d_faces: &[usize] = if open_bottom { &[d.1] } else { &[d.0, d.1] };
        for &j in d_faces {
            for i in s.0..s.1 {
                for k in z.0..z.1 {
                    faces.push([[i, j, k], [i + 1, j, k], [i + 1, j, k + 1], [i, j, k + 1]]);
                }
            }
        }
        for k in [z.0, z.1] {
            for i in s.0..s.1 {
                for j in d.0..d.1 {
                    faces.push([[i, j, k], [i + 1, j, k], [i + 1, j + 1, k], [i, j + 1, k]]);
                }
            }
        }
        for f in faces {
            let q = [id(f[0]), id(f[1]), id(f[2]), id(f[3])];
            quads.push(q);
        }
        Self { points, quads }
    }
}

/// One ray of a radial shell. Positions are local coordinates relative to
/// the shell center; the ray runs from radius `r_inner` to `r_outer` along
/// `dir` (any nonzero vector).
pub(crate) struct Ray {
    pub dir: [f64; 3],
    pub r_inner: f64,
    pub r_outer: f64,
    pub inner_node: Option<usize>,
    pub outer_node: Option<usize>,
}

/// Appends a radial hexahedral shell with `layers` cells along each ray and
/// geometric radial spacing. Returns the node ids of every ray, from the
/// inner surface (layer 0) to the outer one (layer `layers`).
pub(crate) fn radial_shell(
    builder: &mut HexBuilder,
    rays: &[Ray],
    quads: &[[usize; 4]],
    layers: usize,
    to_physical: &dyn Fn([f64; 3]) -> [f64; 3],
) -> Vec<Vec<usize>> {
    let ids: Vec<Vec<usize>> = rays
        .iter()
        .map(|ray| {
            let len = norm3(ray.dir);
            let unit = [ray.dir[0] / len, ray.dir[1] / len, ray.dir[2] / len];
            (0..=layers)
                .map(|l| {
                    if l == 0 {
                        if let Some(n) = ray.inner_node {
                            return n;
                        }
                    }
                    if l == layers {
                        if let Some(n) = ray.outer_node {
                            return n;
                        }
                    }
                    let t = l as f64 / layers as f64;
                    let r = ray.r_inner.powf(1.0 - t) * ray.r_outer.powf(t);
                    let r = if l == 0 {
                        ray.r_inner
                    } else if l == layers {
                        ray.r_outer
                    } else {
                        r
                    };
                    builder.add_node(to_physical([unit[0] * r, unit[1] * r, unit[2] * r]))
                })
                .collect()
        })
        .collect();
    for l in 0..layers {
        for q in quads {
            builder.add_hex([
                ids[q[0]][l],
                ids[q[1]][l],
                ids[q[2]][l],
                ids[q[3]][l],
                ids[q[0]][l + 1],
                ids[q[1]][l + 1],
                ids[q[2]][l + 1],
                ids[q[3]][l + 1],
            ]);
        }
    }
    ids
}

/// Number of radial layers whose geometric steps roughly match the angular
/// spacing of a face grid with `cells_per_half_face` cells per half extent.
pub(crate) fn layer_count(cells_per_half_face: usize, radius_ratio: f64) -> usize {
    let dtheta = std::f64::consts::FRAC_PI_4 / cells_per_half_face as f64;
    ((radius_ratio.ln() / dtheta).ceil() as usize).max(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lines_are_monotone_and_hit_ends() {
        let p = graded(0.3, 1.0, 0.05, 0.2);
        assert_eq!(p[0], 0.3);
        assert_eq!(*p.last().unwrap(), 1.0);
        for w in p.windows(2) {
            assert!(w[1] > w[0]);
        }
        let q = graded(-0.3, -0.5, 0.05, 0.1);
        assert_eq!(*q.last().unwrap(), -0.5);
        for w in q.windows(2) {
            assert!(w[1] < w[0]);
        }
        let tiny = graded(0.0, 0.01, 0.05, 0.1);
        assert_eq!(tiny, vec![0.0, 0.01]);
    }

    #[test]
    fn open_box_surface_counts() {
        let b = BoxSurface::new((0, 4), (0, 2), (0, 4), true);
        // 2 side faces 2x4, top face 4x4, 2 end faces 4x2
        assert_eq!(b.quads.len(), 2 * 8 + 16 + 2 * 8);
        let closed = BoxSurface::new((0, 2), (0, 2), (0, 2), false);
        assert_eq!(closed.quads.len(), 24);
        assert_eq!(closed.points.len(), 26);
    }
}
