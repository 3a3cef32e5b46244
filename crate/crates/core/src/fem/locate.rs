use crate::geometry::{ElementKind, Mesh};

use super::element;

/// Bucket grid over element bounding boxes for point location and
/// evaluation of nodal fields.
#[derive(Debug, Clone)]
pub struct PointLocator<'m> {
    mesh: &'m Mesh,
    lo: [f64; 3],
    cell: [f64; 3],
    dims: [usize; 3],
    buckets: Vec<Vec<usize>>,
}

impl<'m> PointLocator<'m> {
    pub fn new(mesh: &'m Mesh) -> Self {
        let dim = mesh.dimension();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &mesh.nodes {
            for i in 0..3 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        let per_axis = ((mesh.n_elements() as f64).powf(1.0 / dim as f64).ceil() as usize).max(1);
        let mut dims = [1; 3];
        let mut cell = [1.0; 3];
        for i in 0..dim {
            dims[i] = per_axis;
            cell[i] = ((hi[i] - lo[i]) / per_axis as f64).max(f64::MIN_POSITIVE);
        }
        let mut loc = Self {
            mesh,
            lo,
            cell,
            dims,
            buckets: vec![Vec::new(); dims[0] * dims[1] * dims[2]],
        };
        for (e, el) in mesh.elements().enumerate() {
            let mut blo = [f64::INFINITY; 3];
            let mut bhi = [f64::NEG_INFINITY; 3];
            for &n in el {
                for i in 0..3 {
                    blo[i] = blo[i].min(mesh.nodes[n][i]);
                    bhi[i] = bhi[i].max(mesh.nodes[n][i]);
                }
            }
            let a = loc.bucket_coords(blo);
            let b = loc.bucket_coords(bhi);
            for k in a[2]..=b[2] {
                for j in a[1]..=b[1] {
                    for i in a[0]..=b[0] {
                        let idx = loc.index([i, j, k]);
                        loc.buckets[idx].push(e);
                    }
                }
            }
        }
        loc
    }

    fn bucket_coords(&self, p: [f64; 3]) -> [usize; 3] {
        std::array::from_fn(|i| {
            let t = ((p[i] - self.lo[i]) / self.cell[i]).floor();
            (t.max(0.0) as usize).min(self.dims[i] - 1)
        })
    }

    fn index(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    /// Element containing `p` and the shape function values there.
    pub fn locate(&self, p: [f64; 3]) -> Option<(usize, Vec<f64>)> {
        let eps = 1e-9;
        let c = self.bucket_coords(p);
        for &e in &self.buckets[self.index(c)] {
            match self.mesh.kind {
                ElementKind::Quad4 => {
                    let x = self.mesh.quad_coords(e);
                    if let Some(r) = element::quad_inverse(&x, [p[0], p[1]], eps) {
                        return Some((e, element::quad_shape(r).0.to_vec()));
                    }
                }
                ElementKind::Hex8 => {
                    let x = self.mesh.hex_coords(e);
                    if let Some(r) = element::hex_inverse(&x, p, eps) {
                        return Some((e, element::hex_shape(r).0.to_vec()));
                    }
                }
            }
        }
        None
    }

    /// Interpolates a nodal field at `p`; `None` outside the mesh.
    pub fn evaluate(&self, values: &[f64], p: [f64; 3]) -> Option<f64> {
        let (e, n) = self.locate(p)?;
        Some(
            self.mesh
                .element(e)
                .iter()
                .zip(&n)
                .map(|(&node, w)| values[node] * w)
                .sum(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_cross_section_mesh, build_halfspace_mesh, CavernShape, CrossSectionShape};

    #[test]
    fn linear_fields_are_reproduced() {
        let m = build_cross_section_mesh(&CrossSectionShape::unit_square(), 7).unwrap();
        let f: Vec<f64> = m.nodes.iter().map(|p| 2.0 * p[0] - p[1] + 0.5).collect();
        let loc = PointLocator::new(&m);
        for p in [[0.13, 0.77, 0.0], [0.5, 0.0, 0.0], [1.0, 1.0, 0.0]] {
            let v = loc.evaluate(&f, p).unwrap();
            assert!((v - (2.0 * p[0] - p[1] + 0.5)).abs() < 1e-12);
        }
        assert!(loc.evaluate(&f, [1.5, 0.5, 0.0]).is_none());
    }

    #[test]
    fn locates_in_radial_mesh() {
        let m = build_halfspace_mesh(&CavernShape::Hemisphere { radius: 1.0 }, 8.0, 3).unwrap();
        let f: Vec<f64> = m.nodes.iter().map(|p| p[0] + 3.0 * p[2]).collect();
        let loc = PointLocator::new(&m);
        let p = [-2.0, 1.0, 0.5];
        assert!((loc.evaluate(&f, p).unwrap() - (-2.0 + 1.5)).abs() < 1e-10);
        assert!(loc.evaluate(&f, [-0.2, 0.1, 0.1]).is_none());
    }
}
