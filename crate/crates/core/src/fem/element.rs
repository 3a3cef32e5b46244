//! Lowest-order nodal elements: bilinear quadrilaterals and trilinear
//! hexahedra on the reference cube `[-1, 1]^d`, with 2-point Gauss rules.
//!
//! Node ordering follows the usual convention: the quad runs
//! counter-clockwise from `(-1, -1)`; the hexahedron lists its bottom face
//! (`ζ = -1`) that way, then the top face in the same order.

pub const QUAD_REF: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

pub const HEX_REF: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Local node indices of the six hexahedron faces.
pub const HEX_FACES: [[usize; 4]; 6] = [
    [0, 3, 2, 1],
    [4, 5, 6, 7],
    [0, 1, 5, 4],
    [1, 2, 6, 5],
    [2, 3, 7, 6],
    [3, 0, 4, 7],
];

/// Local node indices of the four quadrilateral edges.
pub const QUAD_EDGES: [[usize; 2]; 4] = [[0, 1], [1, 2], [2, 3], [3, 0]];

const G: f64 = 0.577_350_269_189_625_8;
pub const GAUSS2: [f64; 2] = [-G, G];

pub fn quad_shape(r: [f64; 2]) -> ([f64; 4], [[f64; 2]; 4]) {
    let mut n = [0.0; 4];
    let mut dn = [[0.0; 2]; 4];
    for (a, q) in QUAD_REF.iter().enumerate() {
        let fx = 0.5 * (1.0 + q[0] * r[0]);
        let fy = 0.5 * (1.0 + q[1] * r[1]);
        n[a] = fx * fy;
        dn[a] = [0.5 * q[0] * fy, 0.5 * q[1] * fx];
    }
    (n, dn)
}

pub fn hex_shape(r: [f64; 3]) -> ([f64; 8], [[f64; 3]; 8]) {
    let mut n = [0.0; 8];
    let mut dn = [[0.0; 3]; 8];
    for (a, q) in HEX_REF.iter().enumerate() {
        let fx = 0.5 * (1.0 + q[0] * r[0]);
        let fy = 0.5 * (1.0 + q[1] * r[1]);
        let fz = 0.5 * (1.0 + q[2] * r[2]);
        n[a] = fx * fy * fz;
        dn[a] = [0.5 * q[0] * fy * fz, 0.5 * q[1] * fx * fz, 0.5 * q[2] * fx * fy];
    }
    (n, dn)
}

fn det2(j: [[f64; 2]; 2]) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

fn det3(j: [[f64; 3]; 3]) -> f64 {
    j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
        + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0])
}

fn inv3(j: [[f64; 3]; 3]) -> ([[f64; 3]; 3], f64) {
    let d = det3(j);
    let c = |r0: usize, c0: usize, r1: usize, c1: usize| j[r0][c0] * j[r1][c1] - j[r0][c1] * j[r1][c0];
    let inv = [
        [c(1, 1, 2, 2) / d, -c(0, 1, 2, 2) / d, c(0, 1, 1, 2) / d],
        [-c(1, 0, 2, 2) / d, c(0, 0, 2, 2) / d, -c(0, 0, 1, 2) / d],
        [c(1, 0, 2, 1) / d, -c(0, 0, 2, 1) / d, c(0, 0, 1, 1) / d],
    ];
    (inv, d)
}

/// Jacobian `J[i][k] = ∂x_i/∂r_k` of the quad map at `r`.
pub fn quad_jacobian(x: &[[f64; 2]; 4], r: [f64; 2]) -> [[f64; 2]; 2] {
    let (_, dn) = quad_shape(r);
    let mut j = [[0.0; 2]; 2];
    for a in 0..4 {
        for i in 0..2 {
            for k in 0..2 {
                j[i][k] += x[a][i] * dn[a][k];
            }
        }
    }
    j
}

pub fn hex_jacobian(x: &[[f64; 3]; 8], r: [f64; 3]) -> [[f64; 3]; 3] {
    let (_, dn) = hex_shape(r);
    let mut j = [[0.0; 3]; 3];
    for a in 0..8 {
        for i in 0..3 {
            for k in 0..3 {
                j[i][k] += x[a][i] * dn[a][k];
            }
        }
    }
    j
}

pub fn quad_det(x: &[[f64; 2]; 4], r: [f64; 2]) -> f64 {
    det2(quad_jacobian(x, r))
}

pub fn hex_det(x: &[[f64; 3]; 8], r: [f64; 3]) -> f64 {
    det3(hex_jacobian(x, r))
}

/// Smallest Jacobian determinant over the corners and the center.
pub fn quad_min_det(x: &[[f64; 2]; 4]) -> f64 {
    QUAD_REF
        .iter()
        .copied()
        .chain(std::iter::once([0.0, 0.0]))
        .map(|r| quad_det(x, r))
        .fold(f64::INFINITY, f64::min)
}

pub fn hex_min_det(x: &[[f64; 3]; 8]) -> f64 {
    HEX_REF
        .iter()
        .copied()
        .chain(std::iter::once([0.0, 0.0, 0.0]))
        .map(|r| hex_det(x, r))
        .fold(f64::INFINITY, f64::min)
}

/// Element stiffness `∫∇Nᵢ·∇Nⱼ` and consistent mass `∫NᵢNⱼ`.
pub fn quad_matrices(x: &[[f64; 2]; 4]) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
    let mut k = [[0.0; 4]; 4];
    let mut m = [[0.0; 4]; 4];
    for &gx in &GAUSS2 {
        for &gy in &GAUSS2 {
            let r = [gx, gy];
            let (n, dn) = quad_shape(r);
            let j = quad_jacobian(x, r);
            let d = det2(j);
            let inv = [[j[1][1] / d, -j[0][1] / d], [-j[1][0] / d, j[0][0] / d]];
            let mut g = [[0.0; 2]; 4];
            for a in 0..4 {
                for i in 0..2 {
                    g[a][i] = dn[a][0] * inv[0][i] + dn[a][1] * inv[1][i];
                }
            }
            for a in 0..4 {
                for b in 0..4 {
                    k[a][b] += (g[a][0] * g[b][0] + g[a][1] * g[b][1]) * d;
                    m[a][b] += n[a] * n[b] * d;
                }
            }
        }
    }
    (k, m)
}

pub fn hex_matrices(x: &[[f64; 3]; 8]) -> ([[f64; 8]; 8], [[f64; 8]; 8]) {
    let mut k = [[0.0; 8]; 8];
    let mut m = [[0.0; 8]; 8];
    for &gx in &GAUSS2 {
        for &gy in &GAUSS2 {
            for &gz in &GAUSS2 {
                let r = [gx, gy, gz];
                let (n, dn) = hex_shape(r);
                let (inv, d) = inv3(hex_jacobian(x, r));
                let mut g = [[0.0; 3]; 8];
                for a in 0..8 {
                    for i in 0..3 {
                        g[a][i] = dn[a][0] * inv[0][i] + dn[a][1] * inv[1][i] + dn[a][2] * inv[2][i];
                    }
                }
                for a in 0..8 {
                    for b in a..8 {
                        let kab = (g[a][0] * g[b][0] + g[a][1] * g[b][1] + g[a][2] * g[b][2]) * d;
                        let mab = n[a] * n[b] * d;
                        k[a][b] += kab;
                        m[a][b] += mab;
                    }
                }
            }
        }
    }
    for a in 0..8 {
        for b in 0..a {
            k[a][b] = k[b][a];
            m[a][b] = m[b][a];
        }
    }
    (k, m)
}

/// Reference coordinates of `p` in the quad, if the Newton iteration
/// converges to a point inside the reference square (with slack `eps`).
pub fn quad_inverse(x: &[[f64; 2]; 4], p: [f64; 2], eps: f64) -> Option<[f64; 2]> {
    let mut r = [0.0, 0.0];
    for _ in 0..30 {
        let (n, _) = quad_shape(r);
        let mut f = [-p[0], -p[1]];
        for a in 0..4 {
            f[0] += n[a] * x[a][0];
            f[1] += n[a] * x[a][1];
        }
        let j = quad_jacobian(x, r);
        let d = det2(j);
        if d.abs() < 1e-300 {
            return None;
        }
        let dr = [
            (j[1][1] * f[0] - j[0][1] * f[1]) / d,
            (-j[1][0] * f[0] + j[0][0] * f[1]) / d,
        ];
        r[0] -= dr[0];
        r[1] -= dr[1];
        if r[0].abs() > 3.0 || r[1].abs() > 3.0 {
            return None;
        }
        if dr[0].abs() + dr[1].abs() < 1e-13 {
            break;
        }
    }
    (r[0].abs() <= 1.0 + eps && r[1].abs() <= 1.0 + eps).then_some(r)
}

pub fn hex_inverse(x: &[[f64; 3]; 8], p: [f64; 3], eps: f64) -> Option<[f64; 3]> {
    let mut r = [0.0; 3];
    for _ in 0..40 {
        let (n, _) = hex_shape(r);
        let mut f = [-p[0], -p[1], -p[2]];
        for a in 0..8 {
            for i in 0..3 {
                f[i] += n[a] * x[a][i];
            }
        }
        let (inv, d) = inv3(hex_jacobian(x, r));
        if !d.is_finite() || d.abs() < 1e-300 {
            return None;
        }
        let mut step = 0.0;
        for k in 0..3 {
            let dr = inv[k][0] * f[0] + inv[k][1] * f[1] + inv[k][2] * f[2];
            r[k] -= dr;
            step += dr.abs();
        }
        if r.iter().any(|v| v.abs() > 3.0) {
            return None;
        }
        if step < 1e-13 {
            break;
        }
    }
    r.iter().all(|v| v.abs() <= 1.0 + eps).then_some(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(s: f64) -> [[f64; 3]; 8] {
        let mut x = [[0.0; 3]; 8];
        for (a, q) in HEX_REF.iter().enumerate() {
            x[a] = [0.5 * s * (q[0] + 1.0), 0.5 * s * (q[1] + 1.0), 0.5 * s * (q[2] + 1.0)];
        }
        x
    }

    #[test]
    fn hex_mass_diagonal_is_side_cubed_over_27() {
        for s in [1.0, 0.5, 2.0] {
            let (_, m) = hex_matrices(&cube(s));
            for a in 0..8 {
                assert!((m[a][a] - s * s * s / 27.0).abs() < 1e-14 * s * s * s);
            }
            let total: f64 = m.iter().flatten().sum();
            assert!((total - s * s * s).abs() < 1e-13);
        }
    }

    #[test]
    fn stiffness_annihilates_constants_and_is_symmetric() {
        let mut x = cube(1.0);
        x[6] = [1.1, 1.2, 0.9];
        let (k, _) = hex_matrices(&x);
        for a in 0..8 {
            let row: f64 = k[a].iter().sum();
            assert!(row.abs() < 1e-13);
            for b in 0..8 {
                assert_eq!(k[a][b], k[b][a]);
            }
        }
    }

    #[test]
    fn quad_stiffness_reproduces_linear_energy() {
        let x = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]];
        let (k, m) = quad_matrices(&x);
        // u = x: energy ∫|∇u|² = area = 2
        let u: Vec<f64> = x.iter().map(|p| p[0]).collect();
        let mut e = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                e += u[a] * k[a][b] * u[b];
            }
        }
        assert!((e - 2.0).abs() < 1e-13);
        let area: f64 = m.iter().flatten().sum();
        assert!((area - 2.0).abs() < 1e-13);
    }

    #[test]
    fn inverse_map_roundtrip() {
        let mut x = cube(1.0);
        x[6] = [1.2, 1.1, 1.05];
        let r = [0.3, -0.4, 0.7];
        let (n, _) = hex_shape(r);
        let mut p = [0.0; 3];
        for a in 0..8 {
            for i in 0..3 {
                p[i] += n[a] * x[a][i];
            }
        }
        let back = hex_inverse(&x, p, 1e-9).unwrap();
        for i in 0..3 {
            assert!((back[i] - r[i]).abs() < 1e-10);
        }
        assert!(hex_inverse(&x, [3.0, 0.5, 0.5], 1e-9).is_none());
    }

    #[test]
    fn faces_have_outward_orientation_on_unit_cube() {
        let x = cube(1.0);
        let c = [0.5, 0.5, 0.5];
        for f in HEX_FACES {
            let p: Vec<[f64; 3]> = f.iter().map(|&i| x[i]).collect();
            let u = [p[1][0] - p[0][0], p[1][1] - p[0][1], p[1][2] - p[0][2]];
            let v = [p[3][0] - p[0][0], p[3][1] - p[0][1], p[3][2] - p[0][2]];
            let nrm = [
                u[1] * v[2] - u[2] * v[1],
                u[2] * v[0] - u[0] * v[2],
                u[0] * v[1] - u[1] * v[0],
            ];
            let out = [p[0][0] - c[0], p[0][1] - c[1], p[0][2] - c[2]];
            assert!(nrm[0] * out[0] + nrm[1] * out[1] + nrm[2] * out[2] > 0.0);
        }
    }
}
