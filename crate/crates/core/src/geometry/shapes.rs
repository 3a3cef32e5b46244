use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible cavern scale. The cell has unit length, so any larger
/// cavern would reach the periodic faces.
pub const H_MAX: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CrossSectionKind {
    Rectangle { width: f64, height: f64 },
    Disk { radius: f64 },
}

/// A waveguide cross-section together with the boundary point `O'` around
/// which the cavern family is centered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionShape {
    #[serde(flatten)]
    pub kind: CrossSectionKind,
    pub anchor: [f64; 2],
}

/// Local orthonormal frame of the boundary at the anchor point.
///
/// `tangent` follows the counter-clockwise orientation of the contour and
/// `normal` is the outward unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFrame {
    pub origin: [f64; 2],
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
}

impl BoundaryFrame {
    /// Physical point of the local coordinates `(s, d)` where `d = -n` is the
    /// depth below the (straight) boundary.
    pub fn to_physical(&self, s: f64, d: f64) -> [f64; 2] {
        [
            self.origin[0] + s * self.tangent[0] - d * self.normal[0],
            self.origin[1] + s * self.tangent[1] - d * self.normal[1],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RectSide {
    Bottom,
    Right,
    Top,
    Left,
}

impl CrossSectionShape {
    pub fn rectangle(width: f64, height: f64, anchor: [f64; 2]) -> Result<Self> {
        let shape = Self {
            kind: CrossSectionKind::Rectangle { width, height },
            anchor,
        };
        shape.validate()?;
        Ok(shape)
    }

    /// Unit square with the anchor at the midpoint of the bottom side.
    pub fn unit_square() -> Self {
        Self {
            kind: CrossSectionKind::Rectangle {
                width: 1.0,
                height: 1.0,
            },
            anchor: [0.5, 0.0],
        }
    }

    /// Disk centered at the origin.
    pub fn disk(radius: f64, anchor: [f64; 2]) -> Result<Self> {
        let shape = Self {
            kind: CrossSectionKind::Disk { radius },
            anchor,
        };
        shape.validate()?;
        Ok(shape)
    }

    /// Disk of the given radius anchored at its lowest point.
    pub fn disk_bottom_anchor(radius: f64) -> Result<Self> {
        Self::disk(radius, [0.0, -radius])
    }

    pub fn validate(&self) -> Result<()> {
        let tol = self.tolerance();
        match self.kind {
            CrossSectionKind::Rectangle { width, height } => {
                if !(width > 0.0 && height > 0.0) || !width.is_finite() || !height.is_finite() {
                    return Err(Error::InvalidGeometry(format!(
                        "rectangle sides must be positive, got {width} x {height}"
                    )));
                }
                let side = self.rect_side()?;
                let [x, y] = self.anchor;
                let (t, len) = match side {
                    RectSide::Bottom | RectSide::Top => (x, width),
                    RectSide::Left | RectSide::Right => (y, height),
                };
                if t <= tol || t >= len - tol {
                    return Err(Error::InvalidGeometry(
                        "anchor must lie strictly inside one side of the rectangle".into(),
                    ));
                }
            }
            CrossSectionKind::Disk { radius } => {
                if !(radius > 0.0) || !radius.is_finite() {
                    return Err(Error::InvalidGeometry(format!(
                        "disk radius must be positive, got {radius}"
                    )));
                }
                let r = self.anchor[0].hypot(self.anchor[1]);
                if (r - radius).abs() > tol {
                    return Err(Error::InvalidGeometry(format!(
                        "anchor at distance {r} from the center is not on the circle of radius {radius}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Mesh tolerance for node-on-boundary tests: `1e-10` times the diameter.
    pub fn tolerance(&self) -> f64 {
        1e-10 * self.diameter()
    }

    pub fn diameter(&self) -> f64 {
        match self.kind {
            CrossSectionKind::Rectangle { width, height } => width.hypot(height),
            CrossSectionKind::Disk { radius } => 2.0 * radius,
        }
    }

    pub fn area(&self) -> f64 {
        match self.kind {
            CrossSectionKind::Rectangle { width, height } => width * height,
            CrossSectionKind::Disk { radius } => std::f64::consts::PI * radius * radius,
        }
    }

    pub fn centroid(&self) -> [f64; 2] {
        match self.kind {
            CrossSectionKind::Rectangle { width, height } => [0.5 * width, 0.5 * height],
            CrossSectionKind::Disk { .. } => [0.0, 0.0],
        }
    }

    /// Boundary curvature at the anchor (zero on a straight side).
    pub fn curvature_at_anchor(&self) -> f64 {
        match self.kind {
            CrossSectionKind::Rectangle { .. } => 0.0,
            CrossSectionKind::Disk { radius } => 1.0 / radius,
        }
    }

    pub(crate) fn rect_side(&self) -> Result<RectSide> {
        let CrossSectionKind::Rectangle { width, height } = self.kind else {
            return Err(Error::InvalidGeometry("not a rectangle".into()));
        };
        let tol = self.tolerance();
        let [x, y] = self.anchor;
        if y.abs() <= tol {
            Ok(RectSide::Bottom)
        } else if (x - width).abs() <= tol {
            Ok(RectSide::Right)
        } else if (y - height).abs() <= tol {
            Ok(RectSide::Top)
        } else if x.abs() <= tol {
            Ok(RectSide::Left)
        } else {
            Err(Error::InvalidGeometry(format!(
                "anchor ({x}, {y}) is not on the rectangle boundary"
            )))
        }
    }

    pub fn boundary_frame(&self) -> Result<BoundaryFrame> {
        self.validate()?;
        let origin = self.anchor;
        match self.kind {
            CrossSectionKind::Rectangle { .. } => {
                let (tangent, normal) = match self.rect_side()? {
                    RectSide::Bottom => ([1.0, 0.0], [0.0, -1.0]),
                    RectSide::Right => ([0.0, 1.0], [1.0, 0.0]),
                    RectSide::Top => ([-1.0, 0.0], [0.0, 1.0]),
                    RectSide::Left => ([0.0, -1.0], [-1.0, 0.0]),
                };
                Ok(BoundaryFrame {
                    origin,
                    tangent,
                    normal,
                })
            }
            CrossSectionKind::Disk { radius } => {
                let normal = [origin[0] / radius, origin[1] / radius];
                Ok(BoundaryFrame {
                    origin,
                    tangent: [-normal[1], normal[0]],
                    normal,
                })
            }
        }
    }

    /// Cross-section `T^{-1} ω` used when the perturbation period is `T`
    /// instead of one.
    pub fn rescaled(&self, period: f64) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::Precondition(format!("period must be positive, got {period}")));
        }
        let f = 1.0 / period;
        let kind = match self.kind {
            CrossSectionKind::Rectangle { width, height } => CrossSectionKind::Rectangle {
                width: width * f,
                height: height * f,
            },
            CrossSectionKind::Disk { radius } => CrossSectionKind::Disk { radius: radius * f },
        };
        Ok(Self {
            kind,
            anchor: [self.anchor[0] * f, self.anchor[1] * f],
        })
    }

    /// Whether a point lies in the closed cross-section (within tolerance).
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let tol = self.tolerance();
        match self.kind {
            CrossSectionKind::Rectangle { width, height } => {
                p[0] >= -tol && p[0] <= width + tol && p[1] >= -tol && p[1] <= height + tol
            }
            CrossSectionKind::Disk { radius } => p[0].hypot(p[1]) <= radius + tol,
        }
    }

    /// Distance from `p` to the boundary, for points inside.
    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        match self.kind {
            CrossSectionKind::Rectangle { width, height } => p[0].min(width - p[0]).min(p[1]).min(height - p[1]),
            CrossSectionKind::Disk { radius } => radius - p[0].hypot(p[1]),
        }
    }
}

/// Unit-scale reference set `θ` of the cavern, a subset of the half-space
/// `ξ₁ < 0`. Coordinates are `ξ = (n, s, z) / h` with `n` the outward
/// normal coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum CavernShape {
    /// `{|ξ| < radius, ξ₁ < 0}`.
    Hemisphere { radius: f64 },
    /// `{|ξᵢ| < half_extents[i], ξ₁ < 0}`; the first extent is the depth.
    Box { half_extents: [f64; 3] },
}

impl CavernShape {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            CavernShape::Hemisphere { radius } => *radius > 0.0 && radius.is_finite(),
            CavernShape::Box { half_extents } => half_extents.iter().all(|a| *a > 0.0 && a.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidGeometry(format!(
                "cavern dimensions must be positive: {self:?}"
            )))
        }
    }

    /// Radius `R_ref` of a half-ball containing the reference set.
    pub fn reference_radius(&self) -> f64 {
        match self {
            CavernShape::Hemisphere { radius } => *radius,
            CavernShape::Box { half_extents: a } => (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt(),
        }
    }

    /// Half-extents of the box whose faces carry the direction grid of the
    /// radial meshes. Box edges then coincide with grid lines.
    pub fn direction_box(&self) -> [f64; 3] {
        match self {
            CavernShape::Hemisphere { radius } => [*radius; 3],
            CavernShape::Box { half_extents } => *half_extents,
        }
    }

    /// Distance from the origin to the boundary of the symmetrized set along
    /// the (not necessarily unit) direction `dir`.
    pub fn radial_extent(&self, dir: [f64; 3]) -> f64 {
        let len = norm3(dir);
        match self {
            CavernShape::Hemisphere { radius } => *radius,
            CavernShape::Box { half_extents: a } => {
                let mut t = f64::INFINITY;
                for i in 0..3 {
                    let d = dir[i].abs() / len;
                    if d > 0.0 {
                        t = t.min(a[i] / d);
                    }
                }
                t
            }
        }
    }

    /// Strict interior test for the reference set (half-space part only).
    pub fn contains(&self, xi: [f64; 3]) -> bool {
        if xi[0] >= 0.0 {
            return false;
        }
        match self {
            CavernShape::Hemisphere { radius } => norm3(xi) < *radius,
            CavernShape::Box { half_extents: a } => (0..3).all(|i| xi[i].abs() < a[i]),
        }
    }

    pub fn scaled(&self, factor: f64) -> CavernShape {
        match self {
            CavernShape::Hemisphere { radius } => CavernShape::Hemisphere {
                radius: radius * factor,
            },
            CavernShape::Box { half_extents: a } => CavernShape::Box {
                half_extents: [a[0] * factor, a[1] * factor, a[2] * factor],
            },
        }
    }
}

/// A cavern `θʰ`: the reference set scaled by `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavernSpec {
    #[serde(flatten)]
    pub shape: CavernShape,
    pub h: f64,
}

impl CavernSpec {
    pub fn new(shape: CavernShape, h: f64) -> Result<Self> {
        let spec = Self { shape, h };
        spec.validate()?;
        Ok(spec)
    }

    pub fn hemisphere(radius: f64, h: f64) -> Result<Self> {
        Self::new(CavernShape::Hemisphere { radius }, h)
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        if !(self.h > 0.0 && self.h <= H_MAX) {
            return Err(Error::InvalidGeometry(format!(
                "cavern scale h = {} outside (0, {H_MAX}]",
                self.h
            )));
        }
        Ok(())
    }

    /// Half-extents of the scaled cavern in the local `(n, s, z)` frame.
    pub fn scaled_extents(&self) -> [f64; 3] {
        let a = self.shape.direction_box();
        [a[0] * self.h, a[1] * self.h, a[2] * self.h]
    }
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_anchor_must_avoid_corners() {
        assert!(CrossSectionShape::rectangle(1.0, 1.0, [0.0, 0.0]).is_err());
        assert!(CrossSectionShape::rectangle(1.0, 1.0, [0.3, 0.2]).is_err());
        assert!(CrossSectionShape::rectangle(1.0, 2.0, [1.0, 0.7]).is_ok());
        assert!(CrossSectionShape::rectangle(-1.0, 1.0, [0.5, 0.0]).is_err());
    }

    #[test]
    fn frames_point_outward() {
        let sq = CrossSectionShape::unit_square();
        let f = sq.boundary_frame().unwrap();
        assert_eq!(f.normal, [0.0, -1.0]);
        assert_eq!(f.to_physical(0.0, 0.25), [0.5, 0.25]);

        let left = CrossSectionShape::rectangle(2.0, 1.0, [0.0, 0.5]).unwrap();
        let f = left.boundary_frame().unwrap();
        assert_eq!(f.normal, [-1.0, 0.0]);
        assert_eq!(f.to_physical(0.0, 0.1), [0.1, 0.5]);

        let disk = CrossSectionShape::disk_bottom_anchor(1.0).unwrap();
        let f = disk.boundary_frame().unwrap();
        assert_eq!(f.normal, [0.0, -1.0]);
        assert_eq!(f.tangent, [1.0, 0.0]);
    }

    #[test]
    fn disk_anchor_must_be_on_circle() {
        assert!(CrossSectionShape::disk(1.0, [0.0, 0.9]).is_err());
        assert!(CrossSectionShape::disk(2.0, [2.0, 0.0]).is_ok());
    }

    #[test]
    fn cavern_scale_bounds() {
        assert!(CavernSpec::hemisphere(1.0, 0.0).is_err());
        assert!(CavernSpec::hemisphere(1.0, 0.6).is_err());
        assert!(CavernSpec::hemisphere(1.0, 0.2).is_ok());
    }

    #[test]
    fn box_radial_extent() {
        let b = CavernShape::Box {
            half_extents: [1.0, 2.0, 3.0],
        };
        assert!((b.radial_extent([-1.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((b.radial_extent([0.0, 0.0, 5.0]) - 3.0).abs() < 1e-15);
        assert!(b.contains([-0.5, 1.5, -2.5]));
        assert!(!b.contains([0.5, 1.5, -2.5]));
    }

    #[test]
    fn rescaling_divides_lengths() {
        let s = CrossSectionShape::unit_square().rescaled(2.0).unwrap();
        assert_eq!(
            s.kind,
            CrossSectionKind::Rectangle {
                width: 0.5,
                height: 0.5
            }
        );
        assert_eq!(s.anchor, [0.25, 0.0]);
    }
}
