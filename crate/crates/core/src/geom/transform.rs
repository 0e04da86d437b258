use std::ops::Mul;

use serde::{Deserialize, Serialize};

use super::vec::{Point3, Vec3};
use super::GeomError;

/// Row-major 4x4 matrix acting on homogeneous column vectors.
///
/// The last row is always `(0, 0, 0, 1)`; every constructor here preserves that.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform4 {
    pub m: [[f64; 4]; 4],
}

impl Transform4 {
    pub const IDENTITY: Transform4 = Transform4 {
        m: [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ],
    };

    pub fn translation(t: Vec3) -> Self {
        let mut out = Self::IDENTITY;
        out.m[0][3] = t.x;
        out.m[1][3] = t.y;
        out.m[2][3] = t.z;
        out
    }

    /// Linear part from a row-major 3x3, zero translation.
    pub fn from_linear(a: [[f64; 3]; 3]) -> Self {
        let mut out = Self::IDENTITY;
        for r in 0..3 {
            out.m[r][..3].copy_from_slice(&a[r]);
        }
        out
    }

    pub fn linear(&self) -> [[f64; 3]; 3] {
        let mut a = [[0.0; 3]; 3];
        for r in 0..3 {
            a[r].copy_from_slice(&self.m[r][..3]);
        }
        a
    }

    pub fn translation_part(&self) -> Vec3 {
        Vec3::new(self.m[0][3], self.m[1][3], self.m[2][3])
    }

    pub fn transpose_linear(&self) -> Self {
        let a = self.linear();
        let mut t = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                t[r][c] = a[c][r];
            }
        }
        Self::from_linear(t)
    }

    pub fn apply_point(&self, p: Point3) -> Point3 {
        let m = &self.m;
        Vec3::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z + m[0][3],
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z + m[1][3],
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z + m[2][3],
        )
    }

    pub fn apply_vector(&self, v: Vec3) -> Vec3 {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    /// Determinant of the upper-left 3x3 block.
    pub fn det3(&self) -> f64 {
        let a = &self.m;
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }

    /// Max absolute entry difference.
    pub fn max_abs_diff(&self, o: &Transform4) -> f64 {
        let mut d = 0.0f64;
        for r in 0..4 {
            for c in 0..4 {
                d = d.max((self.m[r][c] - o.m[r][c]).abs());
            }
        }
        d
    }

    /// True when the 3x3 block is orthonormal to `tol`.
    pub fn is_orthonormal(&self, tol: f64) -> bool {
        let a = self.linear();
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| a[k][i] * a[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_affine(&self) -> bool {
        self.m[3] == [0.0, 0.0, 0.0, 1.0]
    }
}

impl Mul for Transform4 {
    type Output = Transform4;
    fn mul(self, o: Transform4) -> Transform4 {
        let mut m = [[0.0; 4]; 4];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (0..4).map(|k| self.m[r][k] * o.m[k][c]).sum();
            }
        }
        Transform4 { m }
    }
}

/// Oriented plane: a point on it and a unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub origin: Point3,
    pub normal: Vec3,
}

impl Plane {
    /// Normalizes `normal`; fails on a zero or non-finite normal.
    pub fn new(origin: Point3, normal: Vec3) -> Result<Plane, GeomError> {
        if !origin.is_finite() {
            return Err(GeomError::NonFinite);
        }
        let normal = normal.try_normalize().ok_or(GeomError::DegenerateNormal)?;
        Ok(Plane { origin, normal })
    }

    pub fn signed_distance(&self, p: Point3) -> f64 {
        (p - self.origin).dot(self.normal)
    }

    pub fn flipped(&self) -> Plane {
        Plane { origin: self.origin, normal: -self.normal }
    }
}

/// Mirror image of `p` through `plane`.
pub fn reflect_point(p: Point3, plane: &Plane) -> Point3 {
    p - plane.normal * (2.0 * plane.signed_distance(p))
}

/// Rotation taking the unit vector `n` onto +X.
///
/// Minimal-angle rotation about `n x X` (Rodrigues). For normals pointing into
/// the -X half-space the rotation goes through -X first and finishes with a
/// half turn about Y, which keeps the formula well conditioned near `n = -X`.
pub fn rotation_onto_x(n: Vec3) -> Transform4 {
    if n.x < 0.0 {
        let half_turn_y = Transform4::from_linear([[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]);
        // R_y(pi) maps -X to +X; r maps n to -X, i.e. maps -n to +X.
        return half_turn_y * minimal_rotation_onto_x(-n);
    }
    minimal_rotation_onto_x(n)
}

// Requires n.x >= 0 so that 1 + c >= 1.
fn minimal_rotation_onto_x(n: Vec3) -> Transform4 {
    let k = n.cross(Vec3::X);
    let c = n.x;
    if k.norm_squared() == 0.0 {
        return Transform4::IDENTITY;
    }
    // R = I + [k]x + [k]x^2 / (1 + c)
    let kx = [[0.0, -k.z, k.y], [k.z, 0.0, -k.x], [-k.y, k.x, 0.0]];
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let kk: f64 = (0..3).map(|l| kx[i][l] * kx[l][j]).sum();
            r[i][j] = if i == j { 1.0 } else { 0.0 } + kx[i][j] + kk / (1.0 + c);
        }
    }
    Transform4::from_linear(r)
}

/// Reflection through `plane`, built as the five-step chain
/// translate-to-origin, rotate-normal-onto-X, mirror-X, un-rotate, un-translate.
pub fn reflection_transform(plane: &Plane) -> Transform4 {
    let to_origin = Transform4::translation(-plane.origin);
    let rotate = rotation_onto_x(plane.normal);
    let mirror_x = Transform4::from_linear([[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    let unrotate = rotate.transpose_linear();
    let back = Transform4::translation(plane.origin);
    back * unrotate * mirror_x * rotate * to_origin
}
