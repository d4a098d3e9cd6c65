//! Affine 3×4 transforms for placing instances in the world.

use crate::quat::Vec3;

/// `p ↦ linear·p + translation`, with `linear` stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine3 {
    pub linear: [[f64; 3]; 3],
    pub translation: Vec3,
}

impl Default for Affine3 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Affine3 {
    pub const IDENTITY: Affine3 = Affine3 {
        linear: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        translation: Vec3::ZERO,
    };

    /// From three rows of `[a, b, c, t]`.
    pub fn from_rows(rows: [[f64; 4]; 3]) -> Self {
        let mut linear = [[0.0; 3]; 3];
        for (r, row) in rows.iter().enumerate() {
            linear[r].copy_from_slice(&row[..3]);
        }
        Self {
            linear,
            translation: Vec3::new(rows[0][3], rows[1][3], rows[2][3]),
        }
    }

    pub fn to_rows(&self) -> [[f64; 4]; 3] {
        let t = self.translation.to_array();
        let mut rows = [[0.0; 4]; 3];
        for r in 0..3 {
            rows[r][..3].copy_from_slice(&self.linear[r]);
            rows[r][3] = t[r];
        }
        rows
    }

    pub fn translation(t: Vec3) -> Self {
        Self {
            translation: t,
            ..Self::IDENTITY
        }
    }

    pub fn scale(s: Vec3) -> Self {
        Self {
            linear: [[s.x, 0.0, 0.0], [0.0, s.y, 0.0], [0.0, 0.0, s.z]],
            translation: Vec3::ZERO,
        }
    }

    /// Rotation by `angles` (radians) about x, then y, then z.
    pub fn rotation_xyz(angles: Vec3) -> Self {
        let (sx, cx) = angles.x.sin_cos();
        let (sy, cy) = angles.y.sin_cos();
        let (sz, cz) = angles.z.sin_cos();
        let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
        let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
        let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
        Self {
            linear: mat_mul(&rz, &mat_mul(&ry, &rx)),
            translation: Vec3::ZERO,
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn then_after(&self, other: &Affine3) -> Affine3 {
        Affine3 {
            linear: mat_mul(&self.linear, &other.linear),
            translation: self.transform_point(other.translation),
        }
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.linear;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// `None` when the linear part is singular (or numerically so).
    pub fn inverse(&self) -> Option<Affine3> {
        let det = self.determinant();
        let scale = self
            .linear
            .iter()
            .flatten()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        if !det.is_finite() || det.abs() <= 1e-12 * scale.powi(3) || scale == 0.0 {
            return None;
        }
        let m = &self.linear;
        let inv_det = 1.0 / det;
        let mut inv = [[0.0; 3]; 3];
        inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det;
        inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det;
        inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det;
        inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det;
        inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det;
        inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det;
        inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det;
        inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det;
        inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det;
        let linear_inv = Affine3 {
            linear: inv,
            translation: Vec3::ZERO,
        };
        let t = linear_inv.transform_vector(self.translation);
        Some(Affine3 {
            linear: inv,
            translation: -t,
        })
    }

    #[inline]
    pub fn transform_vector(&self, v: Vec3) -> Vec3 {
        let m = &self.linear;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    #[inline]
    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        self.transform_vector(p) + self.translation
    }

    /// Row vector times the linear part, `vᵀ·M`, i.e. `Mᵀ·v`. Applied with the
    /// world-to-object matrix this carries object normals to world space.
    #[inline]
    pub fn transform_vector_transposed(&self, v: Vec3) -> Vec3 {
        let m = &self.linear;
        Vec3::new(
            m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
            m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
            m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z,
        )
    }
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}
