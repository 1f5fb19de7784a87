//! Cube-map parametrization shared by the star and extended-source maps.
//!
//! Face `f = 2·axis + negative`. On a face with major axis `m` the other two axes
//! `(a, b)` follow cyclically (x → (y, z), y → (z, x), z → (x, y)) and
//! `U = d_a / |d_m|`, `V = d_b / |d_m|`, both in `[−1, 1]`.

use crate::math::Vec3;

pub const FACES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceCoord {
    pub face: usize,
    pub u: f64,
    pub v: f64,
}

/// `(major, a, b, sign)` of a face.
pub fn axes(face: usize) -> (usize, usize, usize, f64) {
    let m = face / 2;
    let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
    (m, (m + 1) % 3, (m + 2) % 3, sign)
}

pub fn direction_to_face(d: Vec3) -> FaceCoord {
    let c = d.to_array();
    let m = (0..3)
        .max_by(|&i, &j| c[i].abs().total_cmp(&c[j].abs()).then(j.cmp(&i)))
        .unwrap();
    let face = 2 * m + (c[m] < 0.0) as usize;
    let (_, a, b, _) = axes(face);
    let n = c[m].abs();
    FaceCoord {
        face,
        u: c[a] / n,
        v: c[b] / n,
    }
}

/// Unnormalized direction through face-plane coordinates `(u, v)`, which may lie
/// outside `[−1, 1]`.
pub fn face_to_direction(face: usize, u: f64, v: f64) -> Vec3 {
    let (m, a, b, sign) = axes(face);
    let mut c = [0.0; 3];
    c[m] = sign;
    c[a] = u;
    c[b] = v;
    Vec3::new(c[0], c[1], c[2])
}

/// Central projection of `d` onto the plane of `face`, when `d` points into its half-space.
pub fn project_to_face(face: usize, d: Vec3) -> Option<(f64, f64)> {
    let (m, a, b, sign) = axes(face);
    let c = d.to_array();
    let n = sign * c[m];
    (n > 0.0).then(|| (c[a] / n, c[b] / n))
}

/// Screen derivatives of `(U, V)` on `face` from derivatives of the direction.
pub fn uv_derivatives(face: usize, d: Vec3, dd: Vec3) -> [f64; 2] {
    let (m, a, b, sign) = axes(face);
    let (c, dc) = (d.to_array(), dd.to_array());
    let n = sign * c[m];
    let dn = sign * dc[m];
    let (u, v) = (c[a] / n, c[b] / n);
    [(dc[a] - u * dn) / n, (dc[b] - v * dn) / n]
}

/// Face-plane coordinate to continuous texel coordinate for `n` texels per side.
pub fn to_texel(x: f64, n: usize) -> f64 {
    (x + 1.0) * 0.5 * n as f64
}

pub fn from_texel(s: f64, n: usize) -> f64 {
    s / n as f64 * 2.0 - 1.0
}
