//! Extended sources: an averaged cube map sampled over the pixel footprint with
//! trilinear filtering along up to [`MAX_ANISOTROPY`] taps on the major axis.

use super::cube::{direction_to_face, face_to_direction, from_texel, to_texel, uv_derivatives, FACES};
use crate::error::{Error, Result};
use crate::math::Vec3;

pub const MAX_ANISOTROPY: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct AreaMap {
    face_size: usize,
    /// `levels[ℓ][face][j·n + i]`, each texel the average of its four children.
    levels: Vec<Vec<Vec<[f32; 3]>>>,
}

impl AreaMap {
    /// Samples `radiance` at every texel centre of a `face_size`² cube map.
    pub fn from_fn(face_size: usize, radiance: impl Fn(Vec3) -> [f64; 3]) -> Result<Self> {
        if !face_size.is_power_of_two() {
            return Err(Error::Domain(format!("area map face size {face_size} is not a power of two")));
        }
        let n = face_size;
        let base: Vec<Vec<[f32; 3]>> = (0..FACES)
            .map(|f| {
                (0..n * n)
                    .map(|k| {
                        let (i, j) = (k % n, k / n);
                        let d = face_to_direction(f, from_texel(i as f64 + 0.5, n), from_texel(j as f64 + 0.5, n));
                        radiance(d.normalize()).map(|v| v as f32)
                    })
                    .collect()
            })
            .collect();
        let mut levels = vec![base];
        let mut n = face_size;
        while n > 1 {
            let m = n / 2;
            let prev = levels.last().unwrap();
            let next = prev
                .iter()
                .map(|face| {
                    (0..m * m)
                        .map(|k| {
                            let (i, j) = (k % m, k / m);
                            let mut acc = [0.0f64; 3];
                            for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                                let t = face[(2 * j + dj) * n + 2 * i + di];
                                for c in 0..3 {
                                    acc[c] += t[c] as f64 / 4.0;
                                }
                            }
                            acc.map(|v| v as f32)
                        })
                        .collect()
                })
                .collect();
            levels.push(next);
            n = m;
        }
        Ok(AreaMap { face_size, levels })
    }

    pub fn constant(face_size: usize, xyz: [f64; 3]) -> Result<Self> {
        Self::from_fn(face_size, |_| xyz)
    }

    pub fn face_size(&self) -> usize {
        self.face_size
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    fn fetch(&self, level: usize, face: usize, i: usize, j: usize) -> [f64; 3] {
        let n = self.face_size >> level;
        self.levels[level][face][j * n + i].map(|v| v as f64)
    }

    /// Bilinear sample at a point of the (possibly extended) plane of `face`.
    fn bilinear(&self, level: usize, face: usize, u: f64, v: f64) -> [f64; 3] {
        let c = direction_to_face(face_to_direction(face, u, v));
        let n = self.face_size >> level;
        let split = |x: f64| {
            let s = to_texel(x, n) - 0.5;
            let i = s.floor();
            let t = s - i;
            let lo = (i.max(0.0) as usize).min(n - 1);
            let hi = ((i + 1.0).max(0.0) as usize).min(n - 1);
            (lo, hi, t)
        };
        let (i0, i1, tx) = split(c.u);
        let (j0, j1, ty) = split(c.v);
        let mut acc = [0.0; 3];
        for (i, j, w) in [
            (i0, j0, (1.0 - tx) * (1.0 - ty)),
            (i1, j0, tx * (1.0 - ty)),
            (i0, j1, (1.0 - tx) * ty),
            (i1, j1, tx * ty),
        ] {
            let t = self.fetch(level, c.face, i, j);
            for k in 0..3 {
                acc[k] += w * t[k];
            }
        }
        acc
    }

    fn trilinear(&self, lod: f64, face: usize, u: f64, v: f64) -> [f64; 3] {
        let top = (self.levels.len() - 1) as f64;
        let lod = lod.clamp(0.0, top);
        let l0 = lod.floor() as usize;
        let t = lod - l0 as f64;
        let a = self.bilinear(l0, face, u, v);
        if t == 0.0 {
            return a;
        }
        let b = self.bilinear(l0 + 1, face, u, v);
        [0, 1, 2].map(|k| a[k] + t * (b[k] - a[k]))
    }
}

/// Average radiance over the pixel footprint of direction `d` with screen derivatives
/// `dw`, `dh`.
pub fn sample_extended(map: &AreaMap, d: Vec3, dw: Vec3, dh: Vec3) -> Result<[f64; 3]> {
    if !(d.is_finite() && d.length() > 0.0 && dw.is_finite() && dh.is_finite()) {
        return Err(Error::InvalidBeam(format!("extended-source footprint at {d:?}")));
    }
    let c = direction_to_face(d);
    let half = map.face_size as f64 / 2.0;
    let ew = uv_derivatives(c.face, d, dw);
    let eh = uv_derivatives(c.face, d, dh);
    let len = |e: [f64; 2]| (e[0] * e[0] + e[1] * e[1]).sqrt() * half;
    let (major, major_len) = if len(ew) >= len(eh) { (ew, len(ew)) } else { (eh, len(eh)) };
    let area = (ew[0] * eh[1] - ew[1] * eh[0]).abs() * half * half;
    let minor_len = if major_len > 0.0 { area / major_len } else { 0.0 };
    let taps = if minor_len > 0.0 {
        ((major_len / minor_len).ceil() as usize).clamp(1, MAX_ANISOTROPY)
    } else if major_len > 0.0 {
        MAX_ANISOTROPY
    } else {
        1
    };
    let width = (major_len / taps as f64).max(minor_len);
    let lod = if width > 1.0 { width.log2() } else { 0.0 };
    let mut acc = [0.0; 3];
    for k in 0..taps {
        let s = (k as f64 + 0.5) / taps as f64 - 0.5;
        let v = map.trilinear(lod, c.face, c.u + s * major[0], c.v + s * major[1]);
        for ch in 0..3 {
            acc[ch] += v[ch] / taps as f64;
        }
    }
    Ok(acc)
}
