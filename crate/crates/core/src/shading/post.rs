//! HDR post-processing: bloom and tone mapping.
//!
//! Bloom sums blurred copies of an image pyramid. Downsampling sums 2×2 blocks,
//! the blur scatters each pixel with a binomial kernel whose off-image weight
//! returns to the pixel itself, and upsampling spreads each texel uniformly over
//! its block, so every level preserves the total energy exactly.

use image::{Rgb, RgbImage};
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct HdrImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, top row first, linear CIE XYZ.
    pub pixels: Vec<[f64; 3]>,
}

impl HdrImage {
    pub fn new(width: usize, height: usize) -> Self {
        HdrImage {
            width,
            height,
            pixels: vec![[0.0; 3]; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut [f64; 3] {
        &mut self.pixels[y * self.width + x]
    }

    pub fn total(&self) -> [f64; 3] {
        self.pixels.iter().fold([0.0; 3], |a, p| [a[0] + p[0], a[1] + p[1], a[2] + p[2]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BloomOptions {
    /// Fraction of the energy moved into the halo.
    pub strength: f64,
    /// Exponent `p` of the approximated point spread function `ρ^−p`.
    pub falloff: f64,
    pub max_levels: usize,
}

impl Default for BloomOptions {
    fn default() -> Self {
        BloomOptions {
            strength: 0.08,
            falloff: 2.5,
            max_levels: 8,
        }
    }
}

/// Energy weights of the pyramid levels; level 0 is the unblurred image.
///
/// A level of scale `2^k` spreads its weight over an area `4^k`, so weights growing as
/// `2^{(2−p)k}` give an intensity profile falling off as `ρ^−p`.
pub fn level_weights(levels: usize, opts: &BloomOptions) -> Vec<f64> {
    if levels <= 1 || opts.strength <= 0.0 {
        return vec![1.0];
    }
    let raw: Vec<f64> = (1..levels).map(|k| 2f64.powf((2.0 - opts.falloff) * k as f64)).collect();
    let sum: f64 = raw.iter().sum();
    let mut w = vec![1.0 - opts.strength];
    w.extend(raw.iter().map(|r| opts.strength * r / sum));
    w
}

#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    px: Vec<[f64; 3]>,
}

fn add(a: &mut [f64; 3], b: [f64; 3], k: f64) {
    for c in 0..3 {
        a[c] += k * b[c];
    }
}

fn downsample(p: &Plane) -> Plane {
    let (w, h) = (p.w.div_ceil(2), p.h.div_ceil(2));
    let mut px = vec![[0.0; 3]; w * h];
    for y in 0..p.h {
        for x in 0..p.w {
            add(&mut px[(y / 2) * w + x / 2], p.px[y * p.w + x], 1.0);
        }
    }
    Plane { w, h, px }
}

const KERNEL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// One-dimensional scatter blur along x (`horizontal`) or y.
fn blur_pass(p: &Plane, horizontal: bool) -> Plane {
    let (w, h) = (p.w, p.h);
    let mut out = vec![[0.0; 3]; w * h];
    let lines = if horizontal { h } else { w };
    let len = if horizontal { w } else { h };
    let idx = |line: usize, i: usize| if horizontal { line * w + i } else { i * w + line };
    let rows: Vec<Vec<[f64; 3]>> = (0..lines)
        .into_par_iter()
        .map(|line| {
            let mut acc = vec![[0.0; 3]; len];
            for i in 0..len {
                let v = p.px[idx(line, i)];
                for (t, &k) in KERNEL.iter().enumerate() {
                    let j = i as isize + t as isize - 2;
                    let target = if j < 0 || j >= len as isize { i } else { j as usize };
                    add(&mut acc[target], v, k);
                }
            }
            acc
        })
        .collect();
    for (line, acc) in rows.into_iter().enumerate() {
        for (i, v) in acc.into_iter().enumerate() {
            out[idx(line, i)] = v;
        }
    }
    Plane { w, h, px: out }
}

fn blur(p: &Plane) -> Plane {
    blur_pass(&blur_pass(p, true), false)
}

/// Spreads each texel over its 2×2 block (or the part of it inside the finer level).
fn upsample(p: &Plane, w: usize, h: usize) -> Plane {
    let mut px = vec![[0.0; 3]; w * h];
    for y in 0..h {
        for x in 0..w {
            let (cx, cy) = (x / 2, y / 2);
            let bw = (2 * cx + 2).min(w) - 2 * cx;
            let bh = (2 * cy + 2).min(h) - 2 * cy;
            let v = p.px[cy * p.w + cx];
            px[y * w + x] = v.map(|c| c / (bw * bh) as f64);
        }
    }
    Plane { w, h, px }
}

/// Energy-preserving, linear bloom.
pub fn bloom(img: &HdrImage, opts: &BloomOptions) -> HdrImage {
    let base = Plane {
        w: img.width,
        h: img.height,
        px: img.pixels.clone(),
    };
    let mut pyramid = vec![base];
    while pyramid.len() < opts.max_levels.max(1) {
        let last = pyramid.last().unwrap();
        if last.w < 4 && last.h < 4 {
            break;
        }
        pyramid.push(downsample(last));
    }
    let weights = level_weights(pyramid.len(), opts);
    let blurred: Vec<Plane> = pyramid
        .par_iter()
        .enumerate()
        .map(|(k, p)| if k == 0 { p.clone() } else { blur(p) })
        .collect();
    // Collapse from the coarsest level: acc_k = w_k blur_k + up(acc_{k+1}).
    let mut acc: Option<Plane> = None;
    for (k, p) in blurred.iter().enumerate().rev() {
        let mut level = Plane {
            w: p.w,
            h: p.h,
            px: p.px.iter().map(|v| v.map(|c| c * weights[k])).collect(),
        };
        if let Some(coarse) = acc {
            let up = upsample(&coarse, p.w, p.h);
            for (a, b) in level.px.iter_mut().zip(up.px) {
                add(a, b, 1.0);
            }
        }
        acc = Some(level);
    }
    let out = acc.expect("pyramid has at least one level");
    HdrImage {
        width: img.width,
        height: img.height,
        pixels: out.px,
    }
}

/// CIE XYZ to linear sRGB (D65).
pub const XYZ_TO_SRGB: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];

/// Linear value mapped to display white by the extended Reinhard curve.
pub const WHITE_POINT: f64 = 4.0;

pub fn xyz_to_linear_srgb(xyz: [f64; 3]) -> [f64; 3] {
    XYZ_TO_SRGB.map(|row| row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2])
}

fn reinhard(c: f64) -> f64 {
    let c = c.max(0.0);
    (c * (1.0 + c / (WHITE_POINT * WHITE_POINT)) / (1.0 + c)).min(1.0)
}

fn srgb_encode(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

/// Tone maps one XYZ pixel to 8-bit sRGB.
pub fn tone_map_pixel(xyz: [f64; 3], exposure: f64) -> [u8; 3] {
    xyz_to_linear_srgb(xyz).map(|c| {
        let v = srgb_encode(reinhard(c * exposure));
        (v * 255.0).round().clamp(0.0, 255.0) as u8
    })
}

pub fn tone_map(img: &HdrImage, exposure: f64) -> RgbImage {
    let mut out = RgbImage::new(img.width as u32, img.height as u32);
    for (i, p) in img.pixels.iter().enumerate() {
        let (x, y) = ((i % img.width) as u32, (i / img.width) as u32);
        out.put_pixel(x, y, Rgb(tone_map_pixel(*p, exposure)));
    }
    out
}
