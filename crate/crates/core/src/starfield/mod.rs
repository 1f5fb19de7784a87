//! Punctual stars: a cube map holding at most one (aggregated) star per texel with a
//! sum-semantics mip chain, gathered through the extended pixel footprint with tent
//! weights. Extended sources use an ordinary averaged cube map.

pub mod area;
pub mod catalog;
pub mod cube;

pub use area::{sample_extended, AreaMap};
pub use catalog::{generate_catalog, CatalogOptions, Star, StarCatalog};

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::Vec3;
use cube::{direction_to_face, face_to_direction, project_to_face, to_texel, uv_derivatives, FACES};

/// Largest number of texels the extended footprint may span per axis.
pub const MAX_SPAN: f64 = 9.0;

const MAGIC: &[u8; 4] = b"BHSM";

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StarTexel {
    /// Sum of the XYZ colours of the stars in the texel.
    pub xyz: [f32; 3],
    /// Luminosity-weighted star position inside the texel, in `[0, 1)²`.
    pub pos: [f32; 2],
}

impl StarTexel {
    fn weight(&self) -> f64 {
        self.xyz.iter().map(|&v| v as f64).sum()
    }

    fn is_empty(&self) -> bool {
        self.xyz == [0.0; 3]
    }

    /// Adds a star at texel-relative position `p`, keeping the position luminosity-weighted.
    fn accumulate(&mut self, xyz: [f64; 3], p: [f64; 2]) {
        let w0 = self.weight();
        let w1: f64 = xyz.iter().sum();
        let total = w0 + w1;
        if total > 0.0 {
            for k in 0..2 {
                let v = (self.pos[k] as f64 * w0 + p[k] * w1) / total;
                // Stay strictly below 1 after rounding to f32.
                self.pos[k] = (v as f32).min(1.0 - f32::EPSILON).max(0.0);
            }
        }
        for c in 0..3 {
            self.xyz[c] = (self.xyz[c] as f64 + xyz[c]) as f32;
        }
    }
}

/// How gathers place a texel's star inside the texel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum PositionMode {
    /// The stored luminosity-weighted position.
    #[default]
    Stored,
    /// A position derived from a hash of the texel colour, as a GPU implementation
    /// without a position channel would do.
    ColorHash,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarMap {
    face_size: usize,
    /// `levels[ℓ][face][j·n + i]` with `n = face_size >> ℓ`.
    levels: Vec<Vec<Vec<StarTexel>>>,
}

impl StarMap {
    pub fn face_size(&self) -> usize {
        self.face_size
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn level_size(&self, level: usize) -> usize {
        self.face_size >> level
    }

    pub fn texel(&self, level: usize, face: usize, i: usize, j: usize) -> StarTexel {
        self.levels[level][face][j * self.level_size(level) + i]
    }

    /// Total XYZ over all texels of a level.
    pub fn level_total(&self, level: usize) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for t in self.levels[level].iter().flatten() {
            for c in 0..3 {
                acc[c] += t.xyz[c] as f64;
            }
        }
        acc
    }

    pub fn footprint(&self, d: Vec3, dw: Vec3, dh: Vec3) -> Result<Footprint> {
        footprint(d, dw, dh, self.face_size, self.levels.len())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.face_size as u32).to_le_bytes())?;
        w.write_all(&(self.levels.len() as u32).to_le_bytes())?;
        for t in self.levels.iter().flatten().flatten() {
            for v in t.xyz.iter().chain(t.pos.iter()) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut head = [0u8; 12];
        r.read_exact(&mut head)?;
        if &head[..4] != MAGIC {
            return Err(Error::Format("not a star map (bad magic)".into()));
        }
        let face_size = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
        let count = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        if !face_size.is_power_of_two() || count != face_size.trailing_zeros() as usize + 1 {
            return Err(Error::Format(format!("star map with face size {face_size} and {count} levels")));
        }
        let mut levels = Vec::with_capacity(count);
        for l in 0..count {
            let n = face_size >> l;
            let floats = crate::tables::io::read_floats(r, (FACES * n * n * 5) as u64)?;
            let mut faces = Vec::with_capacity(FACES);
            for f in floats.chunks_exact(n * n * 5) {
                faces.push(
                    f.chunks_exact(5)
                        .map(|c| StarTexel {
                            xyz: [c[0], c[1], c[2]],
                            pos: [c[3], c[4]],
                        })
                        .collect(),
                );
            }
            levels.push(faces);
        }
        crate::tables::io::expect_eof(r)?;
        Ok(StarMap { face_size, levels })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}

/// Splits a continuous texel coordinate into a texel index and an in-texel offset.
fn split_texel(s: f64, n: usize) -> (usize, f64) {
    let i = (s.floor().max(0.0) as usize).min(n - 1);
    (i, (s - i as f64).clamp(0.0, 1.0))
}

pub fn build_starmap(catalog: &StarCatalog, face_size: usize) -> Result<StarMap> {
    if !face_size.is_power_of_two() {
        return Err(Error::Domain(format!("star map face size {face_size} is not a power of two")));
    }
    let n = face_size;
    let mut base = vec![vec![StarTexel::default(); n * n]; FACES];
    for star in &catalog.stars {
        let c = direction_to_face(star.direction);
        let (i, pi) = split_texel(to_texel(c.u, n), n);
        let (j, pj) = split_texel(to_texel(c.v, n), n);
        base[c.face][j * n + i].accumulate(star.xyz(), [pi, pj]);
    }
    let mut levels = vec![base];
    while levels.last().unwrap()[0].len() > 1 {
        let prev = levels.last().unwrap();
        let pn = (prev[0].len() as f64).sqrt() as usize;
        let cn = pn / 2;
        let faces = prev
            .iter()
            .map(|face| {
                let mut out = vec![StarTexel::default(); cn * cn];
                for jj in 0..cn {
                    for ii in 0..cn {
                        let mut acc = [0.0f64; 3];
                        let mut pos = [0.0f64; 2];
                        let mut wsum = 0.0;
                        for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                            let child = face[(2 * jj + dj) * pn + 2 * ii + di];
                            let w = child.weight();
                            for c in 0..3 {
                                acc[c] += child.xyz[c] as f64;
                            }
                            pos[0] += w * (di as f64 + child.pos[0] as f64) / 2.0;
                            pos[1] += w * (dj as f64 + child.pos[1] as f64) / 2.0;
                            wsum += w;
                        }
                        let t = &mut out[jj * cn + ii];
                        t.xyz = acc.map(|v| v as f32);
                        if wsum > 0.0 {
                            t.pos = pos.map(|p| ((p / wsum) as f32).min(1.0 - f32::EPSILON));
                        }
                    }
                }
                out
            })
            .collect();
        levels.push(faces);
    }
    Ok(StarMap { face_size, levels })
}

/// Pixel footprint on the cube map: the parallelogram `center + w·dw + h·dh` for
/// `w, h ∈ [−1, 1]` in face-plane coordinates, and the mip level it is gathered at.
///
/// The parallelogram selects the level and the texels to fetch. Star pixel
/// coordinates are found on the plane `direction + w·ddw + h·ddh` instead, which does
/// not depend on the face and so stays continuous across face edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub face: usize,
    pub center: [f64; 2],
    pub dw: [f64; 2],
    pub dh: [f64; 2],
    pub level: usize,
    pub direction: Vec3,
    pub ddw: Vec3,
    pub ddh: Vec3,
}

impl Footprint {
    /// The same footprint expressed on another face, for directions near its edge.
    pub fn on_face(&self, face: usize) -> Option<Footprint> {
        let (u, v) = project_to_face(face, self.direction)?;
        Some(Footprint {
            face,
            center: [u, v],
            dw: uv_derivatives(face, self.direction, self.ddw),
            dh: uv_derivatives(face, self.direction, self.ddh),
            ..*self
        })
    }

    /// Pixel coordinates `(w, h)` of direction `s`, or `None` when `s` does not meet the
    /// footprint plane in front of the camera.
    pub fn pixel_coords(&self, s: Vec3) -> Option<(f64, f64)> {
        let n = self.ddw.cross(self.ddh);
        let nn = n.dot(n);
        let sn = s.dot(n);
        if !(nn > 0.0) || sn == 0.0 {
            return None;
        }
        let lambda = self.direction.dot(n) / sn;
        if !(lambda > 0.0) {
            return None;
        }
        let p = s * lambda - self.direction;
        Some((p.cross(self.ddh).dot(n) / nn, self.ddw.cross(p).dot(n) / nn))
    }
}

/// Smallest level at which the extended footprint, grown by one texel per side, spans
/// at most [`MAX_SPAN`] texels per axis. `span0` is the extent in level-0 texels.
pub fn footprint_level(span0: f64, levels: usize) -> usize {
    (0..levels)
        .find(|&l| span0 / (1u64 << l) as f64 + 2.0 <= MAX_SPAN)
        .unwrap_or(levels - 1)
}

pub fn footprint(d: Vec3, dw: Vec3, dh: Vec3, face_size: usize, levels: usize) -> Result<Footprint> {
    if !(d.is_finite() && d.length() > 0.0) {
        return Err(Error::InvalidBeam(format!("escape direction {d:?}")));
    }
    if !(dw.is_finite() && dh.is_finite()) {
        return Err(Error::InvalidBeam("non-finite direction derivatives".into()));
    }
    let c = direction_to_face(d);
    let dw_uv = uv_derivatives(c.face, d, dw);
    let dh_uv = uv_derivatives(c.face, d, dh);
    // Half a face is face_size / 2 texels; the footprint extends one derivative each way.
    let half = face_size as f64 / 2.0;
    let span = (0..2)
        .map(|k| 2.0 * (dw_uv[k].abs() + dh_uv[k].abs()) * half)
        .fold(0.0, f64::max);
    Ok(Footprint {
        face: c.face,
        center: [c.u, c.v],
        dw: dw_uv,
        dh: dh_uv,
        level: footprint_level(span, levels),
        direction: d,
        ddw: dw,
        ddh: dh,
    })
}

/// Tent filter `f(x) = max(1 − |x|, 0)`.
pub fn tent(x: f64) -> f64 {
    (1.0 - x.abs()).max(0.0)
}

fn hash_position(t: &StarTexel) -> [f64; 2] {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in t.xyz {
        for b in v.to_bits().to_le_bytes() {
            h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
        }
    }
    let a = (h >> 40) as f64 / (1u64 << 24) as f64;
    let b = ((h >> 16) & 0xff_ffff) as f64 / (1u64 << 24) as f64;
    [a, b]
}

/// Sum of star colours in the footprint, each weighted by `f(w) f(h)` at its pixel
/// coordinates `(w, h)`.
pub fn gather_stars(map: &StarMap, fp: &Footprint, mode: PositionMode) -> [f64; 3] {
    let level = fp.level.min(map.level_count() - 1);
    let n = map.level_size(level);
    let scale = n as f64 / 2.0;
    let c = [to_texel(fp.center[0], n), to_texel(fp.center[1], n)];
    let (a, b, cc, dd) = (fp.dw[0] * scale, fp.dh[0] * scale, fp.dw[1] * scale, fp.dh[1] * scale);
    let det = a * dd - b * cc;
    if !(det.abs() > 1e-300) {
        return [0.0; 3];
    }
    let ext = [a.abs() + b.abs(), cc.abs() + dd.abs()];
    let lo = [(c[0] - ext[0]).floor() as i64, (c[1] - ext[1]).floor() as i64];
    let hi = [(c[0] + ext[0]).floor() as i64, (c[1] + ext[1]).floor() as i64];

    let mut acc = [0.0; 3];
    let mut visit = |face: usize, i: usize, j: usize| {
        let t = map.texel(level, face, i, j);
        if t.is_empty() {
            return;
        }
        let p = match mode {
            PositionMode::Stored => [t.pos[0] as f64, t.pos[1] as f64],
            PositionMode::ColorHash => hash_position(&t),
        };
        let dir = face_to_direction(face, cube::from_texel(i as f64 + p[0], n), cube::from_texel(j as f64 + p[1], n));
        let Some((w, h)) = fp.pixel_coords(dir) else { return };
        let wt = tent(w) * tent(h);
        if wt > 0.0 {
            for k in 0..3 {
                acc[k] += t.xyz[k] as f64 * wt;
            }
        }
    };
    let inside = |i: i64| (0..n as i64).contains(&i);
    let in_range = |i: i64, j: i64| inside(i) && inside(j) && (lo[0]..=hi[0]).contains(&i) && (lo[1]..=hi[1]).contains(&j);
    // Texels of neighbouring faces, collected once each; empty unless the footprint
    // crosses a face edge.
    let mut beyond: Vec<(usize, usize, usize)> = Vec::new();
    for j in lo[1]..=hi[1] {
        for i in lo[0]..=hi[0] {
            if inside(i) && inside(j) {
                visit(fp.face, i as usize, j as usize);
                continue;
            }
            // Beyond the face edge: find the texels of the neighbouring face under this
            // one by projecting points of the extended texel.
            for (oi, oj) in [(0.5, 0.5), (0.01, 0.01), (0.99, 0.01), (0.01, 0.99), (0.99, 0.99)] {
                let u = cube::from_texel(i as f64 + oi, n);
                let v = cube::from_texel(j as f64 + oj, n);
                let fc = direction_to_face(face_to_direction(fp.face, u, v));
                let (ti, _) = split_texel(to_texel(fc.u, n), n);
                let (tj, _) = split_texel(to_texel(fc.v, n), n);
                let key = (fc.face, ti, tj);
                let seen = fc.face == fp.face && in_range(ti as i64, tj as i64);
                if !seen && !beyond.contains(&key) {
                    beyond.push(key);
                }
            }
        }
    }
    for (face, i, j) in beyond {
        visit(face, i, j);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn star(d: Vec3, intensity: f64) -> Star {
        Star {
            direction: d.normalize(),
            intensity,
            x: 0.3127,
            y: 0.329,
        }
    }

    fn catalog(stars: Vec<Star>) -> StarCatalog {
        StarCatalog { stars }
    }

    #[test]
    fn single_star_conserved_on_every_level() {
        let m = build_starmap(&catalog(vec![star(Vec3::new(0.3, -0.2, 1.0), 1.0)]), 64).unwrap();
        assert_eq!(m.level_count(), 7);
        for l in 0..m.level_count() {
            let t = m.level_total(l);
            assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-6, "level {l}: {t:?}");
        }
        assert!(build_starmap(&catalog(vec![]), 48).is_err());
    }

    #[test]
    fn collisions_weight_positions_by_luminosity() {
        let n = 16;
        // Texel (8, 8) of +z spans U, V in [0, 1/8).
        let at = |pu: f64, pv: f64| Vec3::new(pu / 8.0, pv / 8.0, 1.0);
        let (p1, p2) = ([0.2, 0.6], [0.8, 0.4]);
        let m = build_starmap(&catalog(vec![star(at(p1[0], p1[1]), 1.0), star(at(p2[0], p2[1]), 3.0)]), n).unwrap();
        let t = m.texel(0, 4, 8, 8);
        for k in 0..2 {
            let expected = (p1[k] + 3.0 * p2[k]) / 4.0;
            assert!((t.pos[k] as f64 - expected).abs() < 1e-6, "{:?}", t.pos);
        }
        assert!((t.weight() - 4.0).abs() < 1e-6);
        // One level up the texel is (4, 4) and the position halves.
        let t1 = m.texel(1, 4, 4, 4);
        assert!((t1.pos[0] as f64 - 0.65 / 2.0).abs() < 1e-6);
    }

    #[test]
    fn million_star_sums_agree_across_levels() {
        let cat = generate_catalog(&CatalogOptions {
            count: 1_000_000,
            seed: 9,
            ..Default::default()
        })
        .unwrap();
        let m = build_starmap(&cat, 256).unwrap();
        let base = m.level_total(0);
        for l in 1..m.level_count() {
            let t = m.level_total(l);
            for c in 0..3 {
                assert!((t[c] / base[c] - 1.0).abs() < 1e-6, "level {l}");
            }
        }
    }

    #[test]
    fn footprint_examples() {
        let fp = footprint(Vec3::Z, Vec3::ZERO, Vec3::ZERO, 512, 10).unwrap();
        assert_eq!((fp.face, fp.center, fp.level), (4, [0.0, 0.0], 0));
        let eps = 1e-4;
        let fp = footprint(Vec3::new(eps, 0.0, 1.0), Vec3::ZERO, Vec3::ZERO, 512, 10).unwrap();
        assert_eq!(fp.center[0], eps);
        // dw spans 40 texels of a 512 face: 2·|dU|·256 = 40.
        let du = 40.0 / 512.0;
        let fp = footprint(Vec3::Z, Vec3::new(du, 0.0, 0.0), Vec3::ZERO, 512, 10).unwrap();
        assert_eq!(fp.level, 3);
        assert!(footprint(Vec3::ZERO, Vec3::X, Vec3::Y, 512, 10).is_err());
        assert!(footprint(Vec3::Z, Vec3::new(f64::NAN, 0.0, 0.0), Vec3::Y, 512, 10).is_err());
    }

    /// A single star on +z at face coordinates `(u, v)` and a unit-Jacobian footprint of
    /// `pitch` face units per pixel centred at `(cu, cv)`.
    fn one_star_gather(u: f64, v: f64, cu: f64, cv: f64, pitch: f64) -> f64 {
        let m = build_starmap(&catalog(vec![star(Vec3::new(u, v, 1.0), 1.0)]), 128).unwrap();
        let fp = m
            .footprint(Vec3::new(cu, cv, 1.0), Vec3::new(pitch, 0.0, 0.0), Vec3::new(0.0, pitch, 0.0))
            .unwrap();
        assert_eq!((fp.face, fp.level), (4, 0));
        gather_stars(&m, &fp, PositionMode::Stored).iter().sum()
    }

    #[test]
    fn tent_weights() {
        // Star exactly at the pixel centre, then half a pixel off along w.
        let p = 0.05;
        let (u, v) = (0.1 + 0.3 / 64.0, -0.2 + 0.7 / 64.0);
        assert!((one_star_gather(u, v, u, v, p) - 1.0).abs() < 1e-6);
        assert!((one_star_gather(u, v, u - 0.5 * p, v, p) - 0.5).abs() < 1e-6);
        assert_eq!(one_star_gather(u, v, u - 1.5 * p, v, p), 0.0);
    }

    #[test]
    fn sweep_partitions_unity() {
        let p = 0.04;
        for k in 0..=100 {
            let u = 0.2 + p * k as f64 / 100.0;
            let total = one_star_gather(u, 0.0, 0.2, 0.0, p) + one_star_gather(u, 0.0, 0.2 + p, 0.0, p);
            assert!((total - 1.0).abs() < 1e-6, "substep {k}: {total}");
        }
    }

    #[test]
    fn coarse_levels_gather_aggregated_stars() {
        let cat = generate_catalog(&CatalogOptions {
            count: 20_000,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let m = build_starmap(&cat, 64).unwrap();
        // A footprint covering the middle of the +x face, |U|, |V| < 1/2.
        let mut fp = m.footprint(Vec3::X, Vec3::new(0.0, 0.5, 0.0), Vec3::new(0.0, 0.0, 0.5)).unwrap();
        assert_eq!(fp.level, 3);
        let expected: f64 = cat
            .stars
            .iter()
            .filter(|s| s.direction.x > 0.0)
            .map(|s| s.intensity * tent(2.0 * s.direction.y / s.direction.x) * tent(2.0 * s.direction.z / s.direction.x))
            .sum();
        let g: f64 = gather_stars(&m, &fp, PositionMode::Stored).iter().sum();
        assert!((g / expected - 1.0).abs() < 0.05, "{g} {expected}");
        fp.level = 0;
        let g0: f64 = gather_stars(&m, &fp, PositionMode::Stored).iter().sum();
        assert!((g0 / expected - 1.0).abs() < 1e-3, "{g0} {expected}");
    }

    #[test]
    fn hash_mode_is_deterministic_and_in_range() {
        let t = StarTexel {
            xyz: [0.1, 0.2, 0.3],
            pos: [0.0; 2],
        };
        let p = hash_position(&t);
        assert_eq!(p, hash_position(&t));
        assert!(p.iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn save_load_round_trip() {
        let cat = generate_catalog(&CatalogOptions {
            count: 500,
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        let m = build_starmap(&cat, 32).unwrap();
        let mut bytes = Vec::new();
        m.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"BHSM");
        assert_eq!(StarMap::read_from(&mut bytes.as_slice()).unwrap(), m);
        bytes[0] = b'X';
        assert!(matches!(StarMap::read_from(&mut bytes.as_slice()), Err(Error::Format(_))));
    }

    /// Two million unit stars on a Fibonacci lattice.
    fn dense_map() -> &'static StarMap {
        static M: std::sync::OnceLock<StarMap> = std::sync::OnceLock::new();
        M.get_or_init(|| {
            let n = 2_000_000;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            let stars = (0..n)
                .map(|k| {
                    let z = 1.0 - (k as f64 + 0.5) * 2.0 / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let (s, c) = (golden * k as f64).sin_cos();
                    star(Vec3::new(r * c, r * s, z), 1.0)
                })
                .collect();
            build_starmap(&catalog(stars), 512).unwrap()
        })
    }

    fn rotate_about_y(v: Vec3, a: f64) -> Vec3 {
        let (s, c) = a.sin_cos();
        Vec3::new(c * v.x + s * v.z, v.y, -s * v.x + c * v.z)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gather_continuous_across_face_edge(off in -0.02f64..0.02, tilt in -0.5f64..0.5) {
            // Footprint straddling the +z / +x edge over a dense, even star field,
            // gathered in either face's parametrization.
            let m = dense_map();
            let ang = std::f64::consts::FRAC_PI_4 + off;
            let d = rotate_about_y(Vec3::new(0.0, tilt, 1.0).normalize(), ang);
            let pitch = 0.005;
            let dw = rotate_about_y(Vec3::X, ang) * pitch;
            let dh = d.cross(dw).normalize() * pitch;
            let a = m.footprint(d, dw, dh).unwrap();
            let b = a.on_face(if a.face == 0 { 4 } else { 0 }).unwrap();
            let ga: f64 = gather_stars(&m, &a, PositionMode::Stored).iter().sum();
            let gb: f64 = gather_stars(&m, &b, PositionMode::Stored).iter().sum();
            prop_assert!(ga > 0.0);
            prop_assert!((ga - gb).abs() <= 1e-3 * ga, "{} {}", ga, gb);
        }

        #[test]
        fn gather_is_deterministic(u in -0.9f64..0.9, v in -0.9f64..0.9) {
            let cat = generate_catalog(&CatalogOptions { count: 5000, seed: 5, ..Default::default() }).unwrap();
            let m = build_starmap(&cat, 64).unwrap();
            let fp = m.footprint(Vec3::new(v, 1.0, u), Vec3::new(0.01, 0.0, 0.05), Vec3::new(0.04, 0.0, -0.01)).unwrap();
            let a = gather_stars(&m, &fp, PositionMode::Stored);
            let b = gather_stars(&m, &fp, PositionMode::Stored);
            prop_assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
        }
    }
}
