//! The chromaticity-Doppler table `ℂ(x, y, D)`: received XYZ per unit emitted
//! `X + Y + Z` for a source of chromaticity `(x, y)` seen with Doppler factor `D`.
//!
//! Nodes sit exactly on the grid bounds and `D = 1` is a node, so the `D = 1`
//! slice is `[x, y, 1 − x − y]` and trilinear lookups reproduce it everywhere.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use super::spectrum::{fit_spectrum, Spectrum};
use crate::error::{Error, Result};
use crate::tables::io::{self, SectionHeader, TableId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorTableOptions {
    /// Samples along x, y and D.
    pub dims: (usize, usize, usize),
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub d_range: (f64, f64),
}

impl Default for ColorTableOptions {
    fn default() -> Self {
        ColorTableOptions {
            dims: (64, 32, 65),
            x_range: (0.0, 0.8),
            y_range: (0.0, 0.9),
            d_range: (0.1, 10.0),
        }
    }
}

#[derive(Debug)]
pub struct ColorTable {
    opts: ColorTableOptions,
    /// Per (x, y) node: true when the spectrum family reproduces it with a non-negative spectrum.
    physical: Vec<bool>,
    /// `[d][y][x]` XYZ triples.
    data: Vec<[f32; 3]>,
    /// `ln(ℂ / [x, y, 1 − x − y])` per texel, the quantity actually interpolated.
    log_ratio: Vec<[f32; 3]>,
    clamped: AtomicU64,
}

impl Clone for ColorTable {
    fn clone(&self) -> Self {
        ColorTable {
            opts: self.opts,
            physical: self.physical.clone(),
            data: self.data.clone(),
            log_ratio: self.log_ratio.clone(),
            clamped: AtomicU64::new(self.clamped.load(Ordering::Relaxed)),
        }
    }
}

fn node(range: (f64, f64), n: usize, i: usize) -> f64 {
    range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64
}

fn project_to_triangle(x: f64, y: f64) -> (f64, f64) {
    let (x, y) = (x.max(0.0), y.max(0.0));
    let excess = x + y - 1.0;
    if excess <= 0.0 {
        return (x, y);
    }
    let (x, y) = (x - excess / 2.0, y - excess / 2.0);
    if x < 0.0 {
        (0.0, 1.0)
    } else if y < 0.0 {
        (1.0, 0.0)
    } else {
        (x, y)
    }
}

/// Spread of the absorption amplitudes over which the spectral family hands over to
/// the black-body transfer.
pub const FAMILY_BLEND: f64 = 0.1;

/// The D column of one chromaticity node and whether the spectrum family reproduces the
/// node with a non-negative spectrum.
///
/// Above the Planckian locus the family needs absorption amplitudes of hundreds of
/// times the distance from the locus, so its response varies far faster than the grid
/// resolves. Entries therefore blend the family's exact response, weighted by
/// `(1 − max|a| / FAMILY_BLEND)²`, with the per-channel response of the black body at the
/// same temperature transferred to the node chromaticity. Both agree on the locus and at
/// `D = 1`, and both are non-negative.
fn column(x: f64, y: f64, ds: &[f64]) -> (bool, Vec<[f32; 3]>) {
    let inside = x >= 0.0 && y >= 0.0 && x + y <= 1.0;
    let (x, y) = project_to_triangle(x, y);
    let target = [x, y, 1.0 - x - y];
    let fit = fit_spectrum(x, y);
    let physical = inside && fit.physical();
    let amplitude = fit.spectrum.a1.abs().max(fit.spectrum.a2.abs());
    let w = if physical { (1.0 - amplitude / FAMILY_BLEND).max(0.0).powi(2) } else { 0.0 };
    let family_norm: f64 = fit.spectrum.xyz().iter().sum();
    let bb = Spectrum::blackbody(fit.spectrum.temperature);
    let xyz = bb.xyz();
    let norm: f64 = xyz.iter().sum();
    let base = xyz.map(|v| v / norm);
    let out = ds
        .iter()
        .map(|&d| {
            let s = shifted(&bb, d, norm);
            let transfer = [0, 1, 2].map(|c| target[c] * s[c] / base[c]);
            let exact = if w > 0.0 { shifted(&fit.spectrum, d, family_norm) } else { transfer };
            [0, 1, 2].map(|c| ((1.0 - w) * transfer[c] + w * exact[c].max(0.0)).max(0.0) as f32)
        })
        .collect();
    (physical, out)
}

/// `D` at node `k`, log-uniform over the range.
fn d_node(opts: &ColorTableOptions, k: usize) -> f64 {
    let (lo, hi) = opts.d_range;
    let n = opts.dims.2;
    if 2 * k + 1 == n {
        // Keep the middle node of a symmetric range at exactly 1.
        let mid = (lo.ln() + hi.ln()) / 2.0;
        if mid.abs() < 1e-6 {
            return 1.0;
        }
    }
    (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (n - 1) as f64).exp()
}

fn shifted(spectrum: &Spectrum, d: f64, norm: f64) -> [f64; 3] {
    if d == 1.0 {
        // Exact identity slice, independent of rounding in the integration.
        let xyz = spectrum.xyz();
        return xyz.map(|v| v / norm);
    }
    let k = d.powi(5) / norm;
    super::spectrum::integrate_xyz(|l| spectrum.value(d * l)).map(|v| v * k)
}

impl ColorTable {
    pub fn precompute(opts: &ColorTableOptions) -> Result<Self> {
        let (w, h, nd) = opts.dims;
        if w < 2 || h < 2 || nd < 2 {
            return Err(Error::Domain(format!("colour table dims {:?} need at least 2 samples per axis", opts.dims)));
        }
        if !(opts.d_range.0 > 0.0 && opts.d_range.0 < opts.d_range.1) {
            return Err(Error::Domain(format!("Doppler range {:?} must satisfy 0 < min < max", opts.d_range)));
        }
        if !(opts.x_range.0 < opts.x_range.1 && opts.y_range.0 < opts.y_range.1) {
            return Err(Error::Domain("empty chromaticity range".into()));
        }
        let ds: Vec<f64> = (0..nd).map(|k| d_node(opts, k)).collect();
        let columns: Vec<(bool, Vec<[f32; 3]>)> = (0..w * h)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx % w, idx / w);
                column(node(opts.x_range, w, i), node(opts.y_range, h, j), &ds)
            })
            .collect();
        let mut physical = vec![false; w * h];
        let mut data = vec![[0.0; 3]; w * h * nd];
        for (idx, (p, col)) in columns.into_iter().enumerate() {
            physical[idx] = p;
            for (k, v) in col.into_iter().enumerate() {
                data[k * w * h + idx] = v;
            }
        }
        Ok(Self::assemble(*opts, physical, data))
    }

    fn assemble(opts: ColorTableOptions, physical: Vec<bool>, data: Vec<[f32; 3]>) -> Self {
        let (w, h, _) = opts.dims;
        let log_ratio = data
            .iter()
            .enumerate()
            .map(|(n, v)| {
                let idx = n % (w * h);
                let (x, y) = (node(opts.x_range, w, idx % w), node(opts.y_range, h, idx / w));
                let (x, y) = project_to_triangle(x, y);
                let target = [x, y, 1.0 - x - y];
                [0, 1, 2].map(|c| {
                    if target[c] <= 1e-9 {
                        0.0
                    } else {
                        (v[c] as f64 / target[c]).max(1e-30).ln() as f32
                    }
                })
            })
            .collect();
        ColorTable {
            opts,
            physical,
            data,
            log_ratio,
            clamped: AtomicU64::new(0),
        }
    }

    pub fn options(&self) -> &ColorTableOptions {
        &self.opts
    }

    pub fn d_node(&self, k: usize) -> f64 {
        d_node(&self.opts, k)
    }

    pub fn xy_node(&self, i: usize, j: usize) -> (f64, f64) {
        let (w, h, _) = self.opts.dims;
        (node(self.opts.x_range, w, i), node(self.opts.y_range, h, j))
    }

    pub fn texel(&self, i: usize, j: usize, k: usize) -> [f32; 3] {
        let (w, h, _) = self.opts.dims;
        self.data[(k * h + j) * w + i]
    }

    pub fn is_physical(&self, i: usize, j: usize) -> bool {
        self.physical[j * self.opts.dims.0 + i]
    }

    /// Number of lookups whose Doppler factor fell outside the table and was clamped.
    pub fn clamp_count(&self) -> u64 {
        self.clamped.load(Ordering::Relaxed)
    }

    /// Trilinear lookup of `ℂ(x, y, D)`, interpolating the logarithm of its ratio to
    /// `[x, y, 1 − x − y]` so that the `D = 1` identity holds for every chromaticity.
    pub fn lookup(&self, x: f64, y: f64, d: f64) -> [f64; 3] {
        let (w, h, nd) = self.opts.dims;
        let (lo, hi) = self.opts.d_range;
        let d = if d.is_nan() { 1.0 } else { d };
        if d < lo || d > hi {
            self.clamped.fetch_add(1, Ordering::Relaxed);
        }
        let fd = (d.clamp(lo, hi).ln() - lo.ln()) / (hi.ln() - lo.ln()) * (nd - 1) as f64;
        let fx = (x - self.opts.x_range.0) / (self.opts.x_range.1 - self.opts.x_range.0) * (w - 1) as f64;
        let fy = (y - self.opts.y_range.0) / (self.opts.y_range.1 - self.opts.y_range.0) * (h - 1) as f64;
        let split = |f: f64, n: usize| {
            let f = if f.is_finite() { f.clamp(0.0, (n - 1) as f64) } else { 0.0 };
            let i = (f as usize).min(n - 2);
            (i, f - i as f64)
        };
        let (i, tx) = split(fx, w);
        let (j, ty) = split(fy, h);
        let (k, td) = split(fd, nd);
        let mut acc = [0.0; 3];
        for (dk, wk) in [(0, 1.0 - td), (1, td)] {
            for (dj, wj) in [(0, 1.0 - ty), (1, ty)] {
                for (di, wi) in [(0, 1.0 - tx), (1, tx)] {
                    let wt = wk * wj * wi;
                    if wt == 0.0 {
                        continue;
                    }
                    let v = self.log_ratio[((k + dk) * h + j + dj) * w + i + di];
                    for c in 0..3 {
                        acc[c] += wt * v[c] as f64;
                    }
                }
            }
        }
        let (x, y) = project_to_triangle(x, y);
        let target = [x, y, 1.0 - x - y];
        [0, 1, 2].map(|c| target[c] * acc[c].exp())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let (nx, ny, nd) = self.opts.dims;
        let h = SectionHeader {
            id: TableId::Color,
            width: nx as u32,
            height: ny as u32,
            depth: nd as u32,
            epsilon: 0.0,
        };
        let o = &self.opts;
        let mut payload = vec![
            o.x_range.0, o.x_range.1, o.y_range.0, o.y_range.1, o.d_range.0, o.d_range.1,
        ]
        .into_iter()
        .map(|v| v as f32)
        .collect::<Vec<_>>();
        payload.extend(self.physical.iter().map(|&p| if p { 1.0 } else { 0.0 }));
        payload.extend(self.data.iter().flatten());
        io::write_section(w, &h, &payload)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let h = io::read_header(r)?;
        io::expect_id(&h, TableId::Color)?;
        let (nx, ny, nd) = (h.width as usize, h.height as usize, h.depth as usize);
        if nx < 2 || ny < 2 || nd < 2 {
            return Err(Error::Format("colour table needs at least 2 samples per axis".into()));
        }
        let plane = (nx * ny) as u64;
        let floats = io::read_floats(r, 6 + plane + 3 * h.texels())?;
        io::expect_eof(r)?;
        let b: Vec<f64> = floats[..6].iter().map(|&v| v as f64).collect();
        let opts = ColorTableOptions {
            dims: (nx, ny, nd),
            x_range: (b[0], b[1]),
            y_range: (b[2], b[3]),
            d_range: (b[4], b[5]),
        };
        if !(opts.d_range.0 > 0.0 && opts.d_range.0 < opts.d_range.1)
            || !(opts.x_range.0 < opts.x_range.1 && opts.y_range.0 < opts.y_range.1)
        {
            return Err(Error::Format("invalid colour table bounds".into()));
        }
        let physical = floats[6..6 + plane as usize].iter().map(|&v| v != 0.0).collect();
        let data = floats[6 + plane as usize..]
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        Ok(Self::assemble(opts, physical, data))
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

/// Received colour `(X + Y + Z) ℂ(x, y, D)` of an emitted XYZ colour.
pub fn apply_doppler_beaming(emitted: [f64; 3], d: f64, table: &ColorTable) -> [f64; 3] {
    let s = emitted[0] + emitted[1] + emitted[2];
    if !(s > 0.0) {
        return [0.0; 3];
    }
    table.lookup(emitted[0] / s, emitted[1] / s, d).map(|v| v * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shading::spectrum::blackbody_xy;
    use std::sync::OnceLock;

    fn small() -> &'static ColorTable {
        static T: OnceLock<ColorTable> = OnceLock::new();
        T.get_or_init(|| {
            ColorTable::precompute(&ColorTableOptions {
                dims: (17, 13, 9),
                ..Default::default()
            })
            .unwrap()
        })
    }

    #[test]
    fn middle_node_is_exactly_one() {
        assert_eq!(small().d_node(4), 1.0);
        assert!((small().d_node(0) - 0.1).abs() < 1e-12);
        assert!((small().d_node(8) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn identity_slice_at_nodes_and_between() {
        let t = small();
        for j in 0..13 {
            for i in 0..17 {
                let (x, y) = t.xy_node(i, j);
                if x + y > 1.0 {
                    continue;
                }
                let v = t.texel(i, j, 4);
                let e = [x, y, 1.0 - x - y];
                for c in 0..3 {
                    assert!((v[c] as f64 - e[c]).abs() < 1e-6, "{x} {y}: {v:?}");
                }
            }
        }
        let v = t.lookup(0.3127, 0.329, 1.0);
        assert!((v[0] - 0.3127).abs() < 1e-6 && (v[1] - 0.329).abs() < 1e-6);
    }

    #[test]
    fn entries_are_non_negative() {
        assert!(small().data.iter().flatten().all(|&v| v >= 0.0));
    }

    #[test]
    fn apply_examples() {
        let t = small();
        assert_eq!(apply_doppler_beaming([0.0; 3], 2.0, t), [0.0; 3]);
        let c = [0.4, 0.5, 0.3];
        let out = apply_doppler_beaming(c, 1.0, t);
        for k in 0..3 {
            assert!((out[k] / c[k] - 1.0).abs() < 1e-3);
        }
        let before = t.clamp_count();
        apply_doppler_beaming(c, 50.0, t);
        assert_eq!(t.clamp_count(), before + 1);
    }

    #[test]
    fn redshift_dims_the_source() {
        let (x, y) = blackbody_xy(6000.0);
        let lo = t_sum(small().lookup(x, y, 0.2));
        let hi = t_sum(small().lookup(x, y, 5.0));
        assert!(lo < 0.05 && hi > 10.0, "{lo} {hi}");
    }

    fn t_sum(v: [f64; 3]) -> f64 {
        v.iter().sum()
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.bin");
        small().save(&p).unwrap();
        let t = ColorTable::load(&p).unwrap();
        assert_eq!(t.data, small().data);
        assert_eq!(t.physical, small().physical);
        let (a, b) = (t.lookup(0.3, 0.3, 1.7), small().lookup(0.3, 0.3, 1.7));
        for c in 0..3 {
            assert!((a[c] / b[c] - 1.0).abs() < 1e-5);
        }
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 5);
        assert!(matches!(ColorTable::read_from(&mut bytes.as_slice()), Err(Error::Format(_))));
    }
}
