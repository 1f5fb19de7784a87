//! Precomputed geodesic tables.
//!
//! The deflection table stores, for a ray arriving from infinity with motion
//! constant `e`, its deflection `Δ = φ − atan2(u, u̇)` and travel time as a
//! function of `u` along the incoming branch. The inverse-radius table stores
//! `u` and travel time as a function of the azimuth `φ ∈ [0, π)`.
//!
//! Coordinate time measured from infinity diverges, so the tables store it
//! with the divergent part removed. The removed part is a closed-form function
//! of the table's own coordinates, `(e, u)` or `(e, φ)`, so converting back
//! never amplifies interpolation error:
//!
//! - deflection table: `T = t + u̇/(e u) − ln u` with `u̇ ≥ 0` from the orbit equation;
//! - inverse-radius table: `R = t + k cot(kφ)/e − ln(e sin(kφ)/k)`, where
//!   `k(e)` stretches `[0, π]` over the weak-field span of a scattered ray.
//!
//! Both start at 0 when `u = 0`. Lookups return coordinate time.

pub mod grid;
pub mod io;
pub mod mapping;

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::geodesic::{apsis_from_e_square, MU};
use grid::{Grid, SENTINEL};
use io::{SectionHeader, TableId};
use mapping::Half;

pub use mapping::DColumn;

pub use grid::is_sentinel;

/// `u̇ / e` on the incoming branch.
fn incoming_slope_over_e(e: f64, u: f64) -> f64 {
    if e.is_infinite() {
        return 1.0;
    }
    (1.0 - u * u * (1.0 - u) / (e * e)).max(0.0).sqrt()
}

/// Coordinate time at `(e, u)` on the incoming branch from a stored deflection-table time.
pub fn deflection_time(regularized: f64, e: f64, u: f64) -> f64 {
    regularized - incoming_slope_over_e(e, u) / u + u.ln()
}

/// Ratio `k = π / φ∞` where `φ∞ ≈ π + 2e + 15πe²/16` is the weak-field
/// azimuth at which a scattered ray returns to infinity.
fn return_scale(e: f64) -> f64 {
    PI / (PI + 2.0 * e + 15.0 * PI / 16.0 * e * e)
}

/// `k cot(kφ)/e − ln(e sin(kφ)/k)`: cancels the divergence of coordinate time
/// at `u → 0` on the way in exactly, and on the way out approximately.
fn radius_regularizer(e: f64, phi: f64) -> f64 {
    let k = return_scale(e);
    let (sin, cos) = (k * phi).sin_cos();
    k * cos / (e * sin) - (e * sin / k).ln()
}

/// Coordinate time at `(e, φ)` from a stored inverse-radius-table time.
pub fn radius_time(regularized: f64, e: f64, phi: f64) -> f64 {
    regularized - radius_regularizer(e, phi)
}

/// Regularized time along the radial ray `e → ∞` (both tables agree there).
fn radial_regularized_time(u: f64) -> f64 {
    -(-u).ln_1p()
}

/// Deflection-table time in the limit `e → 0` at azimuth `φ` of the straight line.
fn straight_deflection_time(phi: f64) -> f64 {
    -2.0 * (phi / 2.0).cos().ln() + 0.5 * (1.0 - phi.cos())
}

/// Inverse-radius-table time in the limit `e → 0`.
/// The last term is the finite part of `(k − 1)/e · ∂(k cot kφ)/∂k` in the regularizer.
fn straight_radius_time(phi: f64) -> f64 {
    if phi == 0.0 {
        return 0.0;
    }
    let half_tan = (phi / 2.0).tan();
    let (sin, cos) = phi.sin_cos();
    -2.0 * (phi / 2.0).cos().ln() - 0.5 * (1.0 - cos) + 0.5 * cos * half_tan * half_tan
        - 2.0 / PI * (cos / sin - phi / (sin * sin))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecomputeOptions {
    pub epsilon: f64,
    pub d_dims: (usize, usize),
    pub u_dims: (usize, usize),
    pub parallel: bool,
}

impl Default for PrecomputeOptions {
    fn default() -> Self {
        PrecomputeOptions {
            epsilon: 1e-5,
            d_dims: (512, 512),
            u_dims: (64, 32),
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeflectionSample {
    /// Coordinate time, offset so that only differences are meaningful.
    pub time: f64,
    pub deflection: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusSample {
    /// Coordinate time, on the same clock as [`DeflectionSample::time`].
    pub time: f64,
    pub u: f64,
}

/// Deflection table split into a scattering half (columns `0..w/2`, `s ∈ [0, 1/2]`)
/// and a plunging half (columns `w/2..w`, `s ∈ [1/2, 1]`). Both halves include
/// the `s = 1/2` seam and are never interpolated across.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflectionTable {
    grid: Grid<2>,
}

/// Inverse-radius table. Interpolation runs on `q`, a reparametrization of `u`
/// that is smooth in `s` at both ends (see [`radius_q`]).
#[derive(Debug, Clone, PartialEq)]
pub struct InverseRadiusTable {
    grid: Grid<2>,
    smooth: Grid<2>,
}

/// `q = u √(1 + e²)/e − e (1 + e²)^(−3/2) (1 − cos φ)²/2`.
///
/// The texel coordinate `s` goes like `1 − 6e²` near `e = 0` and like `1/(6e²)`
/// for large `e`, so terms odd in `e` (or `1/e`) interpolate like a square root.
/// Weak-field `u ≈ e sin φ + e²(1 − cos φ)²/2`; the subtraction removes its
/// linear part, and both factors are even in `1/e` at the other end.
fn radius_q(e: f64, phi: f64, u: f64) -> f64 {
    let (scale, g) = radius_q_factors(e, phi);
    u * scale - g
}

fn radius_u(e: f64, phi: f64, q: f64) -> f64 {
    let (scale, g) = radius_q_factors(e, phi);
    (q + g) / scale
}

fn radius_q_factors(e: f64, phi: f64) -> (f64, f64) {
    let w = 1.0 + e * e;
    let c = 1.0 - phi.cos();
    (w.sqrt() / e, 0.5 * e * c * c / (w * w.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicTables {
    pub deflection: DeflectionTable,
    pub inverse_radius: InverseRadiusTable,
    pub epsilon: f64,
}

fn check_options(o: &PrecomputeOptions) -> Result<()> {
    if !(o.epsilon > 0.0 && o.epsilon <= 1e-3) {
        return Err(domain(format!("step {} outside (0, 1e-3]", o.epsilon)));
    }
    let (dw, dh) = o.d_dims;
    if dw < 4 || dw % 2 != 0 || dh < 2 {
        return Err(domain(format!(
            "deflection table {dw}x{dh}: width must be even and ≥ 4, height ≥ 2"
        )));
    }
    let (uw, uh) = o.u_dims;
    if uw < 2 || uh < 2 {
        return Err(domain(format!("inverse-radius table {uw}x{uh} must be at least 2x2")));
    }
    Ok(())
}

fn node(i: usize, n: usize) -> f64 {
    i as f64 / (n - 1) as f64
}

/// Integration state in the Euler scheme of the table precomputation.
#[derive(Debug, Clone, Copy)]
struct Euler {
    time: f64,
    u: f64,
    u_dot: f64,
    phi: f64,
}

impl Euler {
    fn start(e: f64) -> Euler {
        Euler {
            time: 0.0,
            u: 0.0,
            u_dot: e,
            phi: 0.0,
        }
    }

    fn step(&mut self, e: f64, dphi: f64) {
        let u = self.u;
        let denom = (e + self.u_dot).max(1e-12 * e);
        self.time += (u * (1.0 - u) / denom + e / (1.0 - u) + 0.5 * u / e) * dphi;
        self.u_dot += (1.5 * u * u - u) * dphi;
        self.u += self.u_dot * dphi;
        self.phi += dphi;
    }

    fn deflection(&self) -> f64 {
        self.phi - self.u.atan2(self.u_dot)
    }
}

fn lerp(a: f64, b: f64, f: f64) -> f64 {
    a + (b - a) * f
}

/// One deflection-table column: `(time, Δ)` at each row `u_rows[j]`.
fn deflection_column(e_square: f64, half: Half, height: usize, eps: f64) -> Vec<[f32; 2]> {
    let mut out = vec![[SENTINEL; 2]; height];
    let u_apsis = match half {
        Half::Scattering => apsis_from_e_square(e_square).unwrap_or(PHOTON_LIMIT),
        Half::Plunging => 0.0,
    };
    let rows: Vec<f64> = (0..height)
        .map(|j| mapping::d_u_from_t(node(j, height), half, u_apsis))
        .collect();

    if e_square == 0.0 {
        // Straight line: u / u_a = sin φ along the incoming half.
        for (j, o) in out.iter_mut().enumerate() {
            let w = 1.0 - node(j, height);
            let phi = (1.0 - w * w).asin();
            *o = [straight_deflection_time(phi) as f32, 0.0];
        }
        return out;
    }
    if e_square.is_infinite() {
        for (o, &u) in out.iter_mut().zip(&rows) {
            *o = [radial_regularized_time(u.min(1.0 - 1e-7)) as f32, 0.0];
        }
        return out;
    }

    let e = e_square.sqrt();
    let mut cur = Euler::start(e);
    let mut j = 0;
    while j < height && rows[j] <= 0.0 {
        out[j] = [0.0, 0.0];
        j += 1;
    }
    while j < height {
        let prev = cur;
        cur.step(e, eps);
        if cur.u_dot < 0.0 {
            // Turning point between `prev` and `cur`: locate it on u̇ = 0.
            let f = prev.u_dot / (prev.u_dot - cur.u_dot);
            let apsis_phi = prev.phi + f * eps;
            let apsis_time = lerp(prev.time, cur.time, f);
            let apsis_u = prev.u + 0.5 * prev.u_dot * f * eps;
            let apsis_delta = apsis_phi - FRAC_PI_2;
            let prev_delta = prev.deflection();
            while j < height {
                let g = if apsis_u > prev.u {
                    ((rows[j] - prev.u) / (apsis_u - prev.u)).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                out[j] = [
                    lerp(prev.time, apsis_time, g) as f32,
                    lerp(prev_delta, apsis_delta, g) as f32,
                ];
                j += 1;
            }
            break;
        }
        if cur.u >= rows[j] {
            let (dp, dc) = (prev.deflection(), cur.deflection());
            while j < height && cur.u >= rows[j] {
                let f = (rows[j] - prev.u) / (cur.u - prev.u);
                out[j] = [lerp(prev.time, cur.time, f) as f32, lerp(dp, dc, f) as f32];
                j += 1;
            }
        }
        if half == Half::Plunging && cur.u >= 1.0 {
            break;
        }
    }
    out
}

/// Fallback apsis for columns that can never be reached (e² ≥ μ on the scattering side).
const PHOTON_LIMIT: f64 = 2.0 / 3.0;

/// One inverse-radius-table column: `(time, u)` at each row's azimuth.
fn inverse_radius_column(s: f64, height: usize, eps: f64) -> Vec<[f32; 2]> {
    let mut out = vec![[SENTINEL; 2]; height];
    let e = mapping::u_e_from_s(s);
    if e == 0.0 {
        for (j, o) in out.iter_mut().enumerate() {
            *o = [straight_radius_time(3.0 * node(j, height)) as f32, 0.0];
        }
        return out;
    }
    if e.is_infinite() {
        // Straight radial limit: u = e·φ with φ = t / (2e).
        for (j, o) in out.iter_mut().enumerate() {
            let u = 0.5 * node(j, height);
            *o = [radial_regularized_time(u) as f32, u as f32];
        }
        return out;
    }
    let per_phi = mapping::u_t_per_phi(e);
    let rows: Vec<f64> = (0..height).map(|j| node(j, height) / per_phi).collect();
    let mut cur = Euler::start(e);
    out[0] = [0.0, 0.0];
    let mut j = 1;
    while j < height {
        let prev = cur;
        cur.step(e, eps);
        if cur.u >= 1.0 || (cur.u_dot < 0.0 && prev.phi >= PI) {
            break;
        }
        while j < height && cur.phi >= rows[j] {
            let f = (rows[j] - prev.phi) / (cur.phi - prev.phi);
            let phi = rows[j];
            let u = lerp(prev.u, cur.u, f);
            let u_dot = lerp(prev.u_dot, cur.u_dot, f);
            let t = lerp(prev.time, cur.time, f) - u_dot / (e * u) + u.ln();
            out[j] = [(t + radius_regularizer(e, phi)) as f32, u as f32];
            j += 1;
        }
    }
    out
}

fn transpose(cols: Vec<Vec<[f32; 2]>>, height: usize) -> Vec<[f32; 2]> {
    let width = cols.len();
    let mut data = vec![[0.0f32; 2]; width * height];
    for (i, col) in cols.into_iter().enumerate() {
        for (j, v) in col.into_iter().enumerate() {
            data[j * width + i] = v;
        }
    }
    data
}

fn map_columns<F>(n: usize, parallel: bool, f: F) -> Vec<Vec<[f32; 2]>>
where
    F: Fn(usize) -> Vec<[f32; 2]> + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Integrates one Euler ray per table column and fills both tables.
pub fn precompute(opts: &PrecomputeOptions) -> Result<GeodesicTables> {
    check_options(opts)?;
    let eps = opts.epsilon;
    let (dw, dh) = opts.d_dims;
    let hw = dw / 2;
    let d_cols = map_columns(dw, opts.parallel, |i| {
        let (half, s) = if i < hw {
            (Half::Scattering, 0.5 * node(i, hw))
        } else {
            (Half::Plunging, 0.5 + 0.5 * node(i - hw, hw))
        };
        deflection_column(mapping::d_e_square_from_s(s, half), half, dh, eps)
    });
    let deflection = DeflectionTable::from_data(dw, dh, transpose(d_cols, dh))?;

    let (uw, uh) = opts.u_dims;
    let u_cols = map_columns(uw, opts.parallel, |i| inverse_radius_column(node(i, uw), uh, eps));
    let inverse_radius = InverseRadiusTable::from_data(uw, uh, transpose(u_cols, uh))?;

    Ok(GeodesicTables {
        deflection,
        inverse_radius,
        epsilon: eps,
    })
}

impl DeflectionTable {
    pub fn from_data(width: usize, height: usize, data: Vec<[f32; 2]>) -> Result<Self> {
        if width < 4 || width % 2 != 0 || height < 2 || data.len() != width * height {
            return Err(Error::Format(format!("invalid deflection table {width}x{height}")));
        }
        let hw = width / 2;
        Ok(DeflectionTable {
            grid: Grid::new(width, height, data, &[(0, hw), (hw, width)]),
        })
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    /// Raw texel `(time, Δ)`, possibly the sentinel.
    pub fn texel(&self, col: usize, row: usize) -> [f32; 2] {
        self.grid.get(col, row)
    }

    pub fn data(&self) -> &[[f32; 2]] {
        self.grid.data()
    }

    /// Coordinate time and `Δ` for a ray with motion constant `e` at inverse radius `u`.
    pub fn lookup(&self, e: f64, u: f64) -> Result<DeflectionSample> {
        let r = self.lookup_regularized(e, u)?;
        let time = if u == 0.0 || e == 0.0 {
            f64::NEG_INFINITY
        } else {
            deflection_time(r.time, e, u)
        };
        Ok(DeflectionSample { time, ..r })
    }

    /// Bilinear lookup of the stored `(time, Δ)`.
    pub fn lookup_regularized(&self, e: f64, u: f64) -> Result<DeflectionSample> {
        self.lookup_in_column(&mapping::d_column(e)?, u)
    }

    /// [`Self::lookup_regularized`] for a column mapped once and reused along a ray.
    pub fn lookup_in_column(&self, col: &DColumn, u: f64) -> Result<DeflectionSample> {
        let t = mapping::d_column_t(col, u)?;
        let hw = self.width() / 2;
        let (c0, x) = match col.half {
            Half::Scattering => (0, col.s * 2.0),
            Half::Plunging => (hw, (col.s - 0.5) * 2.0),
        };
        let y = t * (self.height() - 1) as f64;
        let v = self
            .grid
            .bilinear(c0, hw, x * (hw - 1) as f64, y)
            .ok_or_else(|| domain(format!("no table data near e = {}, u = {u}", col.e)))?;
        Ok(DeflectionSample {
            time: v[0],
            deflection: v[1],
        })
    }
}

impl InverseRadiusTable {
    pub fn from_data(width: usize, height: usize, data: Vec<[f32; 2]>) -> Result<Self> {
        if width < 2 || height < 2 || data.len() != width * height {
            return Err(Error::Format(format!("invalid inverse-radius table {width}x{height}")));
        }
        let mut smooth = data.clone();
        for (k, v) in smooth.iter_mut().enumerate() {
            if is_sentinel(v) {
                continue;
            }
            let (e, phi) = mapping::unmap_u(node(k % width, width), node(k / width, height))?;
            v[1] = if e == 0.0 {
                phi.sin() as f32
            } else if e.is_infinite() {
                v[1]
            } else {
                radius_q(e, phi, v[1] as f64) as f32
            };
        }
        Ok(InverseRadiusTable {
            grid: Grid::new(width, height, data, &[(0, width)]),
            smooth: Grid::new(width, height, smooth, &[(0, width)]),
        })
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn texel(&self, col: usize, row: usize) -> [f32; 2] {
        self.grid.get(col, row)
    }

    pub fn data(&self) -> &[[f32; 2]] {
        self.grid.data()
    }

    /// Largest azimuth the table covers for motion constant `e`.
    pub fn max_phi(e: f64) -> f64 {
        (1.0 / mapping::u_t_per_phi(e)).min(PI)
    }

    /// Bilinear lookup of the stored time and `u` at azimuth `phi`.
    pub fn lookup_regularized(&self, e: f64, phi: f64) -> Result<RadiusSample> {
        let (s, t) = mapping::map_u(e, phi)?;
        if t > 1.0 + 1e-12 {
            return Err(domain(format!("azimuth {phi} beyond table coverage for e = {e}")));
        }
        let last = (self.width() - 1) as f64;
        // Stored times carry a term linear in e, which is a square root in s next
        // to the e = 0 column, so that one cell is interpolated linearly in e.
        let next = mapping::u_e_from_s(node(self.width() - 2, self.width()));
        let x = if e < next { last - e / next } else { s * last };
        let v = self
            .smooth
            .bilinear(0, self.width(), x, t.min(1.0) * (self.height() - 1) as f64)
            .ok_or_else(|| domain(format!("no table data near e = {e}, φ = {phi}")))?;
        let u = if e == 0.0 { 0.0 } else { radius_u(e, phi, v[1]) };
        Ok(RadiusSample { time: v[0], u })
    }

    /// Coordinate time and `u` at azimuth `phi` along a ray from infinity.
    pub fn lookup(&self, e: f64, phi: f64) -> Result<RadiusSample> {
        let r = self.lookup_regularized(e, phi)?;
        let time = if phi == 0.0 || e == 0.0 {
            f64::NEG_INFINITY
        } else {
            radius_time(r.time, e, phi)
        };
        Ok(RadiusSample { time, u: r.u })
    }
}

fn flatten(data: &[[f32; 2]]) -> Vec<f32> {
    data.iter().flat_map(|v| v.iter().copied()).collect()
}

fn pairs(flat: Vec<f32>) -> Vec<[f32; 2]> {
    flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
}

fn dims_string(d: (usize, usize)) -> String {
    format!("{}x{}", d.0, d.1)
}

impl GeodesicTables {
    pub fn d_dims(&self) -> (usize, usize) {
        (self.deflection.width(), self.deflection.height())
    }

    pub fn u_dims(&self) -> (usize, usize) {
        (self.inverse_radius.width(), self.inverse_radius.height())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        for (id, dims, data) in [
            (TableId::Deflection, self.d_dims(), self.deflection.data()),
            (TableId::InverseRadius, self.u_dims(), self.inverse_radius.data()),
        ] {
            let h = SectionHeader {
                id,
                width: dims.0 as u32,
                height: dims.1 as u32,
                depth: 1,
                epsilon: self.epsilon,
            };
            io::write_section(w, &h, &flatten(data))?;
        }
        Ok(())
    }

    pub fn read_from<R: std::io::Read>(r: &mut R) -> Result<Self> {
        let hd = io::read_header(r)?;
        io::expect_id(&hd, TableId::Deflection)?;
        let d = pairs(io::read_payload(r, &hd, 2)?);
        let hu = io::read_header(r)?;
        io::expect_id(&hu, TableId::InverseRadius)?;
        let u = pairs(io::read_payload(r, &hu, 2)?);
        io::expect_eof(r)?;
        if hd.depth != 1 || hu.depth != 1 {
            return Err(Error::Format("geodesic tables must have depth 1".into()));
        }
        Ok(GeodesicTables {
            deflection: DeflectionTable::from_data(hd.width as usize, hd.height as usize, d)?,
            inverse_radius: InverseRadiusTable::from_data(hu.width as usize, hu.height as usize, u)?,
            epsilon: hd.epsilon,
        })
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

    /// Loads and checks the table sizes against the expected ones.
    pub fn load_with_dims(
        path: impl AsRef<Path>,
        d_dims: (usize, usize),
        u_dims: (usize, usize),
    ) -> Result<Self> {
        let t = Self::load(path)?;
        for (expected, found) in [(d_dims, t.d_dims()), (u_dims, t.u_dims())] {
            if expected != found {
                return Err(Error::DimensionMismatch {
                    expected: dims_string(expected),
                    found: dims_string(found),
                });
            }
        }
        Ok(t)
    }
}

/// `e²` pulled into the band the deflection table can represent.
pub fn clamp_to_table_band(e_square: f64) -> f64 {
    if e_square < MU {
        e_square.min(mapping::scattering_e_square_limit())
    } else {
        e_square.max(mapping::plunging_e_square_limit())
    }
}
