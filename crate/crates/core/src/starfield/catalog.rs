//! Star catalogs: a whitespace-separated text format and a procedural generator.
//!
//! Each line holds `dir_x dir_y dir_z intensity x y`. Blank lines and lines starting
//! with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto, UnitSphere};

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::shading::spectrum::blackbody_xy;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Star {
    pub direction: Vec3,
    /// Linear radiant weight, `X + Y + Z` of the star's colour.
    pub intensity: f64,
    pub x: f64,
    pub y: f64,
}

impl Star {
    pub fn xyz(&self) -> [f64; 3] {
        let i = self.intensity;
        [i * self.x, i * self.y, i * (1.0 - self.x - self.y)]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StarCatalog {
    pub stars: Vec<Star>,
}

fn validate(star: &Star) -> std::result::Result<(), String> {
    if !((star.direction.length() - 1.0).abs() < 1e-6) {
        return Err(format!("direction {:?} is not unit length", star.direction));
    }
    if !(star.intensity > 0.0 && star.intensity.is_finite()) {
        return Err(format!("intensity {} must be positive", star.intensity));
    }
    if !(star.x >= 0.0 && star.y >= 0.0 && star.x + star.y <= 1.0) {
        return Err(format!("chromaticity ({}, {}) outside the xy triangle", star.x, star.y));
    }
    Ok(())
}

impl StarCatalog {
    pub fn total_intensity(&self) -> f64 {
        self.stars.iter().map(|s| s.intensity).sum()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut stars = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| Error::Format(format!("catalog line {}: {msg}", n + 1));
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| bad(format!("{t:?}: {e}"))))
                .collect::<Result<_>>()?;
            if v.len() != 6 {
                return Err(bad(format!("expected 6 fields, found {}", v.len())));
            }
            let star = Star {
                direction: Vec3::new(v[0], v[1], v[2]),
                intensity: v[3],
                x: v[4],
                y: v[5],
            };
            validate(&star).map_err(bad)?;
            stars.push(star);
        }
        Ok(StarCatalog { stars })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.stars.len() * 96);
        for s in &self.stars {
            let d = s.direction;
            let _ = writeln!(out, "{:e} {:e} {:e} {:e} {:e} {:e}", d.x, d.y, d.z, s.intensity, s.x, s.y);
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalogOptions {
    pub count: usize,
    pub seed: u64,
    /// Power-law index `α` of the intensity density `p(I) ∝ I^{−(α+1)}` for `I ≥ min_intensity`.
    pub slope: f64,
    pub min_intensity: f64,
    /// Black-body temperatures are drawn log-uniformly over this range, in kelvin.
    pub temperature_range: (f64, f64),
}

impl Default for CatalogOptions {
    fn default() -> Self {
        CatalogOptions {
            count: 100_000,
            seed: 0,
            slope: 1.5,
            min_intensity: 0.02,
            temperature_range: (2500.0, 25000.0),
        }
    }
}

/// Procedural catalog: isotropic directions, power-law intensities and black-body colours.
pub fn generate_catalog(opts: &CatalogOptions) -> Result<StarCatalog> {
    let (t0, t1) = opts.temperature_range;
    if !(t0 > 0.0 && t0 <= t1) {
        return Err(Error::Domain(format!("temperature range {:?}", opts.temperature_range)));
    }
    let pareto = Pareto::new(opts.min_intensity, opts.slope)
        .map_err(|e| Error::Domain(format!("power law (min {}, slope {}): {e}", opts.min_intensity, opts.slope)))?;
    // Chromaticities from a tabulated black-body locus, interpolated in ln T.
    const N: usize = 256;
    let (l0, l1) = (t0.ln(), t1.ln());
    let locus: Vec<(f64, f64)> = (0..N)
        .map(|k| blackbody_xy((l0 + (l1 - l0) * k as f64 / (N - 1) as f64).exp()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let stars = (0..opts.count)
        .map(|_| {
            let d: [f64; 3] = UnitSphere.sample(&mut rng);
            let intensity = pareto.sample(&mut rng);
            let f = rng.random::<f64>() * (N - 1) as f64;
            let k = (f as usize).min(N - 2);
            let t = f - k as f64;
            let (x, y) = (
                locus[k].0 + t * (locus[k + 1].0 - locus[k].0),
                locus[k].1 + t * (locus[k + 1].1 - locus[k].1),
            );
            Star {
                direction: Vec3::new(d[0], d[1], d[2]).normalize(),
                intensity,
                x,
                y,
            }
        })
        .collect();
    Ok(StarCatalog { stars })
}
