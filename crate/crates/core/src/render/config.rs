//! Scene configuration: a line-oriented `key = value` file.
//!
//! ```text
//! # comments start with '#'
//! flat = false              # straight rays, no black hole
//! width = 640
//! height = 360
//! fov = 60                  # horizontal field of view, degrees
//! exposure = 1
//! bloom = true
//! hdr = false               # also write a PFM sidecar
//! tables = geodesic.bin     # or precompute with table_epsilon, table_d_size, table_u_size
//! color_table = color.bin   # or precompute with the default grid
//! catalog = stars.txt       # or generate with stars and star_seed
//! star_map_size = 512
//! disc = true
//! disc_inner = 3            # radii, in horizon radii
//! disc_outer = 12
//! disc_particles = 32       # 0 gives a uniform disc
//! disc_seed = 1
//! disc_temperature = 8000   # peak temperature, kelvin
//! disc_falloff = 1.5
//! camera = static           # or orbit
//! camera_r = 20
//! camera_theta = 80         # degrees
//! camera_phi = 0            # degrees
//! yaw = 0                   # degrees, likewise pitch and roll
//! orbit_r0 = 10
//! orbit_delta0 = 90         # degrees
//! orbit_v0 = 0.35
//! orbit_chi = 10            # degrees
//! dtau = 0.5                # proper time between frames
//! frame_dt = 0.5            # coordinate time between frames of a static camera
//! frames = 1
//! ```
//!
//! Relative paths are resolved against the directory of the configuration file.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use super::{Scene, TraceMode, MIN_DIMENSION};
use crate::camera::{focal_length_for_fov, orbit_camera, orbit_init, orbit_step, static_camera, OrbitState, Orientation};
use crate::disc::DiscModel;
use crate::error::{Error, Result};
use crate::geodesic::{CameraBasis, SchwarzschildPosition};
use crate::shading::{BloomOptions, ColorTable, ColorTableOptions};
use crate::starfield::{build_starmap, generate_catalog, CatalogOptions, StarCatalog};
use crate::tables::{precompute, GeodesicTables, PrecomputeOptions};

/// Largest proper-time step used between frames of an orbiting camera.
const ORBIT_SUBSTEP: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub enum TableSource {
    File(PathBuf),
    Precompute(PrecomputeOptions),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StarSource {
    File(PathBuf),
    Procedural { count: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscConfig {
    pub r_inner: f64,
    pub r_outer: f64,
    pub particles: usize,
    pub seed: u64,
    pub temperature: f64,
    pub falloff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CameraConfig {
    Static {
        r: f64,
        theta: f64,
        phi: f64,
    },
    Orbit {
        r0: f64,
        delta0: f64,
        v0: f64,
        chi: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub flat: bool,
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view in radians.
    pub fov: f64,
    pub exposure: f64,
    pub bloom: bool,
    pub hdr: bool,
    pub tables: TableSource,
    pub color_table: Option<PathBuf>,
    pub stars: StarSource,
    pub star_map_size: usize,
    pub disc: Option<DiscConfig>,
    pub camera: CameraConfig,
    pub orientation: Orientation,
    pub dtau: f64,
    pub frame_dt: f64,
    pub frames: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            flat: false,
            width: 640,
            height: 360,
            fov: 60f64.to_radians(),
            exposure: 1.0,
            bloom: true,
            hdr: false,
            tables: TableSource::Precompute(PrecomputeOptions::default()),
            color_table: None,
            stars: StarSource::Procedural { count: 100_000, seed: 0 },
            star_map_size: 512,
            disc: Some(DiscConfig {
                r_inner: 3.0,
                r_outer: 12.0,
                particles: 32,
                seed: 1,
                temperature: 8000.0,
                falloff: 1.5,
            }),
            camera: CameraConfig::Static {
                r: 20.0,
                theta: 80f64.to_radians(),
                phi: 0.0,
            },
            orientation: Orientation::default(),
            dtau: 0.5,
            frame_dt: 0.5,
            frames: 1,
        }
    }
}

const KEYS: &[&str] = &[
    "flat", "width", "height", "fov", "exposure", "bloom", "hdr", "tables", "table_epsilon", "table_d_size",
    "table_u_size", "color_table", "catalog", "stars", "star_seed", "star_map_size", "disc", "disc_inner",
    "disc_outer", "disc_particles", "disc_seed", "disc_temperature", "disc_falloff", "camera", "camera_r",
    "camera_theta", "camera_phi", "yaw", "pitch", "roll", "orbit_r0", "orbit_delta0", "orbit_v0", "orbit_chi",
    "dtau", "frame_dt", "frames",
];

fn config_error(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| config_error(line, format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(config_error(line, format!("{key}: expected true or false, found {v:?}"))),
    }
}

fn parse_size(line: usize, key: &str, v: &str) -> Result<(usize, usize)> {
    let bad = || config_error(line, format!("{key}: expected WxH, found {v:?}"));
    let (a, b) = v.split_once('x').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

impl SceneConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses a configuration, resolving relative paths against `base`, and validates it.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut c = SceneConfig::default();
        let mut table_opts = PrecomputeOptions::default();
        let mut table_file = None;
        let (mut star_count, mut star_seed) = (100_000usize, 0u64);
        let mut catalog = None;
        let mut disc = c.disc.unwrap();
        let mut disc_on = true;
        let mut orbit = false;
        let (mut r, mut theta, mut phi) = (20.0, 80f64.to_radians(), 0.0);
        let (mut r0, mut delta0, mut v0, mut chi) = (10.0, 90f64.to_radians(), 0.35, 10f64.to_radians());
        let mut seen = HashSet::new();
        let path = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_relative() { base.join(p) } else { p }
        };
        for (n, raw) in text.lines().enumerate() {
            let n = n + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_error(n, format!("expected key = value, found {line:?}")))?;
            let (key, v) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(config_error(n, format!("unknown key {key:?}")));
            }
            if !seen.insert(key.to_string()) {
                return Err(config_error(n, format!("duplicate key {key:?}")));
            }
            let deg = |v: &str| parse_num::<f64>(n, key, v).map(f64::to_radians);
            match key {
                "flat" => c.flat = parse_bool(n, key, v)?,
                "width" => c.width = parse_num(n, key, v)?,
                "height" => c.height = parse_num(n, key, v)?,
                "fov" => c.fov = deg(v)?,
                "exposure" => c.exposure = parse_num(n, key, v)?,
                "bloom" => c.bloom = parse_bool(n, key, v)?,
                "hdr" => c.hdr = parse_bool(n, key, v)?,
                "tables" => table_file = Some(path(v)),
                "table_epsilon" => table_opts.epsilon = parse_num(n, key, v)?,
                "table_d_size" => table_opts.d_dims = parse_size(n, key, v)?,
                "table_u_size" => table_opts.u_dims = parse_size(n, key, v)?,
                "color_table" => c.color_table = Some(path(v)),
                "catalog" => catalog = Some(path(v)),
                "stars" => star_count = parse_num(n, key, v)?,
                "star_seed" => star_seed = parse_num(n, key, v)?,
                "star_map_size" => c.star_map_size = parse_num(n, key, v)?,
                "disc" => disc_on = parse_bool(n, key, v)?,
                "disc_inner" => disc.r_inner = parse_num(n, key, v)?,
                "disc_outer" => disc.r_outer = parse_num(n, key, v)?,
                "disc_particles" => disc.particles = parse_num(n, key, v)?,
                "disc_seed" => disc.seed = parse_num(n, key, v)?,
                "disc_temperature" => disc.temperature = parse_num(n, key, v)?,
                "disc_falloff" => disc.falloff = parse_num(n, key, v)?,
                "camera" => {
                    orbit = match v {
                        "static" => false,
                        "orbit" => true,
                        _ => return Err(config_error(n, format!("camera: expected static or orbit, found {v:?}"))),
                    }
                }
                "camera_r" => r = parse_num(n, key, v)?,
                "camera_theta" => theta = deg(v)?,
                "camera_phi" => phi = deg(v)?,
                "yaw" => c.orientation.yaw = deg(v)?,
                "pitch" => c.orientation.pitch = deg(v)?,
                "roll" => c.orientation.roll = deg(v)?,
                "orbit_r0" => r0 = parse_num(n, key, v)?,
                "orbit_delta0" => delta0 = deg(v)?,
                "orbit_v0" => v0 = parse_num(n, key, v)?,
                "orbit_chi" => chi = deg(v)?,
                "dtau" => c.dtau = parse_num(n, key, v)?,
                "frame_dt" => c.frame_dt = parse_num(n, key, v)?,
                "frames" => c.frames = parse_num(n, key, v)?,
                _ => unreachable!(),
            }
        }
        c.tables = match table_file {
            Some(p) => TableSource::File(p),
            None => TableSource::Precompute(table_opts),
        };
        c.stars = match catalog {
            Some(p) => StarSource::File(p),
            None => StarSource::Procedural {
                count: star_count,
                seed: star_seed,
            },
        };
        c.disc = disc_on.then_some(disc);
        c.camera = if orbit {
            CameraConfig::Orbit { r0, delta0, v0, chi }
        } else {
            CameraConfig::Static { r, theta, phi }
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.width < MIN_DIMENSION || self.height < MIN_DIMENSION {
            return bad(format!(
                "image {}x{} is smaller than {MIN_DIMENSION}x{MIN_DIMENSION}",
                self.width, self.height
            ));
        }
        if !(self.fov > 0.0 && self.fov < std::f64::consts::PI) {
            return bad(format!("field of view {}° outside (0°, 180°)", self.fov.to_degrees()));
        }
        if !(self.exposure > 0.0 && self.exposure.is_finite()) {
            return bad(format!("exposure {} must be positive", self.exposure));
        }
        if !self.star_map_size.is_power_of_two() {
            return bad(format!("star map size {} is not a power of two", self.star_map_size));
        }
        if self.frames == 0 {
            return bad("frames must be at least 1".into());
        }
        if !(self.dtau > 0.0 && self.frame_dt >= 0.0) {
            return bad("dtau must be positive and frame_dt non-negative".into());
        }
        let mut files = vec![];
        if let TableSource::File(p) = &self.tables {
            files.push(p);
        }
        if let StarSource::File(p) = &self.stars {
            files.push(p);
        }
        files.extend(self.color_table.iter());
        for p in files {
            if !p.is_file() {
                return bad(format!("referenced file {} does not exist", p.display()));
            }
        }
        if let Some(d) = &self.disc {
            if !(3.0 <= d.r_inner && d.r_inner < d.r_outer && d.r_outer.is_finite()) {
                return bad(format!("disc radii {} to {} must satisfy 3 ≤ inner < outer", d.r_inner, d.r_outer));
            }
        }
        match self.camera {
            CameraConfig::Static { r, .. } if !(r > 1.0) => bad(format!("camera radius {r} must exceed 1")),
            CameraConfig::Orbit { r0, .. } if !(r0 > 1.0) => bad(format!("orbit radius {r0} must exceed 1")),
            _ => Ok(()),
        }
    }

    pub fn trace_mode(&self) -> TraceMode {
        if self.flat {
            TraceMode::Flat
        } else {
            TraceMode::Tables
        }
    }

    pub fn bloom_options(&self) -> Option<BloomOptions> {
        self.bloom.then(BloomOptions::default)
    }

    pub fn catalog(&self) -> Result<StarCatalog> {
        match &self.stars {
            StarSource::File(p) => StarCatalog::load(p),
            StarSource::Procedural { count, seed } => generate_catalog(&CatalogOptions {
                count: *count,
                seed: *seed,
                ..Default::default()
            }),
        }
    }

    /// Loads or builds everything the frames need.
    pub fn build_scene(&self) -> Result<Scene> {
        let stars = Some(build_starmap(&self.catalog()?, self.star_map_size)?);
        if self.flat {
            return Ok(Scene {
                stars,
                ..Default::default()
            });
        }
        let tables = match &self.tables {
            TableSource::File(p) => GeodesicTables::load(p)?,
            TableSource::Precompute(o) => precompute(o)?,
        };
        let color = match &self.color_table {
            Some(p) => ColorTable::load(p)?,
            None => ColorTable::precompute(&ColorTableOptions::default())?,
        };
        Ok(Scene {
            tables: Some(tables),
            color: Some(color),
            stars,
            disc: self.build_disc()?,
            ..Default::default()
        })
    }

    pub fn build_disc(&self) -> Result<Option<DiscModel>> {
        self.disc
            .map(|d| DiscModel::generate(d.seed, d.particles, 1.0 / d.r_inner, 1.0 / d.r_outer, d.temperature, d.falloff))
            .transpose()
    }

    /// Camera frames for every output frame. An orbiting camera crossing the horizon
    /// ends the sequence with an error.
    pub fn cameras(&self) -> Result<Vec<CameraBasis>> {
        let f = focal_length_for_fov(self.fov);
        match self.camera {
            CameraConfig::Static { r, theta, phi } => (0..self.frames)
                .map(|k| {
                    let pos = SchwarzschildPosition::new(k as f64 * self.frame_dt, r, theta, phi)?;
                    static_camera(pos, &self.orientation, f)
                })
                .collect(),
            CameraConfig::Orbit { r0, delta0, v0, chi } => {
                let mut s: OrbitState = orbit_init(r0, delta0, v0, chi)?;
                let sub = (self.dtau / ORBIT_SUBSTEP).ceil().max(1.0) as usize;
                let mut out = Vec::with_capacity(self.frames);
                for k in 0..self.frames {
                    if k > 0 {
                        for _ in 0..sub {
                            s = orbit_step(&s, self.dtau / sub as f64)?;
                        }
                    }
                    out.push(orbit_camera(&s, &self.orientation, f)?);
                }
                Ok(out)
            }
        }
    }
}
