//! Frame rendering: per-pixel beam tracing, star gathering with lensing and Doppler
//! beaming, and additive disc emission.

pub mod bench;
pub mod config;
pub mod output;
pub mod raymarch;

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::disc::DiscModel;
use crate::error::{Error, Result};
use crate::geodesic::{beam_direction, make_beam_frame, BeamFrame, CameraBasis};
use crate::math::Vec3;
use crate::shading::{
    apply_doppler_beaming, doppler_factor, lensing_amplification, ColorTable, DopplerInputs, Emitter, HdrImage,
};
use crate::starfield::{gather_stars, sample_extended, AreaMap, PositionMode, StarMap};
use crate::tables::GeodesicTables;
use crate::tracer::{escape_direction, trace_ray, DiscBand, TraceResult};

pub use config::SceneConfig;
pub use output::{read_pfm, write_image, write_pfm};
pub use raymarch::raymarch_trace;

/// Linear XYZ radiance per pixel.
pub type FrameBuffer = HdrImage;

/// Minimum image side in pixels.
pub const MIN_DIMENSION: usize = 8;

/// Fraction of a pixel used for the extra beam when no neighbour can give a derivative.
const DERIVATIVE_FALLBACK: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceMode {
    Tables,
    Raymarch { steps: usize },
    /// No black hole: straight rays, no Doppler shift and no disc.
    Flat,
}

/// Everything a frame needs besides the camera.
#[derive(Debug, Clone, Default)]
pub struct Scene {
    pub tables: Option<GeodesicTables>,
    pub color: Option<ColorTable>,
    pub stars: Option<StarMap>,
    pub position_mode: PositionMode,
    pub area: Option<AreaMap>,
    pub disc: Option<DiscModel>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes {
    pub trace: Duration,
    pub stars: Duration,
    pub disc: Duration,
}

impl StageTimes {
    pub fn total(&self) -> Duration {
        self.trace + self.stars + self.disc
    }
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub image: FrameBuffer,
    /// Pixels whose computation failed and which were rendered black.
    pub failures: usize,
    pub times: StageTimes,
}

/// The traced beam of one screen point.
#[derive(Debug, Clone, Copy)]
struct Beam {
    frame: Option<BeamFrame>,
    trace: TraceResult,
    escape: Option<Vec3>,
}

struct Context<'a> {
    scene: &'a Scene,
    cam: &'a CameraBasis,
    mode: TraceMode,
    band: DiscBand,
    width: usize,
    height: usize,
    pitch: f64,
}

impl Context<'_> {
    fn screen(&self, x: f64, y: f64) -> (f64, f64) {
        (-1.0 + x * self.pitch, (self.height as f64 / 2.0 - y) * self.pitch)
    }

    /// Unit view direction in camera coordinates `(w, h, −d)`.
    fn view(&self, q_w: f64, q_h: f64) -> Vec3 {
        Vec3::new(q_w, q_h, -self.cam.focal_length).normalize()
    }

    fn trace(&self, q_w: f64, q_h: f64) -> Result<Beam> {
        let cam = self.cam;
        if self.mode == TraceMode::Flat {
            let f = cam.focal_length;
            let [ew, eh, ed] = flat_axes(cam);
            let d = ew * q_w + eh * q_h - ed * f;
            return Ok(Beam {
                frame: None,
                trace: TraceResult::escaped(0.0),
                escape: Some(d.normalize()),
            });
        }
        let frame = make_beam_frame(&cam.position, beam_direction(q_w, q_h, cam));
        let trace = match self.mode {
            TraceMode::Tables => {
                let tables = self
                    .scene
                    .tables
                    .as_ref()
                    .ok_or_else(|| Error::Config("table tracing needs geodesic tables".into()))?;
                trace_ray(cam.position.r, frame.delta, frame.alpha, &self.band, tables)?
            }
            TraceMode::Raymarch { steps } => raymarch_trace(cam.position.r, frame.delta, frame.alpha, &self.band, steps)?,
            TraceMode::Flat => unreachable!(),
        };
        let escape = if trace.is_captured() {
            None
        } else {
            Some(escape_direction(&trace, &frame)?)
        };
        Ok(Beam {
            frame: Some(frame),
            trace,
            escape,
        })
    }

    /// Escape-direction and view-direction differences along one screen axis.
    fn derivative(&self, beams: &[Option<Beam>], i: usize, j: usize, axis: usize, d: Vec3) -> Option<(Vec3, Vec3)> {
        let (w, h) = (self.width, self.height);
        let escape_at = |i: usize, j: usize| beams[j * w + i].and_then(|b| b.escape);
        let (fwd, back) = if axis == 0 {
            ((i + 1 < w).then(|| (i + 1, j)), (i > 0).then(|| (i - 1, j)))
        } else {
            ((j + 1 < h).then(|| (i, j + 1)), (j > 0).then(|| (i, j - 1)))
        };
        let pixel = |(i, j): (usize, usize)| self.screen(i as f64 + 0.5, j as f64 + 0.5);
        let q0 = pixel((i, j));
        let v0 = self.view(q0.0, q0.1);
        if let Some(n) = fwd.filter(|&(a, b)| escape_at(a, b).is_some()) {
            let q = pixel(n);
            return Some((escape_at(n.0, n.1)? - d, self.view(q.0, q.1) - v0));
        }
        if let Some(n) = back.filter(|&(a, b)| escape_at(a, b).is_some()) {
            let q = pixel(n);
            return Some((d - escape_at(n.0, n.1)?, v0 - self.view(q.0, q.1)));
        }
        // Both neighbours are captured or missing: trace a beam a fraction of a pixel away.
        for s in [DERIVATIVE_FALLBACK, -DERIVATIVE_FALLBACK] {
            let (x, y) = if axis == 0 {
                (i as f64 + 0.5 + s, j as f64 + 0.5)
            } else {
                (i as f64 + 0.5, j as f64 + 0.5 + s)
            };
            let q = self.screen(x, y);
            if let Ok(Beam { escape: Some(e), .. }) = self.trace(q.0, q.1) {
                return Some(((e - d) / s, (self.view(q.0, q.1) - v0) / s));
            }
        }
        None
    }

    fn doppler(&self, frame: &BeamFrame, emitter: Emitter) -> Result<f64> {
        doppler_factor(&DopplerInputs {
            u: frame.u_cam,
            delta: frame.delta,
            camera_velocity: self.cam.e_tau,
            ex: frame.ex,
            ey: frame.ey,
            emitter,
        })
    }

    fn beamed(&self, xyz: [f64; 3], frame: Option<&BeamFrame>, emitter: Emitter) -> Result<[f64; 3]> {
        match (frame, &self.scene.color) {
            (Some(frame), Some(table)) => Ok(apply_doppler_beaming(xyz, self.doppler(frame, emitter)?, table)),
            (Some(_), None) => Err(Error::Config("Doppler shading needs a colour table".into())),
            (None, _) => Ok(xyz),
        }
    }

    fn sky(&self, beams: &[Option<Beam>], i: usize, j: usize) -> Result<[f64; 3]> {
        let Some(beam) = beams[j * self.width + i] else {
            return Ok([0.0; 3]);
        };
        let Some(d) = beam.escape else {
            return Ok([0.0; 3]);
        };
        if self.scene.stars.is_none() && self.scene.area.is_none() {
            return Ok([0.0; 3]);
        }
        let (Some((ddw, dqw)), Some((ddh, dqh))) = (self.derivative(beams, i, j, 0, d), self.derivative(beams, i, j, 1, d))
        else {
            return Err(Error::InvalidBeam(format!("no screen derivatives at pixel ({i}, {j})")));
        };
        let emitter = Emitter::Static { u: 0.0 };
        let mut acc = [0.0; 3];
        if let Some(map) = &self.scene.stars {
            let fp = map.footprint(d, ddw, ddh)?;
            let gain = lensing_amplification(dqw, dqh, ddw, ddh);
            let flux = gather_stars(map, &fp, self.scene.position_mode).map(|v| v * gain);
            add(&mut acc, self.beamed(flux, beam.frame.as_ref(), emitter)?);
        }
        if let Some(area) = &self.scene.area {
            let l = sample_extended(area, d, ddw, ddh)?;
            add(&mut acc, self.beamed(l, beam.frame.as_ref(), emitter)?);
        }
        Ok(acc)
    }

    fn disc(&self, beam: &Option<Beam>) -> Result<[f64; 3]> {
        let (Some(disc), Some(beam)) = (&self.scene.disc, beam) else {
            return Ok([0.0; 3]);
        };
        let Some(frame) = beam.frame else {
            return Ok([0.0; 3]);
        };
        let mut acc = [0.0; 3];
        for hit in beam.trace.intersections() {
            let xyz = disc_radiance(disc, hit.u_hit, self.cam.position.t + hit.t_ret, &frame, hit.phi_hit);
            if xyz == [0.0; 3] {
                continue;
            }
            let emitter = Emitter::DiscCircular {
                u: hit.u_hit,
                ez_dot: frame.ez.z,
            };
            add(&mut acc, self.beamed(xyz, Some(&frame), emitter)?);
        }
        Ok(acc)
    }
}

/// Camera axes with the radial contraction of the static frame undone, orthonormal in
/// flat space for a static camera.
fn flat_axes(cam: &CameraBasis) -> [Vec3; 3] {
    let n = cam.position.cartesian().normalize();
    let k = 1.0 / (1.0 - cam.position.u()).sqrt() - 1.0;
    [cam.e_w.s, cam.e_h.s, cam.e_d.s].map(|v| (v + n * (v.dot(n) * k)).normalize())
}

fn add(acc: &mut [f64; 3], v: [f64; 3]) {
    for c in 0..3 {
        acc[c] += v[c];
    }
}

/// Emitted disc colour at a hit; a disc without particles has uniform unit density.
fn disc_radiance(disc: &DiscModel, u: f64, t: f64, frame: &BeamFrame, phi_hit: f64) -> [f64; 3] {
    if !disc.contains(u) {
        return [0.0; 3];
    }
    if disc.particles().is_empty() {
        return disc.emission(u);
    }
    let p = frame.in_plane(phi_hit);
    disc.radiance(u, t, p.y.atan2(p.x)).0
}

fn disc_band(scene: &Scene, mode: TraceMode) -> Result<DiscBand> {
    match (&scene.disc, mode) {
        (Some(d), TraceMode::Tables | TraceMode::Raymarch { .. }) => DiscBand::new(d.u_ic, d.u_oc),
        _ => DiscBand::new(0.0, 0.0),
    }
}

/// Runs `f` over all pixels, in parallel when asked; the result does not depend on it.
fn per_pixel<T: Send>(width: usize, height: usize, parallel: bool, f: impl Fn(usize, usize) -> T + Sync) -> Vec<T> {
    if parallel {
        (0..width * height).into_par_iter().map(|k| f(k % width, k / width)).collect()
    } else {
        (0..width * height).map(|k| f(k % width, k / width)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameOptions {
    pub width: usize,
    pub height: usize,
    pub mode: TraceMode,
    pub parallel: bool,
}

/// Renders one frame. Pixel failures are counted and left black.
pub fn render_frame(scene: &Scene, cam: &CameraBasis, opts: &FrameOptions) -> Result<Frame> {
    let (width, height) = (opts.width, opts.height);
    if width < MIN_DIMENSION || height < MIN_DIMENSION {
        return Err(Error::Config(format!("image {width}x{height} is smaller than {MIN_DIMENSION}x{MIN_DIMENSION}")));
    }
    if opts.mode == TraceMode::Tables && scene.tables.is_none() {
        return Err(Error::Config("table tracing needs geodesic tables".into()));
    }
    if opts.mode != TraceMode::Flat && scene.color.is_none() && (scene.stars.is_some() || scene.area.is_some() || scene.disc.is_some()) {
        return Err(Error::Config("Doppler shading needs a colour table".into()));
    }
    let ctx = Context {
        scene,
        cam,
        mode: opts.mode,
        band: disc_band(scene, opts.mode)?,
        width,
        height,
        pitch: 2.0 / width as f64,
    };
    let mut times = StageTimes::default();

    let start = Instant::now();
    let traced = per_pixel(width, height, opts.parallel, |i, j| {
        let (q_w, q_h) = ctx.screen(i as f64 + 0.5, j as f64 + 0.5);
        ctx.trace(q_w, q_h)
    });
    times.trace = start.elapsed();
    let mut failed: Vec<bool> = traced.iter().map(|b| b.is_err()).collect();
    let beams: Vec<Option<Beam>> = traced.into_iter().map(|b| b.ok()).collect();

    let start = Instant::now();
    let sky = per_pixel(width, height, opts.parallel, |i, j| ctx.sky(&beams, i, j));
    times.stars = start.elapsed();

    let start = Instant::now();
    let disc = per_pixel(width, height, opts.parallel, |i, j| ctx.disc(&beams[j * width + i]));
    times.disc = start.elapsed();

    let mut image = HdrImage::new(width, height);
    for (k, (s, d)) in sky.into_iter().zip(disc).enumerate() {
        let mut px = [0.0; 3];
        match (s, d) {
            (Ok(s), Ok(d)) => {
                add(&mut px, s);
                add(&mut px, d);
            }
            _ => failed[k] = true,
        }
        if failed[k] || !px.iter().all(|v| v.is_finite()) {
            failed[k] = true;
            px = [0.0; 3];
        }
        image.pixels[k] = px.map(|v| v.max(0.0));
    }
    let failures = failed.iter().filter(|&&f| f).count();
    if failures > 0 {
        log::warn!("{failures} pixels failed and were rendered black");
    }
    Ok(Frame { image, failures, times })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{focal_length_for_fov, static_camera, Orientation};
    use crate::geodesic::SchwarzschildPosition;
    use crate::starfield::{build_starmap, generate_catalog, CatalogOptions};
    use std::f64::consts::FRAC_PI_2;

    fn star_scene(count: usize, face: usize) -> Scene {
        let cat = generate_catalog(&CatalogOptions {
            count,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        Scene {
            stars: Some(build_starmap(&cat, face).unwrap()),
            ..Default::default()
        }
    }

    fn camera(r: f64, fov: f64, o: Orientation) -> CameraBasis {
        let pos = SchwarzschildPosition::new(0.0, r, FRAC_PI_2, 0.0).unwrap();
        static_camera(pos, &o, focal_length_for_fov(fov)).unwrap()
    }

    fn opts(width: usize, height: usize, mode: TraceMode, parallel: bool) -> FrameOptions {
        FrameOptions {
            width,
            height,
            mode,
            parallel,
        }
    }

    #[test]
    fn flat_render_equals_direct_gather() {
        let scene = star_scene(20_000, 64);
        let cam = camera(10.0, 1.2, Orientation { yaw: 0.4, pitch: -0.3, roll: 0.2 });
        let (w, h) = (24, 16);
        let frame = render_frame(&scene, &cam, &opts(w, h, TraceMode::Flat, true)).unwrap();
        assert_eq!(frame.failures, 0);
        let map = scene.stars.as_ref().unwrap();
        let f = cam.focal_length;
        // Static frame at θ = π/2, φ = 0: e_r = x, e_θ = −z, e_φ = y.
        let world = |a: Vec3| Vec3::X * a.x - Vec3::Z * a.y + Vec3::Y * a.z;
        let [ew, eh, ed] = Orientation { yaw: 0.4, pitch: -0.3, roll: 0.2 }.rows().map(world);
        let dir = |x: f64, y: f64| {
            let p = 2.0 / w as f64;
            let (qw, qh) = (-1.0 + x * p, (h as f64 / 2.0 - y) * p);
            (ew * qw + eh * qh - ed * f).normalize()
        };
        let mut checked = 0.0;
        for j in 0..h {
            for i in 0..w {
                let (x, y) = (i as f64 + 0.5, j as f64 + 0.5);
                let d = dir(x, y);
                let dw = if i + 1 < w { dir(x + 1.0, y) - d } else { d - dir(x - 1.0, y) };
                let dh = if j + 1 < h { dir(x, y + 1.0) - d } else { d - dir(x, y - 1.0) };
                let expect = gather_stars(map, &map.footprint(d, dw, dh).unwrap(), PositionMode::Stored);
                let got = frame.image.get(i, j);
                for c in 0..3 {
                    assert!((got[c] - expect[c]).abs() < 1e-6, "({i}, {j}): {got:?} vs {expect:?}");
                }
                checked += expect[1];
            }
        }
        assert!(checked > 0.0);
    }

    #[test]
    fn parallel_matches_serial_and_repeats() {
        let scene = star_scene(5000, 32);
        let cam = camera(10.0, 1.0, Orientation::default());
        let a = render_frame(&scene, &cam, &opts(16, 12, TraceMode::Flat, false)).unwrap();
        let b = render_frame(&scene, &cam, &opts(16, 12, TraceMode::Flat, true)).unwrap();
        let c = render_frame(&scene, &cam, &opts(16, 12, TraceMode::Flat, false)).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.image, c.image);
    }

    #[test]
    fn small_and_unconfigured_frames_are_rejected() {
        let scene = Scene::default();
        let cam = camera(10.0, 1.0, Orientation::default());
        assert!(matches!(render_frame(&scene, &cam, &opts(4, 16, TraceMode::Flat, true)), Err(Error::Config(_))));
        assert!(matches!(render_frame(&scene, &cam, &opts(8, 8, TraceMode::Tables, true)), Err(Error::Config(_))));
        let stars = star_scene(10, 8);
        let r = render_frame(&stars, &cam, &opts(8, 8, TraceMode::Raymarch { steps: 10 }, true));
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn raymarched_hole_is_black_in_the_middle() {
        let scene = Scene {
            area: Some(AreaMap::constant(8, [1.0, 1.0, 1.0]).unwrap()),
            color: Some(ColorTable::precompute(&crate::shading::ColorTableOptions {
                dims: (9, 9, 9),
                ..Default::default()
            })
            .unwrap()),
            ..Default::default()
        };
        let cam = camera(20.0, 0.8, Orientation::default());
        let frame = render_frame(&scene, &cam, &opts(16, 16, TraceMode::Raymarch { steps: 400 }, true)).unwrap();
        assert_eq!(frame.failures, 0);
        assert_eq!(frame.image.get(8, 8), [0.0; 3]);
        assert!(frame.image.get(0, 0)[1] > 0.5);
        assert!(frame.image.pixels.iter().all(|p| p.iter().all(|v| v.is_finite() && *v >= 0.0)));
    }
}
