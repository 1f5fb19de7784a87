//! Frame-time comparison between table tracing and ray marching, with escape-angle
//! accuracy measured against the reference integrator.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::{raymarch_trace, render_frame, FrameOptions, Scene, StageTimes, TraceMode};
use crate::error::{Error, Result};
use crate::geodesic::{beam_direction, make_beam_frame, CameraBasis};
use crate::oracle::{reference_trace, OracleOptions};
use crate::shading::{bloom, BloomOptions};
use crate::tracer::{trace_ray, DiscBand};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub modes: Vec<TraceMode>,
    pub bloom: Option<BloomOptions>,
    /// Accuracy is measured on a `samples.0 × samples.1` grid of screen points.
    pub samples: (usize, usize),
    pub oracle: OracleOptions,
    pub parallel: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            width: 640,
            height: 360,
            frames: 3,
            modes: vec![
                TraceMode::Tables,
                TraceMode::Raymarch { steps: 1000 },
                TraceMode::Raymarch { steps: 25 },
            ],
            bloom: Some(BloomOptions::default()),
            samples: (32, 18),
            oracle: OracleOptions::default(),
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeReport {
    pub mode: TraceMode,
    /// Median per-frame stage times.
    pub times: StageTimes,
    pub bloom: Duration,
    pub failures: usize,
    /// Largest `|δ′ − δ′_ref|` in radians over the sampled rays escaping in both traces.
    pub max_delta_error: f64,
    /// Sampled rays captured by exactly one of the two traces.
    pub capture_mismatches: usize,
    pub samples: usize,
}

impl ModeReport {
    pub fn frame_time(&self) -> Duration {
        self.times.total() + self.bloom
    }

    /// Largest angular error of a star position, in degrees.
    pub fn max_star_error_deg(&self) -> f64 {
        self.max_delta_error.to_degrees()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub modes: Vec<ModeReport>,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn mode_name(m: TraceMode) -> String {
    match m {
        TraceMode::Tables => "tables".into(),
        TraceMode::Raymarch { steps } => format!("raymarch-{steps}"),
        TraceMode::Flat => "flat".into(),
    }
}

impl BenchReport {
    pub fn mode(&self, mode: TraceMode) -> Option<&ModeReport> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    /// Frame-time ratio of `slow` over table tracing.
    pub fn speedup(&self, slow: TraceMode) -> Option<f64> {
        let t = self.mode(TraceMode::Tables)?;
        let s = self.mode(slow)?;
        Some(s.frame_time().as_secs_f64() / t.frame_time().as_secs_f64())
    }

    /// Trace-stage time ratio of `slow` over table tracing.
    pub fn trace_speedup(&self, slow: TraceMode) -> Option<f64> {
        let t = self.mode(TraceMode::Tables)?;
        let s = self.mode(slow)?;
        Some(s.times.trace.as_secs_f64() / t.times.trace.as_secs_f64())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "benchmark {}x{}, {} frames per mode, median ms/frame", self.width, self.height, self.frames);
        let _ = writeln!(
            out,
            "{:<14} {:>9} {:>9} {:>9} {:>9} {:>9} {:>12} {:>10}",
            "mode", "trace", "stars", "disc", "bloom", "total", "max err(°)", "mismatch"
        );
        for m in &self.modes {
            let _ = writeln!(
                out,
                "{:<14} {:>9.1} {:>9.1} {:>9.1} {:>9.1} {:>9.1} {:>12.2e} {:>6}/{}",
                mode_name(m.mode),
                ms(m.times.trace),
                ms(m.times.stars),
                ms(m.times.disc),
                ms(m.bloom),
                ms(m.frame_time()),
                m.max_star_error_deg(),
                m.capture_mismatches,
                m.samples
            );
        }
        for m in &self.modes {
            if m.mode != TraceMode::Tables {
                if let (Some(f), Some(t)) = (self.speedup(m.mode), self.trace_speedup(m.mode)) {
                    let _ = writeln!(out, "speedup vs {}: {f:.2}x per frame, {t:.2}x tracing", mode_name(m.mode));
                }
            }
        }
        out
    }
}

/// Escape-angle errors of `mode` against the reference over a grid of screen points.
pub fn accuracy(
    scene: &Scene,
    cam: &CameraBasis,
    mode: TraceMode,
    samples: (usize, usize),
    aspect: f64,
    oracle: &OracleOptions,
) -> Result<(f64, usize, usize)> {
    let band = match &scene.disc {
        Some(d) => DiscBand::new(d.u_ic, d.u_oc)?,
        None => DiscBand::new(0.0, 0.0)?,
    };
    let (nw, nh) = samples;
    let errors: Vec<Option<f64>> = (0..nw * nh)
        .into_par_iter()
        .map(|k| -> Result<Option<f64>> {
            let q_w = -1.0 + 2.0 * ((k % nw) as f64 + 0.5) / nw as f64;
            let q_h = (1.0 - 2.0 * ((k / nw) as f64 + 0.5) / nh as f64) / aspect;
            let frame = make_beam_frame(&cam.position, beam_direction(q_w, q_h, cam));
            let (r, d, a) = (cam.position.r, frame.delta, frame.alpha);
            let got = match mode {
                TraceMode::Tables => {
                    let t = scene.tables.as_ref().ok_or_else(|| Error::Config("no tables".into()))?;
                    trace_ray(r, d, a, &band, t)?
                }
                TraceMode::Raymarch { steps } => raymarch_trace(r, d, a, &band, steps)?,
                TraceMode::Flat => return Err(Error::Config("flat mode has no reference".into())),
            };
            let want = reference_trace(r, d, a, &band, oracle)?;
            Ok(match (got.escape_delta, want.escape_delta) {
                (Some(x), Some(y)) => Some((x - y).abs()),
                (None, None) => Some(0.0),
                _ => None,
            })
        })
        .collect::<Result<_>>()?;
    let max = errors.iter().flatten().fold(0.0, |m: f64, &e| m.max(e));
    let mismatches = errors.iter().filter(|e| e.is_none()).count();
    Ok((max, mismatches, nw * nh))
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2
    }
}

/// Renders `frames` frames per mode of the same scene and camera. Modes take turns
/// frame by frame so that drifting machine load affects all of them alike.
pub fn benchmark(scene: &Scene, cam: &CameraBasis, opts: &BenchOptions) -> Result<BenchReport> {
    if opts.frames == 0 {
        return Err(Error::Config("benchmark needs at least one frame".into()));
    }
    let frame_opts = |mode| FrameOptions {
        width: opts.width,
        height: opts.height,
        mode,
        parallel: opts.parallel,
    };
    // One untimed frame per mode so every mode starts with warm caches.
    for &mode in &opts.modes {
        render_frame(scene, cam, &frame_opts(mode))?;
    }
    let mut stages: Vec<[Vec<Duration>; 4]> = vec![Default::default(); opts.modes.len()];
    let mut failures = vec![0; opts.modes.len()];
    for _ in 0..opts.frames {
        for (k, &mode) in opts.modes.iter().enumerate() {
            let f = render_frame(scene, cam, &frame_opts(mode))?;
            stages[k][0].push(f.times.trace);
            stages[k][1].push(f.times.stars);
            stages[k][2].push(f.times.disc);
            failures[k] = failures[k].max(f.failures);
            let start = Instant::now();
            if let Some(b) = &opts.bloom {
                std::hint::black_box(bloom(&f.image, b));
            }
            stages[k][3].push(start.elapsed());
        }
    }
    let aspect = opts.width as f64 / opts.height as f64;
    let mut modes = Vec::new();
    for ((&mode, stage), failures) in opts.modes.iter().zip(stages).zip(failures) {
        let [trace, stars, disc, bloom_time] = stage.map(median);
        let (max_delta_error, capture_mismatches, samples) = accuracy(scene, cam, mode, opts.samples, aspect, &opts.oracle)?;
        let report = ModeReport {
            mode,
            times: StageTimes { trace, stars, disc },
            bloom: bloom_time,
            failures,
            max_delta_error,
            capture_mismatches,
            samples,
        };
        log::info!("{} done: {:.1} ms/frame", mode_name(mode), ms(report.frame_time()));
        modes.push(report);
    }
    Ok(BenchReport {
        width: opts.width,
        height: opts.height,
        frames: opts.frames,
        modes,
    })
}
