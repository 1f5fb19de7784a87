use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use bhtrace::oracle::{verify, VerifyOptions};
use bhtrace::render::bench::{benchmark, BenchOptions};
use bhtrace::render::config::TableSource;
use bhtrace::render::{render_frame, write_image, FrameOptions, Scene, SceneConfig, TraceMode};
use bhtrace::shading::{bloom, ColorTable, ColorTableOptions};
use bhtrace::starfield::{generate_catalog, CatalogOptions};
use bhtrace::tables::{precompute, GeodesicTables, PrecomputeOptions};
use bhtrace::Error;
use clap::{Args, Parser, Subcommand};

const EXIT_CONFIG: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "bhtrace", version, about = "Schwarzschild black hole renderer using precomputed geodesic tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Precompute the geodesic tables (and optionally the colour table).
    Precompute(PrecomputeArgs),
    /// Render one frame.
    Render {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value = "frame.png")]
        out: PathBuf,
    },
    /// Render numbered frames of a static or orbiting camera.
    Animate {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value = "frames")]
        out_dir: PathBuf,
    },
    /// Compare table traces with the reference integrator.
    Verify(VerifyArgs),
    /// Compare frame times of table tracing and ray marching.
    Bench {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value_t = 3)]
        frames: usize,
        /// Ray-marching step budgets to compare against.
        #[arg(long, value_delimiter = ',', default_value = "1000,25")]
        steps: Vec<usize>,
        /// Disable rayon parallelism.
        #[arg(long)]
        single_thread: bool,
    },
    /// Write a procedural star catalog.
    GenCatalog {
        #[arg(long, default_value_t = 100_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "stars.txt")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct PrecomputeArgs {
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    /// Deflection table size, WxH.
    #[arg(long, default_value = "512x512", value_parser = parse_size)]
    d_size: (usize, usize),
    /// Inverse-radius table size, WxH.
    #[arg(long, default_value = "64x32", value_parser = parse_size)]
    u_size: (usize, usize),
    #[arg(long, default_value = "geodesic.bin")]
    out: PathBuf,
    /// Also write the colour table here.
    #[arg(long)]
    color_table: Option<PathBuf>,
    #[arg(long)]
    single_thread: bool,
}

impl PrecomputeArgs {
    fn options(&self) -> PrecomputeOptions {
        PrecomputeOptions {
            epsilon: self.epsilon,
            d_dims: self.d_size,
            u_dims: self.u_size,
            parallel: !self.single_thread,
        }
    }
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Table file; precomputed from --epsilon, --d-size and --u-size when absent.
    #[arg(long)]
    tables: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    #[arg(long, default_value = "512x512", value_parser = parse_size)]
    d_size: (usize, usize),
    #[arg(long, default_value = "64x32", value_parser = parse_size)]
    u_size: (usize, usize),
    #[arg(long, default_value_t = 10_000)]
    rays: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    tolerance: f64,
    /// Exit with status 3 instead of warning when the tolerance is exceeded.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Debug)]
struct SceneArgs {
    /// Scene configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    fov: Option<f64>,
    #[arg(long)]
    exposure: Option<f64>,
    #[arg(long)]
    flat: bool,
    #[arg(long)]
    no_bloom: bool,
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s.split_once('x').ok_or_else(|| format!("expected WxH, found {s:?}"))?;
    Ok((
        w.parse().map_err(|e| format!("{w:?}: {e}"))?,
        h.parse().map_err(|e| format!("{h:?}: {e}"))?,
    ))
}

impl SceneArgs {
    /// The configuration file with command-line overrides applied.
    fn load(&self) -> Result<SceneConfig> {
        let (text, base) = match &self.config {
            Some(p) => (
                std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
                p.parent().map(Path::to_path_buf).unwrap_or_default(),
            ),
            None => (String::new(), PathBuf::from(".")),
        };
        let mut entries: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| {
            entries.retain(|(key, _)| key != k);
            entries.push((k.to_string(), v));
        };
        let mut passthrough = String::new();
        for line in text.lines() {
            let content = line.split('#').next().unwrap_or("");
            match content.split_once('=') {
                Some((k, v)) => put(k.trim(), v.trim().to_string()),
                None => {
                    passthrough += content;
                    passthrough.push('\n');
                }
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, found {kv:?}")))?;
            put(k.trim(), v.trim().to_string());
        }
        let flags = [
            ("width", self.width.map(|v| v.to_string())),
            ("height", self.height.map(|v| v.to_string())),
            ("fov", self.fov.map(|v| v.to_string())),
            ("exposure", self.exposure.map(|v| v.to_string())),
            ("flat", self.flat.then(|| "true".to_string())),
            ("bloom", self.no_bloom.then(|| "false".to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                put(k, v);
            }
        }
        let merged: String = entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        Ok(SceneConfig::parse(&(passthrough + &merged), &base)?)
    }
}

fn build_scene(config: &SceneConfig) -> Result<Scene> {
    if let TableSource::Precompute(o) = &config.tables {
        if !config.flat {
            log::info!("no table file given, precomputing at epsilon = {:e}", o.epsilon);
        }
    }
    let start = Instant::now();
    let scene = config.build_scene()?;
    log::info!("scene ready in {:.1} s", start.elapsed().as_secs_f64());
    Ok(scene)
}

fn render_to(scene: &Scene, config: &SceneConfig, cam: &bhtrace::geodesic::CameraBasis, out: &Path) -> Result<()> {
    let opts = FrameOptions {
        width: config.width,
        height: config.height,
        mode: config.trace_mode(),
        parallel: true,
    };
    let frame = render_frame(scene, cam, &opts)?;
    let image = match config.bloom_options() {
        Some(b) => bloom(&frame.image, &b),
        None => frame.image,
    };
    write_image(&image, config.exposure, out, config.hdr).with_context(|| format!("writing {}", out.display()))?;
    log::info!(
        "{}: trace {:.0} ms, stars {:.0} ms, disc {:.0} ms, {} failed pixels",
        out.display(),
        frame.times.trace.as_secs_f64() * 1e3,
        frame.times.stars.as_secs_f64() * 1e3,
        frame.times.disc.as_secs_f64() * 1e3,
        frame.failures
    );
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Precompute(args) => {
            let start = Instant::now();
            let tables = precompute(&args.options())?;
            log::info!("tables computed in {:.1} s", start.elapsed().as_secs_f64());
            tables.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
            if let Some(p) = &args.color_table {
                let start = Instant::now();
                ColorTable::precompute(&ColorTableOptions::default())?.save(p)?;
                log::info!("colour table computed in {:.1} s", start.elapsed().as_secs_f64());
            }
        }
        Command::Render { scene, out } => {
            let config = scene.load()?;
            let cams = config.cameras()?;
            render_to(&build_scene(&config)?, &config, &cams[0], &out)?;
        }
        Command::Animate { scene, out_dir } => {
            let config = scene.load()?;
            std::fs::create_dir_all(&out_dir)?;
            let s = build_scene(&config)?;
            let cams = config.cameras()?;
            for (k, cam) in cams.iter().enumerate() {
                render_to(&s, &config, cam, &out_dir.join(format!("frame_{k:04}.png")))?;
            }
        }
        Command::Verify(args) => {
            let tables = match &args.tables {
                Some(p) => GeodesicTables::load(p)?,
                None => precompute(&PrecomputeOptions {
                    epsilon: args.epsilon,
                    d_dims: args.d_size,
                    u_dims: args.u_size,
                    parallel: true,
                })?,
            };
            let report = verify(
                &tables,
                &VerifyOptions {
                    rays: args.rays,
                    seed: args.seed,
                    ..Default::default()
                },
            )?;
            print!("{}", report.render());
            if !report.passes(args.tolerance) {
                if args.strict {
                    eprintln!("verification failed: errors exceed {:e}", args.tolerance);
                    return Ok(ExitCode::from(EXIT_VERIFY));
                }
                log::warn!("errors exceed the tolerance {:e}; the tables are too coarse", args.tolerance);
            }
        }
        Command::Bench {
            scene,
            frames,
            steps,
            single_thread,
        } => {
            let config = scene.load()?;
            if config.flat {
                bail!(Error::Config("benchmarks need the black hole; drop flat".into()));
            }
            let s = build_scene(&config)?;
            let mut modes = vec![TraceMode::Tables];
            modes.extend(steps.into_iter().map(|steps| TraceMode::Raymarch { steps }));
            let report = benchmark(
                &s,
                &config.cameras()?[0],
                &BenchOptions {
                    width: config.width,
                    height: config.height,
                    frames,
                    modes,
                    bloom: config.bloom_options(),
                    parallel: !single_thread,
                    ..Default::default()
                },
            )?;
            print!("{}", report.render());
        }
        Command::GenCatalog { count, seed, out } => {
            let catalog = generate_catalog(&CatalogOptions {
                count,
                seed,
                ..Default::default()
            })?;
            catalog.save(&out).with_context(|| format!("writing {}", out.display()))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Config(_)) => ExitCode::from(EXIT_CONFIG),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
