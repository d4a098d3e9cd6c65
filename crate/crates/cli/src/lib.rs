//! `fractalmarch` command line: stills, animations, benchmarks and the
//! interactive server.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid scene, 3 I/O failure.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use fractalmarch_core::engine::{
    render_animation, render_frame_with_stats, save_image, EngineError, RenderStats,
};
use fractalmarch_core::estimators::{
    DEFAULT_ESCAPE_RADIUS_SQ, DEFAULT_JULIA_DEGREE, DEFAULT_JULIA_ITERATIONS,
    DEFAULT_MANDELBULB_ITERATIONS, DEFAULT_MANDELBULB_POWER,
};
use fractalmarch_core::marcher::{
    DEFAULT_MAX_STEPS, DEFAULT_PRECIS, DEFAULT_STEP_CLAMP, DEFAULT_T_MAX,
};
use fractalmarch_core::scene::{
    load_scene, preset, Animation, SceneConfig, SceneError, MAX_IMAGE_SIDE, PRESET_NAMES,
};
use fractalmarch_core::shading::{
    DEFAULT_ALBEDO_SCALE, DEFAULT_MAX_DEPTH_BOOST, DEFAULT_MAX_RECURSION_DEPTH, DEFAULT_REFLECTANCE,
};
use fractalmarch_viewserver::{ServerConfig, DEFAULT_PORT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SCENE: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const DEFAULT_PRESET: &str = "julia-c0";
pub const DEFAULT_ANIMATION_FRAMES: u32 = 24;

#[derive(Debug, Parser)]
#[command(
    name = "fractalmarch",
    version,
    about = "Ray-marched quaternion Julia sets and Mandelbulbs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render one image (PPM, or PNG when OUT ends in .png).
    Render {
        #[command(flatten)]
        scene: SceneArgs,
        /// Output image; the extension picks the format
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Render an iteration/parameter animation as numbered frames.
    Animate {
        #[command(flatten)]
        scene: SceneArgs,
        /// Frame pattern; `anim.png` becomes anim_0000.png, anim_0001.png, ...
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Frame count [default: the scene's, else 24]
        #[arg(long, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
        frames: Option<u32>,
    },
    /// Time repeated renders and print throughput and a steps-per-ray histogram.
    Bench {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, value_name = "N", default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
        runs: u32,
    },
    /// Serve the interactive viewer over HTTP and WebSocket.
    Serve {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, value_name = "N", default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Directory with a UI bundle to serve instead of the built-in page
        #[arg(long = "static", value_name = "DIR")]
        static_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SceneArgs {
    /// Scene file (TOML)
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    scene: Option<PathBuf>,
    /// Built-in scene [default: julia-c0]
    #[arg(long, value_name = "NAME", value_parser = PRESET_NAMES)]
    preset: Option<String>,
    /// Image width in pixels [default: the scene's]
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u32).range(1..=i64::from(MAX_IMAGE_SIDE)))]
    width: Option<u32>,
    /// Image height in pixels [default: the scene's]
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u32).range(1..=i64::from(MAX_IMAGE_SIDE)))]
    height: Option<u32>,
    /// Render threads [default: available cores]
    #[arg(long, value_name = "N", env = "FRACTALMARCH_THREADS", value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
    /// Iteration count for every instance [default: the scene's; 200 Julia, 4 Mandelbulb]
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    iterations: Option<u32>,
}

fn defaults_note() -> String {
    format!(
        "Built-in defaults:\n  \
         Julia: {DEFAULT_JULIA_ITERATIONS} iterations, degree {DEFAULT_JULIA_DEGREE}\n  \
         Mandelbulb: {DEFAULT_MANDELBULB_ITERATIONS} iterations, power {DEFAULT_MANDELBULB_POWER}\n  \
         escape |z|^2 > {DEFAULT_ESCAPE_RADIUS_SQ}, precision {DEFAULT_PRECIS}, t_max {DEFAULT_T_MAX}, \
         {DEFAULT_MAX_STEPS} steps, step clamp {DEFAULT_STEP_CLAMP}\n  \
         reflectance {DEFAULT_REFLECTANCE}, albedo scale {DEFAULT_ALBEDO_SCALE}, \
         max-depth boost {DEFAULT_MAX_DEPTH_BOOST}, recursion depth {DEFAULT_MAX_RECURSION_DEPTH}\n\
         Presets: {}\n\
         Exit codes: 0 ok, 1 usage, 2 invalid scene, 3 I/O",
        PRESET_NAMES.join(", ")
    )
}

#[derive(Debug)]
enum Failure {
    Scene(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Scene(_) => EXIT_SCENE,
            Failure::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Scene(m) | Failure::Io(m) => m,
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Scene(e) => Failure::Scene(e.to_string()),
            EngineError::NoAnimation | EngineError::InvalidThreadCount => {
                Failure::Scene(e.to_string())
            }
            other => Failure::Io(other.to_string()),
        }
    }
}

fn scene_error(origin: &str, e: SceneError) -> Failure {
    Failure::Scene(format!("{origin}: {e}"))
}

impl SceneArgs {
    fn threads(&self) -> usize {
        self.threads
            .map(|t| t as usize)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    /// Loads the scene and applies the flag overrides on top of it.
    fn load(&self) -> Result<SceneConfig, Failure> {
        let (origin, mut scene) = match (&self.scene, &self.preset) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
                let origin = path.display().to_string();
                let scene = load_scene(&text).map_err(|e| scene_error(&origin, e))?;
                (origin, scene)
            }
            (None, name) => {
                let name = name.as_deref().unwrap_or(DEFAULT_PRESET);
                let scene =
                    preset(name).ok_or_else(|| Failure::Scene(format!("unknown preset {name}")))?;
                (format!("preset {name}"), scene)
            }
        };
        if let Some(w) = self.width {
            scene.camera.width = w;
        }
        if let Some(h) = self.height {
            scene.camera.height = h;
        }
        if let Some(n) = self.iterations {
            scene.set_iterations(n);
            if let Some(anim) = &mut scene.animation {
                anim.iterations_end = n;
            }
        }
        scene.validate().map_err(|e| scene_error(&origin, e))?;
        Ok(scene)
    }
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let note = defaults_note();
    let matches = Cli::command()
        .after_help(note.clone())
        .mut_subcommands(|sub| sub.after_help(note.clone()))
        .try_get_matches_from(argv);
    let cli = match matches.and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Render { scene, out: path } => {
            let config = scene.load()?;
            let start = Instant::now();
            let (fb, _) = render_frame_with_stats(&config, scene.threads())?;
            save_image(&fb, &path)?;
            let _ = writeln!(
                out,
                "wrote {} ({}x{}, {:.2}s)",
                path.display(),
                fb.width,
                fb.height,
                start.elapsed().as_secs_f64()
            );
        }
        Command::Animate {
            scene,
            out: path,
            frames,
        } => {
            let mut config = scene.load()?;
            let anim = config.animation.get_or_insert_with(|| Animation {
                frame_count: DEFAULT_ANIMATION_FRAMES,
                iterations_start: 1,
                iterations_end: config
                    .instances
                    .first()
                    .map_or(DEFAULT_JULIA_ITERATIONS, |i| i.fractal.max_iterations()),
                c_path: None,
            });
            if let Some(n) = frames {
                anim.frame_count = n;
            }
            let written = render_animation(&config, &path, scene.threads())?;
            let _ = writeln!(out, "wrote {} frames", written.len());
            for p in written {
                let _ = writeln!(out, "  {}", p.display());
            }
        }
        Command::Bench { scene, runs } => {
            let config = scene.load()?;
            bench(&config, scene.threads(), runs, out)?;
        }
        Command::Serve {
            scene,
            port,
            static_dir,
        } => {
            let config = scene.load()?;
            if let Some(dir) = &static_dir {
                if !Path::new(dir).is_dir() {
                    return Err(Failure::Io(format!("{}: not a directory", dir.display())));
                }
            }
            let addr = SocketAddr::from(([127, 0, 0, 1], port));
            fractalmarch_viewserver::serve_blocking(
                addr,
                ServerConfig {
                    scene: config,
                    threads: scene.threads(),
                    static_dir,
                },
            )
            .map_err(|e| Failure::Io(format!("{addr}: {e}")))?;
        }
    }
    Ok(())
}

fn bench(
    scene: &SceneConfig,
    threads: usize,
    runs: u32,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let pixels = u64::from(scene.camera.width) * u64::from(scene.camera.height);
    let mut times = Vec::with_capacity(runs as usize);
    let mut stats = RenderStats::default();
    for _ in 0..runs {
        let start = Instant::now();
        let (_, s) = render_frame_with_stats(scene, threads)?;
        times.push(start.elapsed().as_secs_f64());
        stats = s;
    }
    let best = times.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let samples = u64::from(scene.render.supersample).pow(2);
    let rays = pixels * samples;
    let total_steps: u64 = stats.primary_steps.iter().map(|&s| u64::from(s)).sum();

    let _ = writeln!(
        out,
        "resolution      {}x{}",
        scene.camera.width, scene.camera.height
    );
    let _ = writeln!(out, "threads         {threads}");
    let _ = writeln!(out, "runs            {runs}");
    let _ = writeln!(out, "best            {best:.3} s");
    let _ = writeln!(out, "mean            {mean:.3} s");
    let _ = writeln!(out, "pixels/s        {:.0}", pixels as f64 / best);
    let _ = writeln!(
        out,
        "coverage        {:.1} %",
        100.0 * stats.covered_pixels() as f64 / pixels as f64
    );
    let _ = writeln!(
        out,
        "mean steps/ray  {:.2}",
        total_steps as f64 / rays as f64
    );
    let _ = writeln!(out, "\nsteps/ray histogram (primary rays, per pixel)");
    for (label, count) in step_histogram(&stats.primary_steps, samples as u32) {
        let share = count as f64 / pixels as f64;
        let bar = "#".repeat((share * 50.0).round() as usize);
        let _ = writeln!(out, "{label:>11}  {count:>9}  {bar}");
    }
    Ok(())
}

/// Buckets `[0]`, `[1, 2)`, `[2, 4)`, ... of per-ray step counts.
fn step_histogram(steps: &[u32], samples_per_pixel: u32) -> Vec<(String, usize)> {
    let mut buckets: Vec<usize> = vec![0; 13];
    for &s in steps {
        let per_ray = s / samples_per_pixel.max(1);
        let b = if per_ray == 0 {
            0
        } else {
            (32 - per_ray.leading_zeros()) as usize
        };
        buckets[b.min(12)] += 1;
    }
    buckets
        .into_iter()
        .enumerate()
        .map(|(b, count)| {
            let label = match b {
                0 => "0".to_string(),
                12 => format!(">= {}", 1u32 << 11),
                _ => format!("{}-{}", 1u32 << (b - 1), (1u32 << b) - 1),
            };
            (label, count)
        })
        .collect()
}
