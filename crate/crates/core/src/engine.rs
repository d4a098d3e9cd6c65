//! Tile-parallel frame rendering, animation sequencing and image output.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::estimators::Fractal;
use crate::quat::Quaternion;
use crate::scene::{Animation, CameraBasis, SceneConfig, SceneError};
use crate::shading::{trace_radiance, Rgb, TraceProbe, GAMMA};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("thread count must be >= 1")]
    InvalidThreadCount,
    #[error("scene has no [animation] section")]
    NoAnimation,
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("could not start worker pool: {0}")]
    ThreadPool(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Write(#[from] io::Error),
    #[error("png encoding failed: {0}")]
    Png(#[from] png::EncodingError),
}

/// 8-bit RGBA, row-major, top-left origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Framebuffer {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Framebuffer {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width as usize * height as usize * 4],
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        self.pixels[i..i + 4].try_into().unwrap()
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgba: [u8; 4]) {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        self.pixels[i..i + 4].copy_from_slice(&rgba);
    }

    /// RGBA bytes of a rectangle, row by row.
    pub fn crop(&self, tile: Tile) -> Vec<u8> {
        let mut out = Vec::with_capacity(tile.pixel_count() * 4);
        for y in tile.y0..tile.y0 + tile.height {
            let start = (y as usize * self.width as usize + tile.x0 as usize) * 4;
            out.extend_from_slice(&self.pixels[start..start + tile.width as usize * 4]);
        }
        out
    }

    fn blit(&mut self, tile: Tile, rgba: &[u8]) {
        let row = tile.width as usize * 4;
        for (r, src) in rgba.chunks_exact(row).enumerate() {
            let y = tile.y0 as usize + r;
            let start = (y * self.width as usize + tile.x0 as usize) * 4;
            self.pixels[start..start + row].copy_from_slice(src);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tile {
    pub x0: u32,
    pub y0: u32,
    pub width: u32,
    pub height: u32,
}

impl Tile {
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Row-major grid of `size × size` tiles; the last row and column are cut
/// short at the image border.
pub fn tile_grid(width: u32, height: u32, size: u32) -> Vec<Tile> {
    let size = size.max(1);
    let mut tiles = Vec::new();
    for y0 in (0..height).step_by(size as usize) {
        for x0 in (0..width).step_by(size as usize) {
            tiles.push(Tile {
                x0,
                y0,
                width: size.min(width - x0),
                height: size.min(height - y0),
            });
        }
    }
    tiles
}

/// True when `tiles` cover every pixel of the image exactly once.
pub fn is_exact_partition(tiles: &[Tile], width: u32, height: u32) -> bool {
    let mut owner = vec![0u8; width as usize * height as usize];
    for t in tiles {
        if t.x0 + t.width > width || t.y0 + t.height > height {
            return false;
        }
        for y in t.y0..t.y0 + t.height {
            for x in t.x0..t.x0 + t.width {
                let cell = &mut owner[y as usize * width as usize + x as usize];
                if *cell != 0 {
                    return false;
                }
                *cell = 1;
            }
        }
    }
    owner.iter().all(|&c| c == 1)
}

/// Gamma-encodes a linear color to 8-bit RGBA with opaque alpha. Non-finite
/// channels encode as 0.
pub fn encode_rgba(c: Rgb) -> [u8; 4] {
    let enc = |v: f64| -> u8 {
        if !v.is_finite() {
            return 0;
        }
        let g = v.clamp(0.0, 1.0).powf(1.0 / GAMMA);
        (g * 255.0 + 0.5).floor() as u8
    };
    [enc(c.x), enc(c.y), enc(c.z), 255]
}

/// Per-pixel statistics gathered while rendering.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenderStats {
    /// Primary rays that hit some instance, row-major.
    pub coverage: Vec<bool>,
    /// Field evaluations spent on primary rays, summed over sub-samples.
    pub primary_steps: Vec<u32>,
    /// Pixels whose linear color was not finite before encoding.
    pub nan_pixels: usize,
}

impl RenderStats {
    pub fn covered_pixels(&self) -> usize {
        self.coverage.iter().filter(|&&c| c).count()
    }
}

#[derive(Default)]
struct PrimaryProbe {
    steps: u32,
    hit: bool,
}

impl TraceProbe for PrimaryProbe {
    fn on_march(&mut self, depth: u32, steps: u32, hit: bool) {
        if depth == 0 {
            self.steps += steps;
            self.hit |= hit;
        }
    }
}

struct PixelResult {
    color: Rgb,
    steps: u32,
    hit: bool,
}

fn render_pixel(basis: &CameraBasis, scene: &SceneConfig, px: u32, py: u32) -> PixelResult {
    let n = scene.render.supersample.max(1);
    let mut probe = PrimaryProbe::default();
    let mut sum = Rgb::ZERO;
    for sy in 0..n {
        for sx in 0..n {
            let fx = f64::from(px) + (f64::from(sx) + 0.5) / f64::from(n);
            let fy = f64::from(py) + (f64::from(sy) + 0.5) / f64::from(n);
            let ray = basis.ray_through(fx, fy);
            sum += trace_radiance(&ray, 0, scene, &mut probe);
        }
    }
    PixelResult {
        color: sum / f64::from(n * n),
        steps: probe.steps,
        hit: probe.hit,
    }
}

struct TileOutput {
    rgba: Vec<u8>,
    steps: Vec<u32>,
    coverage: Vec<bool>,
    nan_pixels: usize,
}

fn render_tile_full(basis: &CameraBasis, scene: &SceneConfig, tile: Tile) -> TileOutput {
    let mut out = TileOutput {
        rgba: Vec::with_capacity(tile.pixel_count() * 4),
        steps: Vec::with_capacity(tile.pixel_count()),
        coverage: Vec::with_capacity(tile.pixel_count()),
        nan_pixels: 0,
    };
    for y in tile.y0..tile.y0 + tile.height {
        for x in tile.x0..tile.x0 + tile.width {
            let px = render_pixel(basis, scene, x, y);
            if !px.color.is_finite() {
                out.nan_pixels += 1;
            }
            out.rgba.extend_from_slice(&encode_rgba(px.color));
            out.steps.push(px.steps);
            out.coverage.push(px.hit);
        }
    }
    out
}

/// RGBA bytes for one tile of the image seen through `basis`. Bytes match
/// the same rectangle of a full [`render_frame`] with that camera.
pub fn render_tile(basis: &CameraBasis, scene: &SceneConfig, tile: Tile) -> Vec<u8> {
    render_tile_full(basis, scene, tile).rgba
}

/// Renders the scene's camera view on `threads` workers.
pub fn render_frame(scene: &SceneConfig, threads: usize) -> Result<Framebuffer, EngineError> {
    render_frame_with_stats(scene, threads).map(|(fb, _)| fb)
}

pub fn render_frame_with_stats(
    scene: &SceneConfig,
    threads: usize,
) -> Result<(Framebuffer, RenderStats), EngineError> {
    if threads == 0 {
        return Err(EngineError::InvalidThreadCount);
    }
    let basis = scene.camera.basis()?;
    let (w, h) = (scene.camera.width, scene.camera.height);
    let tiles = tile_grid(w, h, scene.render.tile_size);
    assert!(
        is_exact_partition(&tiles, w, h),
        "tile grid must partition the image"
    );

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| EngineError::ThreadPool(e.to_string()))?;
    let outputs: Vec<TileOutput> = pool.install(|| {
        tiles
            .par_iter()
            .map(|&tile| render_tile_full(&basis, scene, tile))
            .collect()
    });

    let mut fb = Framebuffer::new(w, h);
    let mut stats = RenderStats {
        coverage: vec![false; (w * h) as usize],
        primary_steps: vec![0; (w * h) as usize],
        nan_pixels: 0,
    };
    for (tile, out) in tiles.iter().zip(outputs) {
        fb.blit(*tile, &out.rgba);
        stats.nan_pixels += out.nan_pixels;
        let mut i = 0;
        for y in tile.y0..tile.y0 + tile.height {
            for x in tile.x0..tile.x0 + tile.width {
                let dst = (y * w + x) as usize;
                stats.coverage[dst] = out.coverage[i];
                stats.primary_steps[dst] = out.steps[i];
                i += 1;
            }
        }
    }
    Ok((fb, stats))
}

/// The scene as it appears in animation frame `k`: iteration count rounded
/// from a linear ramp, Julia constants interpolated along the keyframe path.
pub fn animation_frame_scene(scene: &SceneConfig, anim: &Animation, k: u32) -> SceneConfig {
    let s = if anim.frame_count <= 1 {
        0.0
    } else {
        f64::from(k) / f64::from(anim.frame_count - 1)
    };
    let start = f64::from(anim.iterations_start);
    let end = f64::from(anim.iterations_end);
    let iterations = (start + (end - start) * s).round() as u32;
    let mut out = scene.clone();
    out.set_iterations(iterations);
    if let Some(path) = &anim.c_path {
        let c = sample_path(path, s);
        for inst in &mut out.instances {
            if let Fractal::Julia(j) = &mut inst.fractal {
                j.c = c;
            }
        }
    }
    out
}

/// Piecewise-linear position at `s ∈ [0, 1]` along evenly spaced keyframes.
fn sample_path(path: &[Quaternion], s: f64) -> Quaternion {
    if path.len() == 1 {
        return path[0];
    }
    let x = s.clamp(0.0, 1.0) * (path.len() - 1) as f64;
    let i = (x.floor() as usize).min(path.len() - 2);
    path[i].lerp(path[i + 1], x - i as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Ppm,
    Png,
}

impl ImageFormat {
    /// From the file extension; anything but `.png` is PPM.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("png") => ImageFormat::Png,
            _ => ImageFormat::Ppm,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Ppm => "ppm",
            ImageFormat::Png => "png",
        }
    }
}

/// `dir/stem.ext` becomes `dir/stem_0007.ext` for frame 7.
pub fn frame_path(out: &Path, k: u32) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("frame");
    let ext = ImageFormat::from_path(out).extension();
    out.with_file_name(format!("{stem}_{k:04}.{ext}"))
}

/// Renders every animation frame and writes it next to `out` using
/// [`frame_path`]. Frames already written stay on disk if a later one fails.
pub fn render_animation(
    scene: &SceneConfig,
    out: &Path,
    threads: usize,
) -> Result<Vec<PathBuf>, EngineError> {
    let anim = scene.animation.as_ref().ok_or(EngineError::NoAnimation)?;
    let mut written = Vec::with_capacity(anim.frame_count as usize);
    for k in 0..anim.frame_count {
        let frame = render_frame(&animation_frame_scene(scene, anim, k), threads)?;
        let path = frame_path(out, k);
        save_image(&frame, &path)?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_ppm<W: Write>(fb: &Framebuffer, mut sink: W) -> io::Result<()> {
    write!(sink, "P6\n{} {}\n255\n", fb.width, fb.height)?;
    let rgb: Vec<u8> = fb
        .pixels
        .chunks_exact(4)
        .flat_map(|p| [p[0], p[1], p[2]])
        .collect();
    sink.write_all(&rgb)?;
    sink.flush()
}

pub fn ppm_bytes(fb: &Framebuffer) -> Vec<u8> {
    let mut out = Vec::with_capacity(fb.pixels.len() / 4 * 3 + 20);
    write_ppm(fb, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn write_png<W: Write>(fb: &Framebuffer, sink: W) -> Result<(), EngineError> {
    let mut encoder = png::Encoder::new(sink, fb.width, fb.height);
    encoder.set_color(png::ColorType::Rgba);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(&fb.pixels)?;
    writer.finish()?;
    Ok(())
}

/// Writes PPM or PNG depending on the extension of `path`.
pub fn save_image(fb: &Framebuffer, path: &Path) -> Result<(), EngineError> {
    let io_err = |source| EngineError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut sink = BufWriter::new(file);
    match ImageFormat::from_path(path) {
        ImageFormat::Ppm => write_ppm(fb, &mut sink).map_err(io_err)?,
        ImageFormat::Png => {
            write_png(fb, &mut sink)?;
            sink.flush().map_err(io_err)?;
        }
    }
    Ok(())
}
