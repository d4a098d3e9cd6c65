//! Scene description: placed fractal instances, camera, shading and
//! animation settings, loaded from and saved to TOML.
//!
//! The file format is documented in `docs/scene-format.md` at the repository
//! root. Loading goes through [`SceneDocument`], a plain serde mirror of the
//! file, and then [`SceneDocument::into_config`], which applies defaults and
//! checks every invariant. Saving goes the other way with every default
//! spelled out, so a saved scene reloads to the same configuration.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{
    Fractal, JuliaParams, MandelbulbParams, DEFAULT_ESCAPE_RADIUS_SQ, DEFAULT_JULIA_DEGREE,
    DEFAULT_JULIA_ITERATIONS, DEFAULT_MANDELBULB_ITERATIONS, DEFAULT_MANDELBULB_POWER,
};
use crate::marcher::{CutPlane, MarchConfig, Ray};
use crate::quat::{Quaternion, Vec3};
use crate::shading::{BulbPalette, JuliaPalette, ShadingOverrides, ShadingParams};
use crate::transform::Affine3;

pub const SCHEMA_VERSION: u32 = 1;
/// Hard cap for any iteration count, including animation endpoints.
pub const MAX_ITERATIONS: u32 = 100_000;
pub const MAX_IMAGE_SIDE: u32 = 16_384;
pub const MAX_RECURSION_LIMIT: u32 = 16;
pub const MAX_SUPERSAMPLE: u32 = 8;
pub const DEFAULT_TILE_SIZE: u32 = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error("transform of `{path}` is singular")]
    SingularTransform { path: String },
    #[error("camera up vector is parallel to the view direction")]
    DegenerateBasis,
}

impl SceneError {
    fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        SceneError::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Dotted path of the offending field, when there is one.
    pub fn path(&self) -> Option<&str> {
        match self {
            SceneError::Validation { path, .. } | SceneError::SingularTransform { path } => {
                Some(path)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    pub target: Vec3,
    pub up: Vec3,
    /// Degrees.
    pub vertical_fov: f64,
    pub width: u32,
    pub height: u32,
}

/// Orthonormal right-handed camera frame with the image-plane half extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraBasis {
    pub origin: Vec3,
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub half_width: f64,
    pub half_height: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn basis(&self) -> Result<CameraBasis, SceneError> {
        let forward = (self.target - self.position)
            .try_normalize()
            .ok_or_else(|| SceneError::invalid("camera.target", "coincides with position"))?;
        let right = forward
            .cross(self.up)
            .try_normalize()
            .filter(|r| forward.cross(self.up).length() > 1e-9 * self.up.length() && r.is_finite())
            .ok_or(SceneError::DegenerateBasis)?;
        let up = right.cross(forward);
        let half_height = (self.vertical_fov.to_radians() * 0.5).tan();
        let half_width = half_height * f64::from(self.width) / f64::from(self.height);
        Ok(CameraBasis {
            origin: self.position,
            forward,
            right,
            up,
            half_width,
            half_height,
            width: self.width,
            height: self.height,
        })
    }
}

impl CameraBasis {
    /// Ray through continuous image coordinates; `(px + 0.5, py + 0.5)` is the
    /// center of pixel `(px, py)`, origin at the top-left.
    #[inline]
    pub fn ray_through(&self, fx: f64, fy: f64) -> Ray {
        let u = (fx / f64::from(self.width)) * 2.0 - 1.0;
        let v = 1.0 - (fy / f64::from(self.height)) * 2.0;
        let dir =
            self.forward + self.right * (u * self.half_width) + self.up * (v * self.half_height);
        Ray::new(self.origin, dir)
    }
}

/// Pinhole ray through the center of pixel `(px, py)`.
pub fn generate_primary_ray(camera: &Camera, px: u32, py: u32) -> Result<Ray, SceneError> {
    if px >= camera.width || py >= camera.height {
        return Err(SceneError::invalid(
            "pixel",
            format!("({px}, {py}) outside {}x{}", camera.width, camera.height),
        ));
    }
    Ok(camera
        .basis()?
        .ray_through(f64::from(px) + 0.5, f64::from(py) + 0.5))
}

/// How an instance's object-to-world transform was written in the file.
#[derive(Debug, Clone, PartialEq)]
pub enum TransformSpec {
    /// `translate · rotate(x, then y, then z; degrees) · scale`.
    Components {
        translate: Vec3,
        rotate_deg: Vec3,
        scale: Vec3,
    },
    Matrix([[f64; 4]; 3]),
}

impl Default for TransformSpec {
    fn default() -> Self {
        TransformSpec::Components {
            translate: Vec3::ZERO,
            rotate_deg: Vec3::ZERO,
            scale: Vec3::splat(1.0),
        }
    }
}

impl TransformSpec {
    pub fn to_affine(&self) -> Affine3 {
        match self {
            TransformSpec::Components {
                translate,
                rotate_deg,
                scale,
            } => {
                let radians = Vec3::new(
                    rotate_deg.x.to_radians(),
                    rotate_deg.y.to_radians(),
                    rotate_deg.z.to_radians(),
                );
                Affine3::translation(*translate)
                    .then_after(&Affine3::rotation_xyz(radians))
                    .then_after(&Affine3::scale(*scale))
            }
            TransformSpec::Matrix(rows) => Affine3::from_rows(*rows),
        }
    }
}

/// A fractal placed in the world with its own marching settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub fractal: Fractal,
    pub transform: TransformSpec,
    pub march: MarchConfig,
    pub shading: ShadingOverrides,
    object_to_world: Affine3,
    world_to_object: Affine3,
    world_scale: f64,
}

impl Instance {
    pub fn new(
        fractal: Fractal,
        transform: TransformSpec,
        march: MarchConfig,
        shading: ShadingOverrides,
    ) -> Result<Self, SceneError> {
        let object_to_world = transform.to_affine();
        let world_to_object =
            object_to_world
                .inverse()
                .ok_or_else(|| SceneError::SingularTransform {
                    path: "transform".into(),
                })?;
        let world_scale = (0..3)
            .map(|c| {
                Vec3::new(
                    object_to_world.linear[0][c],
                    object_to_world.linear[1][c],
                    object_to_world.linear[2][c],
                )
                .length()
            })
            .fold(0.0, f64::max);
        Ok(Self {
            fractal,
            transform,
            march,
            shading,
            object_to_world,
            world_to_object,
            world_scale,
        })
    }

    /// Untransformed instance with the default marching settings for its kind.
    pub fn at_origin(fractal: Fractal) -> Self {
        let march = match fractal {
            Fractal::Julia(_) => MarchConfig::default(),
            Fractal::Mandelbulb(_) => MarchConfig::for_mandelbulb(),
        };
        Self::new(
            fractal,
            TransformSpec::default(),
            march,
            ShadingOverrides::default(),
        )
        .expect("identity transform is invertible")
    }

    pub fn object_to_world(&self) -> &Affine3 {
        &self.object_to_world
    }

    pub fn world_to_object(&self) -> &Affine3 {
        &self.world_to_object
    }

    /// Largest stretch the object-to-world map applies to any axis.
    pub fn world_scale(&self) -> f64 {
        self.world_scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSettings {
    pub tile_size: u32,
    /// N for an N×N grid of samples per pixel.
    pub supersample: u32,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            tile_size: DEFAULT_TILE_SIZE,
            supersample: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Animation {
    pub frame_count: u32,
    pub iterations_start: u32,
    pub iterations_end: u32,
    /// Keyframes for the Julia constant, spaced evenly over the animation.
    pub c_path: Option<Vec<Quaternion>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub camera: Camera,
    pub render: RenderSettings,
    pub shading: ShadingParams,
    pub instances: Vec<Instance>,
    pub animation: Option<Animation>,
}

impl SceneConfig {
    pub fn to_document(&self) -> SceneDocument {
        SceneDocument::from_config(self)
    }

    /// Canonical TOML with every field written out.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_document()).expect("scene documents always serialize")
    }

    /// Re-runs every check `load_scene` performs.
    pub fn validate(&self) -> Result<(), SceneError> {
        self.to_document().into_config().map(|_| ())
    }

    /// Overrides `max_iterations` on every instance.
    pub fn set_iterations(&mut self, iterations: u32) {
        for inst in &mut self.instances {
            inst.fractal.set_max_iterations(iterations);
        }
    }
}

/// Parses and validates a scene document.
pub fn load_scene(text: &str) -> Result<SceneConfig, SceneError> {
    let doc: SceneDocument = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|span| line_column(text, span))
            .unwrap_or((0, 0));
        SceneError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    doc.into_config()
}

/// 1-based line and column of the span start.
fn line_column(text: &str, span: Range<usize>) -> (usize, usize) {
    let start = span.start.min(text.len());
    let before = &text[..start];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

// ---------------------------------------------------------------------------
// File mirror
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    pub schema: u32,
    pub camera: CameraDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render: Option<RenderDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shading: Option<ShadingDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub animation: Option<AnimationDoc>,
    #[serde(default, rename = "instance", skip_serializing_if = "Vec::is_empty")]
    pub instances: Vec<InstanceDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraDoc {
    pub position: [f64; 3],
    pub target: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub up: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tile_size: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersample: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadingDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflectance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_recursion_depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub light_direction: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub light_color: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_top: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_bottom: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub albedo_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth_boost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specular_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub julia_base: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub julia_tip: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub julia_falloff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bulb_colors: Option<[[f64; 3]; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnimationDoc {
    pub frames: u32,
    pub iterations_start: u32,
    pub iterations_end: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_path: Option<Vec<[f64; 4]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FractalKind {
    Julia,
    Mandelbulb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub kind: FractalKind,
    /// Julia constant as `[real, i, j, k]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escape_radius_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub march: Option<MarchDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shading: Option<ShadingOverridesDoc>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translate: Option<[f64; 3]>,
    /// Degrees about x, then y, then z.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotate: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<ScaleDoc>,
    /// Three rows of `[a, b, c, t]`; excludes the other keys.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<[[f64; 4]; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleDoc {
    Uniform(f64),
    PerAxis([f64; 3]),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarchDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precis: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_clamp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounding_radius: Option<f64>,
    #[serde(default, rename = "cut_plane", skip_serializing_if = "Vec::is_empty")]
    pub cut_planes: Vec<CutPlaneDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutPlaneDoc {
    pub point: [f64; 3],
    /// Points into the removed half-space.
    pub normal: [f64; 3],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadingOverridesDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflectance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub albedo_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth_boost: Option<f64>,
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

fn finite(path: &str, v: f64) -> Result<f64, SceneError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SceneError::invalid(path, "must be finite"))
    }
}

fn vec3(path: &str, a: [f64; 3]) -> Result<Vec3, SceneError> {
    for v in a {
        finite(path, v)?;
    }
    Ok(Vec3::from_array(a))
}

fn color(path: &str, a: [f64; 3]) -> Result<Vec3, SceneError> {
    let c = vec3(path, a)?;
    if a.iter().any(|&v| v < 0.0) {
        return Err(SceneError::invalid(
            path,
            "color channels must be non-negative",
        ));
    }
    Ok(c)
}

fn unit(path: &str, a: [f64; 3]) -> Result<Vec3, SceneError> {
    vec3(path, a)?
        .try_normalize()
        .ok_or_else(|| SceneError::invalid(path, "must be a non-zero vector"))
}

fn positive(path: &str, v: f64) -> Result<f64, SceneError> {
    if finite(path, v)? > 0.0 {
        Ok(v)
    } else {
        Err(SceneError::invalid(path, "must be > 0"))
    }
}

fn in_range(path: &str, v: u32, lo: u32, hi: u32) -> Result<u32, SceneError> {
    if (lo..=hi).contains(&v) {
        Ok(v)
    } else {
        Err(SceneError::invalid(
            path,
            format!("{v} not in [{lo}, {hi}]"),
        ))
    }
}

impl SceneDocument {
    pub fn into_config(&self) -> Result<SceneConfig, SceneError> {
        if self.schema != SCHEMA_VERSION {
            return Err(SceneError::invalid(
                "schema",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema
                ),
            ));
        }
        let camera = self.camera.validate()?;
        let render = self.render.clone().unwrap_or_default().validate()?;
        let shading = self.shading.clone().unwrap_or_default().validate()?;
        let instances = self
            .instances
            .iter()
            .enumerate()
            .map(|(i, inst)| inst.validate(&format!("instance[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let animation = self
            .animation
            .as_ref()
            .map(AnimationDoc::validate)
            .transpose()?;
        Ok(SceneConfig {
            camera,
            render,
            shading,
            instances,
            animation,
        })
    }

    pub fn from_config(config: &SceneConfig) -> Self {
        let cam = &config.camera;
        let sh = &config.shading;
        SceneDocument {
            schema: SCHEMA_VERSION,
            camera: CameraDoc {
                position: cam.position.to_array(),
                target: cam.target.to_array(),
                up: Some(cam.up.to_array()),
                fov: Some(cam.vertical_fov),
                width: Some(cam.width),
                height: Some(cam.height),
            },
            render: Some(RenderDoc {
                tile_size: Some(config.render.tile_size),
                supersample: Some(config.render.supersample),
            }),
            shading: Some(ShadingDoc {
                reflectance: Some(sh.reflectance),
                max_recursion_depth: Some(sh.max_recursion_depth),
                light_direction: Some(sh.light_direction.to_array()),
                light_color: Some(sh.light_color.to_array()),
                ambient: Some(sh.ambient.to_array()),
                background_top: Some(sh.background_top.to_array()),
                background_bottom: Some(sh.background_bottom.to_array()),
                albedo_scale: Some(sh.albedo_scale),
                max_depth_boost: Some(sh.max_depth_boost),
                specular_exponent: Some(sh.specular_exponent),
                julia_base: Some(sh.julia_palette.base.to_array()),
                julia_tip: Some(sh.julia_palette.tip.to_array()),
                julia_falloff: Some(sh.julia_palette.falloff),
                bulb_colors: Some(sh.bulb_palette.colors.map(Vec3::to_array)),
            }),
            animation: config.animation.as_ref().map(|a| AnimationDoc {
                frames: a.frame_count,
                iterations_start: a.iterations_start,
                iterations_end: a.iterations_end,
                c_path: a
                    .c_path
                    .as_ref()
                    .map(|path| path.iter().map(|q| q.to_array()).collect()),
            }),
            instances: config
                .instances
                .iter()
                .map(InstanceDoc::from_instance)
                .collect(),
        }
    }
}

impl CameraDoc {
    fn validate(&self) -> Result<Camera, SceneError> {
        let position = vec3("camera.position", self.position)?;
        let target = vec3("camera.target", self.target)?;
        if position == target {
            return Err(SceneError::invalid(
                "camera.target",
                "coincides with position",
            ));
        }
        let up = vec3("camera.up", self.up.unwrap_or([0.0, 1.0, 0.0]))?;
        let vertical_fov = finite("camera.fov", self.fov.unwrap_or(60.0))?;
        if !(vertical_fov > 0.0 && vertical_fov < 180.0) {
            return Err(SceneError::invalid(
                "camera.fov",
                "must be in (0, 180) degrees",
            ));
        }
        let width = in_range("camera.width", self.width.unwrap_or(512), 1, MAX_IMAGE_SIDE)?;
        let height = in_range(
            "camera.height",
            self.height.unwrap_or(512),
            1,
            MAX_IMAGE_SIDE,
        )?;
        let camera = Camera {
            position,
            target,
            up,
            vertical_fov,
            width,
            height,
        };
        camera.basis()?;
        Ok(camera)
    }
}

impl RenderDoc {
    fn validate(&self) -> Result<RenderSettings, SceneError> {
        Ok(RenderSettings {
            tile_size: in_range(
                "render.tile_size",
                self.tile_size.unwrap_or(DEFAULT_TILE_SIZE),
                1,
                4096,
            )?,
            supersample: in_range(
                "render.supersample",
                self.supersample.unwrap_or(1),
                1,
                MAX_SUPERSAMPLE,
            )?,
        })
    }
}

impl ShadingDoc {
    fn validate(&self) -> Result<ShadingParams, SceneError> {
        let d = ShadingParams::default();
        let reflectance = finite(
            "shading.reflectance",
            self.reflectance.unwrap_or(d.reflectance),
        )?;
        if !(0.0..=1.0).contains(&reflectance) {
            return Err(SceneError::invalid(
                "shading.reflectance",
                "must be in [0, 1]",
            ));
        }
        let max_recursion_depth = in_range(
            "shading.max_recursion_depth",
            self.max_recursion_depth.unwrap_or(d.max_recursion_depth),
            1,
            MAX_RECURSION_LIMIT,
        )?;
        let or3 = |v: Option<[f64; 3]>, dv: Vec3| v.unwrap_or(dv.to_array());
        let falloff = positive(
            "shading.julia_falloff",
            self.julia_falloff.unwrap_or(d.julia_palette.falloff),
        )?;
        let bulb = self
            .bulb_colors
            .unwrap_or(d.bulb_palette.colors.map(Vec3::to_array));
        let mut colors = [Vec3::ZERO; 3];
        for (i, c) in bulb.into_iter().enumerate() {
            colors[i] = color(&format!("shading.bulb_colors[{i}]"), c)?;
        }
        Ok(ShadingParams {
            reflectance,
            max_recursion_depth,
            light_direction: unit(
                "shading.light_direction",
                or3(self.light_direction, d.light_direction),
            )?,
            light_color: color("shading.light_color", or3(self.light_color, d.light_color))?,
            ambient: color("shading.ambient", or3(self.ambient, d.ambient))?,
            background_top: color(
                "shading.background_top",
                or3(self.background_top, d.background_top),
            )?,
            background_bottom: color(
                "shading.background_bottom",
                or3(self.background_bottom, d.background_bottom),
            )?,
            albedo_scale: positive(
                "shading.albedo_scale",
                self.albedo_scale.unwrap_or(d.albedo_scale),
            )?,
            max_depth_boost: finite(
                "shading.max_depth_boost",
                self.max_depth_boost.unwrap_or(d.max_depth_boost),
            )?,
            specular_exponent: positive(
                "shading.specular_exponent",
                self.specular_exponent.unwrap_or(d.specular_exponent),
            )?,
            julia_palette: JuliaPalette {
                base: color(
                    "shading.julia_base",
                    or3(self.julia_base, d.julia_palette.base),
                )?,
                tip: color(
                    "shading.julia_tip",
                    or3(self.julia_tip, d.julia_palette.tip),
                )?,
                falloff,
            },
            bulb_palette: BulbPalette { colors },
        })
    }
}

impl AnimationDoc {
    fn validate(&self) -> Result<Animation, SceneError> {
        if self.frames < 1 {
            return Err(SceneError::invalid("animation.frames", "must be >= 1"));
        }
        let iterations_start = in_range(
            "animation.iterations_start",
            self.iterations_start,
            1,
            MAX_ITERATIONS,
        )?;
        let iterations_end = in_range(
            "animation.iterations_end",
            self.iterations_end,
            1,
            MAX_ITERATIONS,
        )?;
        let c_path = match &self.c_path {
            None => None,
            Some(path) if path.is_empty() => {
                return Err(SceneError::invalid(
                    "animation.c_path",
                    "needs at least one keyframe",
                ))
            }
            Some(path) => Some(
                path.iter()
                    .enumerate()
                    .map(|(i, c)| {
                        for v in c {
                            finite(&format!("animation.c_path[{i}]"), *v)?;
                        }
                        Ok(Quaternion::from_array(*c))
                    })
                    .collect::<Result<Vec<_>, SceneError>>()?,
            ),
        };
        Ok(Animation {
            frame_count: self.frames,
            iterations_start,
            iterations_end,
            c_path,
        })
    }
}

impl InstanceDoc {
    fn validate(&self, path: &str) -> Result<Instance, SceneError> {
        let p = |field: &str| format!("{path}.{field}");
        let escape_radius_sq = finite(
            &p("escape_radius_sq"),
            self.escape_radius_sq.unwrap_or(DEFAULT_ESCAPE_RADIUS_SQ),
        )?;
        if escape_radius_sq <= 1.0 {
            return Err(SceneError::invalid(p("escape_radius_sq"), "must be > 1"));
        }
        let fractal = match self.kind {
            FractalKind::Julia => {
                if self.power.is_some() {
                    return Err(SceneError::invalid(
                        p("power"),
                        "only applies to mandelbulb",
                    ));
                }
                let degree = self.degree.unwrap_or(DEFAULT_JULIA_DEGREE);
                if degree != 2 && degree != 3 {
                    return Err(SceneError::invalid(
                        p("degree"),
                        format!("{degree} not in {{2, 3}}"),
                    ));
                }
                let c = self.c.unwrap_or([0.0; 4]);
                for v in c {
                    finite(&p("c"), v)?;
                }
                Fractal::Julia(JuliaParams {
                    c: Quaternion::from_array(c),
                    degree,
                    max_iterations: in_range(
                        &p("iterations"),
                        self.iterations.unwrap_or(DEFAULT_JULIA_ITERATIONS),
                        1,
                        MAX_ITERATIONS,
                    )?,
                    escape_radius_sq,
                })
            }
            FractalKind::Mandelbulb => {
                if self.degree.is_some() {
                    return Err(SceneError::invalid(p("degree"), "only applies to julia"));
                }
                if self.c.is_some() {
                    return Err(SceneError::invalid(p("c"), "only applies to julia"));
                }
                Fractal::Mandelbulb(MandelbulbParams {
                    power: in_range(
                        &p("power"),
                        self.power.unwrap_or(DEFAULT_MANDELBULB_POWER),
                        2,
                        32,
                    )?,
                    max_iterations: in_range(
                        &p("iterations"),
                        self.iterations.unwrap_or(DEFAULT_MANDELBULB_ITERATIONS),
                        1,
                        MAX_ITERATIONS,
                    )?,
                    escape_radius_sq,
                })
            }
        };
        let transform = self
            .transform
            .clone()
            .unwrap_or_default()
            .validate(&p("transform"))?;
        let march = self
            .march
            .clone()
            .unwrap_or_default()
            .validate(&p("march"), self.kind)?;
        let shading = self
            .shading
            .clone()
            .unwrap_or_default()
            .validate(&p("shading"))?;
        Instance::new(fractal, transform, march, shading).map_err(|e| match e {
            SceneError::SingularTransform { .. } => SceneError::SingularTransform {
                path: p("transform"),
            },
            other => other,
        })
    }

    fn from_instance(inst: &Instance) -> Self {
        let (kind, c, degree, power, iterations, escape_radius_sq) = match inst.fractal {
            Fractal::Julia(j) => (
                FractalKind::Julia,
                Some(j.c.to_array()),
                Some(j.degree),
                None,
                j.max_iterations,
                j.escape_radius_sq,
            ),
            Fractal::Mandelbulb(m) => (
                FractalKind::Mandelbulb,
                None,
                None,
                Some(m.power),
                m.max_iterations,
                m.escape_radius_sq,
            ),
        };
        let transform = match &inst.transform {
            TransformSpec::Components {
                translate,
                rotate_deg,
                scale,
            } => TransformDoc {
                translate: Some(translate.to_array()),
                rotate: Some(rotate_deg.to_array()),
                scale: Some(ScaleDoc::PerAxis(scale.to_array())),
                matrix: None,
            },
            TransformSpec::Matrix(rows) => TransformDoc {
                matrix: Some(*rows),
                ..TransformDoc::default()
            },
        };
        let m = &inst.march;
        InstanceDoc {
            kind,
            c,
            degree,
            power,
            iterations: Some(iterations),
            escape_radius_sq: Some(escape_radius_sq),
            transform: Some(transform),
            march: Some(MarchDoc {
                precis: Some(m.precis),
                t_max: Some(m.t_max),
                max_steps: Some(m.max_steps),
                step_clamp: Some(m.step_clamp),
                bounding_radius: Some(m.bounding_radius),
                cut_planes: m
                    .cut_planes
                    .iter()
                    .map(|cp| CutPlaneDoc {
                        point: cp.point.to_array(),
                        normal: cp.normal.to_array(),
                    })
                    .collect(),
            }),
            shading: (!inst.shading.is_empty()).then_some(ShadingOverridesDoc {
                reflectance: inst.shading.reflectance,
                albedo_scale: inst.shading.albedo_scale,
                max_depth_boost: inst.shading.max_depth_boost,
            }),
        }
    }
}

impl TransformDoc {
    fn validate(&self, path: &str) -> Result<TransformSpec, SceneError> {
        if let Some(rows) = self.matrix {
            if self.translate.is_some() || self.rotate.is_some() || self.scale.is_some() {
                return Err(SceneError::invalid(
                    format!("{path}.matrix"),
                    "cannot be combined with translate/rotate/scale",
                ));
            }
            for v in rows.iter().flatten() {
                finite(&format!("{path}.matrix"), *v)?;
            }
            return Ok(TransformSpec::Matrix(rows));
        }
        let scale = match self.scale {
            None => Vec3::splat(1.0),
            Some(ScaleDoc::Uniform(s)) => Vec3::splat(finite(&format!("{path}.scale"), s)?),
            Some(ScaleDoc::PerAxis(a)) => vec3(&format!("{path}.scale"), a)?,
        };
        Ok(TransformSpec::Components {
            translate: vec3(
                &format!("{path}.translate"),
                self.translate.unwrap_or([0.0; 3]),
            )?,
            rotate_deg: vec3(&format!("{path}.rotate"), self.rotate.unwrap_or([0.0; 3]))?,
            scale,
        })
    }
}

impl MarchDoc {
    fn validate(&self, path: &str, kind: FractalKind) -> Result<MarchConfig, SceneError> {
        let d = match kind {
            FractalKind::Julia => MarchConfig::default(),
            FractalKind::Mandelbulb => MarchConfig::for_mandelbulb(),
        };
        let p = |field: &str| format!("{path}.{field}");
        let precis = positive(&p("precis"), self.precis.unwrap_or(d.precis))?;
        let t_max = finite(&p("t_max"), self.t_max.unwrap_or(d.t_max))?;
        if t_max <= precis {
            return Err(SceneError::invalid(p("t_max"), "must exceed precis"));
        }
        let cut_planes = self
            .cut_planes
            .iter()
            .enumerate()
            .map(|(i, cp)| {
                let base = format!("{path}.cut_plane[{i}]");
                Ok(CutPlane {
                    point: vec3(&format!("{base}.point"), cp.point)?,
                    normal: unit(&format!("{base}.normal"), cp.normal)?,
                })
            })
            .collect::<Result<Vec<_>, SceneError>>()?;
        Ok(MarchConfig {
            precis,
            t_max,
            max_steps: in_range(
                &p("max_steps"),
                self.max_steps.unwrap_or(d.max_steps),
                1,
                1_000_000,
            )?,
            step_clamp: positive(&p("step_clamp"), self.step_clamp.unwrap_or(d.step_clamp))?,
            bounding_radius: positive(
                &p("bounding_radius"),
                self.bounding_radius.unwrap_or(d.bounding_radius),
            )?,
            cut_planes,
        })
    }
}

impl ShadingOverridesDoc {
    fn validate(&self, path: &str) -> Result<ShadingOverrides, SceneError> {
        if let Some(r) = self.reflectance {
            if !(0.0..=1.0).contains(&finite(&format!("{path}.reflectance"), r)?) {
                return Err(SceneError::invalid(
                    format!("{path}.reflectance"),
                    "must be in [0, 1]",
                ));
            }
        }
        if let Some(s) = self.albedo_scale {
            positive(&format!("{path}.albedo_scale"), s)?;
        }
        if let Some(b) = self.max_depth_boost {
            finite(&format!("{path}.max_depth_boost"), b)?;
        }
        Ok(ShadingOverrides {
            reflectance: self.reflectance,
            albedo_scale: self.albedo_scale,
            max_depth_boost: self.max_depth_boost,
        })
    }
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

pub const PRESET_NAMES: [&str; 4] = ["julia-c0", "julia-cut", "mandelbulb8", "combo"];

pub fn preset_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "julia-c0" => include_str!("../presets/julia-c0.toml"),
        "julia-cut" => include_str!("../presets/julia-cut.toml"),
        "mandelbulb8" => include_str!("../presets/mandelbulb8.toml"),
        "combo" => include_str!("../presets/combo.toml"),
        _ => return None,
    })
}

/// A built-in scene by name.
pub fn preset(name: &str) -> Option<SceneConfig> {
    preset_source(name).map(|src| load_scene(src).expect("built-in presets are valid"))
}
