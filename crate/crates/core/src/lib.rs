//! Distance-estimated ray marching of quaternion Julia sets and the
//! Mandelbulb.
//!
//! Layering, bottom up: [`quat`] (vector, quaternion and triplex math),
//! [`estimators`] (distance fields and normals), [`marcher`] (sphere tracing
//! against placed instances), [`shading`] (Phong, Fresnel and recursive
//! reflections), [`scene`] (configuration and presets) and [`engine`]
//! (parallel frame rendering and image output).

pub mod engine;
pub mod estimators;
pub mod marcher;
pub mod quat;
pub mod scene;
pub mod shading;
pub mod transform;

pub use engine::{render_frame, Framebuffer, Tile};
pub use estimators::{julia_distance, mandelbulb_distance, DistanceField, Fractal};
pub use quat::{Quaternion, Vec3};
pub use scene::{load_scene, preset, SceneConfig, SceneError};
