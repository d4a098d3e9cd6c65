//! Surface shading: Phong lighting, Schlick Fresnel and one recursive
//! mirror-reflection lobe, with albedo taken from the estimators' auxiliary
//! output.

use crate::estimators::{Aux, Fractal};
use crate::marcher::{intersect_instance_counted, HitInfo, Ray};
use crate::quat::Vec3;
use crate::scene::{Instance, SceneConfig};

/// Linear RGB.
pub type Rgb = Vec3;

pub const DEFAULT_REFLECTANCE: f64 = 0.1;
pub const DEFAULT_MAX_RECURSION_DEPTH: u32 = 3;
pub const DEFAULT_ALBEDO_SCALE: f64 = 3.5;
pub const DEFAULT_MAX_DEPTH_BOOST: f64 = 1.65;
pub const DEFAULT_SPECULAR_EXPONENT: f64 = 32.0;
/// Display gamma applied when encoding to 8 bits.
pub const GAMMA: f64 = 2.2;

/// Two-color ramp keyed on the Julia iteration count:
/// `mix(base, tip, 1 − exp(−n / falloff))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JuliaPalette {
    pub base: Rgb,
    pub tip: Rgb,
    pub falloff: f64,
}

impl Default for JuliaPalette {
    fn default() -> Self {
        Self {
            base: Rgb::new(0.02, 0.05, 0.14),
            tip: Rgb::new(0.26, 0.16, 0.07),
            falloff: 6.0,
        }
    }
}

/// Three colors blended by the Mandelbulb orbit trap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BulbPalette {
    pub colors: [Rgb; 3],
}

impl Default for BulbPalette {
    fn default() -> Self {
        Self {
            colors: [
                Rgb::new(0.01, 0.01, 0.01),
                Rgb::new(0.10, 0.20, 0.30),
                Rgb::new(0.30, 0.10, 0.02),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShadingParams {
    pub reflectance: f64,
    pub max_recursion_depth: u32,
    /// Unit vector pointing toward the light.
    pub light_direction: Vec3,
    pub light_color: Rgb,
    pub ambient: Rgb,
    pub background_top: Rgb,
    pub background_bottom: Rgb,
    pub albedo_scale: f64,
    pub max_depth_boost: f64,
    pub specular_exponent: f64,
    pub julia_palette: JuliaPalette,
    pub bulb_palette: BulbPalette,
}

impl Default for ShadingParams {
    fn default() -> Self {
        Self {
            reflectance: DEFAULT_REFLECTANCE,
            max_recursion_depth: DEFAULT_MAX_RECURSION_DEPTH,
            light_direction: Vec3::new(0.577, 0.577, -0.577).normalize(),
            light_color: Rgb::new(1.0, 0.96, 0.9),
            ambient: Rgb::new(0.12, 0.12, 0.14),
            background_top: Rgb::new(0.32, 0.42, 0.58),
            background_bottom: Rgb::new(0.03, 0.03, 0.05),
            albedo_scale: DEFAULT_ALBEDO_SCALE,
            max_depth_boost: DEFAULT_MAX_DEPTH_BOOST,
            specular_exponent: DEFAULT_SPECULAR_EXPONENT,
            julia_palette: JuliaPalette::default(),
            bulb_palette: BulbPalette::default(),
        }
    }
}

/// Per-instance replacements for a few global shading constants.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShadingOverrides {
    pub reflectance: Option<f64>,
    pub albedo_scale: Option<f64>,
    pub max_depth_boost: Option<f64>,
}

impl ShadingOverrides {
    pub fn is_empty(&self) -> bool {
        self.reflectance.is_none() && self.albedo_scale.is_none() && self.max_depth_boost.is_none()
    }

    pub fn apply(&self, params: &ShadingParams) -> ShadingParams {
        ShadingParams {
            reflectance: self.reflectance.unwrap_or(params.reflectance),
            albedo_scale: self.albedo_scale.unwrap_or(params.albedo_scale),
            max_depth_boost: self.max_depth_boost.unwrap_or(params.max_depth_boost),
            ..params.clone()
        }
    }
}

/// Color carried by a radiance ray, plus how deep in the reflection chain it is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiancePayload {
    pub color: Rgb,
    pub recursion_depth: u32,
}

/// Observes the recursion; the engine uses it for statistics and tests use it
/// to check bounds.
pub trait TraceProbe {
    fn on_trace(&mut self, _depth: u32) {}
    fn on_march(&mut self, _depth: u32, _steps: u32, _hit: bool) {}
}

pub struct NoProbe;

impl TraceProbe for NoProbe {}

/// `f0 + (1 − f0)·(1 − cosθ)⁵` with `cosθ = clamp(⟨−incident, normal⟩, 0, 1)`.
pub fn schlick_fresnel(incident: Vec3, normal: Vec3, f0: Rgb) -> Rgb {
    let cos = (-incident).dot(normal).clamp(0.0, 1.0);
    let k = (1.0 - cos).powi(5);
    f0 + (Rgb::splat(1.0) - f0) * k
}

/// Ambient plus one directional light, diffuse and specular:
/// `ambient·albedo + max(⟨n,l⟩,0)·albedo·light + max(⟨r,v⟩,0)^e·light` with
/// `r` the mirror of `−l` about `n` and `v` pointing toward the viewer.
pub fn phong(albedo: Rgb, normal: Vec3, view_dir: Vec3, params: &ShadingParams) -> Rgb {
    let l = params.light_direction;
    let diffuse = normal.dot(l).max(0.0);
    let r = (-l).reflect(normal);
    let spec = r.dot(view_dir).max(0.0).powf(params.specular_exponent);
    let c = params.ambient.mul_elem(albedo)
        + albedo.mul_elem(params.light_color) * diffuse
        + params.light_color * spec;
    Rgb::new(c.x.max(0.0), c.y.max(0.0), c.z.max(0.0))
}

/// Palette color for a Julia hit at the given recursion depth. The hit one
/// level above the recursion limit gets `max_depth_boost` added to every
/// channel.
pub fn julia_albedo(aux: &Aux, depth: u32, params: &ShadingParams) -> Rgb {
    let pal = &params.julia_palette;
    let n = aux[0].max(0.0);
    let s = 1.0 - (-n / pal.falloff).exp();
    let mut albedo = pal.base.lerp(pal.tip, s) * params.albedo_scale;
    if depth + 1 == params.max_recursion_depth {
        albedo += Rgb::splat(params.max_depth_boost);
    }
    albedo
}

/// Orbit-trap coloring: start at `colors[0]`, blend toward `colors[1]` by
/// `clamp(trap.y)` and then toward `colors[2]` by `clamp(trap.z)`; finally
/// dim by up to half as `clamp(trap.w)` grows.
pub fn mandelbulb_albedo(aux: &Aux, params: &ShadingParams) -> Rgb {
    let [c0, c1, c2] = params.bulb_palette.colors;
    let wy = aux[1].clamp(0.0, 1.0);
    let wz = aux[2].clamp(0.0, 1.0);
    let ww = aux[3].clamp(0.0, 1.0);
    let c = c0.lerp(c1, wy).lerp(c2, wz) * (1.0 - 0.5 * ww);
    c * params.albedo_scale
}

/// Vertical gradient from `background_bottom` (looking down) to
/// `background_top` (looking up).
pub fn background(dir: Vec3, params: &ShadingParams) -> Rgb {
    let t = 0.5 * (dir.y.clamp(-1.0, 1.0) + 1.0);
    params.background_bottom.lerp(params.background_top, t)
}

/// Nearest hit over all instances, as `(instance index, world-space hit)`.
pub fn closest_hit<P: TraceProbe>(
    ray: &Ray,
    instances: &[Instance],
    depth: u32,
    probe: &mut P,
) -> Option<(usize, HitInfo)> {
    let mut best: Option<(usize, HitInfo)> = None;
    let mut closest = f64::INFINITY;
    let mut steps = 0;
    for (i, instance) in instances.iter().enumerate() {
        let outcome = intersect_instance_counted(ray, instance, closest);
        steps += outcome.steps;
        if let Some(hit) = outcome.hit {
            closest = hit.t;
            best = Some((i, hit));
        }
    }
    probe.on_march(depth, steps, best.is_some());
    best
}

/// Radiance arriving along `ray`, `depth` reflections deep.
pub fn trace_radiance<P: TraceProbe>(
    ray: &Ray,
    depth: u32,
    scene: &SceneConfig,
    probe: &mut P,
) -> Rgb {
    let params = &scene.shading;
    probe.on_trace(depth);
    if depth >= params.max_recursion_depth {
        return background(ray.dir, params);
    }
    let Some((index, hit)) = closest_hit(ray, &scene.instances, depth, probe) else {
        return background(ray.dir, params);
    };
    let mut payload = RadiancePayload {
        color: Rgb::ZERO,
        recursion_depth: depth,
    };
    shade_hit(
        ray,
        &hit,
        &scene.instances[index],
        scene,
        &mut payload,
        probe,
    );
    payload.color
}

fn shade_hit<P: TraceProbe>(
    ray: &Ray,
    hit: &HitInfo,
    instance: &Instance,
    scene: &SceneConfig,
    payload: &mut RadiancePayload,
    probe: &mut P,
) {
    let params = instance.shading.apply(&scene.shading);
    let depth = payload.recursion_depth;
    let albedo = match instance.fractal {
        Fractal::Julia(_) => julia_albedo(&hit.aux, depth, &params),
        Fractal::Mandelbulb(_) => mandelbulb_albedo(&hit.aux, &params),
    };

    let hit_position = ray.at(hit.t);
    let offset = 10.0 * instance.march.precis * instance.world_scale();
    let reflection_ray = Ray {
        origin: hit_position + hit.normal * offset,
        dir: ray.dir.reflect(hit.normal),
    };
    let reflected = if params.reflectance > 0.0 {
        let reflection_color = trace_radiance(&reflection_ray, depth + 1, scene, probe);
        let fresnel = schlick_fresnel(ray.dir, hit.normal, albedo);
        fresnel.mul_elem(reflection_color) * params.reflectance
    } else {
        Rgb::ZERO
    };

    let color = phong(albedo, hit.normal, -ray.dir, &params) + reflected;
    payload.color = color + payload.color;
}

/// Upper bound of any channel `trace_radiance` can return for these
/// parameters, assuming palette colors in `[0, 1]`.
pub fn radiance_upper_bound(params: &ShadingParams) -> f64 {
    let max3 = |c: Rgb| c.x.max(c.y).max(c.z);
    let light = max3(params.light_color);
    let palette_max = max3(params.julia_palette.base)
        .max(max3(params.julia_palette.tip))
        .max(
            params
                .bulb_palette
                .colors
                .iter()
                .copied()
                .map(max3)
                .fold(0.0, f64::max),
        );
    let albedo = palette_max * params.albedo_scale + params.max_depth_boost.max(0.0);
    let direct = max3(params.ambient) * albedo + albedo * light + light;
    let fresnel = albedo.max(1.0);
    let bg = max3(params.background_top).max(max3(params.background_bottom));
    let mut bound = bg;
    for _ in 0..params.max_recursion_depth {
        bound = bound.max(direct + params.reflectance * fresnel * bound);
    }
    bound
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Rgb, b: Rgb, tol: f64) -> bool {
        (a - b).abs().x <= tol && (a - b).abs().y <= tol && (a - b).abs().z <= tol
    }

    #[test]
    fn fresnel_endpoints() {
        let f0 = Rgb::new(0.04, 0.5, 0.9);
        let n = Vec3::Z;
        assert_eq!(schlick_fresnel(-Vec3::Z, n, f0), f0);
        assert!(close(
            schlick_fresnel(Vec3::X, n, f0),
            Rgb::splat(1.0),
            1e-15
        ));
    }

    #[test]
    fn fresnel_at_sixty_degrees() {
        // cosθ = 0.5: 0.04 + 0.96·0.5⁵ = 0.07
        let incident = Vec3::new((0.75f64).sqrt(), 0.0, -0.5);
        let got = schlick_fresnel(incident, Vec3::Z, Rgb::splat(0.04));
        assert!(close(got, Rgb::splat(0.07), 1e-12), "{got:?}");
    }

    #[test]
    fn phong_ambient_only() {
        let params = ShadingParams {
            light_direction: Vec3::X,
            ..ShadingParams::default()
        };
        // n ⟂ l; the light's mirror is −x, the viewer looks along +x.
        let albedo = Rgb::new(0.5, 0.4, 0.3);
        let got = phong(albedo, Vec3::Y, Vec3::X, &params);
        assert!(
            close(got, params.ambient.mul_elem(albedo), 1e-15),
            "{got:?}"
        );
    }

    #[test]
    fn phong_full_alignment() {
        let params = ShadingParams {
            light_direction: Vec3::Y,
            ..ShadingParams::default()
        };
        let albedo = Rgb::new(0.5, 0.4, 0.3);
        let got = phong(albedo, Vec3::Y, Vec3::Y, &params);
        let want = params.ambient.mul_elem(albedo)
            + albedo.mul_elem(params.light_color)
            + params.light_color;
        assert!(close(got, want, 1e-15), "{got:?}");
    }

    #[test]
    fn phong_black_albedo_is_specular() {
        let params = ShadingParams {
            light_direction: Vec3::Y,
            ..ShadingParams::default()
        };
        let view = Vec3::new(0.0, 1.0, 0.2).normalize();
        let got = phong(Rgb::ZERO, Vec3::Y, view, &params);
        let spec = view.y.powf(32.0);
        assert!(close(got, params.light_color * spec, 1e-15));
    }

    #[test]
    fn julia_palette_base_and_ramp() {
        let params = ShadingParams {
            max_recursion_depth: 3,
            ..ShadingParams::default()
        };
        let base = julia_albedo(&[0.0; 4], 0, &params);
        assert!(close(
            base,
            params.julia_palette.base * params.albedo_scale,
            1e-15
        ));
        let mut prev = base;
        for n in 1..40 {
            let next = julia_albedo(&[n as f64, 0.0, 0.0, 0.0], 0, &params);
            assert_ne!(next, prev, "n = {n}");
            prev = next;
        }
    }

    #[test]
    fn julia_boost_one_level_above_limit() {
        let params = ShadingParams::default();
        let aux = [7.0, 0.0, 0.0, 0.0];
        let plain = julia_albedo(&aux, 0, &params);
        let boosted = julia_albedo(&aux, params.max_recursion_depth - 1, &params);
        let floor = plain + Rgb::splat(params.max_depth_boost * (1.0 - 1e-9));
        assert!(boosted.x >= floor.x && boosted.y >= floor.y && boosted.z >= floor.z);
    }

    #[test]
    fn bulb_palette_endpoints_and_mix() {
        let params = ShadingParams {
            albedo_scale: 1.0,
            ..ShadingParams::default()
        };
        let [c0, c1, c2] = params.bulb_palette.colors;
        assert!(close(
            mandelbulb_albedo(&[5.0, 0.0, 0.0, 0.0], &params),
            c0,
            1e-15
        ));
        assert!(close(
            mandelbulb_albedo(&[5.0, 3.0, 2.0, 9.0], &params),
            c2 * 0.5,
            1e-15
        ));
        let (y, z, w) = (0.3, 0.6, 0.2);
        let first = c0 * (1.0 - y) + c1 * y;
        let second = first * (1.0 - z) + c2 * z;
        let want = second * (1.0 - 0.5 * w);
        assert!(close(
            mandelbulb_albedo(&[1.0, y, z, w], &params),
            want,
            1e-15
        ));
    }

    #[test]
    fn background_gradient() {
        let params = ShadingParams::default();
        assert!(close(
            background(Vec3::Y, &params),
            params.background_top,
            1e-15
        ));
        assert!(close(
            background(-Vec3::Y, &params),
            params.background_bottom,
            1e-15
        ));
    }

    #[test]
    fn overrides_replace_only_given_fields() {
        let params = ShadingParams::default();
        let o = ShadingOverrides {
            reflectance: Some(0.5),
            ..ShadingOverrides::default()
        };
        let applied = o.apply(&params);
        assert_eq!(applied.reflectance, 0.5);
        assert_eq!(applied.albedo_scale, params.albedo_scale);
    }

    proptest::proptest! {
        #[test]
        fn fresnel_monotone_in_grazing(
            f0 in proptest::array::uniform3(0.0f64..1.0),
            c1 in 0.0f64..1.0,
            c2 in 0.0f64..1.0,
        ) {
            let f0 = Rgb::from_array(f0);
            let (lo, hi) = if c1 < c2 { (c1, c2) } else { (c2, c1) };
            // Larger cosθ means less grazing.
            let dir = |c: f64| Vec3::new((1.0 - c * c).sqrt(), 0.0, -c);
            let grazing = schlick_fresnel(dir(lo), Vec3::Z, f0);
            let facing = schlick_fresnel(dir(hi), Vec3::Z, f0);
            proptest::prop_assert!(grazing.x >= facing.x - 1e-15);
            proptest::prop_assert!(grazing.y >= facing.y - 1e-15);
            proptest::prop_assert!(grazing.z >= facing.z - 1e-15);
        }

        #[test]
        fn reflection_obeys_mirror_law(
            d in proptest::array::uniform3(-1.0f64..1.0),
            n in proptest::array::uniform3(-1.0f64..1.0),
        ) {
            let (Some(d), Some(n)) = (Vec3::from_array(d).try_normalize(), Vec3::from_array(n).try_normalize()) else {
                return Ok(());
            };
            let r = d.reflect(n);
            proptest::prop_assert!((r.dot(n) + d.dot(n)).abs() < 1e-9);
            proptest::prop_assert!((r.length() - 1.0).abs() < 1e-9);
        }
    }
}
