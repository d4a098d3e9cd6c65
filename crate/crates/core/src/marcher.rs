//! Sphere tracing against a distance field, clipped by a bounding sphere and
//! optional cut planes.

use crate::estimators::{estimate_normal, Aux, DistanceField};
use crate::quat::Vec3;
use crate::scene::Instance;

pub const DEFAULT_PRECIS: f64 = 2.5e-4;
pub const DEFAULT_T_MAX: f64 = 7000.0;
pub const DEFAULT_MAX_STEPS: u32 = 1024;
pub const DEFAULT_STEP_CLAMP: f64 = 0.2;
pub const JULIA_BOUNDING_RADIUS: f64 = 2.0;
pub const MANDELBULB_BOUNDING_RADIUS: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub dir: Vec3,
}

impl Ray {
    /// Normalizes `dir`.
    pub fn new(origin: Vec3, dir: Vec3) -> Self {
        Self {
            origin,
            dir: dir.normalize(),
        }
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }
}

/// Half-space clip. Points with `⟨x − point, normal⟩ > 0` are cut away, so
/// the kept side is the one the normal points away from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutPlane {
    pub point: Vec3,
    /// Unit length.
    pub normal: Vec3,
}

impl CutPlane {
    pub fn new(point: Vec3, normal: Vec3) -> Self {
        Self {
            point,
            normal: normal.normalize(),
        }
    }

    /// Positive on the removed side.
    #[inline]
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        (p - self.point).dot(self.normal)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarchConfig {
    pub precis: f64,
    pub t_max: f64,
    pub max_steps: u32,
    pub step_clamp: f64,
    pub bounding_radius: f64,
    pub cut_planes: Vec<CutPlane>,
}

impl Default for MarchConfig {
    fn default() -> Self {
        Self {
            precis: DEFAULT_PRECIS,
            t_max: DEFAULT_T_MAX,
            max_steps: DEFAULT_MAX_STEPS,
            step_clamp: DEFAULT_STEP_CLAMP,
            bounding_radius: JULIA_BOUNDING_RADIUS,
            cut_planes: Vec::new(),
        }
    }
}

impl MarchConfig {
    pub fn for_mandelbulb() -> Self {
        Self {
            bounding_radius: MANDELBULB_BOUNDING_RADIUS,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitInfo {
    pub t: f64,
    pub steps: u32,
    pub aux: Aux,
    /// Zero until filled by [`intersect_instance`] or the caller.
    pub normal: Vec3,
    /// Hit position in the instance's object space.
    pub object_point: Vec3,
    /// Set when the ray hit on its first step, exactly where this cut plane
    /// opened the marching interval. The surface there is the flat cut face.
    pub cut_plane: Option<usize>,
}

/// Parametric overlap of the ray with the ball of `radius` around the local
/// origin, clipped to `t ≥ 0`.
pub fn intersect_bounding_sphere(ray: &Ray, radius: f64) -> Option<(f64, f64)> {
    let b = ray.origin.dot(ray.dir);
    let c = ray.origin.length_squared() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let (t0, t1) = (-b - s, -b + s);
    if t1 < 0.0 {
        return None;
    }
    Some((t0.max(0.0), t1))
}

/// Narrows `interval` to the part of the ray kept by every plane.
pub fn clip_by_planes(interval: (f64, f64), ray: &Ray, planes: &[CutPlane]) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = interval;
    for plane in planes {
        let s = plane.signed_distance(ray.origin);
        let k = ray.dir.dot(plane.normal);
        if k == 0.0 {
            if s > 0.0 {
                return None;
            }
            continue;
        }
        // s + t·k ≤ 0
        let t = -s / k;
        if k > 0.0 {
            hi = hi.min(t);
        } else {
            lo = lo.max(t);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Result of a march, hit or not, with the number of field evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchOutcome {
    pub hit: Option<HitInfo>,
    pub steps: u32,
}

/// The marching interval after bounding-sphere and cut-plane clipping.
pub fn march_interval(ray: &Ray, config: &MarchConfig) -> Option<(f64, f64)> {
    let (enter, exit) = intersect_bounding_sphere(ray, config.bounding_radius)?;
    let (lo, hi) = clip_by_planes((enter, exit), ray, &config.cut_planes)?;
    let lo = lo.max(config.precis);
    let hi = hi.min(config.t_max);
    (lo <= hi).then_some((lo, hi))
}

/// Sphere-traces `field` along `ray`. The normal of the returned hit is not
/// computed.
pub fn raycast<F: DistanceField + ?Sized>(
    ray: &Ray,
    field: &F,
    config: &MarchConfig,
) -> Option<HitInfo> {
    raycast_counted(ray, field, config).hit
}

pub fn raycast_counted<F: DistanceField + ?Sized>(
    ray: &Ray,
    field: &F,
    config: &MarchConfig,
) -> MarchOutcome {
    let Some((t_min, t_max)) = march_interval(ray, config) else {
        return MarchOutcome {
            hit: None,
            steps: 0,
        };
    };
    let mut t = t_min;
    for step in 0..config.max_steps {
        let p = ray.at(t);
        let sample = field.sample(p);
        if sample.d < config.precis {
            let cut_plane = if step == 0 {
                entry_plane(ray, &config.cut_planes, t)
            } else {
                None
            };
            return MarchOutcome {
                hit: Some(HitInfo {
                    t,
                    steps: step + 1,
                    aux: sample.aux,
                    normal: Vec3::ZERO,
                    object_point: p,
                    cut_plane,
                }),
                steps: step + 1,
            };
        }
        // NaN distances fall through `min` to the clamp.
        t += sample.d.min(config.step_clamp);
        if t > t_max {
            return MarchOutcome {
                hit: None,
                steps: step + 1,
            };
        }
    }
    MarchOutcome {
        hit: None,
        steps: config.max_steps,
    }
}

/// Index of the plane the ray crosses into the kept half-space at `t`.
fn entry_plane(ray: &Ray, planes: &[CutPlane], t: f64) -> Option<usize> {
    planes.iter().position(|plane| {
        let k = ray.dir.dot(plane.normal);
        k < 0.0 && (-plane.signed_distance(ray.origin) / k - t).abs() <= 1e-12 * t.abs().max(1.0)
    })
}

/// Intersects a world-space ray with one placed fractal. Returns a hit with
/// world-space `t` and normal, and only when `t < closest`.
pub fn intersect_instance(world_ray: &Ray, instance: &Instance, closest: f64) -> Option<HitInfo> {
    intersect_instance_counted(world_ray, instance, closest).hit
}

pub fn intersect_instance_counted(
    world_ray: &Ray,
    instance: &Instance,
    closest: f64,
) -> MarchOutcome {
    let to_object = instance.world_to_object();
    let dir = to_object.transform_vector(world_ray.dir);
    let scale = dir.length();
    let object_ray = Ray {
        origin: to_object.transform_point(world_ray.origin),
        dir: dir / scale,
    };
    let outcome = raycast_counted(&object_ray, &instance.fractal, &instance.march);
    let hit = outcome.hit.and_then(|mut hit| {
        // Object-space distance along a unit object direction is `scale`
        // times the world parameter.
        let t_world = hit.t / scale;
        if t_world >= closest {
            return None;
        }
        let n_obj = match hit.cut_plane {
            Some(i) => instance.march.cut_planes[i].normal,
            None => estimate_normal(&instance.fractal, hit.object_point, instance.march.precis)
                .unwrap_or(-object_ray.dir),
        };
        let n_world = to_object
            .transform_vector_transposed(n_obj)
            .try_normalize()
            .unwrap_or(-world_ray.dir);
        hit.t = t_world;
        hit.normal = n_world;
        Some(hit)
    });
    MarchOutcome {
        hit,
        steps: outcome.steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{Fractal, JuliaParams};

    fn unit_sphere(p: Vec3) -> f64 {
        p.length() - 1.0
    }

    #[test]
    fn bounding_sphere_axis() {
        let ray = Ray::new(Vec3::new(0.0, 0.0, -3.0), Vec3::Z);
        assert_eq!(intersect_bounding_sphere(&ray, 1.0), Some((2.0, 4.0)));
        let miss = Ray::new(Vec3::new(0.0, 0.0, -3.0), Vec3::Y);
        assert_eq!(intersect_bounding_sphere(&miss, 1.0), None);
        let inside = Ray::new(Vec3::new(0.0, 0.0, 0.5), Vec3::Z);
        assert_eq!(intersect_bounding_sphere(&inside, 1.0), Some((0.0, 0.5)));
        let behind = Ray::new(Vec3::new(0.0, 0.0, 3.0), Vec3::Z);
        assert_eq!(intersect_bounding_sphere(&behind, 1.0), None);
    }

    #[test]
    fn planes_clip_interval() {
        let ray = Ray::new(Vec3::new(0.0, -1.0, 0.0), Vec3::Y);
        assert_eq!(clip_by_planes((0.0, 5.0), &ray, &[]), Some((0.0, 5.0)));
        // Plane y = 0 keeping y < 0: −1 + t ≤ 0.
        let keep_below = CutPlane::new(Vec3::ZERO, Vec3::Y);
        assert_eq!(
            clip_by_planes((0.0, 5.0), &ray, &[keep_below]),
            Some((0.0, 1.0))
        );
        // Plane y = −2 keeping y < −2 excludes the whole interval.
        let excluding = CutPlane::new(Vec3::new(0.0, -2.0, 0.0), Vec3::Y);
        assert_eq!(clip_by_planes((0.0, 5.0), &ray, &[excluding]), None);
        // Kept side in front of the ray moves the entry point.
        let keep_above = CutPlane::new(Vec3::new(0.0, 0.5, 0.0), -Vec3::Y);
        assert_eq!(
            clip_by_planes((0.0, 5.0), &ray, &[keep_above]),
            Some((1.5, 5.0))
        );
    }

    #[test]
    fn parallel_plane() {
        let ray = Ray::new(Vec3::ZERO, Vec3::X);
        let outside = CutPlane::new(Vec3::new(0.0, -1.0, 0.0), Vec3::Y);
        assert_eq!(clip_by_planes((0.0, 1.0), &ray, &[outside]), None);
        let inside = CutPlane::new(Vec3::new(0.0, 1.0, 0.0), Vec3::Y);
        assert_eq!(
            clip_by_planes((0.0, 1.0), &ray, &[inside]),
            Some((0.0, 1.0))
        );
    }

    #[test]
    fn analytic_sphere_hit() {
        let config = MarchConfig::default();
        let ray = Ray::new(Vec3::new(0.0, 0.0, -3.0), Vec3::Z);
        let hit = raycast(&ray, &unit_sphere, &config).unwrap();
        assert!((hit.t - 2.0).abs() < 10.0 * config.precis, "{}", hit.t);
        assert!(unit_sphere(ray.at(hit.t)) < config.precis);
        let away = Ray::new(Vec3::new(0.0, 0.0, -3.0), -Vec3::Z);
        assert!(raycast(&away, &unit_sphere, &config).is_none());
    }

    #[test]
    fn julia_c0_hit() {
        let config = MarchConfig::default();
        let ray = Ray::new(Vec3::new(0.0, 0.0, -3.0), Vec3::Z);
        let hit = raycast(&ray, &JuliaParams::default(), &config).unwrap();
        assert!((hit.t - 2.0).abs() < 0.01, "{}", hit.t);
        assert!(hit.t <= 2.0 + 10.0 * config.precis);
    }

    #[test]
    fn step_budget_exhaustion_is_a_miss() {
        let config = MarchConfig {
            max_steps: 3,
            ..MarchConfig::default()
        };
        let ray = Ray::new(Vec3::new(0.0, 0.0, -3.0), Vec3::Z);
        let out = raycast_counted(&ray, &unit_sphere, &config);
        assert!(out.hit.is_none());
        assert_eq!(out.steps, 3);
    }

    #[test]
    fn nan_field_is_clamped_not_stuck() {
        let config = MarchConfig::default();
        let ray = Ray::new(Vec3::new(0.0, 0.0, -3.0), Vec3::Z);
        let out = raycast_counted(&ray, &|_p: Vec3| f64::NAN, &config);
        assert!(out.hit.is_none());
        // 4 units of interval at 0.2 per step.
        assert!(out.steps <= 21, "{}", out.steps);
    }

    #[test]
    fn cut_plane_exposes_interior_face() {
        // Keep z > 0 only: the ray enters at the plane z = 0 where the c = 0
        // set is solid, so the hit is on the plane itself.
        let config = MarchConfig {
            cut_planes: vec![CutPlane::new(Vec3::ZERO, -Vec3::Z)],
            ..MarchConfig::default()
        };
        let ray = Ray::new(Vec3::new(0.2, 0.1, -3.0), Vec3::Z);
        let hit = raycast(&ray, &JuliaParams::default(), &config).unwrap();
        assert!(hit.object_point.z.abs() < 1e-9, "{:?}", hit.object_point);
        assert_eq!(hit.steps, 1);
        assert_eq!(hit.cut_plane, Some(0));

        let mut inst = Instance::at_origin(Fractal::Julia(JuliaParams::default()));
        inst.march = config;
        let hit = intersect_instance(&ray, &inst, f64::INFINITY).unwrap();
        assert_eq!(hit.normal, -Vec3::Z);
        // A ray entering through the sphere, away from the plane, gets the
        // estimated normal instead.
        let ray = Ray::new(Vec3::new(0.0, 0.0, 3.0), -Vec3::Z);
        let hit = intersect_instance(&ray, &inst, f64::INFINITY).unwrap();
        assert_eq!(hit.cut_plane, None);
        assert!((hit.normal - Vec3::Z).length() < 1e-3);
    }

    #[test]
    fn monotone_and_deterministic() {
        let config = MarchConfig::default();
        let ray = Ray::new(Vec3::new(0.3, -0.2, -3.0), Vec3::new(-0.05, 0.1, 1.0));
        let field = JuliaParams::default();
        let a = raycast(&ray, &field, &config);
        let b = raycast(&ray, &field, &config);
        assert_eq!(a, b);
        let ts = std::cell::RefCell::new(Vec::new());
        let recording = |p: Vec3| {
            ts.borrow_mut().push((p - ray.origin).length());
            field.distance(p)
        };
        raycast(&ray, &recording, &config);
        let ts = ts.into_inner();
        assert!(ts.len() > 2);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }
}
