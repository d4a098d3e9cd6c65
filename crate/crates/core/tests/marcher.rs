use fractalmarch_core::estimators::{DistanceField, Fractal, JuliaParams, MandelbulbParams};
use fractalmarch_core::marcher::{intersect_instance, raycast, CutPlane, MarchConfig, Ray};
use fractalmarch_core::quat::{Quaternion, Vec3};
use fractalmarch_core::scene::{Instance, TransformSpec};
use fractalmarch_core::shading::ShadingOverrides;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn unit_sphere_t(ray: &Ray, center: Vec3, radius: f64) -> Option<f64> {
    let oc = ray.origin - center;
    let b = oc.dot(ray.dir);
    let disc = b * b - (oc.length_squared() - radius * radius);
    (disc >= 0.0).then(|| -b - disc.sqrt())
}

fn rays_toward_unit_ball(rng: &mut StdRng, count: usize) -> Vec<Ray> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let origin = Vec3::new(
            rng.gen_range(-4.0..4.0),
            rng.gen_range(-4.0..4.0),
            rng.gen_range(-4.0..4.0),
        );
        if origin.length() < 2.5 {
            continue;
        }
        let aim = Vec3::new(
            rng.gen_range(-0.9..0.9),
            rng.gen_range(-0.9..0.9),
            rng.gen_range(-0.9..0.9),
        );
        out.push(Ray::new(origin, aim - origin));
    }
    out
}

#[test]
fn no_overshoot_on_the_unit_sphere() {
    let field = JuliaParams::default();
    let config = MarchConfig::default();
    let mut rng = StdRng::seed_from_u64(21);
    let mut checked = 0;
    for ray in rays_toward_unit_ball(&mut rng, 400) {
        let Some(t_star) = unit_sphere_t(&ray, Vec3::ZERO, 1.0) else {
            continue;
        };
        let hit = raycast(&ray, &field, &config).expect("ray through the ball must hit");
        assert!(
            hit.t <= t_star + 10.0 * config.precis,
            "t {} vs {t_star}",
            hit.t
        );
        assert!(hit.t >= t_star - 0.01, "t {} vs {t_star}", hit.t);
        checked += 1;
        if checked == 200 {
            break;
        }
    }
    assert_eq!(checked, 200);
}

#[test]
fn every_hit_is_certified_and_inside_the_clip_volume() {
    let fields = [
        (
            Fractal::Julia(JuliaParams::with_c(Quaternion::new(-0.2, 0.6, 0.2, 0.2))),
            MarchConfig::default(),
        ),
        (
            Fractal::Mandelbulb(MandelbulbParams::default()),
            MarchConfig::for_mandelbulb(),
        ),
    ];
    let planes = vec![
        CutPlane::new(Vec3::new(0.0, 0.0, -0.1), Vec3::new(0.0, 0.0, -1.0)),
        CutPlane::new(Vec3::new(0.0, 0.4, 0.0), Vec3::new(0.2, 1.0, 0.0)),
    ];
    let mut rng = StdRng::seed_from_u64(4);
    for (field, base) in fields {
        for cut in [Vec::new(), planes.clone()] {
            let config = MarchConfig {
                cut_planes: cut,
                ..base.clone()
            };
            let mut hits = 0;
            for ray in rays_toward_unit_ball(&mut rng, 150) {
                let Some(hit) = raycast(&ray, &field, &config) else {
                    continue;
                };
                hits += 1;
                let p = ray.at(hit.t);
                assert!(field.distance(p) < config.precis);
                assert!(p.length() <= config.bounding_radius + config.precis);
                for plane in &config.cut_planes {
                    assert!(plane.signed_distance(p) <= config.precis);
                }
            }
            assert!(hits > 10, "only {hits} hits");
        }
    }
}

#[test]
fn identical_inputs_identical_hits() {
    let field = Fractal::Mandelbulb(MandelbulbParams::default());
    let config = MarchConfig::for_mandelbulb();
    let mut rng = StdRng::seed_from_u64(8);
    for ray in rays_toward_unit_ball(&mut rng, 50) {
        assert_eq!(
            raycast(&ray, &field, &config),
            raycast(&ray, &field, &config)
        );
    }
}

#[test]
fn transformed_instance_reports_world_distances() {
    let transform = TransformSpec::Components {
        translate: Vec3::new(1.0, 0.5, 0.0),
        rotate_deg: Vec3::new(10.0, 20.0, 30.0),
        scale: Vec3::splat(2.0),
    };
    let inst = Instance::new(
        Fractal::Julia(JuliaParams::default()),
        transform,
        MarchConfig::default(),
        ShadingOverrides::default(),
    )
    .unwrap();
    let center = Vec3::new(1.0, 0.5, 0.0);
    let mut rng = StdRng::seed_from_u64(12);
    let mut checked = 0;
    while checked < 50 {
        let origin = Vec3::new(rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0), -6.0);
        let aim = center + Vec3::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), 0.0);
        let ray = Ray::new(origin, aim - origin);
        let Some(t_star) = unit_sphere_t(&ray, center, 2.0) else {
            continue;
        };
        let hit = intersect_instance(&ray, &inst, f64::INFINITY).unwrap();
        // World precision is the object precision times the scale.
        assert!(
            (hit.t - t_star).abs() < 20.0 * 2.5e-4 + 0.01,
            "{} vs {t_star}",
            hit.t
        );
        assert!(hit.t <= t_star + 2.0 * 10.0 * 2.5e-4);
        let radial = (ray.at(hit.t) - center).normalize();
        assert!(hit.normal.dot(radial) > 0.999, "normal {:?}", hit.normal);
        // Nothing is reported beyond the current closest hit.
        assert!(intersect_instance(&ray, &inst, hit.t).is_none());
        checked += 1;
    }
}

#[test]
fn non_uniform_scale_normals_use_inverse_transpose() {
    // Scaling the unit ball by (2, 1, 1) gives an ellipsoid; its normal at
    // (x, y, z) is proportional to (x/4, y, z).
    let inst = Instance::new(
        Fractal::Julia(JuliaParams::default()),
        TransformSpec::Components {
            translate: Vec3::ZERO,
            rotate_deg: Vec3::ZERO,
            scale: Vec3::new(2.0, 1.0, 1.0),
        },
        MarchConfig::default(),
        ShadingOverrides::default(),
    )
    .unwrap();
    let ray = Ray::new(Vec3::new(-5.0, 0.0, -5.0), Vec3::new(1.0, 0.0, 1.0));
    let hit = intersect_instance(&ray, &inst, f64::INFINITY).unwrap();
    let p = ray.at(hit.t);
    let expected = Vec3::new(p.x / 4.0, p.y, p.z).normalize();
    assert!(
        hit.normal.dot(expected) > 0.9999,
        "{:?} vs {expected:?}",
        hit.normal
    );
}
