use fractalmarch_core::estimators::{
    estimate_normal, julia_distance, mandelbulb_distance, DistanceField, Fractal, JuliaParams,
    MandelbulbParams, NORMAL_STEP_FACTOR,
};
use fractalmarch_core::quat::{Quaternion, Vec3};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_direction(rng: &mut StdRng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if let Some(u) = v.try_normalize().filter(|_| v.length() <= 1.0) {
            return u;
        }
    }
}

#[test]
fn julia_c0_stays_below_distance_to_unit_sphere() {
    // The exact c = 0 value is 0.5·r·ln r, which crosses r − 1 near r ≈ 4.92;
    // below that the estimate is a true lower bound on the distance.
    let params = JuliaParams::default();
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..1000 {
        let r = rng.gen_range(1.1..4.9);
        let p = random_direction(&mut rng) * r;
        let d = julia_distance(p, &params).d;
        assert!(d <= (r - 1.0) * (1.0 + 1e-6), "r = {r}: d = {d}");
    }
}

#[test]
fn julia_c0_overestimates_far_away() {
    let params = JuliaParams::default();
    let d = julia_distance(Vec3::new(0.0, 20.0, 0.0), &params).d;
    assert!((d - 10.0 * 20f64.ln()).abs() < 1e-9);
    assert!(d > 19.0);
    // Bisect the crossover 0.5·r·ln r = r − 1.
    let (mut lo, mut hi) = (2.0f64, 20.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if 0.5 * mid * mid.ln() < mid - 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo - 4.9215).abs() < 1e-3, "{lo}");
}

#[test]
fn estimators_are_bit_deterministic() {
    let julia = JuliaParams::with_c(Quaternion::new(-0.2, 0.6, 0.2, 0.2));
    let bulb = MandelbulbParams::default();
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..200 {
        let p = Vec3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        );
        let (a, b) = (julia_distance(p, &julia), julia_distance(p, &julia));
        assert_eq!(a.d.to_bits(), b.d.to_bits());
        assert_eq!(a.aux, b.aux);
        let (a, b) = (mandelbulb_distance(p, &bulb), mandelbulb_distance(p, &bulb));
        assert_eq!(a.d.to_bits(), b.d.to_bits());
        assert_eq!(a.aux, b.aux);
    }
}

#[test]
fn mandelbulb_is_outside_radius_one_and_a_half() {
    let params = MandelbulbParams::default();
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..100_000 {
        let r = rng.gen_range(1.5..8.0);
        let p = random_direction(&mut rng) * r;
        let d = mandelbulb_distance(p, &params).d;
        assert!(d > 0.0, "p = {p:?}, d = {d}");
    }
}

#[test]
fn orbit_trap_never_grows_with_more_iterations() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..500 {
        let p = Vec3::new(
            rng.gen_range(-1.3..1.3),
            rng.gen_range(-1.3..1.3),
            rng.gen_range(-1.3..1.3),
        );
        let mut prev: Option<[f64; 4]> = None;
        for iterations in 1..=8 {
            let params = MandelbulbParams {
                max_iterations: iterations,
                ..MandelbulbParams::default()
            };
            let aux = mandelbulb_distance(p, &params).aux;
            if let Some(prev) = prev {
                for k in 1..4 {
                    assert!(aux[k] <= prev[k], "p = {p:?}, component {k}");
                }
            }
            prev = Some(aux);
        }
    }
}

#[test]
fn julia_aux_counts_iterations_before_escape() {
    // Real axis, c = 0: x = 1.5 → 3.375 → 38.4 escapes on the second step.
    let s = julia_distance(Vec3::new(1.5, 0.0, 0.0), &JuliaParams::default());
    assert_eq!(s.aux[0], 1.0);
    // Points inside never escape.
    let s = julia_distance(Vec3::new(0.5, 0.1, 0.0), &JuliaParams::default());
    assert_eq!(s.aux[0], 200.0);
}

#[test]
fn degree_two_far_field() {
    // For z² the exact c = 0 estimate is also 0.5·r·ln r.
    let params = JuliaParams {
        degree: 2,
        ..JuliaParams::default()
    };
    for r in [2.0, 5.0, 12.0] {
        let d = julia_distance(Vec3::new(0.0, 0.0, r), &params).d;
        assert!((d / (0.5 * r * f64::ln(r)) - 1.0).abs() < 1e-9, "r = {r}");
    }
}

#[test]
fn c0_normals_point_radially() {
    let field = Fractal::Julia(JuliaParams::default());
    let mut rng = StdRng::seed_from_u64(9);
    for _ in 0..200 {
        let p = random_direction(&mut rng) * rng.gen_range(1.01..3.0);
        let n = estimate_normal(&field, p, 2.5e-4).unwrap();
        assert!(n.dot(p.normalize()) > 1.0 - 1e-9, "{p:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn julia_c0_ratio_for_large_radius(
        r in 2.0f64..20.0,
        theta in 0.0f64..std::f64::consts::PI,
        phi in -std::f64::consts::PI..std::f64::consts::PI,
    ) {
        let p = Vec3::new(theta.sin() * phi.cos(), theta.cos(), theta.sin() * phi.sin()) * r;
        let ratio = julia_distance(p, &JuliaParams::default()).d / (0.5 * r * r.ln());
        prop_assert!((0.99..=1.01).contains(&ratio), "ratio {}", ratio);
    }

    #[test]
    fn normal_is_unit_or_degenerate(x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0) {
        let field = Fractal::Mandelbulb(MandelbulbParams::default());
        if let Ok(n) = estimate_normal(&field, Vec3::new(x, y, z), 2.5e-4) {
            prop_assert!((n.length() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn stencil_step_matches_precis() {
    // A field that records where it is sampled.
    let samples = std::cell::RefCell::new(Vec::new());
    let field = |p: Vec3| {
        samples.borrow_mut().push(p);
        p.x
    };
    estimate_normal(&field, Vec3::ZERO, 1e-3).unwrap();
    assert_eq!(field.distance(Vec3::X), 1.0);
    let h = NORMAL_STEP_FACTOR * 1e-3;
    let points = samples.take();
    assert_eq!(points.len(), 5);
    for p in &points[..4] {
        assert!((p.length() - h * 3f64.sqrt()).abs() < 1e-15);
    }
}
