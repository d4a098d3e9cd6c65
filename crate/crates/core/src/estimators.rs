//! Distance estimators for the quaternion Julia set and the Mandelbulb.
//!
//! Both estimators evaluate `d(z) = |fⁿ(z)|·log|fⁿ(z)| / |(fⁿ)'(z)|` for the
//! first `n` at which the orbit leaves the escape radius (or the iteration
//! budget runs out). The quantity comes from the Green's function
//! `G(z) = lim log|fⁿ(z)| / pⁿ`, which vanishes on the filled set and behaves
//! like `log|z|` far from it. If `z + ε` is the nearest point of the set then
//! `G(z + ε) = 0`; a first-order expansion gives
//! `0 ≈ G(z) + ⟨∇G(z), ε⟩`, and the triangle and Cauchy–Schwarz inequalities
//! turn that into `|ε| ≥ |G(z)| / |∇G(z)|`. The ratio therefore estimates the
//! distance from below near the set, which is what sphere tracing needs.
//! Substituting `∇G = |(fⁿ)'| / (pⁿ·|fⁿ|)` removes the `pⁿ` factors and leaves
//! the expression above.
//!
//! The orbit and its derivative advance together:
//! `fⁿ⁺¹ = (fⁿ)ᵖ + c` and `(fⁿ⁺¹)' = p·(fⁿ)ᵖ⁻¹·(fⁿ)'` with `(f⁰)' = 1`.
//!
//! Neither estimator decides whether a point is "inside". A non-escaping
//! orbit yields whatever the formula gives (tiny, zero or negative), and the
//! marcher compares that against its precision.

use thiserror::Error;

use crate::quat::{triplex_pow_add, Quaternion, Vec3};

/// Returned alongside every distance: Julia stores the completed iteration
/// count in `aux[0]`; the Mandelbulb stores `(m, trap.y, trap.z, trap.w)`.
pub type Aux = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceSample {
    pub d: f64,
    pub aux: Aux,
}

pub trait DistanceField {
    fn sample(&self, p: Vec3) -> DistanceSample;

    fn distance(&self, p: Vec3) -> f64 {
        self.sample(p).d
    }
}

impl<F: Fn(Vec3) -> f64> DistanceField for F {
    fn sample(&self, p: Vec3) -> DistanceSample {
        DistanceSample {
            d: self(p),
            aux: [0.0; 4],
        }
    }
}

pub const DEFAULT_JULIA_ITERATIONS: u32 = 200;
pub const DEFAULT_MANDELBULB_ITERATIONS: u32 = 4;
pub const DEFAULT_ESCAPE_RADIUS_SQ: f64 = 256.0;
pub const DEFAULT_JULIA_DEGREE: u32 = 3;
pub const DEFAULT_MANDELBULB_POWER: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JuliaParams {
    pub c: Quaternion,
    /// 2 or 3.
    pub degree: u32,
    pub max_iterations: u32,
    pub escape_radius_sq: f64,
}

impl Default for JuliaParams {
    fn default() -> Self {
        Self {
            c: Quaternion::ZERO,
            degree: DEFAULT_JULIA_DEGREE,
            max_iterations: DEFAULT_JULIA_ITERATIONS,
            escape_radius_sq: DEFAULT_ESCAPE_RADIUS_SQ,
        }
    }
}

impl JuliaParams {
    pub fn with_c(c: Quaternion) -> Self {
        Self {
            c,
            ..Self::default()
        }
    }

    /// `p²`, the constant in front of `|z^(p-1)|²` in the squared derivative
    /// recursion (9 for the cubic).
    pub fn derivative_factor(&self) -> f64 {
        let p = f64::from(self.degree);
        p * p
    }
}

impl DistanceField for JuliaParams {
    fn sample(&self, p: Vec3) -> DistanceSample {
        julia_distance(p, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MandelbulbParams {
    pub power: u32,
    pub max_iterations: u32,
    pub escape_radius_sq: f64,
}

impl Default for MandelbulbParams {
    fn default() -> Self {
        Self {
            power: DEFAULT_MANDELBULB_POWER,
            max_iterations: DEFAULT_MANDELBULB_ITERATIONS,
            escape_radius_sq: DEFAULT_ESCAPE_RADIUS_SQ,
        }
    }
}

impl DistanceField for MandelbulbParams {
    fn sample(&self, p: Vec3) -> DistanceSample {
        mandelbulb_distance(p, self)
    }
}

/// One of the two supported fractals with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fractal {
    Julia(JuliaParams),
    Mandelbulb(MandelbulbParams),
}

impl Fractal {
    pub fn max_iterations(&self) -> u32 {
        match self {
            Fractal::Julia(p) => p.max_iterations,
            Fractal::Mandelbulb(p) => p.max_iterations,
        }
    }

    pub fn set_max_iterations(&mut self, iterations: u32) {
        match self {
            Fractal::Julia(p) => p.max_iterations = iterations,
            Fractal::Mandelbulb(p) => p.max_iterations = iterations,
        }
    }
}

impl DistanceField for Fractal {
    #[inline]
    fn sample(&self, p: Vec3) -> DistanceSample {
        match self {
            Fractal::Julia(params) => julia_distance(p, params),
            Fractal::Mandelbulb(params) => mandelbulb_distance(p, params),
        }
    }
}

/// `0.25·log(m2)·sqrt(m2 / dz2)`, i.e. `|z|·log|z| / |z'|` in squared form.
///
/// `m2 = 0` is the limit point of `sqrt(m2)·log(m2)`, which is 0. `dz2 = 0`
/// only happens on the critical orbit, where the estimate is unbounded.
#[inline]
fn green_ratio(m2: f64, dz2: f64) -> f64 {
    if m2 == 0.0 {
        0.0
    } else if dz2 == 0.0 {
        f64::INFINITY
    } else {
        0.25 * m2.ln() * (m2 / dz2).sqrt()
    }
}

/// Distance from `p` (embedded in the 3D slice of quaternion space) to the
/// filled Julia set of `z ↦ z^degree + c`.
pub fn julia_distance(p: Vec3, params: &JuliaParams) -> DistanceSample {
    let factor = params.derivative_factor();
    let mut z = Quaternion::from_slice_point(p);
    // Squared magnitudes throughout: |z'|² and |z|².
    let mut dz2 = 1.0;
    let mut m2 = 0.0;
    let mut n = 0.0;
    for _ in 0..params.max_iterations {
        let next = if params.degree == 2 {
            dz2 *= factor * z.length2();
            z.square()
        } else {
            let sq = z.square();
            dz2 *= factor * sq.length2();
            z * sq
        };
        z = next + params.c;
        m2 = z.length2();
        if m2 > params.escape_radius_sq {
            break;
        }
        n += 1.0;
    }
    DistanceSample {
        d: green_ratio(m2, dz2),
        aux: [n, 0.0, 0.0, 0.0],
    }
}

/// Distance from `p` to the Mandelbulb of the given power. The point itself
/// is the additive constant of the orbit.
///
/// Besides the distance this accumulates an orbit trap: the componentwise
/// minimum of `(|w.x|, |w.y|, |w.z|, m)` over the orbit.
pub fn mandelbulb_distance(p: Vec3, params: &MandelbulbParams) -> DistanceSample {
    let power = params.power;
    let pf = f64::from(power);
    let mut w = p;
    let mut m = w.length_squared();
    let mut trap = [w.x.abs(), w.y.abs(), w.z.abs(), m];
    let mut dz = 1.0;
    for _ in 0..params.max_iterations {
        dz = pf * m.sqrt().powi(power as i32 - 1) * dz + 1.0;
        // rⁿ·(unit direction) → 0 as r → 0, so the origin maps onto c.
        w = triplex_pow_add(w, power, p).unwrap_or(p);
        let a = w.abs();
        trap[0] = trap[0].min(a.x);
        trap[1] = trap[1].min(a.y);
        trap[2] = trap[2].min(a.z);
        // m still holds the previous iterate here.
        trap[3] = trap[3].min(m);
        m = w.length_squared();
        if m > params.escape_radius_sq {
            break;
        }
    }
    let d = if m == 0.0 {
        0.0
    } else {
        0.25 * m.ln() * m.sqrt() / dz
    };
    DistanceSample {
        d,
        aux: [m, trap[1], trap[2], trap[3]],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum NormalError {
    #[error("distance field gradient vanished (magnitude {0:e})")]
    DegenerateGradient(f64),
}

/// Tetrahedron vertices used for the gradient stencil.
pub const TETRAHEDRON: [Vec3; 4] = [
    Vec3::new(1.0, -1.0, -1.0),
    Vec3::new(-1.0, -1.0, 1.0),
    Vec3::new(-1.0, 1.0, -1.0),
    Vec3::new(1.0, 1.0, 1.0),
];

/// Scale applied to the marching precision to get the stencil step.
pub const NORMAL_STEP_FACTOR: f64 = 0.5773;

/// Unit gradient of `field` at `p` from four samples on a tetrahedron.
///
/// `Σ νᵢ·f(p + h·νᵢ)`: because `Σ νᵢ = 0` the `f(p)` term drops out, and
/// because `Σ (νᵢ)ₓ·νᵢ = (4, 0, 0)` (likewise for y and z) the sum is
/// `4h·∇f(p)` up to second order. It is exact for linear and quadratic
/// fields. Only the direction is returned, so the `1/4h` factor is skipped.
pub fn estimate_normal<F: DistanceField + ?Sized>(
    field: &F,
    p: Vec3,
    precis: f64,
) -> Result<Vec3, NormalError> {
    let h = NORMAL_STEP_FACTOR * precis;
    let mut g = Vec3::ZERO;
    for v in TETRAHEDRON {
        g += v * field.distance(p + v * h);
    }
    let len = g.length();
    if !len.is_finite() || len < 1e-20 {
        return Err(NormalError::DegenerateGradient(len));
    }
    Ok(g / len)
}
