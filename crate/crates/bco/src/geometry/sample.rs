//! Random sampling over convex bodies: exact chord computations drive a
//! hit-and-run walk, which in turn feeds the isotropic-position and
//! mean-width estimates used by the cutting-plane and Newton families.

use super::{AffineMap, ConvexBody};
use crate::linalg::{cholesky_jitter, inv_sqrt_spd, quad_form, symmetrize};
use crate::rng::Rng;
use crate::{Error, Matrix, Result, Vector};
use rand::Rng as _;
use rand_distr::StandardNormal;

pub fn sample_uniform_sphere(dim: usize, rng: &mut Rng) -> Vector {
    loop {
        let g = Vector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let n = g.norm();
        if n > 1e-12 {
            return g / n;
        }
    }
}

pub fn sample_uniform_ball(dim: usize, rng: &mut Rng) -> Vector {
    let dir = sample_uniform_sphere(dim, rng);
    let r: f64 = rng.gen::<f64>().powf(1.0 / dim as f64);
    dir * r
}

/// Sample `N(mean, cov)` through a jittered Cholesky factor.
pub fn sample_gaussian(mean: &Vector, cov: &Matrix, rng: &mut Rng) -> Result<Vector> {
    let chol = cholesky_jitter(&symmetrize(cov))?;
    let z = Vector::from_iterator(
        mean.len(),
        (0..mean.len()).map(|_| rng.sample::<f64, _>(StandardNormal)),
    );
    Ok(mean + chol.l() * z)
}

/// Endpoints of `{t : x + t u in body}` for a point `x` inside the body.
pub fn chord(body: &ConvexBody, x: &Vector, u: &Vector) -> Result<(f64, f64)> {
    let (lo, hi) = chord_inner(body, x, u)?;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::numerical("unbounded chord"));
    }
    // Guard against x sitting a hair outside after repeated arithmetic.
    Ok((lo.min(0.0), hi.max(0.0)))
}

fn chord_inner(body: &ConvexBody, x: &Vector, u: &Vector) -> Result<(f64, f64)> {
    match body {
        ConvexBody::Ball { radius, .. } => {
            quadratic_chord(u.norm_squared(), x.dot(u), x.norm_squared() - radius * radius)
        }
        ConvexBody::Box { lower, upper } => {
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for j in 0..x.len() {
                if u[j].abs() < 1e-300 {
                    continue;
                }
                let a = (lower[j] - x[j]) / u[j];
                let b = (upper[j] - x[j]) / u[j];
                lo = lo.max(a.min(b));
                hi = hi.min(a.max(b));
            }
            Ok((lo, hi))
        }
        ConvexBody::Polytope { a, b, .. } => {
            let s = b - a * x;
            let au = a * u;
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for i in 0..s.len() {
                if au[i] > 1e-300 {
                    hi = hi.min(s[i] / au[i]);
                } else if au[i] < -1e-300 {
                    lo = lo.max(s[i] / au[i]);
                }
            }
            Ok((lo, hi))
        }
        ConvexBody::Ellipsoid(e) => {
            let w = e.shape_inverse();
            let diff = x - &e.centre;
            quadratic_chord(quad_form(w, u), (w * &diff).dot(u), quad_form(w, &diff) - 1.0)
        }
        ConvexBody::AffineImage { base, map } => {
            let z0 = map.apply_inverse(x);
            let v = map.apply_inverse(&(x + u)) - &z0;
            chord_inner(base, &z0, &v)
        }
    }
}

fn quadratic_chord(qa: f64, qb: f64, qc: f64) -> Result<(f64, f64)> {
    if qa <= 0.0 {
        return Err(Error::precondition("degenerate chord direction"));
    }
    let disc = (qb * qb - qa * qc).max(0.0).sqrt();
    Ok(((-qb - disc) / qa, (-qb + disc) / qa))
}

/// Uniform samples by hit-and-run with `50 d^3` burn-in steps and `10 d`
/// walk steps between retained samples.
pub fn hit_and_run(body: &ConvexBody, count: usize, rng: &mut Rng) -> Result<Vec<Vector>> {
    let d = body.dim();
    let mut x = body.interior_point();
    let burn_in = 50 * d * d * d;
    let thinning = 10 * d;
    for _ in 0..burn_in {
        step(body, &mut x, rng)?;
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..thinning {
            step(body, &mut x, rng)?;
        }
        out.push(x.clone());
    }
    Ok(out)
}

fn step(body: &ConvexBody, x: &mut Vector, rng: &mut Rng) -> Result<()> {
    let u = sample_uniform_sphere(x.len(), rng);
    let (lo, hi) = chord(body, x, &u)?;
    let t = lo + (hi - lo) * rng.gen::<f64>();
    *x += u * t;
    Ok(())
}

/// Affine map sending the body approximately to isotropic position:
/// `T(x) = S^{-1/2}(x - m)` with `m`, `S` the sample mean and covariance of
/// `n` uniform draws.
pub fn estimate_isotropic_transform(
    body: &ConvexBody,
    n: usize,
    rng: &mut Rng,
) -> Result<AffineMap> {
    if n < 10 {
        return Err(Error::config("isotropic estimate needs at least 10 samples"));
    }
    let d = body.dim();
    let samples = hit_and_run(body, n, rng)?;
    let mut mean = Vector::zeros(d);
    for s in &samples {
        mean += s;
    }
    mean /= n as f64;
    let mut cov = Matrix::zeros(d, d);
    for s in &samples {
        let c = s - &mean;
        cov.ger(1.0 / n as f64, &c, &c, 1.0);
    }
    let root = inv_sqrt_spd(&cov);
    let offset = -(&root * &mean);
    AffineMap::new(root, offset)
}

#[derive(Debug, Clone, Copy)]
pub struct MeanWidthEstimate {
    pub mean: f64,
    pub standard_error: f64,
}

/// Monte Carlo estimate of `E[pi_K(U)]` for `U` uniform on the unit sphere,
/// the polar form of the mean-width-type constant used by the Newton tunings.
pub fn estimate_mean_width_polar(
    body: &ConvexBody,
    n: usize,
    rng: &mut Rng,
) -> Result<MeanWidthEstimate> {
    if n < 2 {
        return Err(Error::config("mean width estimate needs n >= 2"));
    }
    let d = body.dim();
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n {
        let u = sample_uniform_sphere(d, rng);
        let v = body.minkowski_functional(&u)?;
        sum += v;
        sumsq += v * v;
    }
    let mean = sum / n as f64;
    let var = (sumsq / n as f64 - mean * mean).max(0.0);
    Ok(MeanWidthEstimate {
        mean,
        standard_error: (var / n as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::vec2;
    use approx::assert_relative_eq;

    #[test]
    fn chords_match_closed_forms() {
        let ball = ConvexBody::ball(2, 2.0).unwrap();
        let (lo, hi) = chord(&ball, &vec2(1.0, 0.0), &vec2(1.0, 0.0)).unwrap();
        assert_relative_eq!(lo, -3.0, max_relative = 1e-12);
        assert_relative_eq!(hi, 1.0, max_relative = 1e-12);

        let cube = ConvexBody::cube(2, 1.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (lo, hi) = chord(&cube, &vec2(0.0, 0.0), &vec2(s, s)).unwrap();
        assert_relative_eq!(hi, 2.0f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(lo, -(2.0f64.sqrt()), max_relative = 1e-12);
    }

    #[test]
    fn ball_moments_from_hit_and_run() {
        let body = ConvexBody::ball(2, 1.0).unwrap();
        let mut rng = stream(7, 0, "hr-test");
        let samples = hit_and_run(&body, 2000, &mut rng).unwrap();
        let mean_norm: f64 =
            samples.iter().map(|s| s.norm()).sum::<f64>() / samples.len() as f64;
        // E||X|| = d/(d+1) for the unit ball.
        assert!((mean_norm - 2.0 / 3.0).abs() < 0.02, "mean norm {mean_norm}");
    }

    #[test]
    fn isotropic_transform_whitens_a_stretched_box() {
        let body = ConvexBody::axis_box(vec2(-2.0, -0.5), vec2(2.0, 0.5)).unwrap();
        let mut rng = stream(11, 0, "iso-test");
        let map = estimate_isotropic_transform(&body, 4000, &mut rng).unwrap();
        // Box sides 4 x 1 have variances 16/12 and 1/12.
        let expect_x = (12.0f64 / 16.0).sqrt();
        let expect_y = 12.0f64.sqrt();
        assert!((map.linear[(0, 0)] - expect_x).abs() < 0.05 * expect_x);
        assert!((map.linear[(1, 1)] - expect_y).abs() < 0.05 * expect_y);
        assert!(map.offset.norm() < 0.3);
    }

    #[test]
    fn mean_width_polar_of_balls() {
        let mut rng = stream(3, 0, "mw-test");
        let b1 = ConvexBody::ball(3, 1.0).unwrap();
        let est = estimate_mean_width_polar(&b1, 4000, &mut rng).unwrap();
        assert!((est.mean - 1.0).abs() < 1e-9);
        let b2 = ConvexBody::ball(3, 2.0).unwrap();
        let est = estimate_mean_width_polar(&b2, 4000, &mut rng).unwrap();
        assert!((est.mean - 0.5).abs() < 1e-9);
    }
}
