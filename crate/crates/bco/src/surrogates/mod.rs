//! Gradient and Hessian estimators for surrogate losses, experimental
//! design, and importance-weighted least squares.

pub mod gaussian;

use crate::linalg::{d_optimal_design, pinv_psd, quad_form};
use crate::{Error, Matrix, Result, Vector};

pub use gaussian::{
    gaussian_estimates, gaussian_ratio, quadratic_model_from, GaussianSurrogateParams,
    QuadraticModel,
};

/// Sphere-smoothing gradient estimate `d Y (X - x_centre) / r^2`.
///
/// Requires the played point to sit on the sphere of radius `r` about the
/// centre; its mean over fresh sphere draws is the gradient of the
/// ball-convolved surrogate.
pub fn spherical_grad(x_centre: &Vector, r: f64, x: &Vector, y: f64) -> Result<Vector> {
    let u = x - x_centre;
    if (u.norm() - r).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::precondition(format!(
            "played point is at distance {} from the centre, expected radius {r}",
            u.norm()
        )));
    }
    let d = x.len() as f64;
    Ok(u * (d * y / (r * r)))
}

/// Dikin-shell gradient estimate `4 d Y R''(X - x_centre) / r^2` for the
/// optimistic ellipsoidal surrogate; `X` must come from the shell
/// `x_centre + (r/2) R''^{-1/2} xi` with unit `xi`.
pub fn ellipsoidal_grad(x_centre: &Vector, hessian: &Matrix, r: f64, x: &Vector, y: f64) -> Vector {
    let d = x.len() as f64;
    hessian * (x - x_centre) * (4.0 * d * y / (r * r))
}

/// Optimal-design weights over a fixed support.
#[derive(Debug, Clone)]
pub struct DesignWeights {
    pub support: Vec<Vector>,
    pub weights: Vec<f64>,
    /// `G = sum_i w_i x_i x_i^T`.
    pub design: Matrix,
    /// `max_i ||x_i||^2_{G^+}` at termination.
    pub achieved: f64,
    pub span_dim: usize,
}

impl DesignWeights {
    pub fn design_pinv(&self) -> Matrix {
        pinv_psd(&self.design, 1e-12)
    }
}

/// Kiefer-Wolfowitz design by Frank-Wolfe, stopping once the worst leverage
/// is within `1 + tol` of the span dimension. Hitting the iteration cap
/// returns the best design found with its achieved bound, not an error.
pub fn kw_design(points: &[Vector], tol: f64) -> Result<DesignWeights> {
    kw_design_capped(points, tol, 200_000)
}

pub fn kw_design_capped(points: &[Vector], tol: f64, cap: usize) -> Result<DesignWeights> {
    if !(tol > 0.0 && tol <= 0.5) {
        return Err(Error::config("design tolerance must lie in (0, 0.5]"));
    }
    let d = d_optimal_design(points, tol, cap)?;
    Ok(DesignWeights {
        support: points.to_vec(),
        weights: d.weights,
        design: d.design_matrix,
        achieved: d.achieved,
        span_dim: d.span_dim,
    })
}

/// Importance-weighted least squares `theta = G^+ X Y`; errors if `X` is
/// not in the image of `G` (the estimate would be biased there).
pub fn iwls_estimate(design: &Matrix, x: &Vector, y: f64) -> Result<Vector> {
    let pinv = pinv_psd(design, 1e-12);
    let theta = &pinv * x * y;
    let back = design * (&pinv * x);
    if (&back - x).norm() > 1e-8 * x.norm().max(1.0) {
        return Err(Error::precondition("query point outside the image of the design matrix"));
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_uniform_sphere;
    use crate::linalg::logdet_spd;
    use crate::rng::stream;
    use crate::vec2;
    use approx::assert_relative_eq;
    use rand::Rng as _;

    #[test]
    fn spherical_arithmetic_and_radius_gate() {
        let g = spherical_grad(&vec2(0.0, 0.0), 0.5, &vec2(0.5, 0.0), 1.0).unwrap();
        assert_relative_eq!(g[0], 4.0, max_relative = 1e-12);
        assert_relative_eq!(g[1], 0.0);
        assert!(spherical_grad(&vec2(0.0, 0.0), 0.5, &vec2(0.7, 0.0), 1.0).is_err());
    }

    #[test]
    fn spherical_mean_recovers_linear_gradient() {
        let mut rng = stream(5, 0, "sph-lin");
        let c = vec2(0.7, -0.3);
        let centre = vec2(0.2, 0.1);
        let r = 0.5;
        let n = 200_000;
        let mut mean = Vector::zeros(2);
        for _ in 0..n {
            let x = &centre + sample_uniform_sphere(2, &mut rng) * r;
            let y = c.dot(&x);
            mean += spherical_grad(&centre, r, &x, y).unwrap();
        }
        mean /= n as f64;
        // Per-coordinate std of the estimate is O(d/r) ~ 4; 3 SE ~ 0.03.
        let se = 3.0 * 4.0 / (n as f64).sqrt();
        assert!((&mean - &c).norm() < se, "mean {mean:?}");
    }

    #[test]
    fn spherical_mean_recovers_quadratic_gradient() {
        let mut rng = stream(6, 0, "sph-quad");
        let centre = vec2(0.3, -0.2);
        let r = 0.25;
        let n = 400_000;
        let mut mean = Vector::zeros(2);
        for _ in 0..n {
            let x = &centre + sample_uniform_sphere(2, &mut rng) * r;
            let y = x.norm_squared();
            mean += spherical_grad(&centre, r, &x, y).unwrap();
        }
        mean /= n as f64;
        // s(x) = ||x||^2 + r^2 d/(d+2), so grad s = 2x.
        let want = &centre * 2.0;
        assert!((&mean - &want).norm() < 0.02, "mean {mean:?}");
    }

    #[test]
    fn ellipsoidal_reduces_to_spherical_scaling() {
        let centre = vec2(0.0, 0.0);
        let x = vec2(0.25, 0.0);
        let g = ellipsoidal_grad(&centre, &Matrix::identity(2, 2), 0.5, &x, 1.0);
        let expect = (&x - &centre) * (4.0 * 2.0 / 0.25);
        assert_relative_eq!((g - expect).norm(), 0.0, epsilon = 1e-12);
        let z = ellipsoidal_grad(&centre, &Matrix::identity(2, 2), 0.5, &x, 0.0);
        assert_eq!(z.norm(), 0.0);
    }

    #[test]
    fn ellipsoidal_mean_recovers_linear_gradient() {
        let mut rng = stream(7, 0, "ell-lin");
        let c = vec2(-0.4, 0.9);
        let centre = vec2(0.1, 0.2);
        let r = 0.3;
        // R'' = diag(4, 1): shell points are centre + (r/2) R''^{-1/2} xi.
        let h = Matrix::from_diagonal(&vec2(4.0, 1.0));
        let h_inv_sqrt = Matrix::from_diagonal(&vec2(0.5, 1.0));
        let n = 200_000;
        let mut mean = Vector::zeros(2);
        for _ in 0..n {
            let xi = sample_uniform_sphere(2, &mut rng);
            let x = &centre + &h_inv_sqrt * xi * (r / 2.0);
            let y = c.dot(&x);
            mean += ellipsoidal_grad(&centre, &h, r, &x, y);
        }
        mean /= n as f64;
        assert!((&mean - &c).norm() < 0.05, "mean {mean:?}");
    }

    #[test]
    fn kw_design_on_basis_is_uniform() {
        let points: Vec<Vector> = (0..3)
            .map(|i| Vector::from_fn(3, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
        let d = kw_design(&points, 0.05).unwrap();
        for w in &d.weights {
            assert_relative_eq!(*w, 1.0 / 3.0, epsilon = 1e-9);
        }
        assert_relative_eq!(d.achieved, 3.0, epsilon = 1e-6);
    }

    #[test]
    fn kw_design_antipodal_has_value_one() {
        let v = vec2(0.6, -0.8);
        let d = kw_design(&[v.clone(), -&v], 0.05).unwrap();
        assert_eq!(d.span_dim, 1);
        assert!(d.achieved <= 1.0 + 0.05 + 1e-9);
    }

    #[test]
    fn kw_design_random_cloud_certified() {
        let mut rng = stream(8, 0, "kw");
        let points: Vec<Vector> = (0..50)
            .map(|_| Vector::from_fn(3, |_, _| rng.gen::<f64>() * 2.0 - 1.0))
            .collect();
        let d = kw_design(&points, 0.05).unwrap();
        // Certify by direct evaluation rather than trusting `achieved`.
        let pinv = d.design_pinv();
        let worst = points.iter().map(|x| quad_form(&pinv, x)).fold(0.0, f64::max);
        assert!(worst <= 3.0 * 1.05 + 1e-6, "worst leverage {worst}");
    }

    #[test]
    fn kw_design_objective_is_monotone() {
        // Same deterministic start at every cap, so prefixes coincide.
        let mut rng = stream(9, 0, "kw-mono");
        let points: Vec<Vector> = (0..20)
            .map(|_| Vector::from_fn(3, |_, _| rng.gen::<f64>() * 2.0 - 1.0))
            .collect();
        let mut last = f64::NEG_INFINITY;
        for cap in [1, 2, 4, 8, 16, 32, 64, 128] {
            let d = kw_design_capped(&points, 1e-9, cap).unwrap();
            let ld = logdet_spd(&d.design).unwrap();
            assert!(ld >= last - 1e-9, "logdet dropped: {last} -> {ld}");
            last = ld;
        }
    }

    #[test]
    fn iwls_identity_example_and_image_gate() {
        let theta = iwls_estimate(&Matrix::identity(2, 2), &vec2(1.0, 0.0), 2.0).unwrap();
        assert_relative_eq!(theta[0], 2.0);
        assert_relative_eq!(theta[1], 0.0);
        // Rank-one design cannot answer queries off its span.
        let mut g = Matrix::zeros(2, 2);
        g[(0, 0)] = 1.0;
        assert!(iwls_estimate(&g, &vec2(0.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn iwls_is_unbiased_with_bounded_second_moment() {
        let mut rng = stream(10, 0, "iwls");
        let support = vec![
            vec2(1.0, 0.0),
            vec2(0.0, 1.0),
            vec2(-0.7, 0.7),
            vec2(0.5, 0.5),
        ];
        let design = kw_design(&support, 0.05).unwrap();
        let theta = vec2(0.4, -0.6);
        let probe = vec2(0.3, 0.8);
        let pinv = design.design_pinv();
        let n = 400_000;
        let mut mean = Vector::zeros(2);
        let mut second = 0.0;
        for _ in 0..n {
            // Sample X from the design distribution.
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut idx = 0;
            for (i, w) in design.weights.iter().enumerate() {
                acc += w;
                if u <= acc {
                    idx = i;
                    break;
                }
            }
            let x = &design.support[idx];
            let y = theta.dot(x).clamp(-1.0, 1.0);
            let est = iwls_estimate(&design.design, x, y).unwrap();
            second += probe.dot(&est).powi(2);
            mean += est;
        }
        mean /= n as f64;
        second /= n as f64;
        assert!((&mean - &theta).norm() < 0.02, "mean {mean:?}");
        let bound = quad_form(&pinv, &probe);
        assert!(second <= bound * (1.0 + 0.05), "second moment {second} vs {bound}");
    }
}
