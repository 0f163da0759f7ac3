//! Gaussian optimistic surrogate: change-of-measure ratio, single-sample
//! estimators of the surrogate and its first two derivatives, and the
//! quadratic model built from them.

use crate::linalg::{inv_spd, quad_form, symmetrize};
use crate::{Error, Matrix, Result, Vector};

/// Clip level for the change-of-measure ratio.
pub const RATIO_CLIP: f64 = 7.38905609893065; // exp(2)

/// Exploration law `N(mu, sigma)` together with the mixing parameter
/// `lambda`; the surrogate is
/// `s(z) = E[(1 - 1/lambda) f(X) + (1/lambda) f((1-lambda) X + lambda z)]`.
#[derive(Debug, Clone)]
pub struct GaussianSurrogateParams {
    pub mu: Vector,
    pub sigma: Matrix,
    pub lambda: f64,
    sigma_inv: Matrix,
}

impl GaussianSurrogateParams {
    pub fn new(mu: Vector, sigma: Matrix, lambda: f64) -> Result<Self> {
        let d = mu.len() as f64;
        if !(lambda > 0.0 && lambda <= 1.0 / (d + 1.0)) {
            return Err(Error::config(format!(
                "lambda must lie in (0, 1/(d+1)] = (0, {:.6}]",
                1.0 / (d + 1.0)
            )));
        }
        let sym = symmetrize(&sigma);
        let sigma_inv = inv_spd(&sym)?;
        Ok(GaussianSurrogateParams { mu, sigma: sym, lambda, sigma_inv })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn sigma_inverse(&self) -> &Matrix {
        &self.sigma_inv
    }
}

/// Density ratio `r(x, z) = p((x - lambda z)/(1 - lambda)) / ((1-lambda)^d p(x))`,
/// optionally clipped at `exp(2)`. Computed through log densities so the
/// normalising constants cancel.
pub fn gaussian_ratio(params: &GaussianSurrogateParams, x: &Vector, z: &Vector, clipped: bool) -> f64 {
    let lam = params.lambda;
    let d = params.dim() as f64;
    let w = (x - z * lam) / (1.0 - lam);
    let qw = quad_form(&params.sigma_inv, &(&w - &params.mu));
    let qx = quad_form(&params.sigma_inv, &(x - &params.mu));
    let log_r = -0.5 * (qw - qx) - d * (1.0 - lam).ln();
    let r = log_r.exp();
    if clipped {
        r.min(RATIO_CLIP)
    } else {
        r
    }
}

/// Single-observation estimates of the surrogate, its gradient and its
/// Hessian at `z`, all built from the clipped ratio:
///
/// - `s(z)  ~ (1 - 1/lambda + r/lambda) Y`
/// - `s'(z) ~ (r Y / (1-lambda)) Sigma^{-1} ((X - lambda z)/(1-lambda) - mu)`
/// - `s''(z) ~ (lambda r Y / (1-lambda)^2) [Sigma^{-1} w w^T Sigma^{-1} - Sigma^{-1}]`
pub fn gaussian_estimates(
    params: &GaussianSurrogateParams,
    x_observed: &Vector,
    y: f64,
    z: &Vector,
) -> (f64, Vector, Matrix) {
    let lam = params.lambda;
    let r = gaussian_ratio(params, x_observed, z, true);
    let s_hat = (1.0 - 1.0 / lam + r / lam) * y;

    let w = (x_observed - z * lam) / (1.0 - lam) - &params.mu;
    let siw = &params.sigma_inv * &w;
    let g_hat = &siw * (r * y / (1.0 - lam));

    let scale = lam * r * y / ((1.0 - lam) * (1.0 - lam));
    let mut h_hat = &siw * siw.transpose();
    h_hat -= &params.sigma_inv;
    h_hat *= scale;
    (s_hat, g_hat, symmetrize(&h_hat))
}

/// Quadratic model `q(x) = <g, x - anchor> + 1/2 (x - anchor)^T H (x - anchor)`.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    pub gradient: Vector,
    pub hessian: Matrix,
    pub anchor: Vector,
}

impl QuadraticModel {
    pub fn new(gradient: Vector, hessian: Matrix, anchor: Vector) -> Result<Self> {
        let asym = (&hessian - hessian.transpose()).abs().max();
        if asym > 1e-10 {
            return Err(Error::precondition(format!(
                "model Hessian asymmetric by {asym:.3e}"
            )));
        }
        Ok(QuadraticModel { gradient, hessian: symmetrize(&hessian), anchor })
    }

    pub fn value(&self, x: &Vector) -> f64 {
        let diff = x - &self.anchor;
        self.gradient.dot(&diff) + 0.5 * quad_form(&self.hessian, &diff)
    }

    pub fn gradient_at(&self, x: &Vector) -> Vector {
        &self.gradient + &self.hessian * (x - &self.anchor)
    }
}

/// Build the model used by the Newton-type runners: the `1/2 s''` Hessian
/// convention, so `q(x) = <g, x - mu> + 1/4 ||x - mu||^2_{s''}`.
pub fn quadratic_model_from(
    params: &GaussianSurrogateParams,
    g_mean: Vector,
    h_mean: Matrix,
) -> Result<QuadraticModel> {
    QuadraticModel::new(g_mean, h_mean * 0.5, params.mu.clone())
}

#[cfg(test)]
pub(crate) mod closed_form {
    //! Independent oracles for the estimator tests: the surrogate of linear
    //! and quadratic losses in closed form, and the one-dimensional
    //! surrogate by quadrature.

    use super::*;

    /// For `f(x) = x^T A x + b^T x + c` and `X ~ N(mu, sigma)`:
    /// `s'(z) = 2A((1-lambda) mu + lambda z) + b`, `s'' = 2 lambda A`.
    pub fn quadratic_surrogate_grad(
        params: &GaussianSurrogateParams,
        a: &Matrix,
        b: &Vector,
        z: &Vector,
    ) -> Vector {
        let lam = params.lambda;
        a * (&params.mu * (1.0 - lam) + z * lam) * 2.0 + b
    }

    pub fn quadratic_surrogate_hessian(params: &GaussianSurrogateParams, a: &Matrix) -> Matrix {
        a * (2.0 * params.lambda)
    }

    /// `s(mu)` for a quadratic loss:
    /// `s(mu) = f(mu) - (1 - lambda) tr(A Sigma)`.
    pub fn quadratic_surrogate_at_mean(
        params: &GaussianSurrogateParams,
        a: &Matrix,
        b: &Vector,
        c: f64,
    ) -> f64 {
        let f_mu = quad_form(a, &params.mu) + b.dot(&params.mu) + c;
        f_mu - (1.0 - params.lambda) * (a * &params.sigma).trace()
    }

    /// One-dimensional surrogate by Simpson quadrature over `mu +- 10 sigma`.
    pub fn surrogate_value_1d<F: Fn(f64) -> f64>(
        f: &F,
        mu: f64,
        sigma2: f64,
        lambda: f64,
        z: f64,
    ) -> f64 {
        let sd = sigma2.sqrt();
        let (lo, hi) = (mu - 10.0 * sd, mu + 10.0 * sd);
        let n = 4000;
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let x = lo + h * i as f64;
            let weight = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let p = (-0.5 * (x - mu) * (x - mu) / sigma2).exp()
                / (sigma2 * 2.0 * std::f64::consts::PI).sqrt();
            let integrand = (1.0 - 1.0 / lambda) * f(x)
                + (1.0 / lambda) * f((1.0 - lambda) * x + lambda * z);
            acc += weight * p * integrand;
        }
        acc * h / 3.0
    }
}
