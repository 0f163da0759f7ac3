//! Extension of a bounded loss from a shrunken copy of the body to all of
//! space. The extension is evaluated through a single query to the
//! underlying loss at the radially pulled-back point, which keeps oracle
//! accounting exact even under observation noise.

use super::ConvexBody;
use crate::{Error, Result, Vector};

/// Parameters of the radial extension
/// `e(x) = m(x) f(x / m(x)) + coeff (m(x) - 1)` with
/// `m(x) = max(1, pi(x) / (1 - eps))`.
///
/// `m` is written `pi_wedge` throughout. On `shrink(body, eps)` the
/// extension coincides with `f`; outside, the pulled-back query point
/// `x / m(x)` always lies in the body.
#[derive(Debug, Clone, Copy)]
pub struct ExtendedLoss {
    pub eps: f64,
    pub coeff: f64,
}

impl ExtendedLoss {
    /// Default slope `(1 - eps) / eps`, which keeps the extension convex
    /// for convex `f` bounded in [0, 1].
    pub fn with_default_coeff(eps: f64) -> Result<Self> {
        Self::with_coeff(eps, (1.0 - eps) / eps)
    }

    /// Steeper slope `2 / eps` used by the Newton-type runner.
    pub fn with_ons_coeff(eps: f64) -> Result<Self> {
        Self::with_coeff(eps, 2.0 / eps)
    }

    pub fn with_coeff(eps: f64, coeff: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 0.5) {
            return Err(Error::config("extension needs eps in (0, 1/2]"));
        }
        Ok(ExtendedLoss { eps, coeff })
    }

    /// `pi_wedge(x) = max(1, pi(x)/(1-eps))`.
    pub fn gauge(&self, body: &ConvexBody, x: &Vector) -> Result<f64> {
        let pi = body.minkowski_functional(x)?;
        Ok((pi / (1.0 - self.eps)).max(1.0))
    }

    /// Query point and `pi_wedge`; the caller observes the loss at the
    /// point and feeds the observation to [`assemble`](Self::assemble).
    pub fn query(&self, body: &ConvexBody, x: &Vector) -> Result<(Vector, f64)> {
        let m = self.gauge(body, x)?;
        Ok((x / m, m))
    }

    /// Combine an observation at the pulled-back point into the extension
    /// value. Linear in `y`, so it commutes with taking expectations over
    /// observation noise.
    pub fn assemble(&self, pi_wedge: f64, y: f64) -> f64 {
        pi_wedge * y + self.coeff * (pi_wedge - 1.0)
    }

    /// Extension value through one query to `f`.
    pub fn value<F: FnMut(&Vector) -> f64>(
        &self,
        body: &ConvexBody,
        mut f: F,
        x: &Vector,
    ) -> Result<f64> {
        let (q, m) = self.query(body, x)?;
        Ok(self.assemble(m, f(&q)))
    }
}

/// Convenience free function mirroring [`ExtendedLoss::query`].
pub fn extension_query(
    body: &ConvexBody,
    ext: &ExtendedLoss,
    x: &Vector,
) -> Result<(Vector, f64)> {
    ext.query(body, x)
}
