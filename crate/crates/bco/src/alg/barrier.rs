//! Self-concordant barriers and the damped Newton minimiser.

use crate::geometry::ConvexBody;
use crate::linalg::{solve_spd, symmetrize};
use crate::{Error, Matrix, Result, Vector};

/// The two closed-form barriers used by the FTRL family.
#[derive(Debug, Clone)]
pub enum Barrier {
    /// `R(x) = -sum_i log(b_i - <a_i, x>)`, self-concordance parameter = row
    /// count.
    LogPolytope { a: Matrix, b: Vector },
    /// `R(x) = -log(rho^2 - ||x||^2)`, parameter 1.
    BallLog { rho: f64 },
}

impl Barrier {
    /// Pick the natural barrier for a body representation.
    pub fn for_body(body: &ConvexBody) -> Result<Barrier> {
        match body {
            ConvexBody::Ball { radius, .. } => Ok(Barrier::BallLog { rho: *radius }),
            ConvexBody::Box { lower, upper } => {
                let d = lower.len();
                let mut a = Matrix::zeros(2 * d, d);
                let mut b = Vector::zeros(2 * d);
                for i in 0..d {
                    a[(i, i)] = 1.0;
                    b[i] = upper[i];
                    a[(d + i, i)] = -1.0;
                    b[d + i] = -lower[i];
                }
                Ok(Barrier::LogPolytope { a, b })
            }
            ConvexBody::Polytope { a, b, .. } => {
                Ok(Barrier::LogPolytope { a: a.clone(), b: b.clone() })
            }
            _ => Err(Error::Refused(
                "no closed-form barrier for this body representation".into(),
            )),
        }
    }

    /// Self-concordance parameter.
    pub fn theta(&self) -> f64 {
        match self {
            Barrier::LogPolytope { a, .. } => a.nrows() as f64,
            Barrier::BallLog { .. } => 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Barrier::LogPolytope { a, .. } => a.ncols(),
            Barrier::BallLog { .. } => usize::MAX, // dimension-free; fixed by call sites
        }
    }

    /// `+inf` outside the domain.
    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            Barrier::LogPolytope { a, b } => {
                let mut v = 0.0;
                for i in 0..a.nrows() {
                    let slack = b[i] - a.row(i).transpose().dot(x);
                    if slack <= 0.0 {
                        return f64::INFINITY;
                    }
                    v -= slack.ln();
                }
                v
            }
            Barrier::BallLog { rho } => {
                let slack = rho * rho - x.norm_squared();
                if slack <= 0.0 {
                    f64::INFINITY
                } else {
                    -slack.ln()
                }
            }
        }
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        match self {
            Barrier::LogPolytope { a, b } => {
                let mut g = Vector::zeros(x.len());
                for i in 0..a.nrows() {
                    let row = a.row(i).transpose();
                    let slack = b[i] - row.dot(x);
                    if slack <= 0.0 {
                        return Err(Error::precondition("barrier gradient outside the domain"));
                    }
                    g += row / slack;
                }
                Ok(g)
            }
            Barrier::BallLog { rho } => {
                let slack = rho * rho - x.norm_squared();
                if slack <= 0.0 {
                    return Err(Error::precondition("barrier gradient outside the domain"));
                }
                Ok(x * (2.0 / slack))
            }
        }
    }

    pub fn hessian(&self, x: &Vector) -> Result<Matrix> {
        match self {
            Barrier::LogPolytope { a, b } => {
                let d = x.len();
                let mut h = Matrix::zeros(d, d);
                for i in 0..a.nrows() {
                    let row = a.row(i).transpose();
                    let slack = b[i] - row.dot(x);
                    if slack <= 0.0 {
                        return Err(Error::precondition("barrier Hessian outside the domain"));
                    }
                    h.ger(1.0 / (slack * slack), &row, &row, 1.0);
                }
                Ok(symmetrize(&h))
            }
            Barrier::BallLog { rho } => {
                let slack = rho * rho - x.norm_squared();
                if slack <= 0.0 {
                    return Err(Error::precondition("barrier Hessian outside the domain"));
                }
                let d = x.len();
                let mut h = Matrix::identity(d, d) * (2.0 / slack);
                h.ger(4.0 / (slack * slack), x, x, 1.0);
                Ok(symmetrize(&h))
            }
        }
    }
}

/// Objective with barrier structure: finite on an open domain, smooth there,
/// with explicit first and second derivatives.
pub trait BarrierObjective {
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Result<Vector>;
    fn hessian(&self, x: &Vector) -> Result<Matrix>;
}

impl BarrierObjective for Barrier {
    fn value(&self, x: &Vector) -> f64 {
        Barrier::value(self, x)
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        Barrier::gradient(self, x)
    }
    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        Barrier::hessian(self, x)
    }
}

/// Barrier plus a linear term and optionally a uniform quadratic, the shape
/// of every FTRL subproblem.
pub struct ShiftedBarrier<'a> {
    pub barrier: &'a Barrier,
    pub linear: Vector,
    /// Coefficient `q` of the `(q/2) ||x||^2` term.
    pub quad: f64,
}

impl BarrierObjective for ShiftedBarrier<'_> {
    fn value(&self, x: &Vector) -> f64 {
        self.barrier.value(x) + self.linear.dot(x) + 0.5 * self.quad * x.norm_squared()
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(self.barrier.gradient(x)? + &self.linear + x * self.quad)
    }
    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        let mut h = self.barrier.hessian(x)?;
        for i in 0..h.nrows() {
            h[(i, i)] += self.quad;
        }
        Ok(h)
    }
}

pub const NEWTON_TOL: f64 = 1e-9;

/// Damped Newton iteration `x+ = x - H^{-1} g / (1 + nu)` with decrement
/// `nu = ||g||_{H^{-1}}`, stopping at decrement `1e-9`.
///
/// The step has local norm `nu/(1+nu) < 1`, so iterates stay strictly inside
/// the domain of a self-concordant objective.
pub fn damped_newton(obj: &dyn BarrierObjective, x0: &Vector) -> Result<Vector> {
    damped_newton_capped(obj, x0, 200)
}

pub fn damped_newton_capped(obj: &dyn BarrierObjective, x0: &Vector, cap: usize) -> Result<Vector> {
    if !obj.value(x0).is_finite() {
        return Err(Error::precondition("damped Newton needs a strictly feasible start"));
    }
    let mut x = x0.clone();
    let mut nu = f64::INFINITY;
    for _ in 0..cap {
        let g = obj.gradient(&x)?;
        let h = obj.hessian(&x)?;
        let dir = solve_spd(&h, &g)?;
        nu = g.dot(&dir).max(0.0).sqrt();
        if nu <= NEWTON_TOL {
            return Ok(x);
        }
        x -= dir / (1.0 + nu);
    }
    Err(Error::numerical(format!(
        "damped Newton hit the iteration cap with decrement {nu:.3e}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec2;
    use approx::assert_relative_eq;

    #[test]
    fn interval_barrier_minimised_at_zero() {
        // -log(1 - x^2) on (-1, 1) via the ball barrier in d = 1.
        let b = Barrier::BallLog { rho: 1.0 };
        let x = damped_newton(&b, &Vector::from_element(1, 0.5)).unwrap();
        assert!(x[0].abs() <= 1e-9);
    }

    #[test]
    fn linear_tilt_satisfies_first_order_condition() {
        let b = Barrier::BallLog { rho: 1.0 };
        let obj = ShiftedBarrier { barrier: &b, linear: vec2(1.0, 0.0), quad: 0.0 };
        let x = damped_newton(&obj, &vec2(0.0, 0.0)).unwrap();
        let g = obj.gradient(&x).unwrap();
        assert!(g.norm() <= 1e-8, "grad residual {}", g.norm());
        // Minimiser is pushed away from the tilt direction.
        assert!(x[0] < 0.0);
    }

    #[test]
    fn starting_at_the_minimiser_returns_immediately() {
        let b = Barrier::BallLog { rho: 2.0 };
        let x = damped_newton(&b, &vec2(0.0, 0.0)).unwrap();
        assert_eq!(x, vec2(0.0, 0.0));
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let b = Barrier::BallLog { rho: 1.0 };
        assert!(damped_newton(&b, &vec2(2.0, 0.0)).is_err());
    }

    #[test]
    fn polytope_barrier_blows_up_at_the_boundary() {
        let body = crate::geometry::ConvexBody::cube(2, 1.0).unwrap();
        let b = Barrier::for_body(&body).unwrap();
        assert_relative_eq!(b.theta(), 4.0);
        let centre = vec2(0.0, 0.0);
        let near = vec2(1.0 - 1e-12, 0.0);
        assert!(b.value(&near) > b.value(&centre) + 20.0);
        assert!(b.value(&vec2(1.0, 0.0)).is_infinite());
        // Hessian positive-definite at interior probes.
        let h = b.hessian(&vec2(0.3, -0.7)).unwrap();
        assert!(crate::linalg::min_eigenvalue(&h) > 0.0);
    }

    #[test]
    fn box_body_gets_a_polytope_barrier() {
        let body = crate::geometry::ConvexBody::axis_box(
            Vector::from_vec(vec![-1.0, 0.0]),
            Vector::from_vec(vec![1.0, 2.0]),
        )
        .unwrap();
        let b = Barrier::for_body(&body).unwrap();
        assert_relative_eq!(b.theta(), 4.0);
        let x = damped_newton(&b, &vec2(0.5, 0.5)).unwrap();
        assert_relative_eq!(x[0], 0.0, epsilon = 1e-8);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-8);
    }
}
