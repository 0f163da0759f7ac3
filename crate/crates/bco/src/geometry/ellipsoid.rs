//! Ellipsoids `E(c, A) = { x : (x-c)^T A^{-1} (x-c) <= 1 }` and the
//! shallow-cut update used by the ellipsoid method.

use crate::linalg::{cholesky_jitter, inv_spd, logdet_spd, quad_form, symmetrize};
use crate::{Error, Matrix, Result, Vector};

#[derive(Debug, Clone)]
pub struct Ellipsoid {
    pub centre: Vector,
    /// Shape matrix `A` (symmetric positive definite).
    pub shape: Matrix,
    shape_inv: Matrix,
}

impl Ellipsoid {
    pub fn new(centre: Vector, shape: Matrix) -> Result<Self> {
        if shape.nrows() != centre.len() || shape.ncols() != centre.len() {
            return Err(Error::config("ellipsoid shape must be d x d"));
        }
        let shape = symmetrize(&shape);
        cholesky_jitter(&shape)
            .map_err(|_| Error::precondition("ellipsoid shape must be positive definite"))?;
        let shape_inv = inv_spd(&shape)?;
        Ok(Ellipsoid { centre, shape, shape_inv })
    }

    pub fn unit_ball(dim: usize) -> Self {
        Ellipsoid {
            centre: Vector::zeros(dim),
            shape: Matrix::identity(dim, dim),
            shape_inv: Matrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.centre.len()
    }

    pub fn shape_inverse(&self) -> &Matrix {
        &self.shape_inv
    }

    pub fn contains_tol(&self, x: &Vector, tol: f64) -> bool {
        let diff = x - &self.centre;
        // Tolerance acts on the A^{-1}-norm so it scales with the ellipsoid.
        quad_form(&self.shape_inv, &diff).max(0.0).sqrt() <= 1.0 + tol
    }

    /// `log vol(E) - log vol(unit ball)` so ratios stay finite in high dim.
    pub fn log_volume_ratio_to_ball(&self) -> f64 {
        0.5 * logdet_spd(&self.shape).unwrap_or(f64::NEG_INFINITY)
    }

    pub fn volume(&self) -> f64 {
        (self.log_volume_ratio_to_ball() + unit_ball_volume(self.dim()).ln()).exp()
    }
}

/// Volume of the d-dimensional Euclidean unit ball.
pub fn unit_ball_volume(dim: usize) -> f64 {
    // pi^{d/2} / Gamma(d/2 + 1) via the half-integer recursion.
    let d = dim as f64;
    let half = d / 2.0;
    let log_gamma = ln_gamma(half + 1.0);
    (half * std::f64::consts::PI.ln() - log_gamma).exp()
}

// Lanczos approximation, accurate to ~1e-13 for positive arguments.
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection keeps the recursion in the stable half-line.
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().ln()
            - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Outcome of a shallow-cut step.
#[derive(Debug, Clone)]
pub enum ShallowCutOutcome {
    /// Replacement ellipsoid containing `E \cap {x : <g, x - a> <= 0}`.
    Updated(Ellipsoid),
    /// Cut too shallow to make progress; the input is returned unchanged.
    Unchanged(Ellipsoid),
    /// The half-space excludes the whole ellipsoid.
    Infeasible,
}

/// Shallow-cut ellipsoid update for the kept half-space
/// `H = {y : <g, y - anchor> <= 0}`.
///
/// The cut depth is `lambda = <g, centre - anchor> / ||g||_A`, positive when
/// the ellipsoid centre violates the cut. `lambda >= 1` proves `E cap H` is
/// empty, `lambda <= -1/d` keeps the whole minimum-volume ellipsoid unchanged,
/// and `lambda in (-1/d, 1)` produces the closed-form replacement. For
/// `lambda in (-1/d, 1/d)` the volume shrinks by at least
/// `exp(-(1 - d lambda)^2 / (5 d))`.
pub fn shallow_cut_update(e: &Ellipsoid, g: &Vector, anchor: &Vector) -> Result<ShallowCutOutcome> {
    let d = e.dim();
    if g.len() != d || anchor.len() != d {
        return Err(Error::config("cut dimension mismatch"));
    }
    let gnorm_a = quad_form(&e.shape, g).max(0.0).sqrt();
    if gnorm_a == 0.0 {
        return Err(Error::precondition("cut normal must be nonzero"));
    }
    let lambda = g.dot(&(&e.centre - anchor)) / gnorm_a;
    if lambda >= 1.0 {
        return Ok(ShallowCutOutcome::Infeasible);
    }
    if lambda < -1.0 {
        return Ok(ShallowCutOutcome::Unchanged(e.clone()));
    }
    let df = d as f64;
    if d == 1 {
        // Interval case: keep the sub-interval on the feasible side.
        let r = e.shape[(0, 0)].sqrt();
        let c = e.centre[0];
        let (lo, hi) = if g[0] > 0.0 {
            (c - r, (c + r).min(anchor[0]))
        } else {
            ((c - r).max(anchor[0]), c + r)
        };
        let nc = 0.5 * (lo + hi);
        let nr = (0.5 * (hi - lo)).max(1e-300);
        return Ok(ShallowCutOutcome::Updated(Ellipsoid::new(
            Vector::from_element(1, nc),
            Matrix::from_element(1, 1, nr * nr),
        )?));
    }
    if lambda <= -1.0 / df {
        return Ok(ShallowCutOutcome::Unchanged(e.clone()));
    }
    let eta = (&e.shape * g) / gnorm_a;
    let centre = &e.centre - &eta * ((1.0 + df * lambda) / (df + 1.0));
    let scale = df * df * (1.0 - lambda * lambda) / (df * df - 1.0);
    let rank1 = 2.0 * (1.0 + df * lambda) / ((df + 1.0) * (1.0 + lambda));
    let mut shape = &e.shape - (&eta * eta.transpose()) * rank1;
    shape *= scale;
    Ok(ShallowCutOutcome::Updated(Ellipsoid::new(centre, shape)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec2;
    use approx::assert_relative_eq;

    #[test]
    fn unit_ball_volumes_match_closed_forms() {
        assert_relative_eq!(unit_ball_volume(1), 2.0, max_relative = 1e-12);
        assert_relative_eq!(unit_ball_volume(2), std::f64::consts::PI, max_relative = 1e-12);
        assert_relative_eq!(
            unit_ball_volume(3),
            4.0 / 3.0 * std::f64::consts::PI,
            max_relative = 1e-12
        );
    }

    #[test]
    fn central_cut_on_disc_matches_hand_computation() {
        let e = Ellipsoid::unit_ball(2);
        let g = vec2(1.0, 0.0);
        let a = vec2(0.0, 0.0);
        let out = shallow_cut_update(&e, &g, &a).unwrap();
        let ShallowCutOutcome::Updated(ne) = out else {
            panic!("central cut must update");
        };
        assert_relative_eq!(ne.centre[0], -1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(ne.centre[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(ne.shape[(0, 0)], 4.0 / 9.0, max_relative = 1e-12);
        assert_relative_eq!(ne.shape[(1, 1)], 4.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(ne.shape[(0, 1)], 0.0, epsilon = 1e-12);
        let log_ratio = ne.log_volume_ratio_to_ball() - e.log_volume_ratio_to_ball();
        assert_relative_eq!(log_ratio.exp(), (16.0f64 / 27.0).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn deep_and_shallow_extremes() {
        let e = Ellipsoid::unit_ball(2);
        let g = vec2(1.0, 0.0);
        // Kept side {y1 <= -2} misses the ball entirely.
        assert!(matches!(
            shallow_cut_update(&e, &g, &vec2(-2.0, 0.0)).unwrap(),
            ShallowCutOutcome::Infeasible
        ));
        // Kept side {y1 <= 2} contains the ball.
        assert!(matches!(
            shallow_cut_update(&e, &g, &vec2(2.0, 0.0)).unwrap(),
            ShallowCutOutcome::Unchanged(_)
        ));
        // Kept side {y1 <= 0.9}: cut is too shallow to beat the whole ball.
        assert!(matches!(
            shallow_cut_update(&e, &g, &vec2(0.9, 0.0)).unwrap(),
            ShallowCutOutcome::Unchanged(_)
        ));
    }

    #[test]
    fn deep_cut_still_contains_the_cap() {
        // Kept side {y1 <= -0.3}: a deep cut. Sample the cap and check
        // containment in the replacement ellipsoid.
        let e = Ellipsoid::unit_ball(2);
        let g = vec2(1.0, 0.0);
        let out = shallow_cut_update(&e, &g, &vec2(-0.3, 0.0)).unwrap();
        let ShallowCutOutcome::Updated(ne) = out else {
            panic!("deep cut must update");
        };
        let m = 40;
        for i in 0..m {
            for j in 0..m {
                let x = -1.0 + 2.0 * (i as f64 + 0.5) / m as f64;
                let y = -1.0 + 2.0 * (j as f64 + 0.5) / m as f64;
                let p = vec2(x, y);
                if p.norm() <= 1.0 && x <= -0.3 {
                    assert!(ne.contains_tol(&p, 1e-9), "cap point escaped: {p:?}");
                }
            }
        }
        assert!(ne.log_volume_ratio_to_ball() < e.log_volume_ratio_to_ball());
    }
}
