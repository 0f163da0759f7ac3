//! Maximum-volume inscribed ellipsoid of a polytope.
//!
//! The programme is max log det(B) over centres c and shapes B subject to
//! the per-row constraints ||B^{1/2} a_i|| <= b_i - <a_i, c>. For a fixed
//! centre the optimal shape has the closed form B = (d G)^{-1} where G is
//! the optimal-design Gram matrix of the slack-scaled rows a_i / s_i(c),
//! so the ascent runs over the centre alone with the design solved exactly
//! at every step and its weights supplying the envelope gradient.

use super::{ConvexBody, Ellipsoid};
use crate::linalg::{d_optimal_design, inv_spd, logdet_spd, quad_form};
use crate::{Error, Matrix, Result, Vector};

const OUTER_CAP: usize = 300;
const DESIGN_TOL: f64 = 1e-8;
const DESIGN_CAP: usize = 20_000;

pub fn mvie(body: &ConvexBody) -> Result<Ellipsoid> {
    let ConvexBody::Polytope { a, b, interior } = body else {
        return Err(Error::Refused(
            "maximum-volume inscribed ellipsoid requires a polytope".into(),
        ));
    };
    let d = a.ncols();
    let m = a.nrows();
    let rows: Vec<Vector> = (0..m).map(|i| a.row(i).transpose()).collect();

    let slacks = |c: &Vector| -> Option<Vector> {
        let s = b - a * c;
        if s.iter().all(|v| *v > 0.0) {
            Some(s)
        } else {
            None
        }
    };

    struct Inner {
        value: f64,
        weights: Vec<f64>,
        gram_inv: Matrix,
    }
    // Fixed-centre solve: returns log det of the optimal shape and the
    // design data needed for the gradient.
    let solve_inner = |s: &Vector| -> Result<Inner> {
        let scaled: Vec<Vector> = rows.iter().zip(s.iter()).map(|(r, si)| r / *si).collect();
        let design = d_optimal_design(&scaled, DESIGN_TOL, DESIGN_CAP)?;
        if design.span_dim < d {
            return Err(Error::precondition("polytope rows do not span; body unbounded"));
        }
        let gram_inv = inv_spd(&design.design_matrix)?;
        let shape_logdet = -(d as f64) * (d as f64).ln() - logdet_spd(&design.design_matrix)?;
        Ok(Inner { value: shape_logdet, weights: design.weights, gram_inv })
    };

    // Envelope gradient of the centre objective at a solved design.
    let grad_from = |s: &Vector, inner: &Inner| -> Vector {
        let mut grad = Vector::zeros(d);
        for i in 0..m {
            let scaled = &rows[i] / s[i];
            let leverage = quad_form(&inner.gram_inv, &scaled);
            grad -= &rows[i] * (2.0 * inner.weights[i] * leverage / s[i]);
        }
        grad
    };

    let mut c = interior.clone();
    let mut s = slacks(&c).ok_or_else(|| Error::precondition("interior point lost feasibility"))?;
    let mut inner = solve_inner(&s)?;

    let mut converged = false;
    let mut last_improvement = f64::INFINITY;
    for _ in 0..OUTER_CAP {
        let grad = grad_from(&s, &inner);
        let gnorm = grad.norm();
        if gnorm <= 1e-8 * (1.0 + inner.value.abs()) {
            converged = true;
            break;
        }

        // Newton direction from a finite-difference Hessian of the envelope
        // gradient; plain ascent crawls on thin bodies. Falls back to the
        // gradient near the boundary or when the Hessian is indefinite.
        let mut direction = grad.clone();
        let h = 1e-5 * (1.0 + c.norm());
        let mut hess = Matrix::zeros(d, d);
        let mut have_hess = true;
        for j in 0..d {
            let mut cp = c.clone();
            cp[j] += h;
            let mut cm = c.clone();
            cm[j] -= h;
            let (Some(sp), Some(sm)) = (slacks(&cp), slacks(&cm)) else {
                have_hess = false;
                break;
            };
            let (Ok(ip), Ok(im)) = (solve_inner(&sp), solve_inner(&sm)) else {
                have_hess = false;
                break;
            };
            let col = (grad_from(&sp, &ip) - grad_from(&sm, &im)) / (2.0 * h);
            hess.column_mut(j).copy_from(&col);
        }
        if have_hess {
            let neg = (&hess + hess.transpose()) * -0.5;
            if let Ok(neg_inv) = inv_spd(&neg) {
                let p = &neg_inv * &grad;
                if p.dot(&grad) > 0.0 {
                    direction = p;
                }
            }
        }

        let slope = direction.dot(&grad);
        let mut t = 1.0;
        let mut accepted = false;
        let mut improvement = 0.0;
        for _ in 0..60 {
            let cand = &c + &direction * t;
            if let Some(sc) = slacks(&cand) {
                if let Ok(trial) = solve_inner(&sc) {
                    if trial.value >= inner.value + 0.25 * t * slope {
                        improvement = trial.value - inner.value;
                        c = cand;
                        s = sc;
                        inner = trial;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        last_improvement = improvement;
        // The inner designs carry value noise near their own tolerance, so
        // steps below that scale are indistinguishable from convergence.
        if !accepted || improvement <= 3e-8 * (1.0 + inner.value.abs()) {
            converged = true;
            break;
        }
    }
    // A slow crawl that ran out the cap is still usable; only an exit in
    // full stride is an error.
    if !converged && last_improvement > 1e-4 * (1.0 + inner.value.abs()) {
        return Err(Error::numerical(format!(
            "inscribed-ellipsoid ascent hit the iteration cap while still improving (log-volume {:.6})",
            inner.value
        )));
    }

    let mut shape = inner.gram_inv.clone() / d as f64;
    // Guard the row constraints against accumulated round-off.
    let mut worst: f64 = 0.0;
    for i in 0..m {
        let lhs = quad_form(&shape, &rows[i]).max(0.0).sqrt();
        worst = worst.max(lhs / s[i]);
    }
    if worst > 1.0 {
        shape /= worst * worst;
    }
    Ellipsoid::new(c, shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec2;
    use approx::assert_relative_eq;

    fn box_polytope(hx: f64, hy: f64) -> ConvexBody {
        let a = Matrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let b = Vector::from_column_slice(&[hx, hx, hy, hy]);
        ConvexBody::polytope(a, b).unwrap()
    }

    #[test]
    fn unit_square() {
        let e = mvie(&box_polytope(1.0, 1.0)).unwrap();
        assert!(e.centre.norm() < 1e-6);
        assert_relative_eq!(e.shape[(0, 0)], 1.0, max_relative = 1e-4);
        assert_relative_eq!(e.shape[(1, 1)], 1.0, max_relative = 1e-4);
        assert!(e.shape[(0, 1)].abs() < 1e-6);
    }

    #[test]
    fn stretched_box() {
        let e = mvie(&box_polytope(2.0, 1.0)).unwrap();
        assert!(e.centre.norm() < 1e-6);
        assert_relative_eq!(e.shape[(0, 0)], 4.0, max_relative = 1e-4);
        assert_relative_eq!(e.shape[(1, 1)], 1.0, max_relative = 1e-4);
    }

    #[test]
    fn simplex_gives_the_steiner_inellipse() {
        let a = Matrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 1.0]);
        let b = Vector::from_column_slice(&[0.0, 0.0, 1.0]);
        let body = ConvexBody::polytope(a, b).unwrap();
        let e = mvie(&body).unwrap();
        assert_relative_eq!(e.centre[0], 1.0 / 3.0, max_relative = 1e-3);
        assert_relative_eq!(e.centre[1], 1.0 / 3.0, max_relative = 1e-3);
        assert_relative_eq!(e.shape[(0, 0)], 1.0 / 9.0, max_relative = 1e-2);
        assert_relative_eq!(e.shape[(1, 1)], 1.0 / 9.0, max_relative = 1e-2);
        assert_relative_eq!(e.shape[(0, 1)], -1.0 / 18.0, max_relative = 1e-2);
        // Touches the edge midpoints characterise the Steiner inellipse.
        for mid in [vec2(0.5, 0.0), vec2(0.0, 0.5), vec2(0.5, 0.5)] {
            let diff = &mid - &e.centre;
            let v = quad_form(e.shape_inverse(), &diff);
            assert!((v - 1.0).abs() < 5e-2, "midpoint value {v}");
        }
    }

    #[test]
    fn refuses_non_polytopes() {
        let ball = ConvexBody::ball(2, 1.0).unwrap();
        assert!(mvie(&ball).is_err());
    }
}
