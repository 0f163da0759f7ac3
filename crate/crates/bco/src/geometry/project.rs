//! Metric projection onto convex bodies.
//!
//! Closed forms short-circuit where they exist (radial for balls, clamping
//! for boxes under diagonal metrics, a one-dimensional dual root-find for
//! ellipsoids under any metric). The remaining cases run projected gradient
//! with Armijo backtracking over a Euclidean inner projection: clamping for
//! boxes, cyclic Dykstra over half-spaces for polytopes.

use super::{ConvexBody, Ellipsoid};
use crate::linalg::{quad_form, solve_spd, sym_eigenvalues, symmetrize};
use crate::{Error, Matrix, Result, Vector};

const PG_CAP: usize = 10_000;
const DYKSTRA_CAP: usize = 10_000;

pub fn project(body: &ConvexBody, y: &Vector, metric: &Matrix) -> Result<Vector> {
    let d = body.dim();
    if y.len() != d || metric.nrows() != d || metric.ncols() != d {
        return Err(Error::config("projection dimension mismatch"));
    }
    if body.contains(y) {
        return Ok(y.clone());
    }
    let metric = symmetrize(metric);
    match body {
        ConvexBody::Ball { dim, radius } => {
            if is_scaled_identity(&metric) {
                let n = y.norm();
                return Ok(if n == 0.0 { Vector::zeros(*dim) } else { y * (radius / n) });
            }
            let ball = Ellipsoid::new(Vector::zeros(*dim), Matrix::identity(*dim, *dim) * (radius * radius))?;
            project_ellipsoid(&ball, y, &metric)
        }
        ConvexBody::Box { lower, upper } => {
            if is_diagonal(&metric) {
                return Ok(clamp(y, lower, upper));
            }
            let inner = |p: &Vector| Ok(clamp(p, lower, upper));
            projected_gradient(y, &metric, inner, body)
        }
        ConvexBody::Polytope { a, b, .. } => {
            if is_scaled_identity(&metric) {
                return dykstra_polytope(a, b, y);
            }
            let inner = |p: &Vector| dykstra_polytope(a, b, p);
            projected_gradient(y, &metric, inner, body)
        }
        ConvexBody::Ellipsoid(e) => project_ellipsoid(e, y, &metric),
        ConvexBody::AffineImage { base, map } => {
            // ||L z + t - y||_M = ||z - z0||_{L^T M L} with z0 the pullback.
            let pulled_metric = map.linear.transpose() * &metric * &map.linear;
            let z0 = map.apply_inverse(y);
            let z = project(base, &z0, &pulled_metric)?;
            Ok(map.apply(&z))
        }
    }
}

fn is_diagonal(m: &Matrix) -> bool {
    let d = m.nrows();
    let scale = m.diagonal().amax().max(1e-300);
    for i in 0..d {
        for j in 0..d {
            if i != j && m[(i, j)].abs() > 1e-12 * scale {
                return false;
            }
        }
    }
    true
}

fn is_scaled_identity(m: &Matrix) -> bool {
    if !is_diagonal(m) {
        return false;
    }
    let diag = m.diagonal();
    let first = diag[0];
    diag.iter().all(|v| (v - first).abs() <= 1e-12 * first.abs().max(1e-300))
}

fn clamp(y: &Vector, lower: &Vector, upper: &Vector) -> Vector {
    Vector::from_iterator(
        y.len(),
        y.iter()
            .zip(lower.iter().zip(upper.iter()))
            .map(|(v, (l, u))| v.max(*l).min(*u)),
    )
}

/// Exact metric projection onto an ellipsoid via the dual root-find:
/// stationarity gives x(nu) = (M + nu W)^{-1} (M y + nu W c) with W the
/// shape inverse, and the constraint value is monotone in nu.
fn project_ellipsoid(e: &Ellipsoid, y: &Vector, metric: &Matrix) -> Result<Vector> {
    let w = e.shape_inverse();
    let violation = |x: &Vector| -> f64 { quad_form(w, &(x - &e.centre)) - 1.0 };
    if violation(y) <= 0.0 {
        return Ok(y.clone());
    }
    let my = metric * y;
    let wc = w * &e.centre;
    let x_at = |nu: f64| -> Result<Vector> {
        let lhs = metric + w * nu;
        solve_spd(&lhs, &(&my + &wc * nu))
    };
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut grow = 0;
    while violation(&x_at(hi)?) > 0.0 {
        lo = hi;
        hi *= 4.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::numerical("ellipsoid projection bracket failed"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if violation(&x_at(mid)?) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    x_at(hi)
}

/// Euclidean projection onto `{A x <= b}` by Dykstra's alternating scheme.
/// Each half-space projection is closed form, and the correction terms make
/// the cycle converge to the true projection rather than a mere feasible
/// point.
fn dykstra_polytope(a: &Matrix, b: &Vector, y: &Vector) -> Result<Vector> {
    let m = a.nrows();
    let mut x = y.clone();
    let mut corrections: Vec<Vector> = vec![Vector::zeros(y.len()); m];
    let norms2: Vec<f64> = (0..m).map(|i| a.row(i).norm_squared().max(1e-300)).collect();
    let scale = 1.0 + y.norm();
    for sweep in 0..DYKSTRA_CAP {
        let mut moved = 0.0f64;
        for i in 0..m {
            let z = &x + &corrections[i];
            let viol = (a.row(i) * &z)[0] - b[i];
            let newx = if viol > 0.0 {
                &z - a.row(i).transpose() * (viol / norms2[i])
            } else {
                z.clone()
            };
            corrections[i] = &z - &newx;
            moved += (&newx - &x).norm();
            x = newx;
        }
        if moved <= 1e-13 * scale {
            let residual = (a * &x - b).iter().fold(0.0f64, |acc, v| acc.max(*v));
            if residual <= 1e-9 * scale {
                return Ok(x);
            }
        }
        if sweep + 1 == DYKSTRA_CAP {
            let residual = (a * &x - b).iter().fold(0.0f64, |acc, v| acc.max(*v));
            return Err(Error::numerical(format!(
                "Dykstra projection stalled, residual {residual:.3e}"
            )));
        }
    }
    unreachable!()
}

/// Projected gradient with Armijo backtracking for `min 0.5||x-y||_M^2`
/// over the body, using a Euclidean inner projection oracle.
fn projected_gradient<F>(
    y: &Vector,
    metric: &Matrix,
    inner: F,
    body: &ConvexBody,
) -> Result<Vector>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let evals = sym_eigenvalues(metric);
    let lip = evals[evals.len() - 1].max(1e-300);
    let h = |x: &Vector| -> f64 { 0.5 * quad_form(metric, &(x - y)) };
    let mut x = inner(y)?;
    let scale = 1.0 + y.norm() + x.norm();
    let mut t = 1.0 / lip;
    for _ in 0..PG_CAP {
        let g = metric * (&x - y);
        // Fixed-point residual of the gradient mapping at the safe step.
        let fp = inner(&(&x - &g * (1.0 / lip)))?;
        if (&fp - &x).norm() <= 1e-11 * scale {
            debug_assert!(body.contains_tol(&x, 1e-9 * scale));
            return Ok(x);
        }
        t = (t * 2.0).min(1e6 / lip);
        let hx = h(&x);
        let mut accepted = None;
        for _ in 0..80 {
            let cand = inner(&(&x - &g * t))?;
            let diff = &cand - &x;
            if h(&cand) <= hx + g.dot(&diff) + diff.norm_squared() / (2.0 * t) + 1e-18 {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        x = accepted.ok_or_else(|| Error::numerical("Armijo backtracking failed"))?;
    }
    let g = metric * (&x - y);
    let fp = inner(&(&x - &g * (1.0 / lip)))?;
    let residual = (&fp - &x).norm();
    if residual <= 1e-8 * scale {
        return Ok(x);
    }
    Err(Error::numerical(format!(
        "projected gradient hit iteration cap, residual {residual:.3e}"
    )))
}
