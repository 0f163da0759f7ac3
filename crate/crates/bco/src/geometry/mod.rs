//! Convex bodies and their services: membership, Minkowski functional,
//! support function, separation, metric projection, scaling, loss extension,
//! samplers and position estimates.
//!
//! A body is one of five representations. All of them are compact with
//! nonempty interior; polytopes additionally store a strictly feasible point
//! and are checked for boundedness at construction.

mod ellipsoid;
mod extend;
mod lp;
mod mvie;
mod project;
mod sample;

pub use ellipsoid::{shallow_cut_update, unit_ball_volume, Ellipsoid, ShallowCutOutcome};
pub use extend::{extension_query, ExtendedLoss};
pub use mvie::mvie;
pub use sample::{
    estimate_isotropic_transform, estimate_mean_width_polar, hit_and_run, sample_gaussian,
    sample_uniform_ball, sample_uniform_sphere, MeanWidthEstimate,
};

use crate::linalg::quad_form;
use crate::{Error, Matrix, Result, Vector};

/// Closed half-space `{y : <y - anchor, normal> <= 0}`.
#[derive(Debug, Clone)]
pub struct HalfSpace {
    pub anchor: Vector,
    pub normal: Vector,
}

impl HalfSpace {
    pub fn new(anchor: Vector, normal: Vector) -> Result<Self> {
        if normal.norm() == 0.0 {
            return Err(Error::precondition("half-space normal must be nonzero"));
        }
        Ok(HalfSpace { anchor, normal })
    }

    pub fn contains(&self, y: &Vector) -> bool {
        self.normal.dot(&(y - &self.anchor)) <= 0.0
    }

    /// Signed margin; nonpositive inside.
    pub fn margin(&self, y: &Vector) -> f64 {
        self.normal.dot(&(y - &self.anchor))
    }
}

/// Invertible affine map `x -> L x + t`.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub linear: Matrix,
    pub offset: Vector,
    inverse: Matrix,
}

impl AffineMap {
    pub fn new(linear: Matrix, offset: Vector) -> Result<Self> {
        let inverse = linear
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::precondition("affine map must be invertible"))?;
        if !inverse.iter().all(|v| v.is_finite()) {
            return Err(Error::numerical("affine inverse is not finite"));
        }
        Ok(AffineMap { linear, offset, inverse })
    }

    pub fn identity(dim: usize) -> Self {
        AffineMap {
            linear: Matrix::identity(dim, dim),
            offset: Vector::zeros(dim),
            inverse: Matrix::identity(dim, dim),
        }
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        &self.linear * x + &self.offset
    }

    pub fn apply_inverse(&self, y: &Vector) -> Vector {
        &self.inverse * (y - &self.offset)
    }

    pub fn compose(&self, inner: &AffineMap) -> Self {
        AffineMap {
            linear: &self.linear * &inner.linear,
            offset: &self.linear * &inner.offset + &self.offset,
            inverse: &inner.inverse * &self.inverse,
        }
    }

    pub fn inverse_map(&self) -> Self {
        AffineMap {
            linear: self.inverse.clone(),
            offset: -(&self.inverse * &self.offset),
            inverse: self.linear.clone(),
        }
    }
}

/// A convex body in one of five concrete representations.
#[derive(Debug, Clone)]
pub enum ConvexBody {
    /// Euclidean ball of `radius` centred at the origin.
    Ball { dim: usize, radius: f64 },
    /// Axis-aligned box `[lower, upper]`.
    Box { lower: Vector, upper: Vector },
    /// `{x : A x <= b}` with a stored strictly feasible point.
    Polytope { a: Matrix, b: Vector, interior: Vector },
    Ellipsoid(Ellipsoid),
    /// Image `T(base)` of another body under an invertible affine map.
    AffineImage { base: Box<ConvexBody>, map: AffineMap },
}

/// Default slack accepted by membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

impl ConvexBody {
    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 || radius <= 0.0 {
            return Err(Error::config("ball needs dim >= 1 and radius > 0"));
        }
        Ok(ConvexBody::Ball { dim, radius })
    }

    pub fn axis_box(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() == 0 {
            return Err(Error::config("box bounds must have equal positive length"));
        }
        if !lower.iter().zip(upper.iter()).all(|(l, u)| l < u) {
            return Err(Error::config("box needs lower < upper in every coordinate"));
        }
        Ok(ConvexBody::Box { lower, upper })
    }

    /// Symmetric cube `[-h, h]^d`.
    pub fn cube(dim: usize, h: f64) -> Result<Self> {
        Self::axis_box(
            Vector::from_element(dim, -h),
            Vector::from_element(dim, h),
        )
    }

    /// Polytope `{Ax <= b}`. Finds and stores a strictly feasible point
    /// (the Chebyshev centre) and rejects unbounded row systems.
    pub fn polytope(a: Matrix, b: Vector) -> Result<Self> {
        if a.nrows() != b.len() || a.nrows() == 0 {
            return Err(Error::config("polytope needs matching A rows and b entries"));
        }
        let interior = lp::chebyshev_centre(&a, &b)?;
        let body = ConvexBody::Polytope { a, b, interior };
        body.validate_bounded()?;
        Ok(body)
    }

    /// Polytope with a caller-supplied strictly feasible point.
    pub fn polytope_with_interior(a: Matrix, b: Vector, interior: Vector) -> Result<Self> {
        let slack = &b - &a * &interior;
        if !slack.iter().all(|s| *s > 0.0) {
            return Err(Error::config("supplied interior point is not strictly feasible"));
        }
        let body = ConvexBody::Polytope { a, b, interior };
        body.validate_bounded()?;
        Ok(body)
    }

    pub fn ellipsoid(centre: Vector, shape: Matrix) -> Result<Self> {
        Ok(ConvexBody::Ellipsoid(Ellipsoid::new(centre, shape)?))
    }

    pub fn affine_image(base: ConvexBody, map: AffineMap) -> Result<Self> {
        if base.dim() != map.offset.len() {
            return Err(Error::config("affine map dimension mismatch"));
        }
        Ok(ConvexBody::AffineImage { base: Box::new(base), map })
    }

    fn validate_bounded(&self) -> Result<()> {
        if let ConvexBody::Polytope { a, b, interior } = self {
            let d = a.ncols();
            for j in 0..d {
                for sign in [1.0, -1.0] {
                    let mut c = Vector::zeros(d);
                    c[j] = sign;
                    match lp::maximise(a, b, interior, &c)? {
                        lp::LpOutcome::Optimal { .. } => {}
                        lp::LpOutcome::Unbounded => {
                            return Err(Error::config(format!(
                                "polytope unbounded in coordinate {j}"
                            )))
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Ball { dim, .. } => *dim,
            ConvexBody::Box { lower, .. } => lower.len(),
            ConvexBody::Polytope { a, .. } => a.ncols(),
            ConvexBody::Ellipsoid(e) => e.centre.len(),
            ConvexBody::AffineImage { base, .. } => base.dim(),
        }
    }

    /// A strictly interior point, used to seed samplers and solvers.
    pub fn interior_point(&self) -> Vector {
        match self {
            ConvexBody::Ball { dim, .. } => Vector::zeros(*dim),
            ConvexBody::Box { lower, upper } => (lower + upper) * 0.5,
            ConvexBody::Polytope { interior, .. } => interior.clone(),
            ConvexBody::Ellipsoid(e) => e.centre.clone(),
            ConvexBody::AffineImage { base, map } => map.apply(&base.interior_point()),
        }
    }

    pub fn contains(&self, x: &Vector) -> bool {
        self.contains_tol(x, MEMBERSHIP_TOL)
    }

    pub fn contains_tol(&self, x: &Vector, tol: f64) -> bool {
        match self {
            ConvexBody::Ball { radius, .. } => x.norm() <= radius + tol,
            ConvexBody::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            ConvexBody::Polytope { a, b, .. } => {
                let r = a * x - b;
                r.iter().all(|v| *v <= tol)
            }
            ConvexBody::Ellipsoid(e) => e.contains_tol(x, tol),
            ConvexBody::AffineImage { base, map } => base.contains_tol(&map.apply_inverse(x), tol),
        }
    }

    /// Radius of the smallest origin-centred ball containing the body.
    pub fn outer_radius(&self) -> f64 {
        match self {
            ConvexBody::Ball { radius, .. } => *radius,
            ConvexBody::Box { lower, upper } => lower
                .iter()
                .zip(upper.iter())
                .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            _ => {
                // Support probes over coordinate-sphere directions give an upper
                // bound within sqrt(d); tighten with random directions.
                let d = self.dim();
                let mut r: f64 = 0.0;
                for j in 0..d {
                    for sign in [1.0, -1.0] {
                        let mut u = Vector::zeros(d);
                        u[j] = sign;
                        r = r.max(self.support_function(&u).abs());
                    }
                }
                r * (d as f64).sqrt()
            }
        }
    }

    /// Euclidean diameter, exact for balls and boxes, an upper bound otherwise.
    pub fn diameter(&self) -> f64 {
        match self {
            ConvexBody::Ball { radius, .. } => 2.0 * radius,
            ConvexBody::Box { lower, upper } => (upper - lower).norm(),
            _ => 2.0 * self.outer_radius(),
        }
    }

    /// Minkowski functional `pi(x) = inf { t > 0 : x in tK }`.
    ///
    /// Requires the origin strictly inside the body. Closed forms exist for
    /// everything except affine images, which fall back to bisection on the
    /// membership predicate at relative tolerance 1e-10.
    pub fn minkowski_functional(&self, x: &Vector) -> Result<f64> {
        let zero = Vector::zeros(self.dim());
        if !self.contains_tol(&zero, -1e-12) {
            return Err(Error::config("minkowski functional needs 0 in the interior"));
        }
        Ok(match self {
            ConvexBody::Ball { radius, .. } => x.norm() / radius,
            ConvexBody::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .map(|(v, (l, u))| {
                    if *v > 0.0 {
                        v / u
                    } else if *v < 0.0 {
                        v / l
                    } else {
                        0.0
                    }
                })
                .fold(0.0, f64::max),
            ConvexBody::Polytope { a, b, .. } => {
                let ax = a * x;
                ax.iter()
                    .zip(b.iter())
                    .map(|(num, den)| num / den)
                    .fold(0.0, f64::max)
            }
            ConvexBody::Ellipsoid(e) => {
                // x/t on the boundary solves a quadratic in s = 1/t.
                let w = e.shape_inverse();
                let qa = quad_form(&w, x);
                if qa == 0.0 {
                    return Ok(0.0);
                }
                let qb = (w * &e.centre).dot(x);
                let qc = quad_form(&w, &e.centre) - 1.0;
                // qc < 0 since 0 is interior; take the positive root.
                let disc = (qb * qb - qa * qc).max(0.0).sqrt();
                let s_plus = (qb + disc) / qa;
                1.0 / s_plus
            }
            ConvexBody::AffineImage { .. } => bisect_gauge(self, x),
        })
    }

    /// Support function `h(u) = sup_{x in K} <u, x>`.
    pub fn support_function(&self, u: &Vector) -> f64 {
        match self {
            ConvexBody::Ball { radius, .. } => radius * u.norm(),
            ConvexBody::Box { lower, upper } => u
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .map(|(c, (l, u))| (c * l).max(c * u))
                .sum(),
            ConvexBody::Polytope { a, b, interior } => match lp::maximise(a, b, interior, u) {
                Ok(lp::LpOutcome::Optimal { value, .. }) => value,
                // Boundedness was validated at construction.
                _ => f64::INFINITY,
            },
            ConvexBody::Ellipsoid(e) => e.centre.dot(u) + quad_form(&e.shape, u).max(0.0).sqrt(),
            ConvexBody::AffineImage { base, map } => {
                map.offset.dot(u) + base.support_function(&(map.linear.transpose() * u))
            }
        }
    }

    /// Maximiser attaining the support function, where cheaply available.
    pub fn support_point(&self, u: &Vector) -> Result<Vector> {
        match self {
            ConvexBody::Ball { dim, radius } => {
                let n = u.norm();
                Ok(if n == 0.0 {
                    Vector::zeros(*dim)
                } else {
                    u * (*radius / n)
                })
            }
            ConvexBody::Box { lower, upper } => Ok(Vector::from_iterator(
                lower.len(),
                u.iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(c, (l, u))| if *c >= 0.0 { *u } else { *l }),
            )),
            ConvexBody::Polytope { a, b, interior } => match lp::maximise(a, b, interior, u)? {
                lp::LpOutcome::Optimal { point, .. } => Ok(point),
                lp::LpOutcome::Unbounded => Err(Error::numerical("unbounded support")),
            },
            ConvexBody::Ellipsoid(e) => {
                let su = &e.shape * u;
                let denom = quad_form(&e.shape, u).max(1e-300).sqrt();
                Ok(&e.centre + su / denom)
            }
            ConvexBody::AffineImage { base, map } => {
                let inner = base.support_point(&(map.linear.transpose() * u))?;
                Ok(map.apply(&inner))
            }
        }
    }

    /// Separation oracle: `None` inside, otherwise a half-space containing
    /// the body with `x` on its boundary or outside.
    pub fn separate(&self, x: &Vector) -> Option<HalfSpace> {
        if self.contains(x) {
            return None;
        }
        let hs = match self {
            ConvexBody::Ball { radius, .. } => {
                let n = x.norm();
                let normal = x / n;
                HalfSpace { anchor: &normal * *radius, normal }
            }
            ConvexBody::Box { lower, upper } => {
                let mut best = (0usize, 0.0f64, 0.0f64);
                for (j, v) in x.iter().enumerate() {
                    let over = v - upper[j];
                    let under = lower[j] - v;
                    if over > best.1 {
                        best = (j, over, 1.0);
                    }
                    if under > best.1 {
                        best = (j, under, -1.0);
                    }
                }
                let (j, _, sign) = best;
                let mut normal = Vector::zeros(x.len());
                normal[j] = sign;
                let mut anchor = x.clone();
                anchor[j] = if sign > 0.0 { upper[j] } else { lower[j] };
                HalfSpace { anchor, normal }
            }
            ConvexBody::Polytope { a, b, .. } => {
                let residual = a * x - b;
                let (mut row, mut worst) = (0usize, f64::NEG_INFINITY);
                for (i, r) in residual.iter().enumerate() {
                    let scaled = r / a.row(i).norm().max(1e-300);
                    if scaled > worst {
                        worst = scaled;
                        row = i;
                    }
                }
                let normal: Vector = a.row(row).transpose();
                let anchor = x - &normal * (residual[row] / normal.norm_squared());
                HalfSpace { anchor, normal }
            }
            ConvexBody::Ellipsoid(e) => {
                let w = e.shape_inverse();
                let diff = x - &e.centre;
                let dist = quad_form(&w, &diff).sqrt();
                let anchor = &e.centre + &diff / dist;
                let normal = w * &diff;
                HalfSpace { anchor, normal }
            }
            ConvexBody::AffineImage { base, map } => {
                let inner = base.separate(&map.apply_inverse(x))?;
                HalfSpace {
                    anchor: map.apply(&inner.anchor),
                    normal: &map.inverse.transpose() * &inner.normal,
                }
            }
        };
        Some(hs)
    }

    /// Scale the body by `1 - eps` about the origin.
    pub fn shrink(&self, eps: f64) -> Result<ConvexBody> {
        if !(0.0..1.0).contains(&eps) || eps == 0.0 {
            return Err(Error::config("shrink needs eps in (0,1)"));
        }
        let zero = Vector::zeros(self.dim());
        if !self.contains_tol(&zero, -1e-12) {
            return Err(Error::config("shrink needs 0 in the interior"));
        }
        let s = 1.0 - eps;
        Ok(match self {
            ConvexBody::Ball { dim, radius } => ConvexBody::Ball { dim: *dim, radius: radius * s },
            ConvexBody::Box { lower, upper } => ConvexBody::Box {
                lower: lower * s,
                upper: upper * s,
            },
            ConvexBody::Polytope { a, b, interior } => ConvexBody::Polytope {
                a: a.clone(),
                b: b * s,
                interior: interior * s,
            },
            ConvexBody::Ellipsoid(e) => {
                ConvexBody::Ellipsoid(Ellipsoid::new(&e.centre * s, &e.shape * (s * s))?)
            }
            // (1-eps)(L B + t) = (sL) B + st, so the base is untouched.
            ConvexBody::AffineImage { base, map } => ConvexBody::AffineImage {
                base: base.clone(),
                map: AffineMap {
                    linear: &map.linear * s,
                    offset: &map.offset * s,
                    inverse: &map.inverse / s,
                },
            },
        })
    }

    /// Metric projection `argmin_{x in K} ||x - y||_metric`.
    pub fn project(&self, y: &Vector, metric: &Matrix) -> Result<Vector> {
        project::project(self, y, metric)
    }

    /// Euclidean projection.
    pub fn project_euclidean(&self, y: &Vector) -> Result<Vector> {
        let d = self.dim();
        project::project(self, y, &Matrix::identity(d, d))
    }

    /// Endpoints `(t_lo, t_hi)` of `{t : x + t u in K}` for interior `x`.
    pub fn chord(&self, x: &Vector, u: &Vector) -> Result<(f64, f64)> {
        sample::chord(self, x, u)
    }
}

fn bisect_gauge(body: &ConvexBody, x: &Vector) -> f64 {
    if x.norm() == 0.0 {
        return 0.0;
    }
    // Bracket: double t until x/t is a member, then bisect.
    let mut hi = 1.0;
    let mut grow = 0;
    while !body.contains_tol(&(x / hi), 0.0) {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return f64::INFINITY;
        }
    }
    let mut lo = hi / 2.0;
    while body.contains_tol(&(x / lo), 0.0) {
        lo /= 2.0;
        if lo < 1e-300 {
            return 0.0;
        }
    }
    for _ in 0..200 {
        if (hi - lo) <= 1e-10 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if body.contains_tol(&(x / mid), 0.0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Convenience free function mirroring the method.
pub fn minkowski_functional(body: &ConvexBody, x: &Vector) -> Result<f64> {
    body.minkowski_functional(x)
}

pub fn support_function(body: &ConvexBody, u: &Vector) -> f64 {
    body.support_function(u)
}

pub fn separate(body: &ConvexBody, x: &Vector) -> Option<HalfSpace> {
    body.separate(x)
}

pub fn project(body: &ConvexBody, y: &Vector, metric: &Matrix) -> Result<Vector> {
    body.project(y, metric)
}

pub fn shrink(body: &ConvexBody, eps: f64) -> Result<ConvexBody> {
    body.shrink(eps)
}
