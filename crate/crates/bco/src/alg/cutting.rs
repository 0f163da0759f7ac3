//! Cutting-plane solvers driven by noisy zeroth-order comparisons.
//!
//! The stack has three layers. `inf_run` hunts for a prior sample whose
//! comparison-kernel mean is not much below zero, spending more draws the
//! longer it fails. `cut` combines that search with a sphere-weighted
//! gradient estimate of the optimistic surrogate to produce one halfspace
//! that keeps every clearly-better point. Three localisation drivers then
//! iterate cuts to a shortlist of centres and settle the winner by uniform
//! best-arm identification: `cog_run` (near-isotropic rounding), the
//! inscribed-ellipsoid method, and a shallow-cut ellipsoid method that
//! handles infeasible centres through separation and an extended loss.

use std::f64::consts::E;

use crate::geometry::{
    estimate_isotropic_transform, mvie, sample_uniform_ball, sample_uniform_sphere,
    shallow_cut_update, unit_ball_volume, AffineMap, ConvexBody, Ellipsoid, ExtendedLoss,
    HalfSpace, ShallowCutOutcome,
};
use crate::linalg::{inv_sqrt_spd, quad_form};
use crate::losses::LossOracle;
use crate::rng::Rng;
use crate::{Error, Matrix, Result, Vector};

/// Shared tunables for the cutting-plane stack.
///
/// `confidence_scale` rescales the noise level the concentration tunings
/// assume; sample counts grow with its square. Values below one buy cheaper
/// searches at reduced coverage while leaving every accuracy, confidence and
/// dimension dependence intact, and one reproduces the listed constants.
#[derive(Debug, Clone)]
pub struct CutParams {
    pub confidence_scale: f64,
    /// Cap on kernel draws within a single infimum search.
    pub inf_cap: u64,
    /// Optional override shortening a driver's iteration schedule.
    pub max_iterations: Option<usize>,
}

impl Default for CutParams {
    fn default() -> Self {
        CutParams {
            confidence_scale: 1.0,
            inf_cap: 100_000_000,
            max_iterations: None,
        }
    }
}

impl CutParams {
    fn validate(&self) -> Result<()> {
        if !(self.confidence_scale > 0.0 && self.confidence_scale.is_finite()) {
            return Err(Error::config("confidence scale must be positive and finite"));
        }
        if self.inf_cap == 0 {
            return Err(Error::config("infimum search needs a nonzero budget"));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::config("iteration override must be at least one"));
        }
        Ok(())
    }
}

fn validate_accuracy(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::config("accuracy must be positive and finite"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config("failure probability must lie in (0, 1)"));
    }
    Ok(())
}

fn ceil_count(raw: f64) -> u64 {
    if !raw.is_finite() {
        return u64::MAX;
    }
    raw.ceil().max(1.0) as u64
}

/// Largest slack index the infimum search sweeps per prior sample.
pub fn inf_k_max(eps: f64) -> usize {
    2 + (2.0 / eps).floor() as usize
}

/// Accepted sample of the infimum search, with draw accounting.
#[derive(Debug, Clone)]
pub struct InfRun {
    pub point: Vector,
    pub kernel_samples: u64,
    pub rho_samples: u64,
}

/// Searches for `x ~ rho` whose kernel mean is confidently at least `-eps`.
///
/// Provided the prior mean of the kernel is nonnegative and single draws are
/// `sigma`-subgaussian around their mean, the returned point satisfies
/// `h(x) >= -eps` with probability at least `1 - delta`. The schedule
/// interleaves prior samples and slack levels so the expected number of
/// kernel draws stays of order `sigma^2 log(1/delta) / eps^2`; `cap` bounds
/// the draws of one invocation, with a budget error on exhaustion so callers
/// can fall back on points gathered elsewhere.
pub fn inf_run(
    eps: f64,
    delta: f64,
    sigma: f64,
    cap: u64,
    mut rho: impl FnMut(&mut Rng) -> Vector,
    mut kappa: impl FnMut(&Vector, &mut Rng) -> Result<f64>,
    rng: &mut Rng,
) -> Result<InfRun> {
    validate_accuracy(eps, delta)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::config("kernel scale must be positive and finite"));
    }
    if cap == 0 {
        return Err(Error::config("infimum search needs a nonzero budget"));
    }
    let k_max = inf_k_max(eps);
    let mut kernel_samples: u64 = 0;
    let mut rho_samples: u64 = 0;
    let mut m = 1.0f64;
    loop {
        for k in 1..=k_max {
            let kf = k as f64;
            // Failure budget delta/b over the (m, k) grid sums below delta.
            let blocks = kf * (kf + 1.0) * m * (m + 1.0);
            let log_term = (2.0 * blocks / delta).ln();
            let n = ceil_count(64.0 * sigma * sigma * log_term / (eps * eps * kf * kf));
            if kernel_samples.saturating_add(n) > cap {
                return Err(Error::Budget(format!(
                    "infimum search wants {n} more kernel draws but only {} of {cap} remain",
                    cap - kernel_samples
                )));
            }
            let x = rho(rng);
            rho_samples += 1;
            let mut total = 0.0;
            for _ in 0..n {
                total += kappa(&x, rng)?;
            }
            kernel_samples += n;
            let mean = total / n as f64;
            let width = 2.0 * sigma * (log_term / n as f64).sqrt();
            if mean - width >= -eps {
                return Ok(InfRun { point: x, kernel_samples, rho_samples });
            }
        }
        m += 1.0;
    }
}

/// Winner of a uniform-allocation identification round.
#[derive(Debug, Clone)]
pub struct BaiRun {
    pub point: Vector,
    pub index: usize,
    pub means: Vec<f64>,
    pub pulls_per_arm: u64,
}

/// Pulls every candidate `ceil(16 log(2m/delta) / eps^2)` times and keeps the
/// empirical minimiser, which is `eps`-optimal among the candidates with
/// probability at least `1 - delta`.
pub fn bai(
    oracle: &mut LossOracle,
    eps: f64,
    delta: f64,
    candidates: &[Vector],
    params: &CutParams,
) -> Result<BaiRun> {
    params.validate()?;
    validate_accuracy(eps, delta)?;
    if candidates.is_empty() {
        return Err(Error::config("identification needs at least one candidate"));
    }
    let m = candidates.len() as f64;
    let cs = params.confidence_scale;
    let pulls = ceil_count(cs * cs * 16.0 * (2.0 * m / delta).ln() / (eps * eps));
    let mut means = Vec::with_capacity(candidates.len());
    for x in candidates {
        let mut total = 0.0;
        for _ in 0..pulls {
            let t = oracle.query_count() as usize;
            total += oracle.query(t, x);
        }
        means.push(total / pulls as f64);
    }
    let mut index = 0;
    for (i, v) in means.iter().enumerate() {
        if *v < means[index] {
            index = i;
        }
    }
    Ok(BaiRun { point: candidates[index].clone(), index, means, pulls_per_arm: pulls })
}

/// One comparison-kernel draw at `x` from three queries: a perturbed point
/// halfway toward `x`, a matched baseline perturbation, and the origin.
/// Unbiased for the optimistic-surrogate gap `s(x) - f(0)`.
fn kappa_core(
    query: &mut impl FnMut(&Vector) -> Result<f64>,
    x: &Vector,
    rng: &mut Rng,
) -> Result<f64> {
    let dim = x.len();
    let u1 = sample_uniform_ball(dim, rng);
    let u2 = sample_uniform_ball(dim, rng);
    let y1 = query(&(u1 * 0.25 + x * 0.5))?;
    let y2 = query(&(u2 * 0.5))?;
    let y3 = query(&Vector::zeros(dim))?;
    Ok(2.0 * y1 - y2 - y3)
}

/// `kappa_core` fed by a loss oracle; spends exactly three queries.
pub fn kappa_oracle(oracle: &mut LossOracle, x: &Vector, rng: &mut Rng) -> Result<f64> {
    let mut query = |p: &Vector| -> Result<f64> {
        let t = oracle.query_count() as usize;
        Ok(oracle.query(t, p))
    };
    kappa_core(&mut query, x, rng)
}

/// Sphere-weighted gradient estimate of the optimistic surrogate.
#[derive(Debug, Clone)]
pub struct GradientEstimate {
    pub gradient: Vector,
    pub samples: u64,
}

fn gradient_core(
    query: &mut impl FnMut(&Vector) -> Result<f64>,
    x: &Vector,
    eps: f64,
    delta: f64,
    scale: f64,
    rng: &mut Rng,
) -> Result<GradientEstimate> {
    let dim = x.len();
    let d = dim as f64;
    let samples = ceil_count(scale * scale * 484.0 * d * (2.0 / delta).ln() / (eps * eps));
    let half = x * 0.5;
    let mut acc = Vector::zeros(dim);
    for _ in 0..samples {
        let u = sample_uniform_sphere(dim, rng);
        let y = query(&(&half + &u * 0.25))?;
        acc += u * y;
    }
    Ok(GradientEstimate { gradient: acc * (4.0 * d / samples as f64), samples })
}

/// Averages `(4d / n) U_t Y_t` over `n = ceil(484 d log(2/delta) / eps^2)`
/// sphere directions queried at `x/2 + U_t/4`. The estimate tracks the
/// surrogate gradient to error `eps` per unit direction with probability
/// `1 - delta` for bounded losses.
pub fn estimate_gradient(
    oracle: &mut LossOracle,
    eps: f64,
    delta: f64,
    x: &Vector,
    params: &CutParams,
    rng: &mut Rng,
) -> Result<GradientEstimate> {
    params.validate()?;
    validate_accuracy(eps, delta)?;
    let mut query = |p: &Vector| -> Result<f64> {
        let t = oracle.query_count() as usize;
        Ok(oracle.query(t, p))
    };
    gradient_core(&mut query, x, eps, delta, params.confidence_scale, rng)
}

/// Halfspace produced by one cutting step, with query accounting.
#[derive(Debug, Clone)]
pub struct CutOutcome {
    pub halfspace: HalfSpace,
    pub queries: u64,
    pub kernel_samples: u64,
    pub gradient_samples: u64,
}

/// One cutting step for a loss whose domain sandwiches the unit ball inside
/// radius `r`: finds a near-optimistic anchor in the unit ball, estimates the
/// surrogate gradient there, and returns the halfspace through the anchor
/// with that normal. Every point improving on `f(0)` by `eps` lies on the
/// kept side with probability at least `1 - delta`.
pub fn cut_with(
    mut query: impl FnMut(&Vector) -> Result<f64>,
    dim: usize,
    eps: f64,
    delta: f64,
    r: f64,
    params: &CutParams,
    rng: &mut Rng,
) -> Result<CutOutcome> {
    params.validate()?;
    validate_accuracy(eps, delta)?;
    if dim == 0 {
        return Err(Error::config("cut needs a positive dimension"));
    }
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::precondition("cut needs an outer radius of at least one"));
    }
    let cs = params.confidence_scale;
    let mut queries: u64 = 0;
    let inf = {
        let mut counted = |p: &Vector| -> Result<f64> {
            queries += 1;
            query(p)
        };
        // Single kernel draws are 4-subgaussian for losses bounded by one.
        inf_run(
            0.5 * eps,
            0.5 * delta,
            4.0 * cs,
            params.inf_cap,
            |stream| sample_uniform_ball(dim, stream),
            |x, stream| kappa_core(&mut counted, x, stream),
            rng,
        )?
    };
    let grad = {
        let mut counted = |p: &Vector| -> Result<f64> {
            queries += 1;
            query(p)
        };
        gradient_core(&mut counted, &inf.point, eps / (4.0 * r), 0.5 * delta, cs, rng)?
    };
    let normal = if grad.gradient.norm() > 0.0 {
        grad.gradient
    } else {
        // All responses were identically zero; any direction is valid.
        sample_uniform_sphere(dim, rng)
    };
    Ok(CutOutcome {
        halfspace: HalfSpace::new(inf.point, normal)?,
        queries,
        kernel_samples: inf.kernel_samples,
        gradient_samples: grad.samples,
    })
}

/// `cut_with` fed by a loss oracle.
pub fn cut(
    oracle: &mut LossOracle,
    eps: f64,
    delta: f64,
    r: f64,
    params: &CutParams,
    rng: &mut Rng,
) -> Result<CutOutcome> {
    let dim = oracle.dim();
    cut_with(
        |p: &Vector| {
            let t = oracle.query_count() as usize;
            Ok(oracle.query(t, p))
        },
        dim,
        eps,
        delta,
        r,
        params,
        rng,
    )
}

/// Iteration schedule of the centre-of-gravity driver.
pub fn cog_k_max(dim: usize, eps: f64) -> usize {
    schedule_len(dim, eps, (1.0 - 1.0 / (2.0 * E)).ln())
}

/// Iteration schedule of the inscribed-ellipsoid driver.
pub fn inscribed_k_max(dim: usize, eps: f64) -> usize {
    schedule_len(dim, eps, 0.97f64.ln())
}

/// Smallest `k` with `rate^k` below the volume fraction of an `eps/4`-scaled
/// simplex certificate inside the radius-`d` ball.
fn schedule_len(dim: usize, eps: f64, log_rate: f64) -> usize {
    let d = dim as f64;
    let mut log_factorial = 0.0;
    for i in 2..=dim {
        log_factorial += (i as f64).ln();
    }
    let log_target =
        d * (eps / 4.0).ln() - log_factorial - d * d.ln() - unit_ball_volume(dim).ln();
    1 + (log_target / log_rate).ceil().max(1.0) as usize
}

/// Iteration cap for the shallow-cut ellipsoid driver, of order
/// `d^2 log(d R / eps)`.
fn ellipsoid_schedule(dim: usize, radius: f64, eps: f64) -> usize {
    let d = dim as f64;
    let spread = (4.0 * d * radius.max(1.0) / eps).ln().max(1.0);
    1 + (20.0 * d * (d + 1.0) * spread).ceil() as usize
}

/// One accepted shallow-cut ellipsoid update.
#[derive(Debug, Clone)]
pub struct ShallowStep {
    /// Signed cut depth relative to the pre-update ellipsoid; positive cuts
    /// pass beyond the centre.
    pub lambda: f64,
    /// Change of the log volume, always negative.
    pub log_volume_drop: f64,
}

/// Transcript of one localisation run.
#[derive(Debug, Clone)]
pub struct CutRun {
    pub point: Vector,
    /// Query centres in visiting order; every entry lies in the domain.
    pub centres: Vec<Vector>,
    pub queries: u64,
    pub iterations: usize,
    /// Rows `normal . y <= rhs` appended to the localiser, in original
    /// coordinates and in acceptance order, replayable by callers.
    pub added_rows: Vec<(Vector, f64)>,
    /// Per-round log volume of the localising ellipsoid, where one exists.
    pub ellipsoid_log_volumes: Vec<f64>,
    pub shallow_steps: Vec<ShallowStep>,
    /// Round index whose centre first lay inside the domain.
    pub first_feasible_round: Option<usize>,
    pub notes: Vec<String>,
    pub bai_index: usize,
}

/// Inequality rows `a y <= b` of the initial domain; boxes unfold into
/// coordinate rows. Drivers that shave rows need one of these two shapes.
fn polytope_rows(body: &ConvexBody) -> Result<(Vec<Vector>, Vec<f64>)> {
    match body {
        ConvexBody::Box { lower, upper } => {
            let d = lower.len();
            let mut rows = Vec::with_capacity(2 * d);
            let mut rhs = Vec::with_capacity(2 * d);
            for j in 0..d {
                let mut e = Vector::zeros(d);
                e[j] = 1.0;
                rows.push(e.clone());
                rhs.push(upper[j]);
                rows.push(-e);
                rhs.push(-lower[j]);
            }
            Ok((rows, rhs))
        }
        ConvexBody::Polytope { a, b, .. } => {
            let rows = (0..a.nrows()).map(|i| a.row(i).transpose()).collect();
            Ok((rows, b.iter().copied().collect()))
        }
        _ => Err(Error::precondition(
            "this localisation driver needs a box or polytope domain",
        )),
    }
}

fn rebuild_polytope(rows: &[Vector], rhs: &[f64]) -> Result<ConvexBody> {
    let d = rows[0].len();
    let mut a = Matrix::zeros(rows.len(), d);
    for (i, row) in rows.iter().enumerate() {
        a.row_mut(i).copy_from(&row.transpose());
    }
    ConvexBody::polytope(a, Vector::from_column_slice(rhs))
}

/// The body shifted by `-shift`, in the same representation family.
fn translate_body(body: &ConvexBody, shift: &Vector) -> Result<ConvexBody> {
    match body {
        ConvexBody::Ball { dim, radius } => {
            ConvexBody::ellipsoid(-shift.clone(), Matrix::identity(*dim, *dim) * (radius * radius))
        }
        ConvexBody::Box { lower, upper } => ConvexBody::axis_box(lower - shift, upper - shift),
        ConvexBody::Polytope { a, b, interior } => {
            let moved = b - a * shift;
            ConvexBody::polytope_with_interior(a.clone(), moved, interior - shift)
        }
        ConvexBody::Ellipsoid(e) => ConvexBody::ellipsoid(&e.centre - shift, e.shape.clone()),
        ConvexBody::AffineImage { base, map } => {
            let shifted = AffineMap::new(map.linear.clone(), &map.offset - shift)?;
            ConvexBody::affine_image((**base).clone(), shifted)
        }
    }
}

/// The halfspace `g . (z - a) <= 0` pulled back through `z = L y + c`.
fn pull_back_row(map: &AffineMap, hs: &HalfSpace) -> (Vector, f64) {
    let normal = map.linear.transpose() * &hs.normal;
    let rhs = hs.normal.dot(&(&hs.anchor - &map.offset));
    (normal, rhs)
}

/// Centre-of-gravity localisation. Each round rounds the surviving polytope
/// to near-isotropic position from hit-and-run samples, anchors a cut near
/// the sample mean, and keeps the shaved side; identification over the
/// visited centres settles the answer. The sample mean tracks the centroid
/// closely enough that every accepted cut removes a constant volume
/// fraction, so the schedule is logarithmic in the target volume.
pub fn cog_run(
    oracle: &mut LossOracle,
    body: &ConvexBody,
    eps: f64,
    delta: f64,
    params: &CutParams,
    rng: &mut Rng,
) -> Result<CutRun> {
    params.validate()?;
    validate_accuracy(eps, delta)?;
    let dim = oracle.dim();
    if body.dim() != dim {
        return Err(Error::config("loss and domain dimensions disagree"));
    }
    let (mut rows, mut rhs) = polytope_rows(body)?;
    let schedule = cog_k_max(dim, eps);
    let k_bound = params.max_iterations.map_or(schedule, |cap| cap.min(schedule));
    let round_delta = delta / (2.0 * (dim as f64 + 1.0) * k_bound as f64);
    let d = dim as f64;
    let iso_samples = (200 * dim * dim).max(10);
    let start = oracle.query_count();

    let mut current = rebuild_polytope(&rows, &rhs)?;
    let mut centres: Vec<Vector> = Vec::new();
    let mut added_rows: Vec<(Vector, f64)> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    let mut iterations = 0;
    for k in 1..=k_bound {
        let iso = match estimate_isotropic_transform(&current, iso_samples, rng) {
            Ok(map) => map,
            Err(e) => {
                notes.push(format!(
                    "round {k}: isotropic estimate failed ({e}); stopping the cutting phase"
                ));
                break;
            }
        };
        // Scaling the isotropic map by 2e leaves the unit ball inside the
        // image and the image inside radius 4ed.
        let t_map = AffineMap::new(&iso.linear * (2.0 * E), &iso.offset * (2.0 * E))?;
        centres.push(t_map.apply_inverse(&Vector::zeros(dim)));
        iterations = k;

        let outcome = cut_with(
            |z: &Vector| {
                let y = t_map.apply_inverse(z);
                let t = oracle.query_count() as usize;
                Ok(oracle.query(t, &y))
            },
            dim,
            0.25 * eps,
            round_delta,
            4.0 * E * d,
            params,
            rng,
        );
        let cut = match outcome {
            Ok(c) => c,
            Err(Error::Budget(_)) => {
                notes.push(format!(
                    "round {k}: cut search exhausted its budget; identifying among the collected centres"
                ));
                break;
            }
            Err(e) => return Err(e),
        };
        let (normal, bound) = pull_back_row(&t_map, &cut.halfspace);
        rows.push(normal.clone());
        rhs.push(bound);
        match rebuild_polytope(&rows, &rhs) {
            Ok(next) => current = next,
            Err(_) => {
                rows.pop();
                rhs.pop();
                notes.push(format!(
                    "round {k}: the shaved polytope lost its interior; stopping the cutting phase"
                ));
                break;
            }
        }
        added_rows.push((normal, bound));
    }
    if centres.is_empty() {
        return Err(Error::numerical(
            "no centre was visited before the cutting phase stopped",
        ));
    }
    let id = bai(oracle, 0.5 * eps, 0.5 * delta, &centres, params)?;
    Ok(CutRun {
        point: id.point,
        bai_index: id.index,
        centres,
        queries: oracle.query_count() - start,
        iterations,
        added_rows,
        ellipsoid_log_volumes: Vec::new(),
        shallow_steps: Vec::new(),
        first_feasible_round: Some(1),
        notes,
    })
}

/// Inscribed-ellipsoid localisation. Each round solves the maximum-volume
/// inscribed ellipsoid of the surviving polytope, maps its half-radius copy
/// onto the unit ball, cuts there, and keeps the shaved side; the maximal
/// inscribed volume drops by a fixed factor per round.
pub fn inscribed_run(
    oracle: &mut LossOracle,
    body: &ConvexBody,
    eps: f64,
    delta: f64,
    params: &CutParams,
    rng: &mut Rng,
) -> Result<CutRun> {
    params.validate()?;
    validate_accuracy(eps, delta)?;
    let dim = oracle.dim();
    if body.dim() != dim {
        return Err(Error::config("loss and domain dimensions disagree"));
    }
    let (mut rows, mut rhs) = polytope_rows(body)?;
    let schedule = inscribed_k_max(dim, eps);
    let k_bound = params.max_iterations.map_or(schedule, |cap| cap.min(schedule));
    let round_delta = delta / (2.0 * (dim as f64 + 1.0) * k_bound as f64);
    let d = dim as f64;
    let start = oracle.query_count();

    let mut current = rebuild_polytope(&rows, &rhs)?;
    let mut centres: Vec<Vector> = Vec::new();
    let mut added_rows: Vec<(Vector, f64)> = Vec::new();
    let mut log_volumes: Vec<f64> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    let mut iterations = 0;
    for k in 1..=k_bound {
        let inner = mvie(&current)?;
        log_volumes.push(unit_ball_volume(dim).ln() + inner.log_volume_ratio_to_ball());
        // T x = 2 A^{-1/2} (x - centre) maps the half-radius copy onto the
        // unit ball; the polytope itself stays within radius 2d.
        let linear = inv_sqrt_spd(&inner.shape) * 2.0;
        let offset = -(&linear * &inner.centre);
        let t_map = AffineMap::new(linear, offset)?;
        centres.push(inner.centre.clone());
        iterations = k;

        let outcome = cut_with(
            |z: &Vector| {
                let y = t_map.apply_inverse(z);
                let t = oracle.query_count() as usize;
                Ok(oracle.query(t, &y))
            },
            dim,
            0.25 * eps,
            round_delta,
            2.0 * d,
            params,
            rng,
        );
        let cut = match outcome {
            Ok(c) => c,
            Err(Error::Budget(_)) => {
                notes.push(format!(
                    "round {k}: cut search exhausted its budget; identifying among the collected centres"
                ));
                break;
            }
            Err(e) => return Err(e),
        };
        let (normal, bound) = pull_back_row(&t_map, &cut.halfspace);
        rows.push(normal.clone());
        rhs.push(bound);
        match rebuild_polytope(&rows, &rhs) {
            Ok(next) => current = next,
            Err(_) => {
                rows.pop();
                rhs.pop();
                notes.push(format!(
                    "round {k}: the shaved polytope lost its interior; stopping the cutting phase"
                ));
                break;
            }
        }
        added_rows.push((normal, bound));
    }
    if centres.is_empty() {
        return Err(Error::numerical(
            "no centre was visited before the cutting phase stopped",
        ));
    }
    let id = bai(oracle, 0.5 * eps, 0.5 * delta, &centres, params)?;
    Ok(CutRun {
        point: id.point,
        bai_index: id.index,
        centres,
        queries: oracle.query_count() - start,
        iterations,
        added_rows,
        ellipsoid_log_volumes: log_volumes,
        shallow_steps: Vec::new(),
        first_feasible_round: Some(1),
        notes,
    })
}

/// Shallow-cut ellipsoid localisation. The ellipsoid starts as an
/// origin-centred ball covering the domain. Centres outside the domain get a
/// query-free separation cut; feasible centres get a surrogate cut on the
/// loss extended beyond the domain through its gauge, so queries stay legal
/// while the cut anchor may leave the domain. Either way the ellipsoid
/// shrinks by a guaranteed volume factor, and identification over the
/// feasible centres settles the answer.
pub fn ellipsoid_method_run(
    oracle: &mut LossOracle,
    body: &ConvexBody,
    eps: f64,
    delta: f64,
    params: &CutParams,
    rng: &mut Rng,
) -> Result<CutRun> {
    params.validate()?;
    validate_accuracy(eps, delta)?;
    let dim = oracle.dim();
    if body.dim() != dim {
        return Err(Error::config("loss and domain dimensions disagree"));
    }
    let d = dim as f64;
    let radius = body.outer_radius();
    let schedule = ellipsoid_schedule(dim, radius, eps);
    let k_bound = params.max_iterations.map_or(schedule, |cap| cap.min(schedule));
    let round_delta = delta / (2.0 * (d + 1.0) * k_bound as f64);
    // The extension gauge needs the origin strictly interior.
    let gauge_anchor = body.interior_point();
    let shifted = translate_body(body, &gauge_anchor)?;
    let extension = ExtendedLoss::with_default_coeff(0.25 * eps)?;
    let mut ellipsoid = Ellipsoid::new(
        Vector::zeros(dim),
        Matrix::identity(dim, dim) * (radius * radius),
    )?;
    let start = oracle.query_count();

    let mut centres: Vec<Vector> = Vec::new();
    let mut added_rows: Vec<(Vector, f64)> = Vec::new();
    let mut log_volumes: Vec<f64> = Vec::new();
    let mut steps: Vec<ShallowStep> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    let mut first_feasible = None;
    let mut iterations = 0;
    for k in 1..=k_bound {
        log_volumes.push(unit_ball_volume(dim).ln() + ellipsoid.log_volume_ratio_to_ball());
        if ellipsoid.shape.trace() <= (eps / 8.0) * (eps / 8.0) {
            notes.push(format!(
                "round {k}: the localising ellipsoid fell below the accuracy scale"
            ));
            break;
        }
        iterations = k;
        let centre = ellipsoid.centre.clone();
        let hs = match body.separate(&centre) {
            // Infeasible centre: separation supplies a deep cut for free.
            Some(sep) => sep,
            None => {
                if first_feasible.is_none() {
                    first_feasible = Some(k);
                }
                centres.push(centre.clone());
                let linear = inv_sqrt_spd(&ellipsoid.shape) * (2.0 * d);
                let offset = -(&linear * &centre);
                let t_map = AffineMap::new(linear, offset)?;
                let outcome = cut_with(
                    |z: &Vector| {
                        let y = t_map.apply_inverse(z);
                        let (inner, gauge) = extension.query(&shifted, &(&y - &gauge_anchor))?;
                        let t = oracle.query_count() as usize;
                        let seen = oracle.query(t, &(inner + &gauge_anchor));
                        Ok(extension.assemble(gauge, seen))
                    },
                    dim,
                    0.25 * eps,
                    round_delta,
                    2.0 * d,
                    params,
                    rng,
                );
                let cut = match outcome {
                    Ok(c) => c,
                    Err(Error::Budget(_)) => {
                        notes.push(format!(
                            "round {k}: cut search exhausted its budget; identifying among the collected centres"
                        ));
                        break;
                    }
                    Err(e) => return Err(e),
                };
                let (normal, _) = pull_back_row(&t_map, &cut.halfspace);
                let anchor = t_map.apply_inverse(&cut.halfspace.anchor);
                HalfSpace::new(anchor, normal)?
            }
        };
        added_rows.push((hs.normal.clone(), hs.normal.dot(&hs.anchor)));
        let depth = hs.normal.dot(&(&ellipsoid.centre - &hs.anchor))
            / quad_form(&ellipsoid.shape, &hs.normal).sqrt();
        let before = ellipsoid.log_volume_ratio_to_ball();
        match shallow_cut_update(&ellipsoid, &hs.normal, &hs.anchor)? {
            ShallowCutOutcome::Updated(next) => {
                steps.push(ShallowStep {
                    lambda: depth,
                    log_volume_drop: next.log_volume_ratio_to_ball() - before,
                });
                ellipsoid = next;
            }
            ShallowCutOutcome::Unchanged(_) => {
                notes.push(format!(
                    "round {k}: cut too shallow to improve the ellipsoid; stopping"
                ));
                break;
            }
            ShallowCutOutcome::Infeasible => {
                notes.push(format!(
                    "round {k}: cut certified the localised region empty; stopping"
                ));
                break;
            }
        }
    }
    if centres.is_empty() {
        return Err(Error::Infeasible(
            "no ellipsoid centre entered the domain".into(),
        ));
    }
    let id = bai(oracle, 0.5 * eps, 0.5 * delta, &centres, params)?;
    Ok(CutRun {
        point: id.point,
        bai_index: id.index,
        centres,
        queries: oracle.query_count() - start,
        iterations,
        added_rows,
        ellipsoid_log_volumes: log_volumes,
        shallow_steps: steps,
        first_feasible_round: first_feasible,
        notes,
    })
}
