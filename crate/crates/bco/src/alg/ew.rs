//! Exponential weights over finite covers: linear losses with least-squares
//! estimation, quadratic losses through a feature lift, and a kernel-smoothed
//! one-dimensional variant for general convex losses.

use rand::Rng as _;

use crate::geometry::ConvexBody;
use crate::losses::{quad_feature_dim, quad_features, LossOracle};
use crate::rng::Rng;
use crate::surrogates::{iwls_estimate, kw_design};
use crate::{Error, Matrix, Result, Vector};

use super::{drive, BanditAlgorithm, RunTrace};

/// Softmax of `-eta * cum`, stabilised by subtracting the smallest cumulant.
pub fn ew_dist(cum: &[f64], eta: f64) -> Result<Vec<f64>> {
    if cum.is_empty() {
        return Err(Error::precondition("distribution over an empty action set"));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::config("learning rate must be positive and finite"));
    }
    let lo = cum.iter().cloned().fold(f64::INFINITY, f64::min);
    if !lo.is_finite() {
        return Err(Error::numerical("non-finite cumulative losses"));
    }
    let mut p: Vec<f64> = cum.iter().map(|c| (-eta * (c - lo)).exp()).collect();
    let z: f64 = p.iter().sum();
    for w in &mut p {
        *w /= z;
    }
    Ok(p)
}

/// Inverse-CDF draw from a probability vector.
fn sample_categorical(p: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// Epsilon-cover of `body` in the Euclidean metric.
///
/// Grid of spacing `eps / sqrt(d)` over the bounding box; grid points inside
/// the body are kept as-is, those within half a cell diagonal of the body are
/// replaced by their projection. Every point of the body then lies within
/// `eps` of the cover, and for `d <= 4` the cardinality is at most
/// `(1 + 4 R / eps)^d` with `R` the bounding-box radius.
pub fn build_cover(body: &ConvexBody, eps: f64) -> Result<Vec<Vector>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::config("cover resolution must be positive and finite"));
    }
    let d = body.dim();
    if d > 4 {
        return Err(Error::precondition("grid covers are only tractable up to dimension 4"));
    }
    if eps >= body.diameter() {
        return Ok(vec![body.interior_point()]);
    }

    let h = eps / (d as f64).sqrt();
    let mut lo_k = Vec::with_capacity(d);
    let mut hi_k = Vec::with_capacity(d);
    let mut candidates = 1u64;
    for i in 0..d {
        let mut e = Vector::zeros(d);
        e[i] = 1.0;
        let hi = body.support_function(&e);
        let lo = -body.support_function(&(-e));
        let a = ((lo / h) - 1e-9).ceil() as i64;
        let b = ((hi / h) + 1e-9).floor() as i64;
        lo_k.push(a);
        hi_k.push(b.max(a));
        candidates = candidates.saturating_mul((b.max(a) - a + 1) as u64);
    }
    if candidates > 20_000_000 {
        return Err(Error::Refused(format!(
            "cover grid would enumerate {candidates} candidate points"
        )));
    }

    let cell_radius = h * (d as f64).sqrt() / 2.0;
    let mut cover = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut idx = lo_k.clone();
    loop {
        let g = Vector::from_iterator(d, idx.iter().map(|&k| k as f64 * h));
        let keep = if body.contains(&g) {
            Some(g)
        } else {
            let p = body.project_euclidean(&g)?;
            ((&p - &g).norm() <= cell_radius + 1e-12).then_some(p)
        };
        if let Some(p) = keep {
            let key: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
            if seen.insert(key) {
                cover.push(p);
            }
        }
        // Odometer over the multi-index.
        let mut j = 0;
        loop {
            if j == d {
                if cover.is_empty() {
                    return Err(Error::numerical("cover construction produced no points"));
                }
                return Ok(cover);
            }
            idx[j] += 1;
            if idx[j] <= hi_k[j] {
                break;
            }
            idx[j] = lo_k[j];
            j += 1;
        }
    }
}

/// Horizon tuning `eta = sqrt(log|C| / (2 n d))`, `gamma = eta d`.
pub fn linear_ew_defaults(cover_size: usize, n: usize, d: usize) -> (f64, f64) {
    let eta = ((cover_size as f64).ln() / (2.0 * n as f64 * d as f64)).sqrt();
    (eta, eta * d as f64)
}

/// End-of-run exponential-weights certificate: the realised regret of the
/// weights against every fixed action, compared with the mixing bound
/// `log|C| / eta + eta * sum_t <q_t, s_hat_t^2>`. The bound is only promised
/// when `eta |s_hat|` stayed at most one, so the witnessed maximum rides along.
#[derive(Debug, Clone, Copy)]
pub struct EwCertificate {
    pub lhs_max: f64,
    pub rhs: f64,
    pub eta_shat_max: f64,
}

impl EwCertificate {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs_max <= self.rhs + tol
    }

    pub fn precondition_ok(&self) -> bool {
        self.eta_shat_max <= 1.0 + 1e-6
    }
}

struct PendingLinear {
    idx: usize,
    q: Vec<f64>,
    p: Vec<f64>,
}

/// Exponential weights over a finite action set with mixed-in design
/// exploration and importance-weighted least-squares loss estimates.
///
/// `plays` are the points sent to the oracle and `features` the vectors the
/// linear model lives on; they coincide for linear losses and differ by the
/// quadratic feature lift.
pub struct LinearEw {
    plays: Vec<Vector>,
    features: Vec<Vector>,
    cum: Vec<f64>,
    eta: f64,
    gamma: f64,
    design: Vec<f64>,
    degenerate: bool,
    pending: Option<PendingLinear>,
    inner_sum: f64,
    quad_sum: f64,
    eta_shat_max: f64,
    warnings: Vec<String>,
}

impl LinearEw {
    pub fn new(
        plays: Vec<Vector>,
        features: Vec<Vector>,
        n: usize,
        eta: Option<f64>,
        gamma: Option<f64>,
    ) -> Result<Self> {
        if plays.is_empty() || plays.len() != features.len() {
            return Err(Error::precondition("need matching non-empty plays and features"));
        }
        if n == 0 {
            return Err(Error::config("horizon must be at least one"));
        }
        let d = features[0].len();
        if features.iter().any(|f| f.len() != d) {
            return Err(Error::precondition("features must share one dimension"));
        }
        let (eta_def, gamma_def) = linear_ew_defaults(features.len(), n, d);
        let eta = eta.unwrap_or(eta_def);
        let gamma = gamma.unwrap_or(gamma_def);
        if !(eta > 0.0 && eta.is_finite()) && features.len() > 1 {
            return Err(Error::config("learning rate must be positive and finite"));
        }

        let mut warnings = Vec::new();
        let mut degenerate = false;
        let mut design = vec![0.0; features.len()];
        if features.len() == 1 {
            degenerate = true;
            warnings.push("single-point action set, playing it every round".to_string());
        } else if gamma >= 1.0 {
            degenerate = true;
            warnings.push(format!(
                "exploration rate {gamma:.3} >= 1, horizon too short to learn; playing a fixed action"
            ));
        } else if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::config("exploration rate must be positive and finite"));
        } else {
            design = kw_design(&features, 0.05)?.weights;
        }

        Ok(LinearEw {
            cum: vec![0.0; plays.len()],
            plays,
            features,
            eta,
            gamma,
            design,
            degenerate,
            pending: None,
            inner_sum: 0.0,
            quad_sum: 0.0,
            eta_shat_max: 0.0,
            warnings,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cover_size(&self) -> usize {
        self.plays.len()
    }

    pub fn certificate(&self) -> EwCertificate {
        let best = self.cum.iter().cloned().fold(f64::INFINITY, f64::min);
        EwCertificate {
            lhs_max: self.inner_sum - best,
            rhs: (self.plays.len() as f64).ln() / self.eta + self.eta * self.quad_sum,
            eta_shat_max: self.eta_shat_max,
        }
    }
}

impl BanditAlgorithm for LinearEw {
    fn propose(&mut self, rng: &mut Rng) -> Result<Vector> {
        if self.degenerate {
            return Ok(self.plays[0].clone());
        }
        let q = ew_dist(&self.cum, self.eta)?;
        let p: Vec<f64> = q
            .iter()
            .zip(self.design.iter())
            .map(|(qa, pa)| (1.0 - self.gamma) * qa + self.gamma * pa)
            .collect();
        let idx = sample_categorical(&p, rng);
        self.pending = Some(PendingLinear { idx, q, p });
        Ok(self.plays[idx].clone())
    }

    fn observe(&mut self, y: f64) -> Result<()> {
        if self.degenerate {
            return Ok(());
        }
        let PendingLinear { idx, q, p } = self
            .pending
            .take()
            .ok_or_else(|| Error::precondition("observe without a pending proposal"))?;
        let d = self.features[0].len();
        let mut gram = Matrix::zeros(d, d);
        for (fa, pa) in self.features.iter().zip(p.iter()) {
            gram.ger(*pa, fa, fa, 1.0);
        }
        let theta = iwls_estimate(&gram, &self.features[idx], y)?;
        for (a, (fa, qa)) in self.features.iter().zip(q.iter()).enumerate() {
            let shat = fa.dot(&theta);
            self.cum[a] += shat;
            self.inner_sum += qa * shat;
            self.quad_sum += qa * shat * shat;
            self.eta_shat_max = self.eta_shat_max.max(self.eta * shat.abs());
        }
        Ok(())
    }

    fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

/// Exponential weights on an explicit finite action set.
pub fn linear_ew_run(
    oracle: &mut LossOracle,
    actions: &[Vector],
    n: usize,
    eta: Option<f64>,
    gamma: Option<f64>,
    rng: &mut Rng,
) -> Result<(RunTrace, EwCertificate)> {
    let mut alg = LinearEw::new(actions.to_vec(), actions.to_vec(), n, eta, gamma)?;
    let trace = drive(&mut alg, oracle, n, rng)?;
    Ok((trace, alg.certificate()))
}

/// Exponential weights on a grid cover of a convex body; `eps` defaults to
/// `n^{-1/2}`.
pub fn linear_ew_cover_run(
    oracle: &mut LossOracle,
    body: &ConvexBody,
    n: usize,
    eps: Option<f64>,
    eta: Option<f64>,
    gamma: Option<f64>,
    rng: &mut Rng,
) -> Result<(RunTrace, EwCertificate)> {
    let eps = eps.unwrap_or((n.max(1) as f64).powf(-0.5));
    let cover = build_cover(body, eps)?;
    if cover.len() > 1_000_000 {
        return Err(Error::Refused(format!(
            "cover of {} points exceeds the tractable budget",
            cover.len()
        )));
    }
    linear_ew_run(oracle, &cover, n, eta, gamma, rng)
}

/// Quadratic bandits by lifting a cover of the body through the monomial
/// feature map and running the linear machinery in the lifted space.
pub fn quadratic_ew_run(
    oracle: &mut LossOracle,
    body: &ConvexBody,
    n: usize,
    eps: Option<f64>,
    eta: Option<f64>,
    gamma: Option<f64>,
    rng: &mut Rng,
) -> Result<(RunTrace, EwCertificate)> {
    let eps = eps.unwrap_or((n.max(1) as f64).powf(-0.5));
    let cover = build_cover(body, eps)?;
    if cover.len() > 1_000_000 {
        return Err(Error::Refused(format!(
            "cover of {} points exceeds the tractable budget",
            cover.len()
        )));
    }
    let d2 = quad_feature_dim(body.dim());
    let features: Vec<Vector> = cover.iter().map(quad_features).collect();
    let (eta_def, gamma_def) = linear_ew_defaults(cover.len(), n, d2);
    let mut alg = LinearEw::new(
        cover,
        features,
        n,
        Some(eta.unwrap_or(eta_def)),
        Some(gamma.unwrap_or(gamma_def)),
    )?;
    let trace = drive(&mut alg, oracle, n, rng)?;
    Ok((trace, alg.certificate()))
}

/// Uniform mass on the grid interval spanned by `y` and the projected mean
/// `mu`, evaluated at `x`. Indices refer to one shared ascending grid.
pub fn kernel_mass(x_idx: usize, y_idx: usize, mu_idx: usize) -> f64 {
    let lo = y_idx.min(mu_idx);
    let hi = y_idx.max(mu_idx);
    if (lo..=hi).contains(&x_idx) {
        1.0 / (hi - lo + 1) as f64
    } else {
        0.0
    }
}

/// Largest-magnitude grid point on the origin side of `mean`; clamped to the
/// grid range, which a convex combination of grid points never leaves.
fn mean_projection_index(grid: &[f64], mean: f64) -> usize {
    let mut best: Option<usize> = None;
    for (i, g) in grid.iter().enumerate() {
        if g.abs() <= mean.abs() + 1e-12 && g * mean >= -1e-12 {
            match best {
                Some(b) if grid[b].abs() >= g.abs() => {}
                _ => best = Some(i),
            }
        }
    }
    best.unwrap_or_else(|| {
        let mut nearest = 0;
        for (i, g) in grid.iter().enumerate() {
            if (g - mean).abs() < (grid[nearest] - mean).abs() {
                nearest = i;
            }
        }
        nearest
    })
}

struct PendingKernel {
    x_idx: usize,
    mu_idx: usize,
    q: Vec<f64>,
    px: f64,
}

/// One-dimensional exponential weights with kernel smoothing: play a point
/// drawn between a sample of the weights and their projected mean, then
/// propagate the importance-weighted loss to every action the kernel could
/// have produced it from.
pub struct Kernel1d {
    grid: Vec<f64>,
    eta: f64,
    cum: Vec<f64>,
    pending: Option<PendingKernel>,
    inner_sum: f64,
    quad_sum: f64,
    eta_shat_max: f64,
}

impl Kernel1d {
    pub fn new(interval: (f64, f64), n: usize, eta: Option<f64>) -> Result<Self> {
        let (a, b) = interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::config("interval must be a finite non-empty range"));
        }
        if n == 0 {
            return Err(Error::config("horizon must be at least one"));
        }
        let eps = (n as f64).powf(-0.5);
        let k_lo = ((a / eps) - 1e-9).ceil() as i64;
        let k_hi = ((b / eps) + 1e-9).floor() as i64;
        if k_lo > k_hi {
            return Err(Error::precondition("interval narrower than the action grid"));
        }
        let grid: Vec<f64> = (k_lo..=k_hi).map(|k| k as f64 * eps).collect();
        let eta = eta.unwrap_or((n as f64).powf(-0.5));
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::config("learning rate must be positive and finite"));
        }
        Ok(Kernel1d {
            cum: vec![0.0; grid.len()],
            grid,
            eta,
            pending: None,
            inner_sum: 0.0,
            quad_sum: 0.0,
            eta_shat_max: 0.0,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn certificate(&self) -> EwCertificate {
        let best = self.cum.iter().cloned().fold(f64::INFINITY, f64::min);
        EwCertificate {
            lhs_max: self.inner_sum - best,
            rhs: (self.grid.len() as f64).ln() / self.eta + self.eta * self.quad_sum,
            eta_shat_max: self.eta_shat_max,
        }
    }
}

impl BanditAlgorithm for Kernel1d {
    fn propose(&mut self, rng: &mut Rng) -> Result<Vector> {
        let q = ew_dist(&self.cum, self.eta)?;
        let mean: f64 = q.iter().zip(self.grid.iter()).map(|(w, g)| w * g).sum();
        let mu_idx = mean_projection_index(&self.grid, mean);
        let z_idx = sample_categorical(&q, rng);
        let lo = z_idx.min(mu_idx);
        let hi = z_idx.max(mu_idx);
        let x_idx = lo + rng.gen_range(0..=hi - lo);
        // p(x) = sum_y q(y) T(x|y); positive because q(z) > 0 contributes.
        let px: f64 = q
            .iter()
            .enumerate()
            .map(|(y, qy)| qy * kernel_mass(x_idx, y, mu_idx))
            .sum();
        self.pending = Some(PendingKernel { x_idx, mu_idx, q, px });
        Ok(Vector::from_element(1, self.grid[x_idx]))
    }

    fn observe(&mut self, y: f64) -> Result<()> {
        let PendingKernel { x_idx, mu_idx, q, px } = self
            .pending
            .take()
            .ok_or_else(|| Error::precondition("observe without a pending proposal"))?;
        for (b, qb) in q.iter().enumerate() {
            let shat = kernel_mass(x_idx, b, mu_idx) * y / px;
            self.cum[b] += shat;
            self.inner_sum += qb * shat;
            self.quad_sum += qb * shat * shat;
            self.eta_shat_max = self.eta_shat_max.max(self.eta * shat.abs());
        }
        Ok(())
    }
}

/// Kernel-smoothed exponential weights on an interval.
pub fn kernel_ew_1d_run(
    oracle: &mut LossOracle,
    interval: (f64, f64),
    n: usize,
    eta: Option<f64>,
    rng: &mut Rng,
) -> Result<(RunTrace, EwCertificate)> {
    if oracle.dim() != 1 {
        return Err(Error::precondition("kernel smoothing is one-dimensional"));
    }
    let mut alg = Kernel1d::new(interval, n, eta)?;
    let trace = drive(&mut alg, oracle, n, rng)?;
    Ok((trace, alg.certificate()))
}
