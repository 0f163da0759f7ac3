//! Bandit gradient descent, proper (shrunk feasible set) and improper
//! (smooth and strongly convex losses, shrinking exploration radii).

use crate::geometry::{sample_uniform_sphere, ConvexBody};
use crate::losses::LossOracle;
use crate::rng::{stream, Rng};
use crate::surrogates::spherical_grad;
use crate::{Error, Result, Vector};

use super::{drive, BanditAlgorithm, RunTrace};

/// Gauge check that the unit ball sits inside the body: axis directions plus
/// a fixed bundle of sampled ones, all of which must have `pi <= 1`.
pub fn contains_unit_ball(body: &ConvexBody) -> Result<()> {
    let d = body.dim();
    let mut dirs = Vec::with_capacity(2 * d + 64);
    for i in 0..d {
        let mut e = Vector::zeros(d);
        e[i] = 1.0;
        dirs.push(e.clone());
        dirs.push(-e);
    }
    let mut rng = stream(0, 0, "unit-ball-check");
    for _ in 0..64 {
        dirs.push(sample_uniform_sphere(d, &mut rng));
    }
    for u in &dirs {
        if body.minkowski_functional(u)? > 1.0 + 1e-9 {
            return Err(Error::config("body must contain the unit ball"));
        }
    }
    Ok(())
}

/// Tuning for a horizon and geometry: `eta = sqrt(1/2) diam^{3/2} / sqrt(d) /
/// n^{3/4}`, `r = min(1, sqrt(1/2) sqrt(diam d) / n^{1/4})`.
pub fn bandit_gd_defaults(diam: f64, d: usize, n: usize) -> (f64, f64) {
    let half = 0.5f64.sqrt();
    let nf = n as f64;
    let eta = half * diam.powf(1.5) / (d as f64).sqrt() / nf.powf(0.75);
    let r = (half * (diam * d as f64).sqrt() / nf.powf(0.25)).min(1.0);
    (eta, r)
}

enum GdFeasible {
    Shrunk(ConvexBody),
    /// The exploration radius formula saturated at 1: the shrunk set is a
    /// point and the algorithm just plays the centre.
    Degenerate,
}

pub struct BanditGd {
    feasible: GdFeasible,
    eta: f64,
    r: f64,
    x: Vector,
    pending: Option<Vector>,
    history: Vec<(Vector, Vector)>,
    warnings: Vec<String>,
}

impl BanditGd {
    pub fn new(body: &ConvexBody, n: usize, eta: Option<f64>, r: Option<f64>) -> Result<BanditGd> {
        contains_unit_ball(body)?;
        let d = body.dim();
        let (eta_def, r_def) = bandit_gd_defaults(body.diameter(), d, n);
        let eta = eta.unwrap_or(eta_def);
        if eta <= 0.0 {
            return Err(Error::config("gradient descent needs eta > 0"));
        }
        let mut warnings = Vec::new();
        let feasible = match r {
            Some(r) if !(r > 0.0 && r < 1.0) => {
                return Err(Error::config("gradient descent needs r in (0, 1)"));
            }
            Some(r) => GdFeasible::Shrunk(body.shrink(r)?),
            None if r_def >= 1.0 => {
                warnings.push(
                    "horizon too short for the default radius; playing the centre".to_string(),
                );
                GdFeasible::Degenerate
            }
            None => GdFeasible::Shrunk(body.shrink(r_def)?),
        };
        Ok(BanditGd {
            feasible,
            eta,
            r: r.unwrap_or(r_def),
            x: Vector::zeros(d),
            pending: None,
            history: Vec::new(),
            warnings,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    /// Per-round `(x_t, g_t)` pairs, for regret accounting on the linearised
    /// losses.
    pub fn history(&self) -> &[(Vector, Vector)] {
        &self.history
    }
}

impl BanditAlgorithm for BanditGd {
    fn propose(&mut self, rng: &mut Rng) -> Result<Vector> {
        if matches!(self.feasible, GdFeasible::Degenerate) {
            return Ok(self.x.clone());
        }
        let d = self.x.len();
        let u = sample_uniform_sphere(d, rng) * self.r;
        let play = &self.x + &u;
        self.pending = Some(u);
        Ok(play)
    }

    fn observe(&mut self, y: f64) -> Result<()> {
        let Some(u) = self.pending.take() else {
            return Ok(());
        };
        let played = &self.x + &u;
        let g = spherical_grad(&self.x, self.r, &played, y)?;
        let target = &self.x - &g * self.eta;
        let GdFeasible::Shrunk(k) = &self.feasible else { unreachable!() };
        let next = k.project_euclidean(&target)?;
        self.history.push((std::mem::replace(&mut self.x, next), g));
        Ok(())
    }

    fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

pub fn bandit_gd_run(
    oracle: &mut LossOracle,
    body: &ConvexBody,
    n: usize,
    eta: Option<f64>,
    r: Option<f64>,
    rng: &mut Rng,
) -> Result<RunTrace> {
    let mut alg = BanditGd::new(body, n, eta, r)?;
    drive(&mut alg, oracle, n, rng)
}

/// Improper descent for smooth, strongly convex losses: exploration radius
/// shrinks with `t`, queries may leave the body, iterates stay inside.
pub struct BanditGdSmsc {
    body: ConvexBody,
    alpha: f64,
    beta: f64,
    r_cap: f64,
    round: usize,
    x: Vector,
    pending: Option<(Vector, f64)>,
}

impl BanditGdSmsc {
    pub fn new(body: &ConvexBody, alpha: f64, beta: f64, r_cap: f64) -> Result<BanditGdSmsc> {
        if alpha <= 0.0 {
            return Err(Error::config("strong convexity constant must be positive"));
        }
        if beta < alpha {
            return Err(Error::config("smoothness constant must be at least alpha"));
        }
        if !(r_cap > 0.0 && r_cap <= 1.0) {
            return Err(Error::config("radius cap must lie in (0, 1]"));
        }
        Ok(BanditGdSmsc {
            body: body.clone(),
            alpha,
            beta,
            r_cap,
            round: 0,
            x: body.interior_point(),
            pending: None,
        })
    }

    pub fn eta_t(&self, t: usize) -> f64 {
        1.0 / (t as f64 * self.alpha)
    }

    pub fn r_t(&self, t: usize) -> f64 {
        let d = self.x.len() as f64;
        let sq = (self.r_cap * self.r_cap)
            .min(d * (1.0 / (2.0 * self.alpha * self.beta * t as f64)).sqrt());
        sq.sqrt()
    }
}

impl BanditAlgorithm for BanditGdSmsc {
    fn propose(&mut self, rng: &mut Rng) -> Result<Vector> {
        let t = self.round + 1;
        let r = self.r_t(t);
        let u = sample_uniform_sphere(self.x.len(), rng) * r;
        let play = &self.x + &u;
        self.pending = Some((u, r));
        Ok(play)
    }

    fn observe(&mut self, y: f64) -> Result<()> {
        let Some((u, r)) = self.pending.take() else {
            return Ok(());
        };
        self.round += 1;
        let played = &self.x + &u;
        let g = spherical_grad(&self.x, r, &played, y)?;
        let target = &self.x - &g * self.eta_t(self.round);
        self.x = self.body.project_euclidean(&target)?;
        Ok(())
    }
}

pub fn bandit_gd_smsc_run(
    oracle: &mut LossOracle,
    body: &ConvexBody,
    n: usize,
    alpha: f64,
    beta: f64,
    rng: &mut Rng,
) -> Result<RunTrace> {
    let mut alg = BanditGdSmsc::new(body, alpha, beta, 1.0)?;
    drive(&mut alg, oracle, n, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{LossSpec, NoiseSpec};
    use crate::vec2;
    use approx::assert_relative_eq;

    fn ball(d: usize, rho: f64) -> ConvexBody {
        ConvexBody::ball(d, rho).unwrap()
    }

    #[test]
    fn default_radius_matches_hand_value() {
        // diam = 2, d = 2, n = 1e4 gives r = sqrt(2)/10.
        let (_, r) = bandit_gd_defaults(2.0, 2, 10_000);
        assert_relative_eq!(r, 2.0f64.sqrt() / 10.0, max_relative = 1e-12);
    }

    #[test]
    fn body_without_unit_ball_is_rejected() {
        let tiny = ball(2, 0.5);
        assert!(BanditGd::new(&tiny, 100, None, None).is_err());
    }

    #[test]
    fn zero_loss_keeps_iterate_fixed() {
        let body = ball(2, 1.5);
        let spec = LossSpec::custom(|_: &Vector| 0.0, 2);
        let mut oracle = LossOracle::stochastic(spec, NoiseSpec::None, 0);
        let mut rng = stream(1, 0, "gd-zero");
        let mut alg = BanditGd::new(&body, 1000, None, None).unwrap();
        drive(&mut alg, &mut oracle, 1000, &mut rng).unwrap();
        assert_eq!(alg.x, Vector::zeros(2));
    }

    #[test]
    fn iterates_stay_in_the_shrunk_body() {
        let body = ball(2, 1.0);
        let spec = LossSpec::linear(vec2(0.7, -0.2));
        let mut oracle = LossOracle::stochastic(spec, NoiseSpec::default_gaussian(), 5);
        let mut rng = stream(2, 0, "gd-feas");
        let mut alg = BanditGd::new(&body, 2000, None, None).unwrap();
        let r = alg.radius();
        for t in 0..2000 {
            let x = alg.propose(&mut rng).unwrap();
            assert!(x.norm() <= 1.0 + 1e-9, "play left the ball at round {t}");
            let y = oracle.query(t, &x);
            alg.observe(y).unwrap();
            assert!(alg.x.norm() <= 1.0 - r + 1e-9);
        }
    }

    #[test]
    fn telescoping_bound_holds_on_traces() {
        // For projected descent, sum <g_t, x_t - x> <= diam^2/(2 eta)
        // + (eta/2) sum ||g_t||^2 for every x in the feasible set.
        let body = ball(2, 1.0);
        let spec = LossSpec::quadratic(crate::Matrix::identity(2, 2), vec2(0.3, 0.1), 0.0);
        let mut oracle = LossOracle::stochastic(spec, NoiseSpec::default_gaussian(), 11);
        let mut rng = stream(3, 0, "gd-telescope");
        let mut alg = BanditGd::new(&body, 500, None, None).unwrap();
        drive(&mut alg, &mut oracle, 500, &mut rng).unwrap();
        let hist = alg.history();
        let eta = alg.eta();
        let r = alg.radius();
        let diam = 2.0 * (1.0 - r);
        let g_sq: f64 = hist.iter().map(|(_, g)| g.norm_squared()).sum();
        let bound = diam * diam / (2.0 * eta) + eta / 2.0 * g_sq;
        let mut probe_rng = stream(4, 0, "gd-telescope-probe");
        for _ in 0..20 {
            let x = sample_uniform_sphere(2, &mut probe_rng) * (1.0 - r) * 0.99;
            let lhs: f64 = hist.iter().map(|(xt, g)| g.dot(&(xt - &x))).sum();
            assert!(lhs <= bound + 1e-7, "telescoping violated: {lhs} > {bound}");
        }
    }

    #[test]
    fn linear_regret_within_theorem_constant() {
        // Noiseless linear losses, d = 2, n = 1e4: mean regret over seeds
        // stays under sqrt(8) diam^{1/2} d^{1/2} n^{3/4}.
        let body = ball(2, 1.0);
        let n = 10_000;
        let mut total = 0.0;
        let seeds = 8;
        for seed in 0..seeds {
            let theta = vec2(0.6, -0.8);
            let spec = LossSpec::linear(theta.clone());
            let mut oracle = LossOracle::stochastic(spec, NoiseSpec::None, seed);
            let mut rng = stream(40 + seed, 0, "gd-reg");
            let trace = bandit_gd_run(&mut oracle, &body, n, None, None, &mut rng).unwrap();
            let best = -theta.norm() * n as f64;
            let reg: f64 = trace.plays.iter().map(|p| theta.dot(&p.proposal)).sum::<f64>() - best;
            total += reg;
        }
        let mean = total / seeds as f64;
        let bound = 8.0f64.sqrt() * 2.0f64.sqrt() * 2.0f64.sqrt() * (n as f64).powf(0.75);
        assert!(mean <= bound, "mean regret {mean} exceeds {bound}");
        assert!(mean > 0.0);
    }

    #[test]
    fn smsc_learning_rate_matches_formula() {
        let body = ball(2, 1.0);
        let alg = BanditGdSmsc::new(&body, 2.0, 2.0, 1.0).unwrap();
        assert_relative_eq!(alg.eta_t(5), 0.1, max_relative = 1e-12);
    }

    #[test]
    fn smsc_radius_schedule_is_non_increasing() {
        let body = ball(3, 1.0);
        let alg = BanditGdSmsc::new(&body, 1.0, 4.0, 0.7).unwrap();
        let mut prev = f64::INFINITY;
        for t in 1..200 {
            let r = alg.r_t(t);
            assert!(r <= prev + 1e-15);
            assert!(r <= 0.7 + 1e-15);
            prev = r;
        }
    }

    #[test]
    fn smsc_rejects_bad_constants() {
        let body = ball(2, 1.0);
        assert!(BanditGdSmsc::new(&body, 0.0, 1.0, 1.0).is_err());
        assert!(BanditGdSmsc::new(&body, 3.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn smsc_converges_on_quadratic() {
        // f = ||x||^2 has alpha = beta = 2; the final iterate should be close
        // to the minimiser and the regret sublinear.
        let body = ball(2, 1.0);
        let spec = LossSpec::smooth_strong(crate::Matrix::identity(2, 2)).unwrap();
        let n = 20_000;
        let mut oracle = LossOracle::stochastic(spec, NoiseSpec::default_gaussian(), 9);
        let mut rng = stream(9, 0, "gd-smsc");
        let mut alg = BanditGdSmsc::new(&body, 2.0, 2.0, 1.0).unwrap();
        let mut reg = 0.0;
        for t in 0..n {
            let x = alg.propose(&mut rng).unwrap();
            let y = oracle.query(t, &x);
            reg += oracle.true_loss(t, &x);
            alg.observe(y).unwrap();
        }
        assert!(alg.x.norm() < 0.1, "iterate far from minimiser: {}", alg.x.norm());
        let bound = 20.0 * 2.0 * (2.0f64 * n as f64 / 2.0).sqrt();
        assert!(reg <= bound, "regret {reg} above {bound}");
    }

    #[test]
    fn degenerate_horizon_plays_centre() {
        let body = ball(2, 1.0);
        // n small enough that the default radius saturates at 1.
        let mut alg = BanditGd::new(&body, 2, None, None).unwrap();
        assert!(!alg.warnings().is_empty());
        let mut rng = stream(5, 0, "gd-degen");
        let x = alg.propose(&mut rng).unwrap();
        assert_eq!(x, Vector::zeros(2));
        alg.observe(0.4).unwrap();
        assert_eq!(alg.x, Vector::zeros(2));
    }
}
