//! Follow-the-regularised-leader over a self-concordant barrier, with
//! ellipsoidal smoothing on the Dikin shell.

use crate::geometry::{sample_uniform_sphere, ConvexBody};
use crate::linalg::inv_sqrt_spd;
use crate::losses::LossOracle;
use crate::rng::Rng;
use crate::{Error, Matrix, Result, Vector};

use super::barrier::{damped_newton, damped_newton_capped, Barrier, ShiftedBarrier};
use super::{drive, BanditAlgorithm, RunTrace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FtrlMode {
    Basic,
    StronglyConvex { alpha: f64 },
    /// Paired rounds: play the iterate, then a perturbed point, and build the
    /// gradient from the difference of the two observations.
    TwoPoint,
}

/// Optional overrides; anything left unset falls back to the horizon tuning.
#[derive(Debug, Clone, Copy, Default)]
pub struct FtrlTuning {
    pub eta: Option<f64>,
    pub r: Option<f64>,
    /// Smoothness constant feeding the strongly-convex learning rate.
    pub beta: Option<f64>,
    /// Noise scale feeding the two-point tuning.
    pub sigma: f64,
}

/// `eta = (theta log n)^{3/4} d^{-1/2} n^{-3/4}`,
/// `r_raw = 2 d^{1/2} n^{-1/4} (theta log n)^{1/4}` (uncapped).
pub fn ftrl_basic_defaults(theta: f64, d: usize, n: usize) -> (f64, f64) {
    let tl = theta * (n as f64).ln();
    let nf = n as f64;
    let eta = tl.powf(0.75) / (d as f64).sqrt() / nf.powf(0.75);
    let r_raw = 2.0 * (d as f64).sqrt() * tl.powf(0.25) / nf.powf(0.25);
    (eta, r_raw)
}

/// `eta = (1/2d) sqrt((theta log n + (3 beta / 2 alpha)(1 + log n)) / n)`.
pub fn ftrl_sc_default_eta(theta: f64, d: usize, n: usize, alpha: f64, beta: f64) -> f64 {
    let ln = (n as f64).ln();
    let num = theta * ln + 1.5 * beta / alpha * (1.0 + ln);
    (num / n as f64).sqrt() / (2.0 * d as f64)
}

/// Two-point tuning: exploration shrinks with the noise scale `sigma`.
pub fn ftrl_two_point_defaults(theta: f64, d: usize, n: usize, sigma: f64) -> (f64, f64) {
    let df = d as f64;
    let nf = n as f64;
    let tl = theta * nf.ln();
    let r_raw = (df * (tl / nf).sqrt()).max(df.sqrt() * sigma.sqrt() * tl.powf(0.25) / nf.powf(0.25));
    let damp = if sigma > 0.0 { (r_raw / sigma).min(1.0) } else { 1.0 };
    let eta = (tl / nf).sqrt() / (12.0 * df) * damp;
    (eta, r_raw)
}

enum Phase {
    /// Next play perturbs the iterate (every round in one-point modes).
    Explore,
    /// Two-point only: next play is the iterate itself.
    AtIterate,
}

pub struct Ftrl {
    body: ConvexBody,
    barrier: Barrier,
    mode: FtrlMode,
    eta: f64,
    r: f64,
    centre: Vector,
    x: Vector,
    grad_sum: Vector,
    iterate_sum: Vector,
    /// `(g_u, x_u)` pairs accumulated by the strongly-convex objective.
    terms: Vec<(Vector, Vector)>,
    updates: usize,
    pending: Option<(Vector, Matrix)>,
    stored: Option<f64>,
    phase: Phase,
    degenerate: bool,
    warned_eta: bool,
    warnings: Vec<String>,
}

impl Ftrl {
    pub fn new(
        body: &ConvexBody,
        barrier: Barrier,
        n: usize,
        mode: FtrlMode,
        tuning: FtrlTuning,
    ) -> Result<Ftrl> {
        if n == 0 {
            return Err(Error::config("ftrl needs a positive horizon"));
        }
        let d = body.dim();
        let theta = barrier.theta();
        if let FtrlMode::StronglyConvex { alpha } = mode {
            if alpha <= 0.0 {
                return Err(Error::config("strong convexity constant must be positive"));
            }
            if let Some(beta) = tuning.beta {
                if beta < alpha {
                    return Err(Error::config("smoothness constant must be at least alpha"));
                }
            }
        }

        let mut warnings = Vec::new();
        let (eta_def, r_def) = match mode {
            FtrlMode::Basic => ftrl_basic_defaults(theta, d, n),
            FtrlMode::StronglyConvex { alpha } => {
                let beta = tuning.beta.unwrap_or(alpha);
                (ftrl_sc_default_eta(theta, d, n, alpha, beta), 1.0)
            }
            FtrlMode::TwoPoint => ftrl_two_point_defaults(theta, d, n, tuning.sigma),
        };
        let eta = tuning.eta.unwrap_or(eta_def);
        if eta <= 0.0 {
            return Err(Error::config("ftrl needs eta > 0"));
        }
        let r_max = if matches!(mode, FtrlMode::StronglyConvex { .. }) { 1.0 } else { 1.0 - 1e-12 };
        let mut degenerate = false;
        let r = match tuning.r {
            Some(r) if !(r > 0.0 && r <= r_max) => {
                return Err(Error::config("ftrl needs r in (0, 1)"));
            }
            Some(r) => r,
            None if r_def > r_max => {
                degenerate = true;
                warnings
                    .push("horizon too short for the exploration radius; playing the centre".into());
                r_def
            }
            None => r_def,
        };
        if (n as f64) < 4.0 * theta * (n as f64).ln() {
            warnings.push("horizon below the tuning threshold n >= 4 theta log n".into());
        }

        let centre = damped_newton(&barrier, &body.interior_point())?;
        Ok(Ftrl {
            body: body.clone(),
            barrier,
            mode,
            eta,
            r,
            centre: centre.clone(),
            x: centre,
            grad_sum: Vector::zeros(d),
            iterate_sum: Vector::zeros(d),
            terms: Vec::new(),
            updates: 0,
            pending: None,
            stored: None,
            phase: match mode {
                FtrlMode::TwoPoint => Phase::AtIterate,
                _ => Phase::Explore,
            },
            degenerate,
            warned_eta: false,
            warnings,
        })
    }

    pub fn iterate(&self) -> &Vector {
        &self.x
    }

    pub fn centre(&self) -> &Vector {
        &self.centre
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn terms(&self) -> &[(Vector, Vector)] {
        &self.terms
    }

    /// Inverse covariance of the exploration step at the current iterate.
    fn shell_matrix(&self) -> Result<Matrix> {
        let mut h = self.barrier.hessian(&self.x)?;
        if let FtrlMode::StronglyConvex { alpha } = self.mode {
            let t = self.updates as f64 + 1.0;
            let ridge = self.eta * alpha * t / 2.0;
            for i in 0..h.nrows() {
                h[(i, i)] += ridge;
            }
        }
        Ok(h)
    }

    fn check_dual_norm(&mut self, y_eff: f64) {
        let dual = 2.0 * self.x.len() as f64 * y_eff.abs() / self.r;
        if self.eta * dual > 0.5 && !self.warned_eta {
            self.warned_eta = true;
            self.warnings.push(format!(
                "learning rate precondition violated: eta * dual norm = {:.3}",
                self.eta * dual
            ));
        }
    }

    fn absorb(&mut self, gradient: Vector) -> Result<()> {
        self.updates += 1;
        self.grad_sum += &gradient;
        self.iterate_sum += &self.x;
        if matches!(self.mode, FtrlMode::StronglyConvex { .. }) {
            self.terms.push((gradient, self.x.clone()));
        }
        let (linear, quad) = match self.mode {
            FtrlMode::StronglyConvex { alpha } => (
                &self.grad_sum * self.eta - &self.iterate_sum * (self.eta * alpha / 2.0),
                self.eta * alpha / 2.0 * self.updates as f64,
            ),
            _ => (&self.grad_sum * self.eta, 0.0),
        };
        let obj = ShiftedBarrier { barrier: &self.barrier, linear, quad };
        self.x = damped_newton_capped(&obj, &self.x, 50)?;
        Ok(())
    }
}

impl BanditAlgorithm for Ftrl {
    fn propose(&mut self, rng: &mut Rng) -> Result<Vector> {
        if self.degenerate {
            return Ok(self.centre.clone());
        }
        if matches!(self.phase, Phase::AtIterate) {
            return Ok(self.x.clone());
        }
        let d = self.x.len();
        let shell = self.shell_matrix()?;
        let xi = sample_uniform_sphere(d, rng);
        let offset = inv_sqrt_spd(&shell) * xi * (self.r / 2.0);
        let play = &self.x + &offset;
        // Dikin containment keeps every play strictly feasible.
        assert!(self.barrier.value(&play).is_finite(), "ftrl left the barrier domain");
        assert!(self.body.contains(&play), "ftrl left the body");
        self.pending = Some((offset, shell));
        Ok(play)
    }

    fn observe(&mut self, y: f64) -> Result<()> {
        if self.degenerate {
            return Ok(());
        }
        if matches!(self.phase, Phase::AtIterate) {
            self.stored = Some(y);
            self.phase = Phase::Explore;
            return Ok(());
        }
        let Some((offset, shell)) = self.pending.take() else {
            return Ok(());
        };
        let d = self.x.len() as f64;
        let y_eff = match self.mode {
            FtrlMode::TwoPoint => {
                let base = self.stored.take().expect("two-point pair out of order");
                self.phase = Phase::AtIterate;
                y - base
            }
            _ => y,
        };
        self.check_dual_norm(y_eff);
        let gradient = &shell * &offset * (4.0 * d * y_eff / (self.r * self.r));
        self.absorb(gradient)
    }

    fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

#[allow(clippy::too_many_arguments)]
pub fn ftrl_run(
    oracle: &mut LossOracle,
    body: &ConvexBody,
    barrier: Barrier,
    n: usize,
    eta: Option<f64>,
    r: Option<f64>,
    mode: FtrlMode,
    rng: &mut Rng,
) -> Result<RunTrace> {
    let tuning = FtrlTuning {
        eta,
        r,
        beta: oracle.losses().at(0).tags.smooth,
        sigma: oracle.noise().std_dev(),
    };
    let mut alg = Ftrl::new(body, barrier, n, mode, tuning)?;
    drive(&mut alg, oracle, n, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{LossSpec, NoiseSpec};
    use crate::rng::stream;
    use crate::vec2;
    use approx::assert_relative_eq;

    fn unit_ball() -> ConvexBody {
        ConvexBody::ball(2, 1.0).unwrap()
    }

    fn ball_barrier() -> Barrier {
        Barrier::BallLog { rho: 1.0 }
    }

    #[test]
    fn basic_default_eta_matches_hand_value() {
        let (eta, _) = ftrl_basic_defaults(1.0, 2, 10_000);
        let expect = (10_000f64.ln()).powf(0.75) / 2.0f64.sqrt() / 1000.0;
        assert_relative_eq!(eta, expect, max_relative = 1e-12);
        assert!((eta - 0.00375).abs() < 5e-5);
    }

    #[test]
    fn first_iterate_is_the_barrier_minimiser() {
        let alg = Ftrl::new(
            &unit_ball(),
            ball_barrier(),
            10_000,
            FtrlMode::Basic,
            FtrlTuning::default(),
        )
        .unwrap();
        assert!(alg.iterate().norm() <= 1e-9);
        assert_eq!(alg.iterate(), alg.centre());
    }

    #[test]
    fn box_barrier_centres_correctly() {
        // Box [0, 2] x [-1, 1]: the log barrier is minimised at the middle.
        let body = ConvexBody::axis_box(vec2(0.0, -1.0), vec2(2.0, 1.0)).unwrap();
        let barrier = Barrier::for_body(&body).unwrap();
        let alg =
            Ftrl::new(&body, barrier, 10_000, FtrlMode::Basic, FtrlTuning::default()).unwrap();
        assert_relative_eq!(alg.centre()[0], 1.0, epsilon = 1e-7);
        assert_relative_eq!(alg.centre()[1], 0.0, epsilon = 1e-7);
    }

    #[test]
    fn plays_stay_feasible_on_a_box() {
        let body = ConvexBody::cube(2, 1.0).unwrap();
        let barrier = Barrier::for_body(&body).unwrap();
        let spec = LossSpec::linear(vec2(0.4, -0.3));
        let mut oracle = LossOracle::stochastic(spec, NoiseSpec::default_gaussian(), 2);
        let mut rng = stream(12, 0, "ftrl-feas");
        let trace = ftrl_run(
            &mut oracle,
            &body,
            barrier,
            5000,
            None,
            None,
            FtrlMode::Basic,
            &mut rng,
        )
        .unwrap();
        for p in &trace.plays {
            assert!(p.proposal.amax() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn basic_mode_moves_toward_linear_minimiser() {
        let spec = LossSpec::linear(vec2(1.0, 0.0));
        let mut oracle = LossOracle::stochastic(spec, NoiseSpec::default_gaussian(), 3);
        let mut rng = stream(13, 0, "ftrl-lin");
        let mut alg = Ftrl::new(
            &unit_ball(),
            ball_barrier(),
            20_000,
            FtrlMode::Basic,
            FtrlTuning::default(),
        )
        .unwrap();
        for t in 0..20_000 {
            let x = alg.propose(&mut rng).unwrap();
            let y = oracle.query(t, &x);
            alg.observe(y).unwrap();
        }
        // Minimiser of <e1, x> over the ball is (-1, 0).
        assert!(alg.iterate()[0] < -0.5, "iterate {:?}", alg.iterate());
    }

    #[test]
    fn sc_mode_regret_scales_like_sqrt_n() {
        let n = 5000;
        let seeds = 20;
        let mut total = 0.0;
        for seed in 0..seeds {
            let spec = LossSpec::smooth_strong(Matrix::identity(2, 2)).unwrap();
            let mut oracle = LossOracle::stochastic(spec, NoiseSpec::default_gaussian(), seed);
            let mut rng = stream(50 + seed, 0, "ftrl-sc");
            let trace = ftrl_run(
                &mut oracle,
                &unit_ball(),
                ball_barrier(),
                n,
                None,
                None,
                FtrlMode::StronglyConvex { alpha: 2.0 },
                &mut rng,
            )
            .unwrap();
            let reg: f64 = trace.plays.iter().map(|p| p.proposal.norm_squared()).sum();
            total += reg;
        }
        let mean = total / seeds as f64;
        let bound = 30.0 * (n as f64 * (n as f64).ln()).sqrt();
        assert!(mean <= bound, "mean regret {mean} exceeds {bound}");
    }

    #[test]
    fn two_point_pairs_stay_close() {
        // Noiseless probes of a [0,1]-bounded convex loss differ by at most
        // r/2 within a pair.
        let spec = LossSpec::custom(|x: &Vector| 0.5 * x.norm_squared(), 2);
        let mut oracle = LossOracle::stochastic(spec, NoiseSpec::None, 4);
        let mut rng = stream(14, 0, "ftrl-tp");
        let n = 2000;
        let mut alg = Ftrl::new(
            &unit_ball(),
            ball_barrier(),
            n,
            FtrlMode::TwoPoint,
            FtrlTuning::default(),
        )
        .unwrap();
        let r = alg.radius();
        let mut prev: Option<f64> = None;
        for t in 0..n {
            let x = alg.propose(&mut rng).unwrap();
            let y = oracle.query(t, &x);
            alg.observe(y).unwrap();
            if t % 2 == 1 {
                let base = prev.take().unwrap();
                assert!(
                    (y - base).abs() <= r / 2.0 + 1e-12,
                    "pair gap {} above r/2 = {}",
                    (y - base).abs(),
                    r / 2.0
                );
            } else {
                prev = Some(y);
            }
        }
    }

    #[test]
    fn two_point_defaults_with_zero_noise() {
        let (eta, r) = ftrl_two_point_defaults(1.0, 2, 10_000, 0.0);
        let tl = (10_000f64.ln()) / 10_000.0;
        assert_relative_eq!(r, 2.0 * tl.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(eta, tl.sqrt() / 24.0, max_relative = 1e-12);
    }

    #[test]
    fn eta_precondition_violation_is_logged() {
        let spec = LossSpec::linear(vec2(1.0, 0.0));
        let mut oracle = LossOracle::stochastic(spec, NoiseSpec::None, 5);
        let mut rng = stream(15, 0, "ftrl-warn");
        let tuning = FtrlTuning { eta: Some(50.0), r: Some(0.3), ..FtrlTuning::default() };
        let mut alg =
            Ftrl::new(&unit_ball(), ball_barrier(), 100, FtrlMode::Basic, tuning).unwrap();
        for t in 0..10 {
            let x = alg.propose(&mut rng).unwrap();
            let y = oracle.query(t, &x);
            // A grossly mistuned learning rate may legitimately break the
            // inner Newton solve; the warning must land either way.
            if alg.observe(y).is_err() {
                break;
            }
        }
        assert!(alg.warnings().iter().any(|w| w.contains("precondition")));
    }

    #[test]
    fn degenerate_horizon_plays_centre() {
        let mut alg = Ftrl::new(
            &unit_ball(),
            ball_barrier(),
            4,
            FtrlMode::Basic,
            FtrlTuning::default(),
        )
        .unwrap();
        assert!(alg.warnings().iter().any(|w| w.contains("centre")));
        let mut rng = stream(16, 0, "ftrl-degen");
        let x = alg.propose(&mut rng).unwrap();
        assert_eq!(x, Vector::zeros(2));
        alg.observe(0.3).unwrap();
        assert_eq!(*alg.iterate(), Vector::zeros(2));
    }

    #[test]
    fn explicit_bad_radius_is_rejected() {
        let err = Ftrl::new(
            &unit_ball(),
            ball_barrier(),
            100,
            FtrlMode::Basic,
            FtrlTuning { r: Some(1.5), ..FtrlTuning::default() },
        );
        assert!(err.is_err());
    }
}
