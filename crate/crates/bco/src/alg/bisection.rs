//! One-dimensional bisection, deterministic and stochastic.

use crate::losses::LossOracle;
use crate::rng::Rng;
use crate::{Error, Result, Vector};

use super::{BanditAlgorithm, Played, RunTrace};

/// Noiseless trisection: keep the two thirds around the better probe.
/// After `k` steps the interval width is `(2/3)^k` of the original.
pub fn det_bisect<F: FnMut(f64) -> f64>(mut f: F, interval: (f64, f64), k: usize) -> (f64, f64) {
    let (mut x, mut y) = interval;
    for _ in 0..k {
        let x0 = (2.0 * x + y) / 3.0;
        let x1 = (x + 2.0 * y) / 3.0;
        if f(x1) >= f(x0) {
            y = x1;
        } else {
            x = x0;
        }
    }
    (x, y)
}

fn scalar(v: f64) -> Vector {
    Vector::from_element(1, v)
}

/// Threshold `c_t = sqrt(24/t log(4n/(3 delta)))` for the episode halt test.
pub fn episode_threshold(t: usize, n: usize, delta: f64) -> f64 {
    (24.0 / t as f64 * (4.0 * n as f64 / (3.0 * delta)).ln()).sqrt()
}

/// State of one stochastic episode over `[x, y]`: cycle through the three
/// quarter points, halt when a quarter can be discarded with confidence.
struct Episode {
    x: f64,
    y: f64,
    probes: [f64; 3],
    sums: [f64; 3],
    t: usize,
    budget: usize,
    delta: f64,
}

enum EpisodeStep {
    Continue,
    Done((f64, f64)),
}

impl Episode {
    fn new(interval: (f64, f64), budget: usize, delta: f64) -> Episode {
        let (x, y) = interval;
        Episode {
            x,
            y,
            probes: [
                0.75 * x + 0.25 * y,
                0.5 * x + 0.5 * y,
                0.25 * x + 0.75 * y,
            ],
            sums: [0.0; 3],
            t: 0,
            budget,
            delta,
        }
    }

    /// Probe index for the next round: `t mod 3` with `t` starting at 1.
    fn next_point(&self) -> f64 {
        self.probes[(self.t + 1) % 3]
    }

    fn absorb(&mut self, y_obs: f64, horizon: usize) -> EpisodeStep {
        self.t += 1;
        self.sums[self.t % 3] += y_obs;
        if self.t % 3 == 0 {
            let t = self.t as f64;
            let means = [
                3.0 * self.sums[0] / t,
                3.0 * self.sums[1] / t,
                3.0 * self.sums[2] / t,
            ];
            let c = episode_threshold(self.t, horizon, self.delta);
            if means[2] - means[1] >= c {
                return EpisodeStep::Done((self.x, self.probes[2]));
            }
            if means[0] - means[1] >= c {
                return EpisodeStep::Done((self.probes[0], self.y));
            }
        }
        if self.t >= self.budget {
            EpisodeStep::Done((self.x, self.y))
        } else {
            EpisodeStep::Continue
        }
    }
}

/// Run a single episode against an oracle. With fewer than three rounds of
/// budget the input interval comes straight back.
pub fn bisect_episode(
    oracle: &mut LossOracle,
    interval: (f64, f64),
    n: usize,
    delta: f64,
) -> Result<((f64, f64), Vec<Played>)> {
    if n < 3 {
        return Ok((interval, Vec::new()));
    }
    let mut ep = Episode::new(interval, n, delta);
    let mut plays = Vec::new();
    loop {
        let xq = ep.next_point();
        let y = oracle.query(plays.len(), &scalar(xq));
        plays.push(Played { proposal: scalar(xq), observation: y });
        match ep.absorb(y, n) {
            EpisodeStep::Continue => {}
            EpisodeStep::Done(out) => return Ok((out, plays)),
        }
    }
}

/// Stochastic bisection as a protocol state machine: repeated episodes on a
/// shrinking interval, each at confidence `delta / k_max`.
pub struct Bisection {
    interval: (f64, f64),
    episode: Episode,
    n: usize,
    round: usize,
    episode_delta: f64,
}

impl Bisection {
    pub fn new(interval: (f64, f64), n: usize, delta: f64) -> Result<Bisection> {
        if interval.0 >= interval.1 {
            return Err(Error::config("bisection needs a nondegenerate interval"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::config("confidence must lie in (0, 1)"));
        }
        let k_max = Self::k_max(n);
        let episode_delta = delta / k_max as f64;
        Ok(Bisection {
            interval,
            episode: Episode::new(interval, n, episode_delta),
            n,
            round: 0,
            episode_delta,
        })
    }

    /// `1 + ceil(log n / log(4/3))` episodes suffice to exhaust any horizon.
    pub fn k_max(n: usize) -> usize {
        1 + ((n as f64).ln() / (4.0f64 / 3.0).ln()).ceil() as usize
    }

    pub fn current_interval(&self) -> (f64, f64) {
        self.interval
    }
}

impl BanditAlgorithm for Bisection {
    fn propose(&mut self, _rng: &mut Rng) -> Result<Vector> {
        Ok(scalar(self.episode.next_point()))
    }

    fn observe(&mut self, y: f64) -> Result<()> {
        self.round += 1;
        let budget = self.episode.budget;
        if let EpisodeStep::Done(next) = self.episode.absorb(y, budget) {
            self.interval = next;
            let remaining = self.n.saturating_sub(self.round).max(1);
            self.episode = Episode::new(next, remaining, self.episode_delta);
        }
        Ok(())
    }
}

/// Convenience wrapper: full run plus the final interval.
pub fn bisection_run(
    oracle: &mut LossOracle,
    interval: (f64, f64),
    n: usize,
    delta: f64,
    rng: &mut Rng,
) -> Result<(RunTrace, (f64, f64))> {
    let mut alg = Bisection::new(interval, n, delta)?;
    let trace = super::drive(&mut alg, oracle, n, rng)?;
    Ok((trace, alg.current_interval()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{LossSpec, NoiseSpec};
    use crate::rng::stream;
    use approx::assert_relative_eq;

    #[test]
    fn det_bisect_tracks_the_minimiser() {
        let (lo, hi) = det_bisect(|x| (x - 0.3).abs(), (-1.0, 1.0), 20);
        assert!(lo <= 0.3 && 0.3 <= hi);
        assert_relative_eq!(hi - lo, 2.0 * (2.0f64 / 3.0).powi(20), max_relative = 1e-9);
    }

    #[test]
    fn det_bisect_constant_function_keeps_min() {
        let (lo, hi) = det_bisect(|_| 1.0, (0.0, 3.0), 5);
        assert!(lo < hi);
        assert!(lo >= 0.0 && hi <= 3.0);
    }

    #[test]
    fn threshold_matches_hand_value() {
        // n = 999, delta = 0.05 at t = 3.
        let c = episode_threshold(3, 999, 0.05);
        assert_relative_eq!(c, (8.0 * (26640.0f64).ln()).sqrt(), max_relative = 1e-12);
        assert!((c - 9.03).abs() < 0.01);
    }

    #[test]
    fn k_max_matches_hand_value() {
        assert_eq!(Bisection::k_max(10_000), 34);
    }

    fn abs_oracle(seed: u64, noise: NoiseSpec) -> LossOracle {
        let spec = LossSpec::custom(|x: &Vector| (x[0] - 0.3).abs(), 1);
        LossOracle::stochastic(spec, noise, seed)
    }

    #[test]
    fn noiseless_episode_discards_the_far_quarter() {
        // On [-1, 1] with f = |x - 0.3| the probe means are 0.8, 0.3, 0.2, so
        // the left quarter goes once c_t drops below 0.5 (around t = 1045).
        let mut oracle = abs_oracle(0, NoiseSpec::None);
        let ((lo, hi), plays) = bisect_episode(&mut oracle, (-1.0, 1.0), 2000, 0.05).unwrap();
        assert_eq!((lo, hi), (-0.5, 1.0));
        assert!(plays.len() < 2000, "episode should halt early");
        assert!(lo <= 0.3 && 0.3 <= hi);
    }

    #[test]
    fn tiny_budget_returns_input() {
        let mut oracle = abs_oracle(0, NoiseSpec::None);
        let (out, plays) = bisect_episode(&mut oracle, (-1.0, 1.0), 2, 0.05).unwrap();
        assert_eq!(out, (-1.0, 1.0));
        assert!(plays.is_empty());
    }

    #[test]
    fn full_run_shrinks_and_keeps_minimiser() {
        let mut rng = stream(3, 0, "bisect");
        let mut oracle = abs_oracle(7, NoiseSpec::default_gaussian());
        let (trace, (lo, hi)) = bisection_run(&mut oracle, (-1.0, 1.0), 20_000, 0.1, &mut rng).unwrap();
        assert_eq!(trace.plays.len(), 20_000);
        assert!(hi - lo < 2.0);
        assert!(lo <= 0.3 && 0.3 <= hi, "final interval [{lo}, {hi}]");
    }

    #[test]
    fn min_preservation_rate_across_seeds() {
        // Empirical coverage at n = 1e4, delta = 0.1 over 200 seeds.
        let mut kept = 0;
        let total = 200;
        for seed in 0..total {
            let mut rng = stream(100 + seed, 0, "bisect-cov");
            let mut oracle = abs_oracle(seed, NoiseSpec::default_gaussian());
            let (_, (lo, hi)) =
                bisection_run(&mut oracle, (-1.0, 1.0), 10_000, 0.1, &mut rng).unwrap();
            if lo <= 0.3 && 0.3 <= hi {
                kept += 1;
            }
        }
        let rate = kept as f64 / total as f64;
        assert!(rate >= 1.0 - 0.1 - 0.05, "coverage {rate}");
    }
}
