//! Loss zoo, noise channels and the query oracle.
//!
//! Observation noise is derived from a per-query counter stream, so a rerun
//! with the same seed reproduces every observation bit for bit regardless of
//! how many random draws the algorithm itself consumed in between.

pub mod submodular;

use crate::linalg::{sym_eigenvalues, symmetrize};
use crate::rng::{stream, Rng};
use crate::{Error, Matrix, Result, Vector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use std::fmt;
use std::sync::Arc;

/// Concrete loss shapes. `Custom` carries an arbitrary callable and is the
/// only kind without analytic structure.
#[derive(Clone)]
pub enum LossKind {
    Linear { theta: Vector },
    /// `f(x) = x^T A x + <b, x> + c`.
    Quadratic { a: Matrix, b: Vector, c: f64 },
    /// `f(x) = ||x - shift||^power`, power 1 or 2.
    Norm { shift: Vector, power: u8 },
    /// `f(x) = max_i <g_i, x> + c_i`.
    PiecewiseMax { pieces: Vec<(Vector, f64)> },
    /// `f(x) = x^T A x` with curvature read off the spectrum of `A`.
    SmoothStrong { a: Matrix },
    Custom { f: Arc<dyn Fn(&Vector) -> f64 + Send + Sync>, dim: usize },
}

impl fmt::Debug for LossKind {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossKind::Linear { theta } => fm.debug_struct("Linear").field("theta", theta).finish(),
            LossKind::Quadratic { a, b, c } => fm
                .debug_struct("Quadratic")
                .field("a", a)
                .field("b", b)
                .field("c", c)
                .finish(),
            LossKind::Norm { shift, power } => fm
                .debug_struct("Norm")
                .field("shift", shift)
                .field("power", power)
                .finish(),
            LossKind::PiecewiseMax { pieces } => {
                fm.debug_struct("PiecewiseMax").field("pieces", &pieces.len()).finish()
            }
            LossKind::SmoothStrong { a } => {
                fm.debug_struct("SmoothStrong").field("a", a).finish()
            }
            LossKind::Custom { dim, .. } => fm.debug_struct("Custom").field("dim", dim).finish(),
        }
    }
}

/// Function-class claims attached to a loss. Claims are validated by
/// sampling, not trusted.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassTags {
    pub bounded: bool,
    pub lipschitz: Option<f64>,
    pub smooth: Option<f64>,
    pub strongly_convex: Option<f64>,
    pub linear: bool,
    pub quadratic: bool,
}

#[derive(Debug, Clone)]
pub struct LossSpec {
    pub kind: LossKind,
    pub tags: ClassTags,
}

impl LossSpec {
    pub fn linear(theta: Vector) -> Self {
        let norm = theta.norm();
        LossSpec {
            kind: LossKind::Linear { theta },
            tags: ClassTags {
                lipschitz: Some(norm),
                smooth: Some(0.0),
                linear: true,
                quadratic: true,
                ..ClassTags::default()
            },
        }
    }

    pub fn quadratic(a: Matrix, b: Vector, c: f64) -> Self {
        let sym = symmetrize(&a);
        let evals = sym_eigenvalues(&sym);
        let lo = evals[0];
        let hi = evals[evals.len() - 1];
        LossSpec {
            kind: LossKind::Quadratic { a: sym, b, c },
            tags: ClassTags {
                smooth: Some(2.0 * hi.max(0.0)),
                strongly_convex: if lo > 0.0 { Some(2.0 * lo) } else { None },
                quadratic: true,
                ..ClassTags::default()
            },
        }
    }

    pub fn norm(shift: Vector, power: u8) -> Result<Self> {
        if !(power == 1 || power == 2) {
            return Err(Error::config("norm power must be 1 or 2"));
        }
        let tags = if power == 1 {
            ClassTags { lipschitz: Some(1.0), ..ClassTags::default() }
        } else {
            ClassTags { smooth: Some(2.0), strongly_convex: Some(2.0), quadratic: true, ..ClassTags::default() }
        };
        Ok(LossSpec { kind: LossKind::Norm { shift, power }, tags })
    }

    pub fn piecewise_max(pieces: Vec<(Vector, f64)>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::config("piecewise max needs at least one piece"));
        }
        let lip = pieces.iter().map(|(g, _)| g.norm()).fold(0.0, f64::max);
        Ok(LossSpec {
            kind: LossKind::PiecewiseMax { pieces },
            tags: ClassTags { lipschitz: Some(lip), ..ClassTags::default() },
        })
    }

    pub fn smooth_strong(a: Matrix) -> Result<Self> {
        let sym = symmetrize(&a);
        let evals = sym_eigenvalues(&sym);
        if evals[0] <= 0.0 {
            return Err(Error::config("smooth-strong losses need positive-definite curvature"));
        }
        Ok(LossSpec {
            kind: LossKind::SmoothStrong { a: sym.clone() },
            tags: ClassTags {
                smooth: Some(2.0 * evals[evals.len() - 1]),
                strongly_convex: Some(2.0 * evals[0]),
                quadratic: true,
                ..ClassTags::default()
            },
        })
    }

    pub fn custom<F>(f: F, dim: usize) -> Self
    where
        F: Fn(&Vector) -> f64 + Send + Sync + 'static,
    {
        LossSpec { kind: LossKind::Custom { f: Arc::new(f), dim }, tags: ClassTags::default() }
    }

    pub fn with_bounded_tag(mut self) -> Self {
        self.tags.bounded = true;
        self
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            LossKind::Linear { theta } => theta.len(),
            LossKind::Quadratic { b, .. } => b.len(),
            LossKind::Norm { shift, .. } => shift.len(),
            LossKind::PiecewiseMax { pieces } => pieces[0].0.len(),
            LossKind::SmoothStrong { a } => a.nrows(),
            LossKind::Custom { dim, .. } => *dim,
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match &self.kind {
            LossKind::Linear { theta } => theta.dot(x),
            LossKind::Quadratic { a, b, c } => (a * x).dot(x) + b.dot(x) + c,
            LossKind::Norm { shift, power } => {
                let n = (x - shift).norm();
                if *power == 1 {
                    n
                } else {
                    n * n
                }
            }
            LossKind::PiecewiseMax { pieces } => pieces
                .iter()
                .map(|(g, c)| g.dot(x) + c)
                .fold(f64::NEG_INFINITY, f64::max),
            LossKind::SmoothStrong { a } => (a * x).dot(x),
            LossKind::Custom { f, .. } => f(x),
        }
    }

    /// A subgradient where available analytically; `None` for `Custom`.
    pub fn subgradient(&self, x: &Vector) -> Option<Vector> {
        match &self.kind {
            LossKind::Linear { theta } => Some(theta.clone()),
            LossKind::Quadratic { a, b, .. } => Some(a * x * 2.0 + b),
            LossKind::Norm { shift, power } => {
                let diff = x - shift;
                if *power == 2 {
                    Some(diff * 2.0)
                } else {
                    let n = diff.norm();
                    Some(if n > 1e-12 { diff / n } else { Vector::zeros(x.len()) })
                }
            }
            LossKind::PiecewiseMax { pieces } => {
                let (g, _) = pieces
                    .iter()
                    .max_by(|l, r| {
                        (l.0.dot(x) + l.1)
                            .partial_cmp(&(r.0.dot(x) + r.1))
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .expect("non-empty pieces");
                Some(g.clone())
            }
            LossKind::SmoothStrong { a } => Some(a * x * 2.0),
            LossKind::Custom { .. } => None,
        }
    }

    /// Validate the claimed class tags by sampling on a body. Convexity is
    /// always checked by midpoint tests.
    pub fn validate_on(&self, body: &crate::geometry::ConvexBody, rng: &mut Rng) -> Result<()> {
        let trials = 1000;
        let mut points = Vec::with_capacity(trials);
        let radius = body.outer_radius();
        let d = body.dim();
        while points.len() < trials {
            let cand = crate::geometry::sample_uniform_ball(d, rng) * radius;
            if body.contains(&cand) {
                points.push(cand);
            }
        }
        for pair in points.chunks(2) {
            if pair.len() < 2 {
                break;
            }
            let (x, y) = (&pair[0], &pair[1]);
            let mid = (x + y) * 0.5;
            let gap = self.value(&mid) - 0.5 * (self.value(x) + self.value(y));
            if gap > 1e-9 {
                return Err(Error::precondition(format!(
                    "midpoint convexity violated by {gap:.3e}"
                )));
            }
        }
        if self.tags.bounded {
            for x in &points {
                let v = self.value(x);
                if !(-1e-9..=1.0 + 1e-9).contains(&v) {
                    return Err(Error::precondition(format!(
                        "bounded tag violated: f = {v:.6} on the body"
                    )));
                }
            }
        }
        if let Some(lip) = self.tags.lipschitz {
            for pair in points.chunks(2) {
                if pair.len() < 2 {
                    break;
                }
                let dist = (&pair[0] - &pair[1]).norm();
                if dist > 1e-9 {
                    let ratio = (self.value(&pair[0]) - self.value(&pair[1])).abs() / dist;
                    if ratio > lip + 1e-6 {
                        return Err(Error::precondition(format!(
                            "lipschitz tag {lip} violated: observed ratio {ratio:.6}"
                        )));
                    }
                }
            }
        }
        if self.tags.quadratic {
            if let (Some(sm), LossKind::Quadratic { a, .. } | LossKind::SmoothStrong { a }) =
                (self.tags.smooth, &self.kind)
            {
                let evals = sym_eigenvalues(a);
                if 2.0 * evals[evals.len() - 1] > sm + 1e-9 {
                    return Err(Error::precondition("smooth tag below the Hessian spectrum"));
                }
            }
        }
        Ok(())
    }
}

/// Observation noise channel. Every variant is conditionally mean zero and
/// `1`-subgaussian in the sense `E exp(eps^2) <= 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    None,
    Gaussian { sigma: f64 },
    BoundedUniform { half_width: f64 },
}

/// Default noise scale: `E exp(eps^2) = 2` exactly at `sigma^2 = 3/8`.
pub const DEFAULT_SIGMA: f64 = 0.6123724356957945; // sqrt(3/8)

impl NoiseSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma <= DEFAULT_SIGMA + 1e-12) {
            return Err(Error::config("gaussian noise needs sigma in (0, sqrt(3/8)]"));
        }
        Ok(NoiseSpec::Gaussian { sigma })
    }

    pub fn default_gaussian() -> Self {
        NoiseSpec::Gaussian { sigma: DEFAULT_SIGMA }
    }

    pub fn bounded_uniform(half_width: f64) -> Result<Self> {
        if half_width <= 0.0 {
            return Err(Error::config("uniform noise needs a positive half width"));
        }
        // Simpson quadrature of E exp(eps^2) on [0, h].
        let h = half_width;
        let n = 2000;
        let mut acc = 0.0;
        for i in 0..=n {
            let u = h * i as f64 / n as f64;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * (u * u).exp();
        }
        let mgf = acc * (h / n as f64) / 3.0 / h;
        if mgf > 2.0 + 1e-9 {
            return Err(Error::config(format!(
                "uniform noise half width {h} breaks the subgaussian budget (E exp(eps^2) = {mgf:.4})"
            )));
        }
        Ok(NoiseSpec::BoundedUniform { half_width })
    }

    pub fn draw(&self, rng: &mut Rng) -> f64 {
        match self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            NoiseSpec::BoundedUniform { half_width } => {
                (2.0 * rng.gen::<f64>() - 1.0) * half_width
            }
        }
    }

    /// Standard deviation, used by tunings that scale with the noise level.
    pub fn std_dev(&self) -> f64 {
        match self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Gaussian { sigma } => *sigma,
            NoiseSpec::BoundedUniform { half_width } => half_width / 3.0f64.sqrt(),
        }
    }
}

/// Round-indexed loss sequence.
#[derive(Debug, Clone)]
pub enum LossSequence {
    Stochastic(LossSpec),
    /// Piecewise-stationary: `(start_round, spec)` entries with ascending
    /// start rounds; the first entry must start at round 0.
    Piecewise(Vec<(usize, LossSpec)>),
}

impl LossSequence {
    pub fn at(&self, t: usize) -> &LossSpec {
        match self {
            LossSequence::Stochastic(spec) => spec,
            LossSequence::Piecewise(entries) => {
                let mut current = &entries[0].1;
                for (start, spec) in entries {
                    if *start <= t {
                        current = spec;
                    } else {
                        break;
                    }
                }
                current
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LossSequence::Stochastic(spec) => spec.dim(),
            LossSequence::Piecewise(entries) => entries[0].1.dim(),
        }
    }
}

/// Queryable loss environment: loss sequence plus noise channel. Noise for
/// query `k` comes from `stream(seed, k, "noise")`, making observations a
/// pure function of `(seed, query index, point)`.
#[derive(Debug, Clone)]
pub struct LossOracle {
    pub losses: LossSequence,
    pub noise: NoiseSpec,
    seed: u64,
    queries: u64,
}

impl LossOracle {
    pub fn new(losses: LossSequence, noise: NoiseSpec, seed: u64) -> Self {
        LossOracle { losses, noise, seed, queries: 0 }
    }

    pub fn stochastic(spec: LossSpec, noise: NoiseSpec, seed: u64) -> Self {
        Self::new(LossSequence::Stochastic(spec), noise, seed)
    }

    pub fn query(&mut self, t: usize, x: &Vector) -> f64 {
        let f = self.losses.at(t).value(x);
        let mut noise_rng = stream(self.seed, self.queries, "noise");
        self.queries += 1;
        f + self.noise.draw(&mut noise_rng)
    }

    /// Noiseless loss value; does not advance the query counter.
    pub fn true_loss(&self, t: usize, x: &Vector) -> f64 {
        self.losses.at(t).value(x)
    }

    pub fn query_count(&self) -> u64 {
        self.queries
    }

    pub fn dim(&self) -> usize {
        self.losses.dim()
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn losses(&self) -> &LossSequence {
        &self.losses
    }
}

/// Degree-2 feature map `(1, x_1..x_d, x_1^2, x_1 x_2, ..., x_d^2)` of
/// dimension `(d^2 + 3d + 2) / 2`.
pub fn quad_features(x: &Vector) -> Vector {
    let d = x.len();
    let dim = (d * d + 3 * d + 2) / 2;
    let mut out = Vector::zeros(dim);
    out[0] = 1.0;
    for i in 0..d {
        out[1 + i] = x[i];
    }
    let mut k = 1 + d;
    for i in 0..d {
        for j in i..d {
            out[k] = x[i] * x[j];
            k += 1;
        }
    }
    out
}

pub fn quad_feature_dim(d: usize) -> usize {
    (d * d + 3 * d + 2) / 2
}
