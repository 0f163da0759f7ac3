//! Set functions, the Lovasz extension and its subgradients.
//!
//! Ground sets are encoded as bit masks (`u64`), coordinate `i` of the
//! relaxation pairing with bit `i`.

use crate::rng::stream;
use crate::{Error, Result, Vector};
use rand::Rng as _;

use super::NoiseSpec;

/// Set function given by a dense value table of length `2^d`, values in
/// `[0, 1]`.
#[derive(Debug, Clone)]
pub struct SubmodularSpec {
    d: usize,
    table: Vec<f64>,
}

pub const MAX_GROUND: usize = 20;
pub const MAX_CHECK: usize = 12;

impl SubmodularSpec {
    pub fn new(d: usize, table: Vec<f64>) -> Result<Self> {
        if d == 0 || d > MAX_GROUND {
            return Err(Error::config(format!("ground set size must be 1..={MAX_GROUND}")));
        }
        if table.len() != 1usize << d {
            return Err(Error::config(format!(
                "value table has {} entries, expected {}",
                table.len(),
                1usize << d
            )));
        }
        if table.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::config("set function values must lie in [0, 1]"));
        }
        Ok(SubmodularSpec { d, table })
    }

    /// Tabulate a callable.
    pub fn from_fn<F: Fn(u64) -> f64>(d: usize, f: F) -> Result<Self> {
        if d == 0 || d > MAX_GROUND {
            return Err(Error::config(format!("ground set size must be 1..={MAX_GROUND}")));
        }
        let table = (0..1u64 << d).map(f).collect();
        Self::new(d, table)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn value(&self, set: u64) -> f64 {
        self.table[set as usize]
    }

    /// Exhaustive minimum over all subsets, returned as `(set, value)`.
    pub fn brute_force_min(&self) -> (u64, f64) {
        let mut best = (0u64, self.table[0]);
        for (s, v) in self.table.iter().enumerate() {
            if *v < best.1 {
                best = (s as u64, *v);
            }
        }
        best
    }

    /// Coordinate order used by the extension: descending value, ties broken
    /// by ascending index.
    fn descending_order(&self, x: &Vector) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.d).collect();
        order.sort_by(|&i, &j| x[j].partial_cmp(&x[i]).unwrap().then(i.cmp(&j)));
        order
    }

    /// Prefix set `S(k | x)`: the `k` largest coordinates of `x`.
    pub fn chain_set(&self, x: &Vector, k: usize) -> u64 {
        let order = self.descending_order(x);
        let mut mask = 0u64;
        for &i in order.iter().take(k) {
            mask |= 1 << i;
        }
        mask
    }

    /// Lovasz extension on `[0, 1]^d`:
    /// `g(x) = sum_k f(S(k|x)) (x_(k) - x_(k+1))` with sentinels `x_(0) = 1`,
    /// `x_(d+1) = 0`.
    pub fn lovasz_value(&self, x: &Vector) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        let order = self.descending_order(x);
        let mut total = 0.0;
        let mut mask = 0u64;
        let mut prev = 1.0f64;
        for &i in &order {
            total += self.table[mask as usize] * (prev - x[i]);
            mask |= 1 << i;
            prev = x[i];
        }
        total += self.table[mask as usize] * prev;
        total
    }

    /// Subgradient of the extension: coordinate `i` gets the marginal value
    /// of `i` along the sorted chain through `x`.
    pub fn lovasz_subgradient(&self, x: &Vector) -> Vector {
        let order = self.descending_order(x);
        let mut u = Vector::zeros(self.d);
        let mut mask = 0u64;
        for &i in &order {
            let before = self.table[mask as usize];
            mask |= 1 << i;
            u[i] = self.table[mask as usize] - before;
        }
        u
    }

    /// Exhaustive pairwise submodularity check, refused above
    /// `MAX_CHECK` ground elements.
    pub fn is_submodular(&self) -> Result<bool> {
        if self.d > MAX_CHECK {
            return Err(Error::Refused(format!(
                "exhaustive submodularity check limited to d <= {MAX_CHECK}"
            )));
        }
        let tol = 1e-12;
        for s in 0..1u64 << self.d {
            for i in 0..self.d {
                if s & (1 << i) != 0 {
                    continue;
                }
                for j in (i + 1)..self.d {
                    if s & (1 << j) != 0 {
                        continue;
                    }
                    let si = s | (1 << i);
                    let sj = s | (1 << j);
                    let sij = si | (1 << j);
                    let lhs = self.table[si as usize] + self.table[sj as usize];
                    let rhs = self.table[sij as usize] + self.table[s as usize];
                    if lhs + tol < rhs {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }
}

/// Weighted-coverage minus modular cost, affinely rescaled into `[0, 1]`.
/// Submodular by construction (affine maps preserve submodularity); the
/// modular penalty makes the minimiser nontrivial.
pub fn random_coverage(d: usize, seed: u64) -> Result<SubmodularSpec> {
    if d > MAX_CHECK {
        return Err(Error::config("random generators are limited to d <= 12"));
    }
    let mut rng = stream(seed, 0, "coverage");
    let universe = 3 * d;
    let weights: Vec<f64> = (0..universe).map(|_| rng.gen::<f64>() + 0.1).collect();
    let covers: Vec<u64> = (0..d)
        .map(|_| {
            let mut m = 0u64;
            for e in 0..universe {
                if rng.gen::<f64>() < 0.4 {
                    m |= 1 << e;
                }
            }
            m
        })
        .collect();
    let total: f64 = weights.iter().sum();
    // Penalties on the order of a single element's coverage gain, so the
    // minimiser is sometimes a nontrivial set.
    let penalties: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 0.8).collect();
    let raw = |s: u64| {
        let mut covered = 0u64;
        let mut cost = 0.0;
        for i in 0..d {
            if s & (1 << i) != 0 {
                covered |= covers[i];
                cost += penalties[i];
            }
        }
        let mut w = 0.0;
        for e in 0..universe {
            if covered & (1 << e) != 0 {
                w += weights[e];
            }
        }
        w / total - cost
    };
    rescaled(d, raw)
}

/// Truncated-cardinality rank `min(|S|, k) / k` blended with a random
/// modular part, rescaled into `[0, 1]`.
pub fn random_rank_style(d: usize, seed: u64) -> Result<SubmodularSpec> {
    if d > MAX_CHECK {
        return Err(Error::config("random generators are limited to d <= 12"));
    }
    let mut rng = stream(seed, 0, "rank");
    let k = 1 + rng.gen::<u64>() as usize % d;
    let modular: Vec<f64> = (0..d).map(|_| (rng.gen::<f64>() - 0.6) / d as f64).collect();
    let raw = |s: u64| {
        let card = s.count_ones() as usize;
        let mut m = 0.0;
        for i in 0..d {
            if s & (1 << i) != 0 {
                m += modular[i];
            }
        }
        card.min(k) as f64 / k as f64 + m
    };
    rescaled(d, raw)
}

fn rescaled<F: Fn(u64) -> f64>(d: usize, raw: F) -> Result<SubmodularSpec> {
    let values: Vec<f64> = (0..1u64 << d).map(raw).collect();
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-9);
    let table = values.iter().map(|v| 0.05 + 0.9 * (v - lo) / span).collect();
    SubmodularSpec::new(d, table)
}

/// Noisy value oracle over sets with the same counter-keyed noise scheme as
/// `LossOracle`.
#[derive(Debug, Clone)]
pub struct SetOracle {
    pub spec: SubmodularSpec,
    pub noise: NoiseSpec,
    seed: u64,
    queries: u64,
}

impl SetOracle {
    pub fn new(spec: SubmodularSpec, noise: NoiseSpec, seed: u64) -> Self {
        SetOracle { spec, noise, seed, queries: 0 }
    }

    pub fn query(&mut self, set: u64) -> f64 {
        let f = self.spec.value(set);
        let mut noise_rng = stream(self.seed, self.queries, "noise");
        self.queries += 1;
        f + self.noise.draw(&mut noise_rng)
    }

    pub fn query_count(&self) -> u64 {
        self.queries
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec2;
    use approx::assert_relative_eq;

    fn example() -> SubmodularSpec {
        // f(empty)=0, f({1})=0.7, f({2})=0.9, f({1,2})=1.
        SubmodularSpec::new(2, vec![0.0, 0.7, 0.9, 1.0]).unwrap()
    }

    #[test]
    fn extension_matches_hand_values() {
        let f = example();
        assert_relative_eq!(f.lovasz_value(&vec2(1.0, 0.0)), 0.7, max_relative = 1e-15);
        assert_relative_eq!(f.lovasz_value(&vec2(0.5, 0.25)), 0.425, max_relative = 1e-15);
        assert_relative_eq!(f.lovasz_value(&vec2(0.0, 0.0)), 0.0, max_relative = 1e-15);
        assert_relative_eq!(f.lovasz_value(&vec2(1.0, 1.0)), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn subgradient_matches_hand_values() {
        let f = example();
        let u = f.lovasz_subgradient(&vec2(0.5, 0.25));
        assert_relative_eq!(u[0], 0.7, max_relative = 1e-15);
        assert_relative_eq!(u[1], 0.3, max_relative = 1e-15);
    }

    #[test]
    fn extension_agrees_on_indicators() {
        let f = example();
        for s in 0..4u64 {
            let x = Vector::from_fn(2, |i, _| if s & (1 << i) != 0 { 1.0 } else { 0.0 });
            assert_relative_eq!(f.lovasz_value(&x), f.value(s), max_relative = 1e-15);
        }
    }

    #[test]
    fn subgradient_supports_extension() {
        // g is the support function of the base polytope, so
        // g(y) >= g(x) + <u, y - x> for u at x.
        let f = example();
        let mut rng = stream(3, 0, "supp");
        for _ in 0..500 {
            let x = vec2(rng.gen::<f64>(), rng.gen::<f64>());
            let y = vec2(rng.gen::<f64>(), rng.gen::<f64>());
            let u = f.lovasz_subgradient(&x);
            let lhs = f.lovasz_value(&y);
            let rhs = f.lovasz_value(&x) + u.dot(&(&y - &x));
            assert!(lhs >= rhs - 1e-12);
        }
    }

    #[test]
    fn tie_breaking_is_by_index() {
        let f = example();
        // At x = (t, t) both orders give the same value by continuity, but
        // the chain must start at coordinate 0.
        assert_eq!(f.chain_set(&vec2(0.5, 0.5), 1), 0b01);
        let u = f.lovasz_subgradient(&vec2(0.5, 0.5));
        assert_relative_eq!(u[0], 0.7);
        assert_relative_eq!(u[1], 0.3);
    }

    #[test]
    fn submodularity_detection() {
        assert!(example().is_submodular().unwrap());
        // Supermodular: strictly increasing marginals.
        let bad = SubmodularSpec::new(2, vec![0.0, 0.1, 0.1, 0.9]).unwrap();
        assert!(!bad.is_submodular().unwrap());
        let big = SubmodularSpec::from_fn(13, |s| s.count_ones() as f64 / 13.0).unwrap();
        assert!(big.is_submodular().is_err());
    }

    #[test]
    fn generators_are_submodular() {
        for seed in 0..10 {
            let f = random_coverage(5, seed).unwrap();
            assert!(f.is_submodular().unwrap(), "coverage seed {seed}");
            let g = random_rank_style(5, seed).unwrap();
            assert!(g.is_submodular().unwrap(), "rank seed {seed}");
        }
    }

    #[test]
    fn generator_minimum_is_not_always_empty() {
        let hit = (0..20).any(|seed| {
            let f = random_coverage(6, seed).unwrap();
            f.brute_force_min().0 != 0
        });
        assert!(hit, "coverage penalties never moved the minimiser");
    }

    #[test]
    fn extension_min_matches_set_min_on_grid() {
        let mut rng = stream(11, 0, "gridmin");
        for _ in 0..5 {
            let f = random_coverage(3, rng.gen()).unwrap();
            let (_, set_min) = f.brute_force_min();
            let steps = 20;
            let mut grid_min = f64::INFINITY;
            for a in 0..=steps {
                for b in 0..=steps {
                    for c in 0..=steps {
                        let x = Vector::from_vec(vec![
                            a as f64 / steps as f64,
                            b as f64 / steps as f64,
                            c as f64 / steps as f64,
                        ]);
                        grid_min = grid_min.min(f.lovasz_value(&x));
                    }
                }
            }
            // Vertices of the cube are grid points, so the grid attains the
            // set minimum; interpolation cannot go below it.
            assert_relative_eq!(grid_min, set_min, epsilon = 1e-9);
        }
    }

    #[test]
    fn subgradient_norm_bound() {
        // For submodular tables in [0, 1] the subgradient has l1 norm at
        // most 2: positive marginals sum to at most f(P) - f(empty) <= 1 and
        // the negative mass is bounded by 1 through the telescoped total.
        let mut rng = stream(13, 0, "lip");
        for seed in 0..10 {
            let f = random_coverage(6, seed).unwrap();
            for _ in 0..200 {
                let x = Vector::from_fn(6, |_, _| rng.gen::<f64>());
                let u = f.lovasz_subgradient(&x);
                let l1: f64 = u.iter().map(|v| v.abs()).sum();
                assert!(l1 <= 2.0 + 1e-9);
                assert!(u.norm() <= 2.0 + 1e-9);
            }
        }
    }
}
