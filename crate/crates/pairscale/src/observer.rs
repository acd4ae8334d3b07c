//! Thurstone Case-V observer model: link functions and synthetic comparisons.
//!
//! The observer assumes each condition carries equal, independent Gaussian
//! noise, so the probability of preferring item `i` over item `j` is
//! `Φ((s_i - s_j) / (sigma_obs · √2))`. With the default noise the link hits
//! 0.75 at a 1-JOD score difference. The simulator built on it is the
//! ground-truth oracle for every downstream scaling test.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::ComparisonMatrix;
use crate::scaling::JodScale;
use crate::stats::{normal_cdf, DEFAULT_SIGMA_OBS};

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("a design needs at least 2 items, got {0}")]
    TooFewItems(usize),
    #[error("requested {requested} extra pairs but only {available} non-adjacent pairs exist")]
    TooManyExtraPairs { requested: usize, available: usize },
    #[error("design pair ({i}, {j}) out of range for {n} items")]
    PairOutOfRange { i: usize, j: usize, n: usize },
}

/// Per-condition observation noise and the seed driving synthetic draws.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ObserverConfig {
    pub sigma_obs: f64,
    pub rng_seed: u64,
}

impl ObserverConfig {
    /// Default noise (75% preference per JOD) with the given seed.
    pub fn with_seed(rng_seed: u64) -> Self {
        Self { sigma_obs: DEFAULT_SIGMA_OBS, rng_seed }
    }
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self::with_seed(0)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Full,
    ChainPlusRandom,
}

/// Which unordered pairs get compared, and how often.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Design {
    pub kind: DesignKind,
    pub pairs: Vec<(usize, usize)>,
    pub comparisons_per_pair: usize,
}

impl Design {
    /// True when the comparison graph spans all `n` items.
    pub fn is_connected(&self, n: usize) -> bool {
        if n <= 1 {
            return true;
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j) in &self.pairs {
            if i < n && j < n {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }
}

/// Preference probability for a score difference under the Case-V link.
pub fn link_probability(score_diff: f64, config: &ObserverConfig) -> f64 {
    normal_cdf(score_diff / (config.sigma_obs * std::f64::consts::SQRT_2))
}

/// Builds a comparison design over `n` items.
///
/// `full` compares every pair. `chain_plus_random` compares the `n - 1`
/// adjacent pairs in item order plus `extra_random_pairs` distinct random
/// non-adjacent pairs; the chain keeps the graph connected by construction.
pub fn make_design(
    kind: DesignKind,
    n: usize,
    extra_random_pairs: usize,
    comparisons_per_pair: usize,
    seed: u64,
) -> Result<Design, DesignError> {
    if n < 2 {
        return Err(DesignError::TooFewItems(n));
    }
    let pairs = match kind {
        DesignKind::Full => {
            let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in (i + 1)..n {
                    pairs.push((i, j));
                }
            }
            pairs
        }
        DesignKind::ChainPlusRandom => {
            let mut pairs: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
            let mut candidates = Vec::new();
            for i in 0..n {
                for j in (i + 2)..n {
                    candidates.push((i, j));
                }
            }
            if extra_random_pairs > candidates.len() {
                return Err(DesignError::TooManyExtraPairs {
                    requested: extra_random_pairs,
                    available: candidates.len(),
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Partial Fisher-Yates: draw `extra_random_pairs` distinct candidates.
            for k in 0..extra_random_pairs {
                let pick = rng.random_range(k..candidates.len());
                candidates.swap(k, pick);
                pairs.push(candidates[k]);
            }
            pairs
        }
    };
    Ok(Design { kind, pairs, comparisons_per_pair })
}

/// Simulates a comparison matrix from true scores under the observer model.
///
/// For each design pair, draws `comparisons_per_pair` Bernoulli outcomes with
/// the link probability of the true score difference and accumulates win
/// counts. Deterministic for a fixed `config.rng_seed`.
pub fn simulate_matrix(
    true_scores: &JodScale,
    design: &Design,
    config: &ObserverConfig,
) -> Result<ComparisonMatrix, DesignError> {
    let n = true_scores.len();
    let mut matrix = ComparisonMatrix::zeros(true_scores.item_ids().to_vec())
        .expect("score ids are unique and non-empty");
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    for &(i, j) in &design.pairs {
        if i >= n || j >= n || i == j {
            return Err(DesignError::PairOutOfRange { i, j, n });
        }
        let p = link_probability(true_scores.scores()[i] - true_scores.scores()[j], config);
        let mut wins_i = 0u64;
        for _ in 0..design.comparisons_per_pair {
            if rng.random_bool(p) {
                wins_i += 1;
            }
        }
        matrix.add_count(i, j, wins_i as f64);
        matrix.add_count(j, i, (design.comparisons_per_pair as u64 - wins_i) as f64);
    }
    Ok(matrix)
}
