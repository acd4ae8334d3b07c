//! From a trained comparator to quality scores.
//!
//! Multi-item inference predicts a preference probability for a set of pairs,
//! fills a fractional comparison matrix (`c · p` and `c · (1 - p)` per pair),
//! and hands it to a psychometric scaler. Single-item inference anchors one
//! query against references with fixed scores by maximizing a one-dimensional
//! binomial likelihood. Pair selection is pluggable, including a greedy
//! uncertainty-driven active strategy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comparator::{ComparatorError, ComparatorModel};
use crate::items::{ItemError, ItemSet};
use crate::matrix::ComparisonMatrix;
use crate::observer::{make_design, DesignError, DesignKind};
use crate::scaling::{
    replay_matrix, scale_mle, scale_trueskill, JodScale, MleScalerConfig, ScalingError,
    TrueSkillState,
};
use crate::stats::{derive_seed, mills_ratio_inv, PHI_INV_75};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("multi-item inference needs at least 2 items, got {0}")]
    TooFewItems(usize),
    #[error("single-item inference needs at least 2 references, got {0}")]
    TooFewReferences(usize),
    #[error("query id `{0}` is also a reference")]
    QueryIsReference(String),
    #[error("reference `{0}` has no score")]
    ReferenceWithoutScore(String),
    #[error("pair budget {budget} is below the connectivity reserve {required}")]
    BudgetTooSmall { budget: usize, required: usize },
    #[error("could not bracket the likelihood maximum")]
    BracketNotFound,
    #[error(transparent)]
    Comparator(#[from] ComparatorError),
    #[error(transparent)]
    Scaling(#[from] ScalingError),
    #[error(transparent)]
    Item(#[from] ItemError),
    #[error(transparent)]
    Design(#[from] DesignError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStrategy {
    Full,
    ChainPlusRandom,
    Active,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerKind {
    Trueskill,
    Mle,
}

/// Settings for score reconstruction from comparator predictions.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceConfig {
    /// Average comparison count a predicted pair stands in for.
    pub c_comparisons: f64,
    pub pair_strategy: PairStrategy,
    pub scaler: ScalerKind,
    /// Pair budget for the non-full strategies; defaults to a bare chain.
    pub budget: Option<usize>,
    pub seed: u64,
    pub trueskill_passes: usize,
    pub mle: MleScalerConfig,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            c_comparisons: 30.0,
            pair_strategy: PairStrategy::Full,
            scaler: ScalerKind::Trueskill,
            budget: None,
            seed: 0,
            trueskill_passes: 4,
            mle: MleScalerConfig::default(),
        }
    }
}

/// Reference items with established scores for anchoring a single query.
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    ids: Vec<String>,
    features: Vec<Vec<f64>>,
    scores: Vec<f64>,
}

impl ReferenceSet {
    /// Builds a reference set from `(id, features, score)` entries.
    /// Duplicate ids are collapsed to their first occurrence, so repeating a
    /// reference cannot tilt the anchor.
    pub fn from_entries(entries: Vec<(String, Vec<f64>, f64)>) -> Self {
        let mut ids = Vec::new();
        let mut features = Vec::new();
        let mut scores = Vec::new();
        for (id, f, s) in entries {
            if !ids.contains(&id) {
                ids.push(id);
                features.push(f);
                scores.push(s);
            }
        }
        Self { ids, features, scores }
    }

    /// Pairs an item set with its fixed scores; every item must be scored.
    pub fn new(items: &ItemSet, scores: &JodScale) -> Result<Self, InferenceError> {
        let mut entries = Vec::with_capacity(items.len());
        for (k, item) in items.items().iter().enumerate() {
            let score = scores
                .score_of(&item.id)
                .ok_or_else(|| InferenceError::ReferenceWithoutScore(item.id.clone()))?;
            entries.push((item.id.clone(), items.features_of(k)?.to_vec(), score));
        }
        Ok(Self::from_entries(entries))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Fills the requested pairs of a predicted comparison matrix.
///
/// Each pair contributes `c · p` wins for the preferred orientation and
/// `c · (1 - p)` for the other, so `M_ij + M_ji = c` per filled pair.
pub fn predict_matrix(
    model: &ComparatorModel,
    items: &ItemSet,
    pairs: &[(usize, usize)],
    c_comparisons: f64,
) -> Result<ComparisonMatrix, InferenceError> {
    assert!(c_comparisons > 0.0, "comparison count must be positive");
    let mut matrix = ComparisonMatrix::zeros(items.ids()).map_err(|e| {
        InferenceError::Item(ItemError::Manifest(e.to_string()))
    })?;
    for &(i, j) in pairs {
        let p = model.forward(items.features_of(i)?, items.features_of(j)?)?;
        matrix.set_count(i, j, c_comparisons * p);
        matrix.set_count(j, i, c_comparisons * (1.0 - p));
    }
    Ok(matrix)
}

fn run_scaler(
    matrix: &ComparisonMatrix,
    config: &InferenceConfig,
) -> Result<JodScale, InferenceError> {
    match config.scaler {
        ScalerKind::Trueskill => Ok(scale_trueskill(
            matrix,
            &TrueSkillState::new(matrix.len()),
            config.trueskill_passes,
            derive_seed(config.seed, "infer/replay"),
        )?),
        ScalerKind::Mle => Ok(scale_mle(matrix, &config.mle)?),
    }
}

/// Multi-item inference: predicted matrix plus the configured scaler.
pub fn score_multi(
    model: &ComparatorModel,
    items: &ItemSet,
    config: &InferenceConfig,
) -> Result<JodScale, InferenceError> {
    score_multi_with_matrix(model, items, config).map(|(scale, _)| scale)
}

/// Like [`score_multi`] but also returns the reconstructed matrix for audit.
pub fn score_multi_with_matrix(
    model: &ComparatorModel,
    items: &ItemSet,
    config: &InferenceConfig,
) -> Result<(JodScale, ComparisonMatrix), InferenceError> {
    let n = items.len();
    if n < 2 {
        return Err(InferenceError::TooFewItems(n));
    }
    let pairs = match config.pair_strategy {
        PairStrategy::Full => select_pairs(
            PairStrategy::Full,
            items,
            &TrueSkillState::new(n),
            n * (n - 1) / 2,
            config.seed,
        )?,
        PairStrategy::ChainPlusRandom => select_pairs(
            PairStrategy::ChainPlusRandom,
            items,
            &TrueSkillState::new(n),
            config.budget.unwrap_or(n - 1),
            config.seed,
        )?,
        PairStrategy::Active => {
            // Pilot round: predict along the bare chain, replay it into a
            // TrueSkill state, then let that state drive the real selection.
            let chain = select_pairs(
                PairStrategy::Active,
                items,
                &TrueSkillState::new(n),
                n - 1,
                config.seed,
            )?;
            let pilot = predict_matrix(model, items, &chain, config.c_comparisons)?;
            let state = replay_matrix(
                &pilot,
                &TrueSkillState::new(n),
                config.trueskill_passes,
                derive_seed(config.seed, "active/pilot"),
            )?;
            select_pairs(
                PairStrategy::Active,
                items,
                &state,
                config.budget.unwrap_or(n - 1),
                config.seed,
            )?
        }
    };
    let matrix = predict_matrix(model, items, &pairs, config.c_comparisons)?;
    let scale = run_scaler(&matrix, config)?;
    Ok((scale, matrix))
}

/// Anchors one query against fixed-score references.
///
/// Predicts the preference of the query over every unique reference, then
/// maximizes the one-dimensional binomial log-likelihood of those predictions
/// with the reference scores held fixed. The problem is concave, so the
/// maximum is found by bisection on the monotone derivative.
pub fn score_single(
    model: &ComparatorModel,
    query_id: &str,
    query_features: &[f64],
    refs: &ReferenceSet,
    _config: &InferenceConfig,
) -> Result<f64, InferenceError> {
    if refs.len() < 2 {
        return Err(InferenceError::TooFewReferences(refs.len()));
    }
    if refs.ids.iter().any(|id| id == query_id) {
        return Err(InferenceError::QueryIsReference(query_id.to_string()));
    }
    let mut predictions = Vec::with_capacity(refs.len());
    for f in &refs.features {
        predictions.push(model.forward(query_features, f)?);
    }
    // d/ds of Σ [p·ln Φ(d) + (1-p)·ln Φ(-d)] with d = (s - s_ref)·Φ⁻¹(0.75).
    let derivative = |s: f64| -> f64 {
        let mut acc = 0.0;
        for (p, s_ref) in predictions.iter().zip(&refs.scores) {
            let d = (s - s_ref) * PHI_INV_75;
            acc += (p * mills_ratio_inv(d) - (1.0 - p) * mills_ratio_inv(-d)) * PHI_INV_75;
        }
        acc
    };

    let min_ref = refs.scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_ref = refs.scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = min_ref - 1.0;
    let mut hi = max_ref + 1.0;
    let mut span = 1.0;
    for _ in 0..70 {
        if derivative(lo) > 0.0 {
            break;
        }
        span *= 2.0;
        lo -= span;
    }
    let mut found_hi = false;
    span = 1.0;
    for _ in 0..70 {
        if derivative(hi) < 0.0 {
            found_hi = true;
            break;
        }
        span *= 2.0;
        hi += span;
    }
    if derivative(lo) <= 0.0 || !found_hi {
        return Err(InferenceError::BracketNotFound);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if derivative(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Chooses which unordered pairs to compare under a budget.
///
/// `full` returns every pair. `chain_plus_random` returns the item-order
/// chain plus random extras up to the budget. `active` first spends `n - 1`
/// pairs on a chain over the current score-estimate order, then greedily
/// fills the budget with the pairs whose estimated scores are closest,
/// preferring high combined uncertainty and breaking ties by lexicographic
/// pair id.
pub fn select_pairs(
    strategy: PairStrategy,
    items: &ItemSet,
    current_state: &TrueSkillState,
    budget: usize,
    seed: u64,
) -> Result<Vec<(usize, usize)>, InferenceError> {
    let n = items.len();
    if n < 2 {
        return Err(InferenceError::TooFewItems(n));
    }
    match strategy {
        PairStrategy::Full => {
            let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in (i + 1)..n {
                    pairs.push((i, j));
                }
            }
            Ok(pairs)
        }
        PairStrategy::ChainPlusRandom => {
            if budget < n - 1 {
                return Err(InferenceError::BudgetTooSmall { budget, required: n - 1 });
            }
            let design =
                make_design(DesignKind::ChainPlusRandom, n, budget - (n - 1), 1, seed)?;
            Ok(design.pairs)
        }
        PairStrategy::Active => {
            if budget < n - 1 {
                return Err(InferenceError::BudgetTooSmall { budget, required: n - 1 });
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                current_state.mu[a]
                    .partial_cmp(&current_state.mu[b])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let mut pairs: Vec<(usize, usize)> = order
                .windows(2)
                .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
                .collect();
            let chain: std::collections::BTreeSet<(usize, usize)> =
                pairs.iter().copied().collect();
            let ids = items.ids();
            let mut candidates: Vec<(usize, usize)> = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if !chain.contains(&(i, j)) {
                        candidates.push((i, j));
                    }
                }
            }
            candidates.sort_by(|&(ai, aj), &(bi, bj)| {
                let gap_a = (current_state.mu[ai] - current_state.mu[aj]).abs();
                let gap_b = (current_state.mu[bi] - current_state.mu[bj]).abs();
                let unc_a = current_state.sigma[ai].powi(2) + current_state.sigma[aj].powi(2);
                let unc_b = current_state.sigma[bi].powi(2) + current_state.sigma[bj].powi(2);
                gap_a
                    .partial_cmp(&gap_b)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(unc_b.partial_cmp(&unc_a).unwrap_or(std::cmp::Ordering::Equal))
                    .then((&ids[ai], &ids[aj]).cmp(&(&ids[bi], &ids[bj])))
            });
            pairs.extend(candidates.into_iter().take(budget - (n - 1)));
            Ok(pairs)
        }
    }
}
