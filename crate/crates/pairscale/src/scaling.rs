//! Psychometric scaling: comparison matrices to JOD scores.
//!
//! Two interchangeable scalers are provided. [`scale_trueskill`] replays the
//! matrix as individual win events through two-player TrueSkill updates and
//! maps the resulting ratings onto the JOD scale. [`scale_mle`] maximizes the
//! binomial likelihood of the observed counts under the Gaussian link
//! directly in score space. Both return zero-mean scores where a 1-JOD gap
//! means a 75% preference probability.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::ComparisonMatrix;
use crate::stats::{ln_normal_cdf, mills_ratio_inv, normal_cdf, PHI_INV_75};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Score difference divided by this is the argument of the Gaussian link;
/// equals `sigma_obs · √2 = 1 / Φ⁻¹(0.75)` under the JOD convention.
const JOD_LINK_DENOM: f64 = 1.0 / PHI_INV_75;

#[derive(Debug, Error)]
pub enum ScalingError {
    #[error("matrix has zero total comparisons")]
    EmptyMatrix,
    #[error("comparison graph is disconnected; components: {}", format_components(.components))]
    Disconnected { components: Vec<Vec<String>> },
    #[error("scaler did not converge in {iterations} iterations (gradient inf-norm {gradient_norm:.3e})")]
    NotConverged { iterations: usize, gradient_norm: f64 },
    #[error("item ids do not match: {0}")]
    IdMismatch(String),
    #[error("scores file {path}: {message}")]
    ScoresFile { path: String, message: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn format_components(components: &[Vec<String>]) -> String {
    components
        .iter()
        .map(|c| format!("[{}]", c.join(", ")))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Origin convention of a score vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// Scores sum to zero; the standard output of the scalers.
    ZeroMean,
    /// Scores live on an externally fixed scale (reference anchoring,
    /// synthetic ground truth).
    Reference,
}

/// Per-item quality scores in JOD units, translation-invariant by nature.
#[derive(Debug, Clone, PartialEq)]
pub struct JodScale {
    item_ids: Vec<String>,
    scores: Vec<f64>,
    sigmas: Option<Vec<f64>>,
    convention: Convention,
}

impl JodScale {
    /// Scores on an arbitrary fixed origin (convention `reference`).
    pub fn from_raw(item_ids: Vec<String>, scores: Vec<f64>) -> Result<Self, ScalingError> {
        Self::build(item_ids, scores, None, Convention::Reference)
    }

    /// Recenters the scores to mean zero and tags them `zero_mean`.
    pub fn zero_mean(item_ids: Vec<String>, scores: Vec<f64>) -> Result<Self, ScalingError> {
        Self::zero_mean_with_sigmas(item_ids, scores, None)
    }

    pub fn zero_mean_with_sigmas(
        item_ids: Vec<String>,
        mut scores: Vec<f64>,
        sigmas: Option<Vec<f64>>,
    ) -> Result<Self, ScalingError> {
        if !scores.is_empty() {
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            for s in &mut scores {
                *s -= mean;
            }
        }
        Self::build(item_ids, scores, sigmas, Convention::ZeroMean)
    }

    fn build(
        item_ids: Vec<String>,
        scores: Vec<f64>,
        sigmas: Option<Vec<f64>>,
        convention: Convention,
    ) -> Result<Self, ScalingError> {
        if item_ids.len() != scores.len() {
            return Err(ScalingError::IdMismatch(format!(
                "{} ids vs {} scores",
                item_ids.len(),
                scores.len()
            )));
        }
        if let Some(s) = &sigmas {
            if s.len() != scores.len() {
                return Err(ScalingError::IdMismatch(format!(
                    "{} sigmas vs {} scores",
                    s.len(),
                    scores.len()
                )));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in &item_ids {
            if id.is_empty() || !seen.insert(id.as_str()) {
                return Err(ScalingError::IdMismatch(format!("bad or duplicate id `{id}`")));
            }
        }
        Ok(Self { item_ids, scores, sigmas, convention })
    }

    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn sigmas(&self) -> Option<&[f64]> {
        self.sigmas.as_deref()
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn score_of(&self, id: &str) -> Option<f64> {
        self.item_ids.iter().position(|x| x == id).map(|i| self.scores[i])
    }

    pub fn mean(&self) -> f64 {
        if self.scores.is_empty() {
            0.0
        } else {
            self.scores.iter().sum::<f64>() / self.scores.len() as f64
        }
    }

    /// Checks the zero-mean invariant where it applies.
    pub fn validate(&self) -> Result<(), ScalingError> {
        if self.convention == Convention::ZeroMean && self.mean().abs() > 1e-9 {
            return Err(ScalingError::IdMismatch(format!(
                "zero-mean scale has mean {:.3e}",
                self.mean()
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), ScalingError> {
        let file = ScoresFile {
            format_version: crate::FORMAT_VERSION.to_string(),
            convention: self.convention,
            items: self
                .item_ids
                .iter()
                .enumerate()
                .map(|(k, id)| ScoreEntry {
                    id: id.clone(),
                    score: self.scores[k],
                    sigma: self.sigmas.as_ref().map(|s| s[k]),
                })
                .collect(),
        };
        let text = serde_json::to_string_pretty(&file).expect("scores serialize");
        std::fs::write(path, text + "\n")
            .map_err(|source| ScalingError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, ScalingError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScalingError::Io { path: path.display().to_string(), source })?;
        let file: ScoresFile = serde_json::from_str(&text).map_err(|e| ScalingError::ScoresFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let ids: Vec<String> = file.items.iter().map(|e| e.id.clone()).collect();
        let scores: Vec<f64> = file.items.iter().map(|e| e.score).collect();
        let sigmas: Option<Vec<f64>> = if file.items.iter().all(|e| e.sigma.is_some()) && !ids.is_empty() {
            Some(file.items.iter().map(|e| e.sigma.unwrap()).collect())
        } else {
            None
        };
        let scale = Self::build(ids, scores, sigmas, file.convention)?;
        scale.validate()?;
        Ok(scale)
    }
}

#[derive(Serialize, Deserialize)]
struct ScoresFile {
    format_version: String,
    convention: Convention,
    items: Vec<ScoreEntry>,
}

#[derive(Serialize, Deserialize)]
struct ScoreEntry {
    id: String,
    score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
}

/// Gaussian rating beliefs plus the fixed TrueSkill hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueSkillState {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub beta: f64,
    pub tau: f64,
    pub mu0: f64,
    pub sigma0: f64,
}

impl TrueSkillState {
    /// Classic defaults: μ0 = 25, σ0 = 25/3, β = 25/6, τ = 0.
    pub fn new(n: usize) -> Self {
        Self::with_params(n, 25.0, 25.0 / 3.0, 25.0 / 6.0, 0.0)
    }

    pub fn with_params(n: usize, mu0: f64, sigma0: f64, beta: f64, tau: f64) -> Self {
        Self { mu: vec![mu0; n], sigma: vec![sigma0; n], beta, tau, mu0, sigma0 }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Applies one two-player, no-draw TrueSkill update in place.
    pub fn update(&mut self, winner: usize, loser: usize) {
        assert_ne!(winner, loser, "winner and loser must differ");
        let (mw, sw, ml, sl) = two_player_update(
            self.mu[winner],
            self.sigma[winner],
            self.mu[loser],
            self.sigma[loser],
            self.beta,
            self.tau,
        );
        self.mu[winner] = mw;
        self.sigma[winner] = sw;
        self.mu[loser] = ml;
        self.sigma[loser] = sl;
    }
}

/// One two-player, no-draw TrueSkill update.
///
/// With `t = (μ_w - μ_l)/c`, `c² = 2β² + σ_w² + σ_l²`, `v = φ(t)/Φ(t)` and
/// `w = v(v + t)`: the winner gains `(σ_w²/c)·v`, the loser drops
/// `(σ_l²/c)·v`, and each variance is scaled by `1 - (σ²/c²)·w`. When
/// `tau > 0`, `τ²` is added to both variances before the update.
pub fn two_player_update(
    mu_w: f64,
    sigma_w: f64,
    mu_l: f64,
    sigma_l: f64,
    beta: f64,
    tau: f64,
) -> (f64, f64, f64, f64) {
    let var_w = sigma_w * sigma_w + tau * tau;
    let var_l = sigma_l * sigma_l + tau * tau;
    let c2 = 2.0 * beta * beta + var_w + var_l;
    let c = c2.sqrt();
    let t = (mu_w - mu_l) / c;
    let v = mills_ratio_inv(t);
    let w = v * (v + t);
    let new_mu_w = mu_w + (var_w / c) * v;
    let new_mu_l = mu_l - (var_l / c) * v;
    let new_sigma_w = (var_w * (1.0 - (var_w / c2) * w)).sqrt();
    let new_sigma_l = (var_l * (1.0 - (var_l / c2) * w)).sqrt();
    (new_mu_w, new_sigma_w, new_mu_l, new_sigma_l)
}

enum ReplayEvent {
    Win { winner: usize, loser: usize },
    /// One leftover event from a fractional count, applied as the
    /// probability-weighted expectation of the two possible outcomes.
    Mixed { i: usize, j: usize, weight_i: f64 },
}

/// Expands a matrix into replayable win events in an id-canonical order, so
/// that relabeling items permutes results exactly.
fn expand_events(matrix: &ComparisonMatrix) -> Vec<ReplayEvent> {
    let ids = matrix.item_ids();
    let mut pairs = matrix.observed_pairs();
    pairs.iter_mut().for_each(|p| {
        if ids[p.0] > ids[p.1] {
            *p = (p.1, p.0);
        }
    });
    pairs.sort_by(|a, b| (&ids[a.0], &ids[a.1]).cmp(&(&ids[b.0], &ids[b.1])));

    let mut events = Vec::new();
    for (a, b) in pairs {
        let n = matrix.pair_total(a, b);
        let total_events = n.round();
        if total_events < 1.0 {
            continue;
        }
        let p_a = matrix.count(a, b) / n;
        let wins_a_exact = total_events * p_a;
        let wins_b_exact = total_events - wins_a_exact;
        // Snap to integers when the split is integral up to rounding noise.
        let (full_a, full_b, leftover_weight) = if wins_a_exact.fract() < 1e-9
            || wins_a_exact.fract() > 1.0 - 1e-9
        {
            (wins_a_exact.round() as u64, wins_b_exact.round() as u64, None)
        } else {
            (
                wins_a_exact.floor() as u64,
                wins_b_exact.floor() as u64,
                Some(wins_a_exact.fract()),
            )
        };
        for _ in 0..full_a {
            events.push(ReplayEvent::Win { winner: a, loser: b });
        }
        for _ in 0..full_b {
            events.push(ReplayEvent::Win { winner: b, loser: a });
        }
        if let Some(weight_i) = leftover_weight {
            events.push(ReplayEvent::Mixed { i: a, j: b, weight_i });
        }
    }
    events
}

/// Replays every win event of the matrix through TrueSkill updates in a
/// seeded random order, `passes` times, and returns the final state.
pub fn replay_matrix(
    matrix: &ComparisonMatrix,
    state0: &TrueSkillState,
    passes: usize,
    seed: u64,
) -> Result<TrueSkillState, ScalingError> {
    assert!(passes >= 1, "at least one replay pass required");
    if matrix.total_comparisons() <= 0.0 {
        return Err(ScalingError::EmptyMatrix);
    }
    let mut events = expand_events(matrix);
    let mut order: Vec<usize> = (0..events.len()).collect();
    let mut state = state0.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..passes {
        order.shuffle(&mut rng);
        for &k in &order {
            match &mut events[k] {
                ReplayEvent::Win { winner, loser } => state.update(*winner, *loser),
                ReplayEvent::Mixed { i, j, weight_i } => {
                    let (a_mw, a_sw, a_ml, a_sl) = two_player_update(
                        state.mu[*i], state.sigma[*i], state.mu[*j], state.sigma[*j],
                        state.beta, state.tau,
                    );
                    let (b_mw, b_sw, b_ml, b_sl) = two_player_update(
                        state.mu[*j], state.sigma[*j], state.mu[*i], state.sigma[*i],
                        state.beta, state.tau,
                    );
                    let r = *weight_i;
                    state.mu[*i] = r * a_mw + (1.0 - r) * b_ml;
                    state.mu[*j] = r * a_ml + (1.0 - r) * b_mw;
                    state.sigma[*i] = (r * a_sw * a_sw + (1.0 - r) * b_sl * b_sl).sqrt();
                    state.sigma[*j] = (r * a_sl * a_sl + (1.0 - r) * b_sw * b_sw).sqrt();
                }
            }
        }
    }
    Ok(state)
}

/// TrueSkill scaling: replays the matrix and maps ratings to zero-mean JOD.
///
/// The affine map divides rating differences by `√2·β·Φ⁻¹(0.75)`, the
/// distance at which the TrueSkill scale implies a 75% win probability, so a
/// 1-JOD gap keeps its meaning. On a disconnected matrix each component is
/// centered independently, since cross-component offsets carry no information.
pub fn scale_trueskill(
    matrix: &ComparisonMatrix,
    state0: &TrueSkillState,
    passes: usize,
    seed: u64,
) -> Result<JodScale, ScalingError> {
    let state = replay_matrix(matrix, state0, passes, seed)?;
    let jod_per_mu = 1.0 / (SQRT_2 * state.beta * PHI_INV_75);
    let mut scores: Vec<f64> = state.mu.iter().map(|m| m * jod_per_mu).collect();
    for component in matrix.connected_components() {
        let mean = component.iter().map(|&i| scores[i]).sum::<f64>() / component.len() as f64;
        for &i in &component {
            scores[i] -= mean;
        }
    }
    let sigmas: Vec<f64> = state.sigma.iter().map(|s| s * jod_per_mu).collect();
    JodScale::zero_mean_with_sigmas(matrix.item_ids().to_vec(), scores, Some(sigmas))
}

/// Line-search parameters for the MLE scaler.
///
/// The step along the gradient is chosen by bracketing the sign change of
/// the directional derivative and bisecting it. Unlike objective-value
/// comparisons, the derivative stays numerically meaningful arbitrarily
/// close to the optimum, so tight gradient tolerances remain reachable.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LineSearchConfig {
    /// Warm-start step size for the first iteration.
    pub initial_step: f64,
    /// Doubling budget when bracketing the step.
    pub max_expansions: usize,
    /// Bisection refinements once bracketed.
    pub bisections: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self { initial_step: 1.0, max_expansions: 60, bisections: 40 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MleScalerConfig {
    /// Added to both win counts of every observed pair; regularizes
    /// unanimous pairs whose raw optimum sits at infinity.
    pub prior_pseudocount: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub line_search: LineSearchConfig,
}

impl Default for MleScalerConfig {
    fn default() -> Self {
        Self {
            prior_pseudocount: 0.5,
            max_iterations: 20_000,
            gradient_tolerance: 1e-9,
            line_search: LineSearchConfig::default(),
        }
    }
}

struct ObservedPair {
    i: usize,
    j: usize,
    wins_i: f64,
    wins_j: f64,
}

fn observed_pairs_with_prior(matrix: &ComparisonMatrix, prior: f64) -> Vec<ObservedPair> {
    matrix
        .observed_pairs()
        .into_iter()
        .map(|(i, j)| ObservedPair {
            i,
            j,
            wins_i: matrix.count(i, j) + prior,
            wins_j: matrix.count(j, i) + prior,
        })
        .collect()
}

fn pair_objective(pairs: &[ObservedPair], scores: &[f64]) -> f64 {
    let mut ll = 0.0;
    for p in pairs {
        let d = (scores[p.i] - scores[p.j]) / JOD_LINK_DENOM;
        ll += p.wins_i * ln_normal_cdf(d) + p.wins_j * ln_normal_cdf(-d);
    }
    ll
}

fn pair_gradient(pairs: &[ObservedPair], scores: &[f64], grad: &mut [f64]) {
    grad.iter_mut().for_each(|g| *g = 0.0);
    for p in pairs {
        let d = (scores[p.i] - scores[p.j]) / JOD_LINK_DENOM;
        let g = (p.wins_i * mills_ratio_inv(d) - p.wins_j * mills_ratio_inv(-d)) / JOD_LINK_DENOM;
        grad[p.i] += g;
        grad[p.j] -= g;
    }
}

/// Maximum-likelihood Thurstonian scaling under the Gaussian link.
///
/// Maximizes `Σ c'_ij ln Φ(d_ij) + c'_ji ln Φ(-d_ij)` over zero-mean scores,
/// where `d_ij = (s_i - s_j)/(sigma_obs·√2)` and `c'` are the counts with the
/// prior pseudocount added to both sides of every observed pair. Plain
/// gradient ascent with Armijo backtracking; the objective is concave.
pub fn scale_mle(
    matrix: &ComparisonMatrix,
    config: &MleScalerConfig,
) -> Result<JodScale, ScalingError> {
    if matrix.total_comparisons() <= 0.0 {
        return Err(ScalingError::EmptyMatrix);
    }
    let components = matrix.connected_components();
    if components.len() > 1 {
        let ids = matrix.item_ids();
        return Err(ScalingError::Disconnected {
            components: components
                .iter()
                .map(|c| c.iter().map(|&i| ids[i].clone()).collect())
                .collect(),
        });
    }
    let pairs = observed_pairs_with_prior(matrix, config.prior_pseudocount);
    let n = matrix.len();
    let mut scores = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];
    let mut step = config.line_search.initial_step;

    for _iteration in 0..config.max_iterations {
        pair_gradient(&pairs, &scores, &mut grad);
        let grad_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_inf < config.gradient_tolerance {
            return JodScale::zero_mean(matrix.item_ids().to_vec(), scores);
        }
        // Directional derivative of the objective at `scores + a·grad`.
        let mut slope_at = |a: f64, scores: &[f64], grad: &[f64]| -> f64 {
            for (t, (s, g)) in trial.iter_mut().zip(scores.iter().zip(grad)) {
                *t = s + a * g;
            }
            pair_gradient(&pairs, &trial, &mut trial_grad);
            trial_grad.iter().zip(grad).map(|(t, g)| t * g).sum()
        };
        // The slope at 0 is ||grad||² > 0; bracket its sign change.
        let mut hi = step.max(1e-12);
        let mut expansions = 0;
        while slope_at(hi, &scores, &grad) > 0.0 {
            hi *= 2.0;
            expansions += 1;
            if expansions >= config.line_search.max_expansions {
                break;
            }
        }
        let mut lo = 0.0;
        if expansions >= config.line_search.max_expansions {
            // No maximum along this ray within the budget: typically an
            // unbounded likelihood (unanimous pairs without a prior). Take
            // the far point and let the iteration cap report the failure.
            lo = hi;
        } else {
            let mut shrink = hi / 2.0;
            while shrink > 0.0 && slope_at(shrink, &scores, &grad) <= 0.0 {
                hi = shrink;
                shrink /= 2.0;
            }
            lo = lo.max(shrink);
            for _ in 0..config.line_search.bisections {
                let mid = 0.5 * (lo + hi);
                if slope_at(mid, &scores, &grad) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let a = 0.5 * (lo + hi);
        for (s, g) in scores.iter_mut().zip(&grad) {
            *s += a * g;
        }
        let mean = scores.iter().sum::<f64>() / n as f64;
        scores.iter_mut().for_each(|s| *s -= mean);
        step = a.max(1e-12);
    }
    pair_gradient(&pairs, &scores, &mut grad);
    let grad_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    Err(ScalingError::NotConverged { iterations: config.max_iterations, gradient_norm: grad_inf })
}

/// Coefficient-free binomial log-likelihood of the matrix under the scores.
///
/// An all-zero matrix contributes nothing and returns 0. The Gaussian link
/// never returns exactly 0 or 1 for finite score differences, so unanimous
/// pairs stay finite.
pub fn log_likelihood(scores: &JodScale, matrix: &ComparisonMatrix) -> f64 {
    assert_eq!(scores.item_ids(), matrix.item_ids(), "scores and matrix must share item ids");
    let pairs = observed_pairs_with_prior(matrix, 0.0);
    pair_objective(&pairs, scores.scores())
}

/// Gradient of [`log_likelihood`] with respect to the scores, in JOD units.
pub fn log_likelihood_gradient(scores: &JodScale, matrix: &ComparisonMatrix) -> Vec<f64> {
    assert_eq!(scores.item_ids(), matrix.item_ids(), "scores and matrix must share item ids");
    let pairs = observed_pairs_with_prior(matrix, 0.0);
    let mut grad = vec![0.0; scores.len()];
    pair_gradient(&pairs, scores.scores(), &mut grad);
    grad
}

/// Shifts `predicted` by a constant so its mean matches `reference`.
///
/// JOD scales are translation-invariant, so any comparison of two scales must
/// first agree on an origin; matching means is this crate's convention. Items
/// are matched by id and returned in the reference order.
pub fn align_scores(predicted: &JodScale, reference: &JodScale) -> Result<JodScale, ScalingError> {
    if predicted.len() != reference.len() {
        return Err(ScalingError::IdMismatch(format!(
            "{} predicted items vs {} reference items",
            predicted.len(),
            reference.len()
        )));
    }
    let mut reordered = Vec::with_capacity(reference.len());
    for id in reference.item_ids() {
        match predicted.score_of(id) {
            Some(s) => reordered.push(s),
            None => return Err(ScalingError::IdMismatch(format!("id `{id}` missing from predicted"))),
        }
    }
    let pred_mean = reordered.iter().sum::<f64>() / reordered.len().max(1) as f64;
    let shift = reference.mean() - pred_mean;
    let shifted: Vec<f64> = reordered.into_iter().map(|s| s + shift).collect();
    JodScale::build(reference.item_ids().to_vec(), shifted, None, reference.convention())
}

/// Link probability implied by two JOD scores (75% at a 1-JOD gap).
pub fn jod_link(score_diff: f64) -> f64 {
    normal_cdf(score_diff / JOD_LINK_DENOM)
}

/// Inverse of [`jod_link`]: the JOD difference implying probability `p`.
pub fn jod_link_inverse(p: f64) -> f64 {
    crate::stats::normal_quantile(p) * JOD_LINK_DENOM
}
