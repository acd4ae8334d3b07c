//! Evaluation metrics: rank and linear correlations, aligned MAE, scene-wise
//! aggregation, and prediction-calibration histograms.
//!
//! Degenerate cases (constant inputs, all-tied vectors) return an explicit
//! `None` marker instead of NaN so downstream reports can flag them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::bin_index;
use crate::scaling::{align_scores, JodScale, ScalingError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {x} vs {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("need at least 2 values, got {0}")]
    TooShort(usize),
    #[error("empty input")]
    Empty,
    #[error(transparent)]
    Scaling(#[from] ScalingError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn check_lengths(x: &[f64], y: &[f64]) -> Result<(), MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch { x: x.len(), y: y.len() });
    }
    if x.len() < 2 {
        return Err(MetricsError::TooShort(x.len()));
    }
    Ok(())
}

/// Pearson's linear correlation. `Ok(None)` marks a constant input.
pub fn plcc(x: &[f64], y: &[f64]) -> Result<Option<f64>, MetricsError> {
    check_lengths(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

/// Average ranks (1-based), ties sharing the mean of their rank range.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![0.0; n];
    let mut k = 0;
    while k < n {
        let mut end = k + 1;
        while end < n && values[order[end]] == values[order[k]] {
            end += 1;
        }
        let mean_rank = (k + 1 + end) as f64 / 2.0; // mean of k+1 ..= end
        for &idx in &order[k..end] {
            ranks[idx] = mean_rank;
        }
        k = end;
    }
    ranks
}

/// Spearman's rank correlation: Pearson over average ranks.
pub fn srcc(x: &[f64], y: &[f64]) -> Result<Option<f64>, MetricsError> {
    check_lengths(x, y)?;
    plcc(&average_ranks(x), &average_ranks(y))
}

/// Kendall's tau-b (tie-corrected), via sort plus merge-counted swaps.
pub fn krcc(x: &[f64], y: &[f64]) -> Result<Option<f64>, MetricsError> {
    check_lengths(x, y)?;
    let n = x.len();
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
    });

    let tie_sum = |counts: &[usize]| -> f64 {
        counts.iter().map(|&g| (g * (g - 1) / 2) as f64).sum()
    };
    let mut x_groups = Vec::new();
    let mut xy_groups = Vec::new();
    let mut gx = 1usize;
    let mut gxy = 1usize;
    for k in 1..n {
        if pairs[k].0 == pairs[k - 1].0 {
            gx += 1;
            if pairs[k].1 == pairs[k - 1].1 {
                gxy += 1;
            } else {
                xy_groups.push(gxy);
                gxy = 1;
            }
        } else {
            x_groups.push(gx);
            gx = 1;
            xy_groups.push(gxy);
            gxy = 1;
        }
    }
    x_groups.push(gx);
    xy_groups.push(gxy);
    let tied_x = tie_sum(&x_groups);
    let tied_xy = tie_sum(&xy_groups);

    // Merge sort on y, counting the exchanges needed: each exchange is one
    // discordant pair.
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0f64; n];
    let mut swaps = 0u64;
    let mut width = 1usize;
    while width < n {
        let mut lo = 0usize;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            let (mut a, mut b, mut out) = (lo, mid, lo);
            while a < mid || b < hi {
                if a < mid && (b >= hi || ys[a] <= ys[b]) {
                    buf[out] = ys[a];
                    a += 1;
                } else {
                    buf[out] = ys[b];
                    swaps += (mid - a) as u64;
                    b += 1;
                }
                out += 1;
            }
            lo = hi;
        }
        ys[..n].copy_from_slice(&buf[..n]);
        width *= 2;
    }

    let mut y_groups = Vec::new();
    let mut gy = 1usize;
    for k in 1..n {
        if ys[k] == ys[k - 1] {
            gy += 1;
        } else {
            y_groups.push(gy);
            gy = 1;
        }
    }
    y_groups.push(gy);
    let tied_y = tie_sum(&y_groups);

    let n0 = (n * (n - 1) / 2) as f64;
    let denom = (n0 - tied_x) * (n0 - tied_y);
    if denom <= 0.0 {
        return Ok(None);
    }
    let concordant_minus_discordant = n0 - tied_x - tied_y + tied_xy - 2.0 * swaps as f64;
    Ok(Some((concordant_minus_discordant / denom.sqrt()).clamp(-1.0, 1.0)))
}

/// MAE between two scales after mean-shift alignment.
pub fn mae_aligned(predicted: &JodScale, reference: &JodScale) -> Result<f64, MetricsError> {
    let aligned = align_scores(predicted, reference)?;
    if aligned.is_empty() {
        return Err(MetricsError::Empty);
    }
    let sum: f64 = aligned
        .scores()
        .iter()
        .zip(reference.scores())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(sum / aligned.len() as f64)
}

/// Scene-wise aggregate of one metric.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Aggregate {
    /// The s/2-th smallest value: lower-of-two-middles for even counts.
    pub median: f64,
    pub mean: f64,
    /// Normal-approximation 95% half-width, `1.96·sd/√s`.
    pub moe: f64,
    /// Set when the margin of error is meaningless (a single scene).
    pub moe_degenerate: bool,
}

/// Median, mean and margin of error of per-scene metric values.
pub fn aggregate(values: &[f64]) -> Result<Aggregate, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let s = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let median = if s % 2 == 0 { sorted[s / 2 - 1] } else { sorted[s / 2] };
    let mean = values.iter().sum::<f64>() / s as f64;
    if s == 1 {
        return Ok(Aggregate { median, mean, moe: 0.0, moe_degenerate: true });
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (s - 1) as f64;
    let moe = 1.96 * var.sqrt() / (s as f64).sqrt();
    Ok(Aggregate { median, mean, moe, moe_degenerate: false })
}

/// Metrics of one scene; `None` marks a degenerate correlation.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SceneMetrics {
    pub srcc: Option<f64>,
    pub plcc: Option<f64>,
    pub krcc: Option<f64>,
    pub mae: f64,
}

impl SceneMetrics {
    pub fn compute(predicted: &JodScale, reference: &JodScale) -> Result<Self, MetricsError> {
        let aligned = align_scores(predicted, reference)?;
        Ok(Self {
            srcc: srcc(aligned.scores(), reference.scores())?,
            plcc: plcc(aligned.scores(), reference.scores())?,
            krcc: krcc(aligned.scores(), reference.scores())?,
            mae: mae_aligned(predicted, reference)?,
        })
    }
}

/// Per-scene metrics plus median/mean/MoE aggregates per metric.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsReport {
    pub format_version: String,
    pub per_scene: BTreeMap<String, SceneMetrics>,
    pub aggregates: BTreeMap<String, Aggregate>,
}

impl MetricsReport {
    pub fn from_scenes(per_scene: BTreeMap<String, SceneMetrics>) -> Result<Self, MetricsError> {
        let collect = |pick: fn(&SceneMetrics) -> Option<f64>| -> Vec<f64> {
            per_scene.values().filter_map(pick).collect()
        };
        let mut aggregates = BTreeMap::new();
        for (name, values) in [
            ("srcc", collect(|m| m.srcc)),
            ("plcc", collect(|m| m.plcc)),
            ("krcc", collect(|m| m.krcc)),
            ("mae", collect(|m| Some(m.mae))),
        ] {
            if !values.is_empty() {
                aggregates.insert(name.to_string(), aggregate(&values)?);
            }
        }
        Ok(Self { format_version: crate::FORMAT_VERSION.to_string(), per_scene, aggregates })
    }

    pub fn save_json(&self, path: &Path) -> Result<(), MetricsError> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, text + "\n")
            .map_err(|source| MetricsError::Io { path: path.display().to_string(), source })
    }

    /// Flat `scene,metric,value` rows; aggregates use pseudo-scene names.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# format: pairscale-report v{}\n", crate::FORMAT_VERSION));
        out.push_str("scene,metric,value\n");
        let fmt = |v: Option<f64>| v.map_or("NA".to_string(), |x| x.to_string());
        for (scene, m) in &self.per_scene {
            out.push_str(&format!("{scene},srcc,{}\n", fmt(m.srcc)));
            out.push_str(&format!("{scene},plcc,{}\n", fmt(m.plcc)));
            out.push_str(&format!("{scene},krcc,{}\n", fmt(m.krcc)));
            out.push_str(&format!("{scene},mae,{}\n", m.mae));
        }
        for (metric, agg) in &self.aggregates {
            out.push_str(&format!("ALL[median],{metric},{}\n", agg.median));
            out.push_str(&format!("ALL[mean],{metric},{}\n", agg.mean));
            out.push_str(&format!("ALL[moe],{metric},{}\n", agg.moe));
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), MetricsError> {
        std::fs::write(path, self.to_csv())
            .map_err(|source| MetricsError::Io { path: path.display().to_string(), source })
    }
}

pub const CALIBRATION_BINS: usize = 6;

/// One ground-truth probability bin of a calibration histogram.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CalibrationBin {
    pub edge_lo: f64,
    pub edge_hi: f64,
    pub count: usize,
    pub mean_pred: Option<f64>,
    /// Distribution of the predictions inside this bin, same bin width.
    pub pred_histogram: Vec<usize>,
}

/// Predictions partitioned by their ground-truth probability over 6 bins.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CalibrationHistogram {
    pub bins: Vec<CalibrationBin>,
}

impl CalibrationHistogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# format: pairscale-calibration v{}\n", crate::FORMAT_VERSION));
        out.push_str("bin,edge_lo,edge_hi,count,mean_pred\n");
        for (k, b) in self.bins.iter().enumerate() {
            let mean = b.mean_pred.map_or("NA".to_string(), |m| m.to_string());
            out.push_str(&format!("{k},{},{},{},{mean}\n", b.edge_lo, b.edge_hi, b.count));
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), MetricsError> {
        std::fs::write(path, self.to_csv())
            .map_err(|source| MetricsError::Io { path: path.display().to_string(), source })
    }
}

/// Bins records by ground-truth probability (6 equal bins on [0, 1], last bin
/// right-closed) and summarizes the predictions that fall in each bin.
pub fn calibration(predictions: &[f64], ground_truth: &[f64]) -> CalibrationHistogram {
    assert_eq!(predictions.len(), ground_truth.len(), "aligned lists required");
    let b = CALIBRATION_BINS;
    let mut bins: Vec<CalibrationBin> = (0..b)
        .map(|k| CalibrationBin {
            edge_lo: k as f64 / b as f64,
            edge_hi: (k + 1) as f64 / b as f64,
            count: 0,
            mean_pred: None,
            pred_histogram: vec![0; b],
        })
        .collect();
    let mut sums = vec![0.0f64; b];
    for (&pred, &gt) in predictions.iter().zip(ground_truth) {
        let k = bin_index(gt, b);
        bins[k].count += 1;
        bins[k].pred_histogram[bin_index(pred, b)] += 1;
        sums[k] += pred;
    }
    for (bin, sum) in bins.iter_mut().zip(sums) {
        if bin.count > 0 {
            bin.mean_pred = Some(sum / bin.count as f64);
        }
    }
    CalibrationHistogram { bins }
}
