//! Sparse pairwise comparison matrices and their empirical preferences.
//!
//! A comparison matrix `C` is zero-diagonal; entry `c_ij` is the (possibly
//! fractional) win count of item `i` over item `j`. The total count for an
//! unordered pair is always derived as `n_ij = c_ij + c_ji`, never stored.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("index {index} out of range for {n} items")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("identical indices: empirical probability is undefined on the diagonal")]
    DiagonalQuery,
    #[error("matrix has {ids} ids but a {rows}x{cols} count table")]
    ShapeMismatch { ids: usize, rows: usize, cols: usize },
    #[error("duplicate item id `{0}`")]
    DuplicateId(String),
    #[error("empty item id")]
    EmptyId,
    #[error("item id `{0}` cannot be written to the matrix format (contains a comma or newline)")]
    UnwritableId(String),
    #[error("{path}:{line}: {message}")]
    Malformed { path: String, line: usize, message: String },
    #[error("{path}:{line}: unknown id `{id}`")]
    UnknownId { path: String, line: usize, id: String },
    #[error("{path}:{line}: duplicate entry for pair ({a}, {b})")]
    DuplicatePair { path: String, line: usize, a: String, b: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// A single invariant breach reported by [`ComparisonMatrix::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonzeroDiagonal { index: usize, value: f64 },
    NegativeCount { i: usize, j: usize, value: f64 },
    NonFiniteCount { i: usize, j: usize, value: f64 },
    ShapeMismatch { ids: usize, entries: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonzeroDiagonal { index, value } => {
                write!(f, "nonzero diagonal at ({index}, {index}): {value}")
            }
            Violation::NegativeCount { i, j, value } => {
                write!(f, "negative count at ({i}, {j}): {value}")
            }
            Violation::NonFiniteCount { i, j, value } => {
                write!(f, "non-finite count at ({i}, {j}): {value}")
            }
            Violation::ShapeMismatch { ids, entries } => {
                write!(f, "count table has {entries} entries for {ids} ids")
            }
        }
    }
}

/// One observed unordered pair in a chosen orientation.
///
/// `p` is the empirical preference probability of item `i` over item `j`,
/// always equal to `wins_i / (wins_i + wins_j)`; `n = wins_i + wins_j > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub i: usize,
    pub j: usize,
    pub wins_i: f64,
    pub wins_j: f64,
    pub p: f64,
    pub n: f64,
}

/// Zero-diagonal win-count matrix over an ordered id list.
///
/// Counts are real-valued so that predicted matrices (`c · p` per pair) reuse
/// the same type as empirical annotation counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonMatrix {
    item_ids: Vec<String>,
    counts: Vec<f64>, // row-major n x n
}

impl ComparisonMatrix {
    /// All-zero matrix over the given ids. Ids must be unique and non-empty.
    pub fn zeros(item_ids: Vec<String>) -> Result<Self, MatrixError> {
        check_ids(&item_ids)?;
        let n = item_ids.len();
        Ok(Self { item_ids, counts: vec![0.0; n * n] })
    }

    /// Builds a matrix from a row-major count table.
    pub fn from_counts(item_ids: Vec<String>, counts: Vec<f64>) -> Result<Self, MatrixError> {
        check_ids(&item_ids)?;
        let n = item_ids.len();
        if counts.len() != n * n {
            return Err(MatrixError::ShapeMismatch { ids: n, rows: counts.len() / n.max(1), cols: n });
        }
        Ok(Self { item_ids, counts })
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

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.item_ids.iter().position(|x| x == id)
    }

    pub fn count(&self, i: usize, j: usize) -> f64 {
        self.counts[i * self.len() + j]
    }

    pub fn set_count(&mut self, i: usize, j: usize, value: f64) {
        let n = self.len();
        self.counts[i * n + j] = value;
    }

    pub fn add_count(&mut self, i: usize, j: usize, value: f64) {
        let n = self.len();
        self.counts[i * n + j] += value;
    }

    /// Total comparisons for the unordered pair, `n_ij = c_ij + c_ji`.
    pub fn pair_total(&self, i: usize, j: usize) -> f64 {
        self.count(i, j) + self.count(j, i)
    }

    /// Sum of all counts in the matrix.
    pub fn total_comparisons(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Unordered pairs `(i, j)` with `i < j` and `n_ij > 0`, in index order.
    pub fn observed_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.pair_total(i, j) > 0.0 {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    /// Reports every invariant violation; an empty list means the matrix is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.item_ids.len();
        let mut violations = Vec::new();
        if self.counts.len() != n * n {
            violations.push(Violation::ShapeMismatch { ids: n, entries: self.counts.len() });
            return violations;
        }
        for i in 0..n {
            let d = self.count(i, i);
            if d != 0.0 {
                violations.push(Violation::NonzeroDiagonal { index: i, value: d });
            }
            for j in 0..n {
                let c = self.count(i, j);
                if !c.is_finite() {
                    violations.push(Violation::NonFiniteCount { i, j, value: c });
                } else if c < 0.0 {
                    violations.push(Violation::NegativeCount { i, j, value: c });
                }
            }
        }
        violations
    }

    /// Empirical preference probability `c_ij / n_ij`.
    ///
    /// Returns `Ok(None)` when the pair has never been compared; this is an
    /// explicit marker, never NaN.
    pub fn empirical_probability(&self, i: usize, j: usize) -> Result<Option<f64>, MatrixError> {
        let n = self.len();
        if i >= n {
            return Err(MatrixError::IndexOutOfRange { index: i, n });
        }
        if j >= n {
            return Err(MatrixError::IndexOutOfRange { index: j, n });
        }
        if i == j {
            return Err(MatrixError::DiagonalQuery);
        }
        let total = self.pair_total(i, j);
        if total > 0.0 {
            Ok(Some(self.count(i, j) / total))
        } else {
            Ok(None)
        }
    }

    /// Zeroes both directions of every pair with fewer than `min_n` comparisons.
    ///
    /// Pairs with `n_ij` exactly equal to `min_n` are kept. Idempotent.
    pub fn threshold_filter(&self, min_n: f64) -> ComparisonMatrix {
        let n = self.len();
        let mut out = self.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.pair_total(i, j) < min_n {
                    out.set_count(i, j, 0.0);
                    out.set_count(j, i, 0.0);
                }
            }
        }
        out
    }

    /// One record per observed unordered pair, each in a seed-chosen random
    /// orientation. Deterministic for a fixed seed.
    pub fn to_pair_records(&self, order_seed: u64) -> Vec<PairRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(order_seed);
        let mut records = Vec::new();
        for (i, j) in self.observed_pairs() {
            let (a, b) = if rng.random_bool(0.5) { (i, j) } else { (j, i) };
            let wins_a = self.count(a, b);
            let wins_b = self.count(b, a);
            let n = wins_a + wins_b;
            records.push(PairRecord { i: a, j: b, wins_i: wins_a, wins_j: wins_b, p: wins_a / n, n });
        }
        records
    }

    /// Histogram of empirical probabilities over observed unordered pairs.
    ///
    /// Equal-width bins on [0, 1]; bin `k` covers `[k/B, (k+1)/B)` with the
    /// last bin closed on the right. One probability per pair, taken in the
    /// canonical `i < j` orientation.
    pub fn probability_histogram(&self, bins: usize) -> Vec<usize> {
        assert!(bins >= 1, "at least one bin required");
        let mut hist = vec![0usize; bins];
        for (i, j) in self.observed_pairs() {
            let p = self.count(i, j) / self.pair_total(i, j);
            hist[bin_index(p, bins)] += 1;
        }
        hist
    }

    /// Connected components of the comparison graph (edges where `n_ij > 0`),
    /// each listed in ascending index order.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut component = vec![usize::MAX; n];
        let mut components = Vec::new();
        for start in 0..n {
            if component[start] != usize::MAX {
                continue;
            }
            let id = components.len();
            let mut stack = vec![start];
            let mut members = Vec::new();
            component[start] = id;
            while let Some(u) = stack.pop() {
                members.push(u);
                for v in 0..n {
                    if v != u && component[v] == usize::MAX && self.pair_total(u, v) > 0.0 {
                        component[v] = id;
                        stack.push(v);
                    }
                }
            }
            members.sort_unstable();
            components.push(members);
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().len() <= 1
    }

    /// Writes the matrix in the pair-list CSV format.
    ///
    /// Layout: a `# format: ...` stamp, a `# items: id1,id2,...` header, then
    /// one `id_a,id_b,wins_a,wins_b` row per observed unordered pair in
    /// canonical index order. Counts use the shortest round-tripping decimal
    /// representation, so reloading reproduces them exactly.
    pub fn save(&self, path: &Path) -> Result<(), MatrixError> {
        for id in &self.item_ids {
            if id.contains(',') || id.contains('\n') || id.contains('\r') {
                return Err(MatrixError::UnwritableId(id.clone()));
            }
        }
        let mut out = String::new();
        out.push_str(&format!("# format: pairscale-matrix v{}\n", crate::FORMAT_VERSION));
        out.push_str("# items: ");
        out.push_str(&self.item_ids.join(","));
        out.push('\n');
        for (i, j) in self.observed_pairs() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.item_ids[i],
                self.item_ids[j],
                self.count(i, j),
                self.count(j, i)
            ));
        }
        std::fs::write(path, out).map_err(|source| MatrixError::Io { path: display(path), source })
    }

    /// Loads a matrix written by [`ComparisonMatrix::save`].
    pub fn load(path: &Path) -> Result<Self, MatrixError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| MatrixError::Io { path: display(path), source })?;
        let p = display(path);
        let mut matrix: Option<ComparisonMatrix> = None;
        let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim_start();
                if let Some(ids) = rest.strip_prefix("items:") {
                    let ids: Vec<String> =
                        ids.trim().split(',').map(|s| s.trim().to_string()).collect();
                    matrix = Some(ComparisonMatrix::zeros(ids).map_err(|e| {
                        MatrixError::Malformed { path: p.clone(), line: lineno, message: e.to_string() }
                    })?);
                }
                continue;
            }
            let m = matrix.as_mut().ok_or_else(|| MatrixError::Malformed {
                path: p.clone(),
                line: lineno,
                message: "data row before `# items:` header".into(),
            })?;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(MatrixError::Malformed {
                    path: p.clone(),
                    line: lineno,
                    message: format!("expected 4 fields `id_a,id_b,wins_a,wins_b`, found {}", fields.len()),
                });
            }
            let a = m.index_of(fields[0].trim()).ok_or_else(|| MatrixError::UnknownId {
                path: p.clone(),
                line: lineno,
                id: fields[0].trim().to_string(),
            })?;
            let b = m.index_of(fields[1].trim()).ok_or_else(|| MatrixError::UnknownId {
                path: p.clone(),
                line: lineno,
                id: fields[1].trim().to_string(),
            })?;
            if a == b {
                return Err(MatrixError::Malformed {
                    path: p.clone(),
                    line: lineno,
                    message: format!("pair references the same id `{}` twice", fields[0].trim()),
                });
            }
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                return Err(MatrixError::DuplicatePair {
                    path: p.clone(),
                    line: lineno,
                    a: fields[0].trim().to_string(),
                    b: fields[1].trim().to_string(),
                });
            }
            let wins_a = parse_count(fields[2], &p, lineno)?;
            let wins_b = parse_count(fields[3], &p, lineno)?;
            m.set_count(a, b, wins_a);
            m.set_count(b, a, wins_b);
        }
        matrix.ok_or_else(|| MatrixError::Malformed {
            path: p,
            line: 0,
            message: "missing `# items:` header".into(),
        })
    }
}

/// Bin index under the half-open convention with a right-closed last bin.
pub(crate) fn bin_index(p: f64, bins: usize) -> usize {
    let idx = (p * bins as f64).floor() as usize;
    idx.min(bins - 1)
}

fn check_ids(ids: &[String]) -> Result<(), MatrixError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if id.is_empty() {
            return Err(MatrixError::EmptyId);
        }
        if !seen.insert(id.as_str()) {
            return Err(MatrixError::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

fn parse_count(field: &str, path: &str, line: usize) -> Result<f64, MatrixError> {
    let value: f64 = field.trim().parse().map_err(|_| MatrixError::Malformed {
        path: path.to_string(),
        line,
        message: format!("invalid count `{}`", field.trim()),
    })?;
    if !value.is_finite() || value < 0.0 {
        return Err(MatrixError::Malformed {
            path: path.to_string(),
            line,
            message: format!("count must be finite and non-negative, found `{}`", field.trim()),
        });
    }
    Ok(value)
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("item_{i:02}")).collect()
    }

    fn matrix_3x3() -> ComparisonMatrix {
        ComparisonMatrix::zeros(ids(3)).unwrap()
    }

    #[test]
    fn all_zero_matrix_is_valid() {
        assert!(matrix_3x3().validate().is_empty());
    }

    #[test]
    fn nonzero_diagonal_is_reported() {
        let mut m = matrix_3x3();
        m.set_count(1, 1, 2.0);
        let v = m.validate();
        assert_eq!(v, vec![Violation::NonzeroDiagonal { index: 1, value: 2.0 }]);
        assert!(v[0].to_string().contains("(1, 1)"));
    }

    #[test]
    fn negative_count_is_reported() {
        let mut m = matrix_3x3();
        m.set_count(0, 1, -1.0);
        let v = m.validate();
        assert_eq!(v, vec![Violation::NegativeCount { i: 0, j: 1, value: -1.0 }]);
        assert!(v[0].to_string().contains("negative count"));
    }

    #[test]
    fn empirical_probability_basic() {
        let mut m = matrix_3x3();
        m.set_count(0, 1, 4.0);
        m.set_count(1, 0, 1.0);
        assert_eq!(m.empirical_probability(0, 1).unwrap(), Some(0.8));
        assert_eq!(m.empirical_probability(1, 0).unwrap(), Some(0.2));
        assert_eq!(m.empirical_probability(0, 2).unwrap(), None);
        m.set_count(1, 2, 3.0);
        m.set_count(2, 1, 3.0);
        assert_eq!(m.empirical_probability(1, 2).unwrap(), Some(0.5));
    }

    #[test]
    fn empirical_probability_rejects_bad_indices() {
        let m = matrix_3x3();
        assert!(matches!(m.empirical_probability(0, 0), Err(MatrixError::DiagonalQuery)));
        assert!(matches!(
            m.empirical_probability(0, 9),
            Err(MatrixError::IndexOutOfRange { index: 9, n: 3 })
        ));
    }

    #[test]
    fn probabilities_of_opposite_orientations_sum_to_one() {
        let mut m = matrix_3x3();
        m.set_count(0, 1, 3.25);
        m.set_count(1, 0, 1.75);
        let a = m.empirical_probability(0, 1).unwrap().unwrap();
        let b = m.empirical_probability(1, 0).unwrap().unwrap();
        assert_eq!(a + b, 1.0);
    }

    #[test]
    fn threshold_zeroes_thin_pairs_and_keeps_boundary() {
        let mut m = matrix_3x3();
        m.set_count(0, 1, 1.0); // n = 1
        m.set_count(1, 2, 2.0);
        m.set_count(2, 1, 1.0); // n = 3
        let f = m.threshold_filter(2.0);
        assert_eq!(f.count(0, 1), 0.0);
        assert_eq!(f.count(1, 2), 2.0);
        let g = m.threshold_filter(3.0);
        assert_eq!(g.pair_total(1, 2), 3.0, "boundary n == min_n is kept");
        assert_eq!(m.threshold_filter(0.0), m, "min_n = 0 is the identity");
    }

    #[test]
    fn threshold_is_idempotent() {
        let mut m = ComparisonMatrix::zeros(ids(4)).unwrap();
        m.set_count(0, 1, 1.0);
        m.set_count(1, 2, 2.0);
        m.set_count(2, 3, 0.5);
        m.set_count(3, 2, 1.0);
        let once = m.threshold_filter(1.5);
        assert_eq!(once.threshold_filter(1.5), once);
    }

    #[test]
    fn pair_records_flip_orientation_by_seed() {
        let mut m = ComparisonMatrix::zeros(ids(2)).unwrap();
        m.set_count(0, 1, 3.0);
        m.set_count(1, 0, 1.0);
        let mut seen_forward = false;
        let mut seen_flipped = false;
        for seed in 0..32 {
            let records = m.to_pair_records(seed);
            assert_eq!(records.len(), 1);
            let r = &records[0];
            assert_eq!(r.n, 4.0);
            if r.i == 0 {
                assert_eq!(r.p, 0.75);
                seen_forward = true;
            } else {
                assert_eq!(r.p, 0.25);
                seen_flipped = true;
            }
        }
        assert!(seen_forward && seen_flipped);
    }

    #[test]
    fn pair_records_are_deterministic_and_cover_all_pairs() {
        let mut m = ComparisonMatrix::zeros(ids(5)).unwrap();
        m.set_count(0, 1, 2.0);
        m.set_count(2, 1, 1.0);
        m.set_count(3, 4, 7.0);
        m.set_count(4, 3, 2.0);
        assert_eq!(m.to_pair_records(9), m.to_pair_records(9));
        for seed in [0, 1, 42] {
            let mut pairs: Vec<(usize, usize)> = m
                .to_pair_records(seed)
                .iter()
                .map(|r| (r.i.min(r.j), r.i.max(r.j)))
                .collect();
            pairs.sort_unstable();
            assert_eq!(pairs, vec![(0, 1), (1, 2), (3, 4)]);
        }
        assert!(ComparisonMatrix::zeros(ids(3)).unwrap().to_pair_records(1).is_empty());
    }

    #[test]
    fn histogram_follows_half_open_convention() {
        // Probabilities 0, 1, 1, 0.5: the half-open bins put 0.5 in the
        // upper bin, so the two-bin histogram is [1, 3].
        let mut m = ComparisonMatrix::zeros(ids(5)).unwrap();
        m.set_count(1, 0, 2.0); // p(0,1) = 0
        m.set_count(0, 2, 3.0); // p(0,2) = 1
        m.set_count(1, 2, 5.0); // p(1,2) = 1
        m.set_count(3, 4, 1.0);
        m.set_count(4, 3, 1.0); // p(3,4) = 0.5
        assert_eq!(m.probability_histogram(2), vec![1, 3]);
        assert_eq!(matrix_3x3().probability_histogram(4), vec![0, 0, 0, 0]);
    }

    #[test]
    fn histogram_counts_sum_to_observed_pairs() {
        let mut m = ComparisonMatrix::zeros(ids(6)).unwrap();
        m.set_count(0, 1, 1.0);
        m.set_count(2, 3, 4.0);
        m.set_count(3, 2, 4.0);
        m.set_count(4, 5, 9.0);
        for bins in 1..8 {
            let total: usize = m.probability_histogram(bins).iter().sum();
            assert_eq!(total, m.observed_pairs().len());
        }
    }

    #[test]
    fn forced_choice_heavy_matrix_concentrates_in_end_bins() {
        let mut m = ComparisonMatrix::zeros(ids(8)).unwrap();
        // Mostly unanimous pairs, two contested ones.
        for i in 0..7usize {
            m.set_count(i, i + 1, 5.0);
        }
        m.set_count(0, 2, 3.0);
        m.set_count(2, 0, 2.0);
        m.set_count(5, 7, 2.0);
        m.set_count(7, 5, 2.0);
        let hist = m.probability_histogram(6);
        let ends = hist[0] + hist[5];
        let middle: usize = hist[1..5].iter().sum();
        assert!(ends > middle);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut m = ComparisonMatrix::zeros(ids(4)).unwrap();
        m.set_count(0, 1, 4.0);
        m.set_count(1, 0, 1.0);
        m.set_count(2, 3, 0.123456789012345);
        m.set_count(3, 2, 29.876543210987655);
        m.save(&path).unwrap();
        let loaded = ComparisonMatrix::load(&path).unwrap();
        assert_eq!(loaded, m);
        assert!(loaded.validate().is_empty());
    }

    #[test]
    fn load_parses_literal_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "# items: a,b,c\na,b,4,1\n").unwrap();
        let m = ComparisonMatrix::load(&path).unwrap();
        assert_eq!(m.count(0, 1), 4.0);
        assert_eq!(m.count(1, 0), 1.0);
        assert_eq!(m.count(0, 2), 0.0);
    }

    #[test]
    fn load_reports_unknown_id_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "# items: a,b\na,zz,1,0\n").unwrap();
        match ComparisonMatrix::load(&path) {
            Err(MatrixError::UnknownId { line, id, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(id, "zz");
            }
            other => panic!("expected UnknownId, got {other:?}"),
        }
    }

    #[test]
    fn load_reports_duplicate_pair_and_malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "# items: a,b\na,b,1,0\nb,a,0,1\n").unwrap();
        assert!(matches!(
            ComparisonMatrix::load(&path),
            Err(MatrixError::DuplicatePair { line: 3, .. })
        ));
        std::fs::write(&path, "# items: a,b\na,b,1\n").unwrap();
        match ComparisonMatrix::load(&path) {
            Err(MatrixError::Malformed { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("4 fields"));
            }
            other => panic!("expected Malformed, got {other:?}"),
        }
    }

    #[test]
    fn components_reflect_graph_structure() {
        let mut m = ComparisonMatrix::zeros(ids(5)).unwrap();
        m.set_count(0, 1, 1.0);
        m.set_count(1, 2, 1.0);
        m.set_count(3, 4, 1.0);
        let comps = m.connected_components();
        assert_eq!(comps, vec![vec![0, 1, 2], vec![3, 4]]);
        assert!(!m.is_connected());
        m.set_count(2, 3, 1.0);
        assert!(m.is_connected());
    }
}
