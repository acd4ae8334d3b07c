//! Item sets, feature files, and scene manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ItemError {
    #[error("empty item id")]
    EmptyId,
    #[error("duplicate item id `{0}`")]
    DuplicateId(String),
    #[error("feature dimension mismatch: item `{id}` has {got} features, expected {expected}")]
    DimensionMismatch { id: String, got: usize, expected: usize },
    #[error("feature vectors must have dimension >= 1 (item `{0}`)")]
    ZeroDimension(String),
    #[error("item `{0}` has no features")]
    MissingFeatures(String),
    #[error("unknown item id `{0}`")]
    UnknownId(String),
    #[error("{path}:{line}: {message}")]
    Malformed { path: String, line: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("manifest error: {0}")]
    Manifest(String),
}

/// One item: a stable id plus an optional feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub id: String,
    pub features: Option<Vec<f64>>,
}

/// An ordered collection of items with consistent feature dimensionality.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ItemSet {
    items: Vec<Item>,
}

impl ItemSet {
    pub fn new(items: Vec<Item>) -> Result<Self, ItemError> {
        let mut seen = std::collections::BTreeSet::new();
        let mut dim: Option<usize> = None;
        for item in &items {
            if item.id.is_empty() {
                return Err(ItemError::EmptyId);
            }
            if !seen.insert(item.id.clone()) {
                return Err(ItemError::DuplicateId(item.id.clone()));
            }
            if let Some(f) = &item.features {
                if f.is_empty() {
                    return Err(ItemError::ZeroDimension(item.id.clone()));
                }
                match dim {
                    None => dim = Some(f.len()),
                    Some(d) if d != f.len() => {
                        return Err(ItemError::DimensionMismatch {
                            id: item.id.clone(),
                            got: f.len(),
                            expected: d,
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(Self { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn ids(&self) -> Vec<String> {
        self.items.iter().map(|i| i.id.clone()).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|i| i.id == id)
    }

    /// Shared feature dimension of the items that carry features.
    pub fn feature_dim(&self) -> Option<usize> {
        self.items.iter().find_map(|i| i.features.as_ref().map(Vec::len))
    }

    pub fn features_of(&self, index: usize) -> Result<&[f64], ItemError> {
        let item = &self.items[index];
        item.features.as_deref().ok_or_else(|| ItemError::MissingFeatures(item.id.clone()))
    }

    /// Writes features as CSV with an `id,f1,...,fd` header.
    pub fn save_features(&self, path: &Path) -> Result<(), ItemError> {
        let dim = self.feature_dim().unwrap_or(0);
        let mut out = String::new();
        out.push_str(&format!("# format: pairscale-features v{}\n", crate::FORMAT_VERSION));
        out.push_str("id");
        for k in 1..=dim {
            out.push_str(&format!(",f{k}"));
        }
        out.push('\n');
        for item in &self.items {
            let feats = item
                .features
                .as_ref()
                .ok_or_else(|| ItemError::MissingFeatures(item.id.clone()))?;
            out.push_str(&item.id);
            for v in feats {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|source| ItemError::Io { path: disp(path), source })
    }

    /// Loads a features CSV. The `id,f1,...` header row and `#` comment lines
    /// are skipped if present.
    pub fn load_features(path: &Path) -> Result<Self, ItemError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ItemError::Io { path: disp(path), source })?;
        let p = disp(path);
        let mut items = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split(',');
            let id = fields.next().unwrap().trim().to_string();
            if lineno <= 2 && id == "id" {
                continue; // header row
            }
            let mut features = Vec::new();
            for f in fields {
                let v: f64 = f.trim().parse().map_err(|_| ItemError::Malformed {
                    path: p.clone(),
                    line: lineno,
                    message: format!("invalid feature value `{}`", f.trim()),
                })?;
                features.push(v);
            }
            if features.is_empty() {
                return Err(ItemError::Malformed {
                    path: p.clone(),
                    line: lineno,
                    message: "row has an id but no features".into(),
                });
            }
            items.push(Item { id, features: Some(features) });
        }
        ItemSet::new(items)
    }
}

/// One scene in a manifest: a features file plus one matrix file per attribute.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SceneEntry {
    pub features: PathBuf,
    pub matrices: BTreeMap<String, PathBuf>,
}

/// Maps scene names to their data files. Paths are relative to the manifest.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    #[serde(default = "default_version")]
    pub format_version: String,
    pub scenes: BTreeMap<String, SceneEntry>,
}

fn default_version() -> String {
    crate::FORMAT_VERSION.to_string()
}

impl SceneManifest {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), ItemError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ItemError::Io { path: disp(path), source })?;
        let manifest: SceneManifest =
            serde_json::from_str(&text).map_err(|e| ItemError::Manifest(e.to_string()))?;
        let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        Ok((manifest, base))
    }

    pub fn save(&self, path: &Path) -> Result<(), ItemError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|source| ItemError::Io { path: disp(path), source })
    }
}

fn disp(path: &Path) -> String {
    path.display().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_and_empty_ids() {
        let dup = vec![
            Item { id: "a".into(), features: None },
            Item { id: "a".into(), features: None },
        ];
        assert!(matches!(ItemSet::new(dup), Err(ItemError::DuplicateId(_))));
        let empty = vec![Item { id: String::new(), features: None }];
        assert!(matches!(ItemSet::new(empty), Err(ItemError::EmptyId)));
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let items = vec![
            Item { id: "a".into(), features: Some(vec![1.0, 2.0]) },
            Item { id: "b".into(), features: Some(vec![1.0]) },
        ];
        assert!(matches!(ItemSet::new(items), Err(ItemError::DimensionMismatch { .. })));
    }

    #[test]
    fn features_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let set = ItemSet::new(vec![
            Item { id: "a".into(), features: Some(vec![0.5, -1.25, 3.0]) },
            Item { id: "b".into(), features: Some(vec![1.0, 2.0, 0.0078125]) },
        ])
        .unwrap();
        set.save_features(&path).unwrap();
        let loaded = ItemSet::load_features(&path).unwrap();
        assert_eq!(loaded, set);
    }

    #[test]
    fn manifest_round_trip_and_strictness() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenes.json");
        let manifest = SceneManifest {
            format_version: crate::FORMAT_VERSION.into(),
            scenes: BTreeMap::from([(
                "s01".to_string(),
                SceneEntry {
                    features: "s01_features.csv".into(),
                    matrices: BTreeMap::from([("overall".to_string(), "s01_overall.csv".into())]),
                },
            )]),
        };
        manifest.save(&path).unwrap();
        let (loaded, base) = SceneManifest::load(&path).unwrap();
        assert_eq!(loaded, manifest);
        assert_eq!(base, dir.path());

        std::fs::write(&path, r#"{"scenes": {}, "surprise": 1}"#).unwrap();
        assert!(matches!(SceneManifest::load(&path), Err(ItemError::Manifest(_))));
    }
}
