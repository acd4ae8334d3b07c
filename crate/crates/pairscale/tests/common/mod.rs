//! Shared helpers for integration tests: synthetic scenes on disk and in
//! memory, built entirely from the observer oracle.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pairscale::comparator::PairObservation;
use pairscale::items::{Item, ItemSet, SceneEntry, SceneManifest};
use pairscale::matrix::ComparisonMatrix;
use pairscale::observer::{make_design, simulate_matrix, DesignKind, ObserverConfig};
use pairscale::scaling::JodScale;
use pairscale::stats::derive_seed;

/// One synthetic scene: known scores, features whose first coordinate leaks
/// the score (plus noise), and a simulated comparison matrix.
pub struct Scene {
    pub name: String,
    pub truth: JodScale,
    pub items: ItemSet,
    pub matrix: ComparisonMatrix,
}

pub struct SceneSpec {
    pub n_items: usize,
    pub feature_dim: usize,
    pub score_noise: f64,
    pub comparisons_per_pair: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self { n_items: 12, feature_dim: 8, score_noise: 0.1, comparisons_per_pair: 30 }
    }
}

pub fn make_scene(name: &str, spec: &SceneSpec, seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, name));
    let ids: Vec<String> = (0..spec.n_items).map(|k| format!("{name}_i{k:02}")).collect();
    let scores: Vec<f64> = (0..spec.n_items).map(|_| rng.random_range(-2.0..2.0)).collect();
    let truth = JodScale::from_raw(ids.clone(), scores.clone()).unwrap();
    let items = ItemSet::new(
        ids.iter()
            .zip(&scores)
            .map(|(id, s)| {
                let mut f = vec![s + spec.score_noise * rng.random_range(-1.0..1.0)];
                for _ in 1..spec.feature_dim {
                    f.push(rng.random_range(-1.0..1.0));
                }
                Item { id: id.clone(), features: Some(f) }
            })
            .collect(),
    )
    .unwrap();
    let design = make_design(
        DesignKind::Full,
        spec.n_items,
        0,
        spec.comparisons_per_pair,
        derive_seed(seed, &format!("{name}/design")),
    )
    .unwrap();
    let observer = ObserverConfig::with_seed(derive_seed(seed, &format!("{name}/draws")));
    let matrix = simulate_matrix(&truth, &design, &observer).unwrap();
    Scene { name: name.to_string(), truth, items, matrix }
}

/// Flattens scenes into one global feature table plus training observations.
pub fn training_set(scenes: &[Scene], orientation_seed: u64) -> (Vec<PairObservation>, Vec<Vec<f64>>) {
    let mut features = Vec::new();
    let mut observations = Vec::new();
    for scene in scenes {
        let offset = features.len();
        for k in 0..scene.items.len() {
            features.push(scene.items.features_of(k).unwrap().to_vec());
        }
        for r in scene
            .matrix
            .to_pair_records(derive_seed(orientation_seed, &format!("orient/{}", scene.name)))
        {
            observations.push(PairObservation { i: offset + r.i, j: offset + r.j, p: r.p, n: r.n });
        }
    }
    (observations, features)
}

/// Writes scenes plus a manifest into `dir`; returns the manifest path.
pub fn write_manifest(dir: &Path, scenes: &[Scene]) -> std::path::PathBuf {
    let mut entries = BTreeMap::new();
    for scene in scenes {
        let features_name = format!("{}_features.csv", scene.name);
        let matrix_name = format!("{}_overall.csv", scene.name);
        scene.items.save_features(&dir.join(&features_name)).unwrap();
        scene.matrix.save(&dir.join(&matrix_name)).unwrap();
        entries.insert(
            scene.name.clone(),
            SceneEntry {
                features: features_name.into(),
                matrices: BTreeMap::from([("overall".to_string(), matrix_name.into())]),
            },
        );
    }
    let manifest = SceneManifest { format_version: pairscale::FORMAT_VERSION.into(), scenes: entries };
    let path = dir.join("scenes.json");
    manifest.save(&path).unwrap();
    path
}
