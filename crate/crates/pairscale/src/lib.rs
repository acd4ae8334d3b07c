//! Pairwise comparison scaling toolkit.
//!
//! This crate turns sparse pairwise preference data into granular quality
//! scores on a just-objectionable-difference (JOD) scale. A 1-JOD gap between
//! two items means 75% of observers prefer the better one.
//!
//! The pieces, roughly in pipeline order:
//!
//! * [`matrix`] — zero-diagonal win-count matrices, validation, filtering,
//!   pair extraction, CSV round-trips.
//! * [`observer`] — a Thurstone Case-V observer model used to synthesize
//!   comparison data from known scores (the ground-truth oracle).
//! * [`scaling`] — two interchangeable scalers from matrix to JOD scores:
//!   TrueSkill replay and direct maximum-likelihood scaling.
//! * [`comparator`] — a Siamese feature comparator with an odd hub layer
//!   (exact preference symmetry), weighted binary cross-entropy training
//!   with hand-derived gradients, and a finite-difference checker.
//! * [`inference`] — quality scores from a trained comparator: multi-item
//!   matrix reconstruction, single-item anchoring against references, and
//!   budgeted pair selection.
//! * [`metrics`] — SRCC/PLCC/KRCC, aligned MAE, scene-wise aggregation and
//!   prediction-calibration histograms.
//! * [`cli`] — reproducible command-line experiment drivers used by the
//!   `pairscale` binary.
//!
//! Every seeded entry point is deterministic: the same inputs and seed
//! produce byte-identical outputs.

pub mod cli;
pub mod comparator;
pub mod inference;
pub mod items;
pub mod matrix;
pub mod metrics;
pub mod observer;
pub mod scaling;
pub mod stats;

pub use comparator::{ComparatorModel, TrainConfig};
pub use inference::{InferenceConfig, PairStrategy, ReferenceSet, ScalerKind};
pub use items::{Item, ItemSet};
pub use matrix::{ComparisonMatrix, PairRecord};
pub use observer::{Design, DesignKind, ObserverConfig};
pub use scaling::{JodScale, MleScalerConfig, TrueSkillState};

/// Format version stamped into every file this crate emits.
pub const FORMAT_VERSION: &str = "1";
