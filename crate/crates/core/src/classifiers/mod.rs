//! Five from-scratch classifiers behind one contract:
//! `fit(train, hyperparams, seed)`, `predict(x) = [score(x) >= 0.5]`,
//! `score(x)` a fraud probability in [0, 1] — plus versioned JSON
//! persistence with FitState fingerprint checks.

pub mod adaboost;
pub mod forest;
pub mod knn;
pub mod lda;
pub mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::features::seeded_rng;
use crate::scalar::Scalar;

use adaboost::AdaBoostState;
use forest::{ForestParams, ForestState};
use knn::KnnState;
use lda::LdaState;
use tree::{Tree, TreeParams};

/// Current model document format.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// The five model kinds, with their CLI names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RandomForest,
    Knn,
    Lda,
    DecisionTree,
    AdaBoost,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::RandomForest,
        ModelKind::Knn,
        ModelKind::Lda,
        ModelKind::DecisionTree,
        ModelKind::AdaBoost,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rf" => Ok(ModelKind::RandomForest),
            "knn" => Ok(ModelKind::Knn),
            "lda" => Ok(ModelKind::Lda),
            "dt" => Ok(ModelKind::DecisionTree),
            "ada" => Ok(ModelKind::AdaBoost),
            other => Err(Error::Usage(format!(
                "unknown model {other:?} (expected rf|knn|lda|dt|ada)"
            ))),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            ModelKind::RandomForest => "rf",
            ModelKind::Knn => "knn",
            ModelKind::Lda => "lda",
            ModelKind::DecisionTree => "dt",
            ModelKind::AdaBoost => "ada",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::RandomForest => "Random Forest",
            ModelKind::Knn => "KNN",
            ModelKind::Lda => "LDA",
            ModelKind::DecisionTree => "Decision Tree",
            ModelKind::AdaBoost => "AdaBoost",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecisionTreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for DecisionTreeParams {
    fn default() -> Self {
        DecisionTreeParams { max_depth: None, min_samples_split: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// None means round(sqrt(d)).
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        RandomForestParams {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaParams {
    pub ridge: f64,
}

impl Default for LdaParams {
    fn default() -> Self {
        LdaParams { ridge: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaBoostParams {
    pub n_rounds: usize,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        AdaBoostParams { n_rounds: 100 }
    }
}

/// Per-model settings; each model reads only its own section.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub decision_tree: DecisionTreeParams,
    pub random_forest: RandomForestParams,
    pub knn: KnnParams,
    pub lda: LdaParams,
    pub adaboost: AdaBoostParams,
}

/// Fitted parameters, one variant per model kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelState<T> {
    DecisionTree { tree: Tree<T> },
    RandomForest { forest: ForestState<T> },
    Knn { state: KnnState<T> },
    Lda { state: LdaState<T> },
    AdaBoost { state: AdaBoostState<T> },
}

/// One fitted classifier plus the metadata that pins its provenance:
/// seed, hyperparams, training column names, FitState fingerprint, and a
/// lineage counter bumped by retraining on changed data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel<T> {
    pub format_version: u32,
    pub kind: ModelKind,
    pub model_version: u32,
    pub lineage: Option<String>,
    pub seed: u64,
    pub hyperparams: Hyperparams,
    pub columns: Vec<String>,
    pub fitstate_fingerprint: String,
    pub train_fingerprint: String,
    pub state: ModelState<T>,
}

impl<T: Scalar> TrainedModel<T> {
    /// Fits one model kind on the training matrix. Returns the model and
    /// any degeneracy warnings (single-class trees, constant AdaBoost).
    pub fn fit(
        kind: ModelKind,
        train: &LabeledDataset<T>,
        hp: &Hyperparams,
        seed: u64,
        fitstate_fingerprint: &str,
    ) -> Result<(TrainedModel<T>, Vec<String>)> {
        if train.n_rows() < 2 {
            return Err(Error::Data("training requires at least 2 rows".into()));
        }
        if hp.decision_tree.min_samples_split < 2 || hp.random_forest.min_samples_split < 2 {
            return Err(Error::Usage("min_samples_split must be at least 2".into()));
        }
        let mut warnings = Vec::new();
        let (n_neg, n_pos) = train.class_counts();
        let single_class = n_neg == 0 || n_pos == 0;
        let all: Vec<usize> = (0..train.n_rows()).collect();

        let state = match kind {
            ModelKind::DecisionTree => {
                if single_class {
                    warnings.push("single-class training set; tree is a constant leaf".into());
                }
                let params = TreeParams {
                    max_depth: hp.decision_tree.max_depth,
                    min_samples_split: hp.decision_tree.min_samples_split,
                    features_per_split: None,
                };
                let tree = Tree::fit(train, &all, &params, &mut seeded_rng(seed, 0));
                ModelState::DecisionTree { tree }
            }
            ModelKind::RandomForest => {
                if hp.random_forest.n_trees == 0 {
                    return Err(Error::Usage("random forest requires n_trees >= 1".into()));
                }
                if single_class {
                    warnings.push("single-class training set; forest scores are constant".into());
                }
                let params = ForestParams {
                    n_trees: hp.random_forest.n_trees,
                    max_depth: hp.random_forest.max_depth,
                    min_samples_split: hp.random_forest.min_samples_split,
                    features_per_split: hp.random_forest.features_per_split,
                    bootstrap: hp.random_forest.bootstrap,
                };
                ModelState::RandomForest { forest: ForestState::fit(train, &params, seed) }
            }
            ModelKind::Knn => {
                let k = hp.knn.k;
                if k == 0 || k >= train.n_rows() {
                    return Err(Error::Usage(format!(
                        "knn requires 0 < k < training size; got k={k} with {} rows",
                        train.n_rows()
                    )));
                }
                let values: Vec<T> = train.rows().flat_map(|r| r.iter().copied()).collect();
                ModelState::Knn {
                    state: KnnState {
                        k,
                        n_cols: train.n_cols(),
                        values,
                        labels: train.labels().to_vec(),
                    },
                }
            }
            ModelKind::Lda => ModelState::Lda { state: LdaState::fit(train, hp.lda.ridge)? },
            ModelKind::AdaBoost => {
                let (state, ada_warnings) = AdaBoostState::fit(train, hp.adaboost.n_rounds)?;
                warnings.extend(ada_warnings);
                ModelState::AdaBoost { state }
            }
        };

        Ok((
            TrainedModel {
                format_version: MODEL_FORMAT_VERSION,
                kind,
                model_version: 1,
                lineage: None,
                seed,
                hyperparams: hp.clone(),
                columns: train.columns().to_vec(),
                fitstate_fingerprint: fitstate_fingerprint.to_string(),
                train_fingerprint: train.content_fingerprint(),
                state,
            },
            warnings,
        ))
    }

    /// Fraud probability in [0, 1].
    pub fn score_row(&self, row: &[T]) -> T {
        match &self.state {
            ModelState::DecisionTree { tree } => tree.score_row(row),
            ModelState::RandomForest { forest } => forest.score_row(row),
            ModelState::Knn { state } => state.score_row(row),
            ModelState::Lda { state } => state.score_row(row),
            ModelState::AdaBoost { state } => state.score_row(row),
        }
    }

    /// Uniform threshold rule shared by all five kinds.
    pub fn predict_row(&self, row: &[T]) -> bool {
        self.score_row(row) >= T::from_f64_lossy(0.5)
    }

    /// Column-name guard: prediction-time columns must equal training
    /// columns, order included.
    pub fn check_columns(&self, data: &LabeledDataset<T>) -> Result<()> {
        if data.columns() != self.columns.as_slice() {
            return Err(Error::Data(format!(
                "column mismatch: model was trained on {} columns starting {:?}, got {} starting {:?}",
                self.columns.len(),
                self.columns.first(),
                data.n_cols(),
                data.columns().first()
            )));
        }
        Ok(())
    }

    /// Guard against scoring data built with a different FitState.
    pub fn check_fingerprint(&self, fitstate_fingerprint: &str) -> Result<()> {
        if self.fitstate_fingerprint != fitstate_fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: self.fitstate_fingerprint.clone(),
                actual: fitstate_fingerprint.to_string(),
            });
        }
        Ok(())
    }

    /// Scores every row; parallel, order-preserving.
    pub fn score_matrix(&self, data: &LabeledDataset<T>) -> Result<Vec<T>> {
        self.check_columns(data)?;
        let indices: Vec<usize> = (0..data.n_rows()).collect();
        Ok(indices.par_iter().map(|&i| self.score_row(data.row(i))).collect())
    }

    pub fn predict_matrix(&self, data: &LabeledDataset<T>) -> Result<Vec<bool>> {
        let half = T::from_f64_lossy(0.5);
        Ok(self.score_matrix(data)?.into_iter().map(|s| s >= half).collect())
    }
}

impl<T: Scalar> LabeledDataset<T> {
    /// Fingerprint of the matrix content (columns, cells, labels); ties a
    /// model to the exact training set it saw.
    pub fn content_fingerprint(&self) -> String {
        let mut bytes = Vec::with_capacity(self.n_rows() * self.n_cols() * 8 + 64);
        for c in self.columns() {
            bytes.extend_from_slice(c.as_bytes());
            bytes.push(0);
        }
        for row in self.rows() {
            for v in row {
                bytes.extend_from_slice(&v.to_f64().unwrap_or(f64::NAN).to_bits().to_le_bytes());
            }
        }
        for &l in self.labels() {
            bytes.push(l as u8);
        }
        crate::fingerprint::hex(crate::fingerprint::fnv1a(&bytes))
    }
}

/// Serializes a model to its versioned JSON document.
pub fn save_model(model: &TrainedModel<f64>) -> String {
    serde_json::to_string_pretty(model).expect("model serializes")
}

/// Loads a model document, checking the format version before anything
/// else so tampered or future documents are reported distinctly from
/// corrupt ones.
pub fn load_model(text: &str, path: &str) -> Result<TrainedModel<f64>> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Corrupt {
        path: path.to_string(),
        message: e.to_string(),
    })?;
    let found = value.get("format_version").cloned();
    match found.as_ref().and_then(|v| v.as_u64()) {
        Some(v) if v == MODEL_FORMAT_VERSION as u64 => {}
        other => {
            return Err(Error::VersionMismatch {
                path: path.to_string(),
                found: other.map_or("absent".to_string(), |v| v.to_string()),
                expected: MODEL_FORMAT_VERSION,
            })
        }
    }
    serde_json::from_value(value).map_err(|e| Error::Corrupt {
        path: path.to_string(),
        message: e.to_string(),
    })
}
