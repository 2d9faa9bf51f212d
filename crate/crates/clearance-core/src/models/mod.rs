//! Learners over encoded design matrices: CART decision trees, random
//! forests, first-order gradient boosting, second-order regularized boosting,
//! and penalized logistic regression.
//!
//! Every model predicts a margin in log-odds; `probability = sigmoid(margin)`.
//! Averaged-mode forests are the one exception in *direction*: they average
//! per-tree probabilities and report the logit of that average as their
//! margin, so the identity still holds by construction.
//!
//! Tree ensembles store learning-rate-scaled leaf values, so a boosted margin
//! is always `base_score + sum of leaf values`, and every node records its
//! cover (training rows routed through it), which the path-dependent Shapley
//! algorithm consumes.

mod boost;
mod forest;
mod linear;
mod tree;

pub mod grids;

pub use linear::logistic_objective_grad;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("cannot fit on an empty matrix")]
    EmptyMatrix,
    #[error("invalid hyperparameter: {0}")]
    BadHyperparameter(String),
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("schema mismatch: model expects {expected} features, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("schema mismatch: model was fit under a different feature schema")]
    DigestMismatch,
    #[error("column {col} has {distinct} distinct values; at most 65536 supported")]
    TooManyDistinctValues { col: usize, distinct: usize },
    #[error("invalid model document: {0}")]
    InvalidModel(String),
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model (de)serialization failed: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Learner family tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    DecisionTree,
    RandomForest,
    Gbm,
    Xgboost,
    PenalizedLogistic,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::DecisionTree => "decision_tree",
            Algorithm::RandomForest => "random_forest",
            Algorithm::Gbm => "gbm",
            Algorithm::Xgboost => "xgboost",
            Algorithm::PenalizedLogistic => "penalized_logistic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    Gini,
    Entropy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    L2,
    L1,
    ElasticNet,
}

/// Default depth for boosted trees (tunable; tree and forest depths come
/// from their grids instead).
pub const DEFAULT_BOOSTED_DEPTH: usize = 6;

/// Second-order leaf L2 penalty, fixed: only estimators, learning rate and
/// gamma are searched.
pub const XGB_LEAF_L2: f64 = 1.0;

/// One learner configuration. Fields irrelevant to the tagged algorithm are
/// carried at their defaults and ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub algorithm: Algorithm,
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub criterion: SplitCriterion,
    /// Minimum split gain for second-order boosting.
    pub gamma: f64,
    pub penalty: Penalty,
    /// Inverse regularization strength (1/lambda).
    pub c: f64,
    /// Elastic-net mixing weight: 0 is pure L2, 1 pure L1.
    pub l1_ratio: f64,
    /// Row bootstrap for forests.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            algorithm: Algorithm::Xgboost,
            n_estimators: 200,
            learning_rate: 0.5,
            max_depth: DEFAULT_BOOSTED_DEPTH,
            criterion: SplitCriterion::Gini,
            gamma: 0.0,
            penalty: Penalty::L2,
            c: 1.0,
            l1_ratio: 0.5,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl Hyperparameters {
    pub fn decision_tree(criterion: SplitCriterion, max_depth: usize) -> Self {
        Hyperparameters {
            algorithm: Algorithm::DecisionTree,
            criterion,
            max_depth,
            n_estimators: 1,
            learning_rate: 1.0,
            ..Default::default()
        }
    }

    pub fn random_forest(
        criterion: SplitCriterion,
        max_depth: usize,
        n_estimators: usize,
        seed: u64,
    ) -> Self {
        Hyperparameters {
            algorithm: Algorithm::RandomForest,
            criterion,
            max_depth,
            n_estimators,
            learning_rate: 1.0,
            seed,
            ..Default::default()
        }
    }

    pub fn gbm(n_estimators: usize, learning_rate: f64, seed: u64) -> Self {
        Hyperparameters {
            algorithm: Algorithm::Gbm,
            n_estimators,
            learning_rate,
            seed,
            ..Default::default()
        }
    }

    pub fn xgboost(n_estimators: usize, learning_rate: f64, gamma: f64, seed: u64) -> Self {
        Hyperparameters {
            algorithm: Algorithm::Xgboost,
            n_estimators,
            learning_rate,
            gamma,
            seed,
            ..Default::default()
        }
    }

    pub fn logistic(penalty: Penalty, c: f64, l1_ratio: f64) -> Self {
        Hyperparameters {
            algorithm: Algorithm::PenalizedLogistic,
            penalty,
            c,
            l1_ratio,
            ..Default::default()
        }
    }

    /// Compact deterministic description for result tables.
    pub fn describe(&self) -> String {
        match self.algorithm {
            Algorithm::DecisionTree => format!(
                "decision_tree(criterion={:?},max_depth={})",
                self.criterion, self.max_depth
            ),
            Algorithm::RandomForest => format!(
                "random_forest(criterion={:?},max_depth={},n_estimators={})",
                self.criterion, self.max_depth, self.n_estimators
            ),
            Algorithm::Gbm => format!(
                "gbm(n_estimators={},learning_rate={})",
                self.n_estimators, self.learning_rate
            ),
            Algorithm::Xgboost => format!(
                "xgboost(n_estimators={},learning_rate={},gamma={})",
                self.n_estimators, self.learning_rate, self.gamma
            ),
            Algorithm::PenalizedLogistic => format!(
                "penalized_logistic(penalty={:?},c={},l1_ratio={})",
                self.penalty, self.c, self.l1_ratio
            ),
        }
    }
}

/// One tree node. Internal nodes route `value < threshold` to `left`;
/// leaves carry the (already learning-rate-scaled) margin contribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Split column, or `None` for a leaf.
    pub feature: Option<u32>,
    #[serde(default)]
    pub threshold: f64,
    #[serde(default)]
    pub left: u32,
    #[serde(default)]
    pub right: u32,
    #[serde(default)]
    pub leaf_value: f64,
    /// Training rows routed through this node; parents equal the sum of
    /// their children.
    pub cover: f64,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.feature.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        fn rec(t: &Tree, i: u32) -> usize {
            let n = &t.nodes[i as usize];
            if n.is_leaf() {
                0
            } else {
                1 + rec(t, n.left).max(rec(t, n.right))
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            rec(self, 0)
        }
    }

    /// Route a row to its leaf and return the stored value.
    pub fn margin(&self, x: &[f32]) -> f64 {
        let mut i = 0u32;
        loop {
            let n = &self.nodes[i as usize];
            match n.feature {
                None => return n.leaf_value,
                Some(f) => {
                    i = if (x[f as usize] as f64) < n.threshold {
                        n.left
                    } else {
                        n.right
                    };
                }
            }
        }
    }

    /// Index of the leaf the row lands in.
    pub fn leaf_index(&self, x: &[f32]) -> usize {
        let mut i = 0u32;
        loop {
            let n = &self.nodes[i as usize];
            match n.feature {
                None => return i as usize,
                Some(f) => {
                    i = if (x[f as usize] as f64) < n.threshold {
                        n.left
                    } else {
                        n.right
                    };
                }
            }
        }
    }

    /// Structural checks: children stored after their parent (preorder, so
    /// traversal cannot cycle), indices in range, finite leaves, positive
    /// covers that add up.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.nodes.is_empty() {
            return Err(ModelError::InvalidModel("tree has no nodes".into()));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.cover.is_nan() || n.cover <= 0.0 {
                return Err(ModelError::InvalidModel(format!(
                    "node {i} has non-positive cover {}",
                    n.cover
                )));
            }
            if n.is_leaf() {
                if !n.leaf_value.is_finite() {
                    return Err(ModelError::InvalidModel(format!(
                        "leaf {i} has non-finite value"
                    )));
                }
            } else {
                let (l, r) = (n.left as usize, n.right as usize);
                if l >= self.nodes.len() || r >= self.nodes.len() || l <= i || r <= i {
                    return Err(ModelError::InvalidModel(format!(
                        "node {i} has out-of-order or out-of-range children"
                    )));
                }
                if !n.threshold.is_finite() {
                    return Err(ModelError::InvalidModel(format!(
                        "node {i} has non-finite threshold"
                    )));
                }
                let sum = self.nodes[l].cover + self.nodes[r].cover;
                if (sum - n.cover).abs() > 1e-6 * n.cover.max(1.0) {
                    return Err(ModelError::InvalidModel(format!(
                        "node {i} cover {} != children sum {sum}",
                        n.cover
                    )));
                }
            }
        }
        Ok(())
    }

    /// Highest split column referenced anywhere in the tree.
    pub fn max_feature(&self) -> Option<u32> {
        self.nodes.iter().filter_map(|n| n.feature).max()
    }
}

/// How an ensemble combines its trees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    /// Margin is additive over trees (boosting; single trees are the
    /// one-tree case).
    Boosted,
    /// Per-tree probabilities are averaged (forests).
    Averaged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub trees: Vec<Tree>,
    /// Log-odds intercept added to every boosted margin.
    pub base_score: f64,
    /// Shrinkage used during fitting. Leaf values are stored already scaled,
    /// so prediction never re-applies it.
    pub learning_rate: f64,
    pub mode: EnsembleMode,
}

impl Ensemble {
    pub fn margin(&self, x: &[f32]) -> f64 {
        match self.mode {
            EnsembleMode::Boosted => {
                self.base_score + self.trees.iter().map(|t| t.margin(x)).sum::<f64>()
            }
            EnsembleMode::Averaged => {
                let p = self.proba(x);
                (p / (1.0 - p)).ln()
            }
        }
    }

    pub fn proba(&self, x: &[f32]) -> f64 {
        match self.mode {
            EnsembleMode::Boosted => sigmoid(self.margin(x)),
            EnsembleMode::Averaged => {
                let s: f64 = self.trees.iter().map(|t| sigmoid(t.margin(x))).sum();
                s / self.trees.len() as f64
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.trees.iter().map(|t| t.leaf_count()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub penalty: Penalty,
    pub c: f64,
    pub l1_ratio: f64,
}

impl LinearModel {
    pub fn margin(&self, x: &[f32]) -> f64 {
        let mut s = self.intercept;
        for (w, v) in self.weights.iter().zip(x) {
            s += w * *v as f64;
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    Trees(Ensemble),
    Linear(LinearModel),
}

/// A fitted learner bound to the schema it was trained under.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub algorithm: Algorithm,
    pub kind: ModelKind,
    pub n_features: usize,
    pub schema_digest: String,
}

impl Model {
    pub fn ensemble(&self) -> Option<&Ensemble> {
        match &self.kind {
            ModelKind::Trees(e) => Some(e),
            ModelKind::Linear(_) => None,
        }
    }

    /// Log-odds prediction for one row.
    pub fn predict_margin(&self, x: &[f32]) -> Result<f64, ModelError> {
        if x.len() != self.n_features {
            return Err(ModelError::WidthMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(match &self.kind {
            ModelKind::Trees(e) => e.margin(x),
            ModelKind::Linear(l) => l.margin(x),
        })
    }

    /// `sigmoid(margin)`; averaged forests return the mean tree probability
    /// directly (their margin is defined as its logit).
    pub fn predict_proba(&self, x: &[f32]) -> Result<f64, ModelError> {
        if x.len() != self.n_features {
            return Err(ModelError::WidthMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(match &self.kind {
            ModelKind::Trees(e) => e.proba(x),
            ModelKind::Linear(l) => sigmoid(l.margin(x)),
        })
    }

    fn check_matrix(&self, m: &FeatureMatrix) -> Result<(), ModelError> {
        if m.n_cols() != self.n_features {
            return Err(ModelError::WidthMismatch {
                expected: self.n_features,
                got: m.n_cols(),
            });
        }
        if !self.schema_digest.is_empty() && m.schema.digest() != self.schema_digest {
            return Err(ModelError::DigestMismatch);
        }
        Ok(())
    }

    pub fn predict_margins(&self, m: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        self.check_matrix(m)?;
        Ok((0..m.n_rows())
            .into_par_iter()
            .map(|i| match &self.kind {
                ModelKind::Trees(e) => e.margin(m.row(i)),
                ModelKind::Linear(l) => l.margin(m.row(i)),
            })
            .collect())
    }

    pub fn predict_probas(&self, m: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        self.check_matrix(m)?;
        Ok((0..m.n_rows())
            .into_par_iter()
            .map(|i| match &self.kind {
                ModelKind::Trees(e) => e.proba(m.row(i)),
                ModelKind::Linear(l) => sigmoid(l.margin(m.row(i))),
            })
            .collect())
    }

    /// Boolean predictions at the 0.5 probability (zero margin) threshold.
    pub fn predict_labels(&self, m: &FeatureMatrix) -> Result<Vec<bool>, ModelError> {
        Ok(self
            .predict_probas(m)?
            .into_iter()
            .map(|p| p >= 0.5)
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelDocument::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Model, ModelError> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        doc.into_model()
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path.as_ref(), self.to_json()).map_err(|source| ModelError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Model, ModelError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|source| ModelError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })?;
        Model::from_json(&text)
    }
}

/// Wire format for fitted models.
#[derive(Serialize, Deserialize)]
struct ModelDocument {
    algorithm: Algorithm,
    schema_digest: String,
    n_features: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    base_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<EnsembleMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trees: Option<Vec<Tree>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    intercept: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    penalty: Option<Penalty>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    l1_ratio: Option<f64>,
}

impl From<&Model> for ModelDocument {
    fn from(m: &Model) -> Self {
        let mut doc = ModelDocument {
            algorithm: m.algorithm,
            schema_digest: m.schema_digest.clone(),
            n_features: m.n_features,
            base_score: None,
            learning_rate: None,
            mode: None,
            trees: None,
            weights: None,
            intercept: None,
            penalty: None,
            c: None,
            l1_ratio: None,
        };
        match &m.kind {
            ModelKind::Trees(e) => {
                doc.base_score = Some(e.base_score);
                doc.learning_rate = Some(e.learning_rate);
                doc.mode = Some(e.mode);
                doc.trees = Some(e.trees.clone());
            }
            ModelKind::Linear(l) => {
                doc.weights = Some(l.weights.clone());
                doc.intercept = Some(l.intercept);
                doc.penalty = Some(l.penalty);
                doc.c = Some(l.c);
                doc.l1_ratio = Some(l.l1_ratio);
            }
        }
        doc
    }
}

impl ModelDocument {
    fn into_model(self) -> Result<Model, ModelError> {
        let kind = if let Some(trees) = self.trees {
            if trees.is_empty() {
                return Err(ModelError::InvalidModel("ensemble has no trees".into()));
            }
            for t in &trees {
                t.validate()?;
                if let Some(f) = t.max_feature() {
                    if f as usize >= self.n_features {
                        return Err(ModelError::InvalidModel(format!(
                            "tree splits on column {f} but the model declares {} features",
                            self.n_features
                        )));
                    }
                }
            }
            ModelKind::Trees(Ensemble {
                trees,
                base_score: self
                    .base_score
                    .ok_or_else(|| ModelError::InvalidModel("missing base_score".into()))?,
                learning_rate: self.learning_rate.unwrap_or(1.0),
                mode: self
                    .mode
                    .ok_or_else(|| ModelError::InvalidModel("missing mode".into()))?,
            })
        } else if let Some(weights) = self.weights {
            if weights.len() != self.n_features {
                return Err(ModelError::InvalidModel(
                    "weight vector width disagrees with n_features".into(),
                ));
            }
            ModelKind::Linear(LinearModel {
                weights,
                intercept: self.intercept.unwrap_or(0.0),
                penalty: self.penalty.unwrap_or(Penalty::L2),
                c: self.c.unwrap_or(1.0),
                l1_ratio: self.l1_ratio.unwrap_or(0.5),
            })
        } else {
            return Err(ModelError::InvalidModel(
                "document carries neither trees nor weights".into(),
            ));
        };
        Ok(Model {
            algorithm: self.algorithm,
            kind,
            n_features: self.n_features,
            schema_digest: self.schema_digest,
        })
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic loss of one margin against a boolean label.
pub fn log_loss(margin: f64, label: bool) -> f64 {
    if label {
        softplus(-margin)
    } else {
        softplus(margin)
    }
}

/// Mean logistic loss over a margin vector.
pub fn mean_log_loss(margins: &[f64], labels: &[bool]) -> f64 {
    margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| log_loss(m, y))
        .sum::<f64>()
        / margins.len() as f64
}

/// Log-odds of the positive rate, clamped away from the infinities so pure
/// training labels stay usable.
pub(crate) fn clamped_base_score(labels: &[bool]) -> f64 {
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let p = (pos / labels.len() as f64).clamp(1e-7, 1.0 - 1e-7);
    (p / (1.0 - p)).ln()
}

fn ensure_finite(m: &FeatureMatrix) -> Result<(), ModelError> {
    for i in 0..m.n_rows() {
        for (j, v) in m.row(i).iter().enumerate() {
            if !v.is_finite() {
                return Err(ModelError::NonFiniteFeature { row: i, col: j });
            }
        }
    }
    Ok(())
}

pub use boost::{fit_gbm, fit_xgboost, staged_margins};
pub use forest::{fit_decision_tree, fit_random_forest};
pub use linear::fit_penalized_logistic;

/// Fit whatever `h.algorithm` names.
pub fn fit(m: &FeatureMatrix, h: &Hyperparameters) -> Result<Model, ModelError> {
    match h.algorithm {
        Algorithm::DecisionTree => fit_decision_tree(m, h),
        Algorithm::RandomForest => fit_random_forest(m, h),
        Algorithm::Gbm => fit_gbm(m, h),
        Algorithm::Xgboost => fit_xgboost(m, h),
        Algorithm::PenalizedLogistic => fit_penalized_logistic(m, h),
    }
}

/// Standalone margin -> probability helper mirroring `predict_proba`.
pub fn margin_to_proba(margin: f64) -> f64 {
    sigmoid(margin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_reference_points() {
        assert!((sigmoid(1.09) - 0.748).abs() < 1e-3);
        assert!((sigmoid(-1.004) - 0.268).abs() < 1e-3);
        assert!((sigmoid(2.858) - 0.945).abs() < 1e-3);
    }

    #[test]
    fn log_loss_is_stable_at_extremes() {
        assert!(log_loss(800.0, true) < 1e-12);
        assert!(log_loss(-800.0, false) < 1e-12);
        assert!(log_loss(-800.0, true).is_finite());
        assert!(log_loss(800.0, false) > 700.0);
    }

    #[test]
    fn tree_margin_routes_by_threshold() {
        let t = Tree {
            nodes: vec![
                Node {
                    feature: Some(0),
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                    leaf_value: 0.0,
                    cover: 10.0,
                },
                Node {
                    feature: None,
                    threshold: 0.0,
                    left: 0,
                    right: 0,
                    leaf_value: -1.5,
                    cover: 4.0,
                },
                Node {
                    feature: None,
                    threshold: 0.0,
                    left: 0,
                    right: 0,
                    leaf_value: 2.5,
                    cover: 6.0,
                },
            ],
        };
        assert_eq!(t.margin(&[0.0]), -1.5);
        assert_eq!(t.margin(&[1.0]), 2.5);
        assert_eq!(t.leaf_count(), 2);
        assert_eq!(t.depth(), 1);
        t.validate().unwrap();
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        use crate::features::anonymous_schema;
        use std::sync::Arc;
        let rows: Vec<Vec<f32>> = (0..50)
            .map(|i| vec![(i % 5) as f32, (i % 3) as f32])
            .collect();
        let labels: Vec<bool> = rows.iter().map(|r| r[0] >= 2.0).collect();
        let m =
            crate::features::FeatureMatrix::from_rows(Arc::new(anonymous_schema(2)), rows, labels);
        for h in [
            Hyperparameters::xgboost(5, 0.4, 0.0, 1),
            Hyperparameters::decision_tree(SplitCriterion::Entropy, 3),
            Hyperparameters::random_forest(SplitCriterion::Gini, 3, 4, 2),
            Hyperparameters::logistic(Penalty::ElasticNet, 2.0, 0.5),
        ] {
            let model = fit(&m, &h).unwrap();
            let loaded = Model::from_json(&model.to_json()).unwrap();
            assert_eq!(loaded.algorithm, model.algorithm);
            assert_eq!(loaded.schema_digest, model.schema_digest);
            for i in 0..m.n_rows() {
                assert_eq!(
                    loaded.predict_margin(m.row(i)).unwrap(),
                    model.predict_margin(m.row(i)).unwrap(),
                    "{h:?} row {i}"
                );
            }
        }
    }

    #[test]
    fn invalid_documents_are_rejected() {
        // neither trees nor weights
        let bare = r#"{"algorithm":"xgboost","schema_digest":"","n_features":2}"#;
        assert!(Model::from_json(bare).is_err());
        // a tree with non-positive cover
        let bad_cover = r#"{
            "algorithm":"xgboost","schema_digest":"","n_features":1,
            "base_score":0.0,"learning_rate":1.0,"mode":"boosted",
            "trees":[{"nodes":[{"feature":null,"leaf_value":1.0,"cover":0.0}]}]
        }"#;
        assert!(matches!(
            Model::from_json(bad_cover),
            Err(ModelError::InvalidModel(_))
        ));
        // linear weights disagreeing with the declared width
        let bad_width = r#"{
            "algorithm":"penalized_logistic","schema_digest":"","n_features":3,
            "weights":[0.1,0.2],"intercept":0.0
        }"#;
        assert!(Model::from_json(bad_width).is_err());
        // a cycle that preorder ordering must reject
        let cyclic = r#"{
            "algorithm":"xgboost","schema_digest":"","n_features":1,
            "base_score":0.0,"learning_rate":1.0,"mode":"boosted",
            "trees":[{"nodes":[
                {"feature":0,"threshold":0.5,"left":1,"right":2,"leaf_value":0.0,"cover":2.0},
                {"feature":0,"threshold":0.5,"left":0,"right":2,"leaf_value":0.0,"cover":1.0},
                {"feature":null,"leaf_value":1.0,"cover":1.0}
            ]}]
        }"#;
        assert!(Model::from_json(cyclic).is_err());
        // a split column beyond the declared width
        let wide_split = r#"{
            "algorithm":"xgboost","schema_digest":"","n_features":1,
            "base_score":0.0,"learning_rate":1.0,"mode":"boosted",
            "trees":[{"nodes":[
                {"feature":7,"threshold":0.5,"left":1,"right":2,"leaf_value":0.0,"cover":2.0},
                {"feature":null,"leaf_value":1.0,"cover":1.0},
                {"feature":null,"leaf_value":1.0,"cover":1.0}
            ]}]
        }"#;
        assert!(Model::from_json(wide_split).is_err());
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let model = Model {
            algorithm: Algorithm::PenalizedLogistic,
            kind: ModelKind::Linear(LinearModel {
                weights: vec![1.0, -1.0],
                intercept: 0.0,
                penalty: Penalty::L2,
                c: 1.0,
                l1_ratio: 0.0,
            }),
            n_features: 2,
            schema_digest: String::new(),
        };
        assert!(matches!(
            model.predict_margin(&[1.0]),
            Err(ModelError::WidthMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn validate_rejects_bad_cover() {
        let t = Tree {
            nodes: vec![
                Node {
                    feature: Some(0),
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                    leaf_value: 0.0,
                    cover: 10.0,
                },
                Node {
                    feature: None,
                    threshold: 0.0,
                    left: 0,
                    right: 0,
                    leaf_value: -1.5,
                    cover: 3.0,
                },
                Node {
                    feature: None,
                    threshold: 0.0,
                    left: 0,
                    right: 0,
                    leaf_value: 2.5,
                    cover: 6.0,
                },
            ],
        };
        assert!(t.validate().is_err());
    }
}
