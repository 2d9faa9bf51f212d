//! Per-observation feature attributions in margin (log-odds) space.
//!
//! Two routes compute the same quantity and check each other:
//!
//! - [`exact_shapley`] / [`exact_shapley_conditional`]: the subset-enumeration
//!   definition, exponential in the number of columns (refused above 20), the
//!   oracle side of the pair;
//! - [`tree_shap`]: the polynomial path algorithm for boosted tree ensembles,
//!   in either cover mode (tree-conditional expectations from per-node
//!   covers) or background mode (interventional expectations against a
//!   reference sample).
//!
//! Both satisfy local accuracy: `base_value + sum(phi) = prediction`.

mod exact;
mod interventional;
mod path;

use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::models::{sigmoid, EnsembleMode, Model, ModelError, ModelKind};
use crate::rng::Rng;

pub use exact::{exact_shapley, exact_shapley_conditional};

/// Hard cap on exact enumeration: 2^20 subset evaluations.
pub const EXACT_MAX_FEATURES: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum ShapError {
    #[error("{0} features is beyond exact enumeration (max {EXACT_MAX_FEATURES}); use tree_shap")]
    TooManyFeatures(usize),
    #[error("background set is empty")]
    EmptyBackground,
    #[error("background row width {got} does not match model width {expected}")]
    BackgroundWidth { expected: usize, got: usize },
    #[error("tree node {node} carries no usable cover")]
    MissingCover { node: usize },
    #[error("attributions require a boosted tree ensemble; {0} is not")]
    UnsupportedModel(&'static str),
    #[error("explanations carry mixed schemas")]
    MixedSchemas,
    #[error("no explanations to aggregate")]
    EmptyExplanations,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Attributions for one row: `base_value + sum(phi) = prediction` in
/// log-odds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapExplanation {
    pub row_id: String,
    /// One entry per schema column.
    pub phi: Vec<f64>,
    /// Expected margin with no feature information, under the mode that
    /// produced this explanation.
    pub base_value: f64,
    /// Margin of the explained row.
    pub prediction: f64,
    pub schema_digest: String,
}

impl ShapExplanation {
    pub fn probability(&self) -> f64 {
        sigmoid(self.prediction)
    }

    /// Local-accuracy residual; should vanish to float precision.
    pub fn additivity_gap(&self) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - self.prediction).abs()
    }
}

/// Reference rows defining interventional expectations for absent features.
#[derive(Clone, Debug)]
pub struct BackgroundSet {
    rows: Vec<Vec<f32>>,
}

impl BackgroundSet {
    pub fn from_rows(rows: Vec<Vec<f32>>) -> Result<BackgroundSet, ShapError> {
        if rows.is_empty() {
            return Err(ShapError::EmptyBackground);
        }
        Ok(BackgroundSet { rows })
    }

    /// Sample up to `max_rows` training rows without replacement.
    pub fn from_matrix(
        m: &FeatureMatrix,
        max_rows: usize,
        seed: u64,
    ) -> Result<BackgroundSet, ShapError> {
        if m.n_rows() == 0 || max_rows == 0 {
            return Err(ShapError::EmptyBackground);
        }
        let mut rng = Rng::new(seed ^ 0xb6);
        let idx = rng.sample_indices(m.n_rows(), max_rows.min(m.n_rows()));
        Ok(BackgroundSet {
            rows: idx.into_iter().map(|i| m.row(i).to_vec()).collect(),
        })
    }

    pub fn rows(&self) -> &[Vec<f32>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Expectation convention for tree attributions.
#[derive(Clone, Copy, Debug)]
pub enum TreeShapMode<'a> {
    /// Tree-conditional: absent features follow both children weighted by
    /// cover. Matches [`exact_shapley_conditional`].
    Cover,
    /// Interventional: absent features take background-row values. Matches
    /// [`exact_shapley`] on the same background.
    Background(&'a BackgroundSet),
}

pub(crate) fn boosted_ensemble(model: &Model) -> Result<&crate::models::Ensemble, ShapError> {
    match &model.kind {
        ModelKind::Trees(e) if e.mode == EnsembleMode::Boosted => {
            for t in &e.trees {
                for (i, n) in t.nodes.iter().enumerate() {
                    if !n.cover.is_finite() || n.cover <= 0.0 {
                        return Err(ShapError::MissingCover { node: i });
                    }
                }
            }
            Ok(e)
        }
        ModelKind::Trees(_) => Err(ShapError::UnsupportedModel(
            "an averaged forest has no additive margin",
        )),
        ModelKind::Linear(_) => Err(ShapError::UnsupportedModel("a linear model")),
    }
}

/// Polynomial-time attributions for a boosted ensemble; the per-tree results
/// add up, and the ensemble attribution is their sum.
pub fn tree_shap(
    model: &Model,
    x: &[f32],
    mode: TreeShapMode<'_>,
    row_id: &str,
) -> Result<ShapExplanation, ShapError> {
    let ensemble = boosted_ensemble(model)?;
    if x.len() != model.n_features {
        return Err(ShapError::Model(ModelError::WidthMismatch {
            expected: model.n_features,
            got: x.len(),
        }));
    }
    let (phi, base_value) = match mode {
        TreeShapMode::Cover => path::ensemble_path_shap(ensemble, x, model.n_features),
        TreeShapMode::Background(bg) => {
            for row in bg.rows() {
                if row.len() != model.n_features {
                    return Err(ShapError::BackgroundWidth {
                        expected: model.n_features,
                        got: row.len(),
                    });
                }
            }
            interventional::ensemble_interventional_shap(ensemble, x, bg, model.n_features)
        }
    };
    Ok(ShapExplanation {
        row_id: row_id.to_string(),
        phi,
        base_value,
        prediction: ensemble.margin(x),
        schema_digest: model.schema_digest.clone(),
    })
}

/// One ranked entry of the global importance table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    pub mean_abs_phi: f64,
    /// 1-based rank after the descending sort.
    pub rank: usize,
}

/// Mean absolute attribution per feature, descending; ties break
/// alphabetically.
pub fn mean_abs_shap(
    explanations: &[ShapExplanation],
    feature_names: &[String],
) -> Result<Vec<RankedFeature>, ShapError> {
    if explanations.is_empty() {
        return Err(ShapError::EmptyExplanations);
    }
    let digest = &explanations[0].schema_digest;
    if explanations
        .iter()
        .any(|e| e.schema_digest != *digest || e.phi.len() != feature_names.len())
    {
        return Err(ShapError::MixedSchemas);
    }
    let mut sums = vec![0.0f64; feature_names.len()];
    for e in explanations {
        for (s, p) in sums.iter_mut().zip(&e.phi) {
            *s += p.abs();
        }
    }
    let n = explanations.len() as f64;
    let mut out: Vec<RankedFeature> = feature_names
        .iter()
        .zip(&sums)
        .map(|(f, s)| RankedFeature {
            feature: f.clone(),
            mean_abs_phi: s / n,
            rank: 0,
        })
        .collect();
    out.sort_by(|a, b| {
        b.mean_abs_phi
            .partial_cmp(&a.mean_abs_phi)
            .unwrap()
            .then_with(|| a.feature.cmp(&b.feature))
    });
    for (i, r) in out.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(out)
}

/// One line of a local explanation: a feature and its signed contribution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalContribution {
    pub feature: String,
    pub phi: f64,
}

/// Local explanation of a single prediction, strongest contributions first.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalReport {
    pub row_id: String,
    pub contributions: Vec<LocalContribution>,
    pub base_value: f64,
    pub margin: f64,
    pub probability: f64,
}

/// Order features by |phi| and keep the `top_k` strongest (clamped to the
/// feature count).
pub fn local_report(
    explanation: &ShapExplanation,
    feature_names: &[String],
    top_k: usize,
) -> LocalReport {
    let mut order: Vec<usize> = (0..explanation.phi.len()).collect();
    order.sort_by(|&a, &b| {
        explanation.phi[b]
            .abs()
            .partial_cmp(&explanation.phi[a].abs())
            .unwrap()
            .then_with(|| feature_names[a].cmp(&feature_names[b]))
    });
    order.truncate(top_k.min(explanation.phi.len()));
    LocalReport {
        row_id: explanation.row_id.clone(),
        contributions: order
            .into_iter()
            .map(|i| LocalContribution {
                feature: feature_names[i].clone(),
                phi: explanation.phi[i],
            })
            .collect(),
        base_value: explanation.base_value,
        margin: explanation.prediction,
        probability: sigmoid(explanation.prediction),
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::features::{anonymous_schema, FeatureMatrix};
    use crate::models::{Algorithm, Ensemble, EnsembleMode, Model, ModelKind, Node, Tree};
    use crate::rng::Rng;
    use std::sync::Arc;

    /// Random binary-feature matrix for fitting small ensembles.
    pub fn random_matrix(n: usize, p: usize, seed: u64) -> FeatureMatrix {
        let mut rng = Rng::new(seed);
        let rows: Vec<Vec<f32>> = (0..n)
            .map(|_| (0..p).map(|_| rng.below(2) as f32).collect())
            .collect();
        let labels: Vec<bool> = rows
            .iter()
            .map(|r| {
                let s: f32 = r.iter().take(3).sum();
                rng.f64() < crate::models::sigmoid((s as f64 - 1.0) * 1.5)
            })
            .collect();
        FeatureMatrix::from_rows(Arc::new(anonymous_schema(p)), rows, labels)
    }

    /// Hand-built random boosted ensemble with coherent covers: structure
    /// sampled directly, covers filled by routing a sample through the tree.
    pub fn random_ensemble(p: usize, depth: usize, n_trees: usize, seed: u64) -> Model {
        let mut rng = Rng::new(seed);
        let mut trees = Vec::new();
        for _ in 0..n_trees {
            let mut nodes = Vec::new();
            build_random_tree(&mut nodes, depth, p, &mut rng);
            let mut tree = Tree { nodes };
            fill_covers(&mut tree, p, &mut rng);
            trees.push(tree);
        }
        Model {
            algorithm: Algorithm::Xgboost,
            kind: ModelKind::Trees(Ensemble {
                trees,
                base_score: rng.f64() * 2.0 - 1.0,
                learning_rate: 1.0,
                mode: EnsembleMode::Boosted,
            }),
            n_features: p,
            schema_digest: String::new(),
        }
    }

    fn build_random_tree(nodes: &mut Vec<Node>, depth: usize, p: usize, rng: &mut Rng) -> u32 {
        let id = nodes.len() as u32;
        if depth == 0 || rng.bernoulli(0.25) {
            nodes.push(Node {
                feature: None,
                threshold: 0.0,
                left: 0,
                right: 0,
                leaf_value: rng.f64() * 4.0 - 2.0,
                cover: 1.0,
            });
            return id;
        }
        nodes.push(Node {
            feature: Some(rng.below(p as u64) as u32),
            threshold: 0.5,
            left: 0,
            right: 0,
            leaf_value: 0.0,
            cover: 1.0,
        });
        let l = build_random_tree(nodes, depth - 1, p, rng);
        let r = build_random_tree(nodes, depth - 1, p, rng);
        nodes[id as usize].left = l;
        nodes[id as usize].right = r;
        id
    }

    /// Route a random binary sample through the tree so covers are realistic
    /// and consistent (parent = left + right).
    fn fill_covers(tree: &mut Tree, p: usize, rng: &mut Rng) {
        let mut counts = vec![0u64; tree.nodes.len()];
        for _ in 0..256 {
            let row: Vec<f32> = (0..p).map(|_| rng.below(2) as f32).collect();
            let mut i = 0u32;
            loop {
                counts[i as usize] += 1;
                let n = &tree.nodes[i as usize];
                match n.feature {
                    None => break,
                    Some(f) => {
                        i = if (row[f as usize] as f64) < n.threshold {
                            n.left
                        } else {
                            n.right
                        };
                    }
                }
            }
        }
        // +1 smoothing per leaf keeps every cover positive while preserving
        // parent = sum(children)
        fn smooth(tree: &Tree, counts: &mut Vec<u64>, i: u32) -> u64 {
            let n = &tree.nodes[i as usize];
            let c = match n.feature {
                None => counts[i as usize] + 1,
                Some(_) => smooth(tree, counts, n.left) + smooth(tree, counts, n.right),
            };
            counts[i as usize] = c;
            c
        }
        smooth(tree, &mut counts, 0);
        for (n, c) in tree.nodes.iter_mut().zip(&counts) {
            n.cover = *c as f64;
        }
    }

    pub fn random_row(p: usize, rng: &mut Rng) -> Vec<f32> {
        (0..p).map(|_| rng.below(2) as f32).collect()
    }
}
