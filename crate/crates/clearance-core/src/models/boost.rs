//! Boosted tree ensembles over the logistic loss.
//!
//! `fit_gbm` is classic stagewise first-order boosting: each tree's structure
//! is least-squares-fit to the current negative gradient (the residuals
//! `y - p`), and each leaf then takes a Newton step. Because a raw Newton
//! step is not guaranteed to decrease the loss when margins saturate, each
//! stage's leaf values are halved until the training log-loss is
//! non-increasing, which makes the contract stage-monotone by construction.
//!
//! `fit_xgboost` is second-order boosting: per-leaf value `-G / (H + lambda)`
//! and split gain
//! `0.5 * (G_l^2/(H_l+lambda) + G_r^2/(H_r+lambda) - G^2/(H+lambda)) - gamma`,
//! with non-positive gains rejected, `lambda` fixed at 1 and `gamma` searched.

use super::tree::{grow, Binned, GainKind, GrowSpec};
use super::{
    clamped_base_score, ensure_finite, mean_log_loss, sigmoid, Algorithm, Ensemble, EnsembleMode,
    Hyperparameters, Model, ModelError, ModelKind, Tree, XGB_LEAF_L2,
};
use crate::features::FeatureMatrix;

const MAX_STAGE_HALVINGS: u32 = 60;

fn validate_boost(m: &FeatureMatrix, h: &Hyperparameters) -> Result<(), ModelError> {
    if m.n_rows() == 0 {
        return Err(ModelError::EmptyMatrix);
    }
    if h.n_estimators < 1 {
        return Err(ModelError::BadHyperparameter(
            "n_estimators must be >= 1".into(),
        ));
    }
    if !(h.learning_rate > 0.0 && h.learning_rate <= 1.0) {
        return Err(ModelError::BadHyperparameter(format!(
            "learning_rate must be in (0, 1], got {}",
            h.learning_rate
        )));
    }
    if h.max_depth < 1 {
        return Err(ModelError::BadHyperparameter(
            "max_depth must be >= 1".into(),
        ));
    }
    if h.gamma < 0.0 {
        return Err(ModelError::BadHyperparameter(format!(
            "gamma must be >= 0, got {}",
            h.gamma
        )));
    }
    ensure_finite(m)
}

fn scale_leaves(tree: &mut Tree, factor: f64) {
    for n in &mut tree.nodes {
        if n.is_leaf() {
            n.leaf_value *= factor;
        }
    }
}

/// First-order gradient boosting with Newton leaf re-fit and a monotonicity
/// safeguard on the stage step.
pub fn fit_gbm(m: &FeatureMatrix, h: &Hyperparameters) -> Result<Model, ModelError> {
    validate_boost(m, h)?;
    let n = m.n_rows();
    let binned = Binned::build(m)?;
    let y: Vec<f64> = m.labels.iter().map(|&l| l as u8 as f64).collect();
    let base = clamped_base_score(&m.labels);
    let mut margins = vec![base; n];
    let mut loss = mean_log_loss(&margins, &m.labels);
    let mut trees = Vec::with_capacity(h.n_estimators);

    for _ in 0..h.n_estimators {
        let p: Vec<f64> = margins.iter().map(|&m| sigmoid(m)).collect();
        let residual: Vec<f64> = y.iter().zip(&p).map(|(y, p)| y - p).collect();
        let ones = vec![1.0f64; n];
        let leaf_value = {
            let residual = &residual;
            let p = &p;
            let eta = h.learning_rate;
            move |rows: &[u32]| {
                let num: f64 = rows.iter().map(|&r| residual[r as usize]).sum();
                let den: f64 = rows
                    .iter()
                    .map(|&r| p[r as usize] * (1.0 - p[r as usize]))
                    .sum();
                if den.abs() < 1e-150 {
                    0.0
                } else {
                    eta * num / den
                }
            }
        };
        let worth_splitting = {
            let residual = &residual;
            move |rows: &[u32]| {
                let first = residual[rows[0] as usize];
                rows.iter().any(|&r| residual[r as usize] != first)
            }
        };
        let mut tree = grow(
            &binned,
            (0..n as u32).collect(),
            &GrowSpec {
                g: &residual,
                h: &ones,
                gain: GainKind::LeastSquares,
                max_depth: h.max_depth,
                features_per_split: None,
                leaf_value: &leaf_value,
                worth_splitting: &worth_splitting,
            },
            None,
        );

        // stage step with halving line search: the Newton direction is kept,
        // the magnitude shrinks until the training loss does not increase
        let leaf_of: Vec<usize> = (0..n).map(|i| tree.leaf_index(m.row(i))).collect();
        let mut factor = 1.0f64;
        let mut accepted_loss: Option<f64> = None;
        for _ in 0..=MAX_STAGE_HALVINGS {
            let candidate: f64 = {
                let mut s = 0.0;
                for i in 0..n {
                    let margin = margins[i] + factor * tree.nodes[leaf_of[i]].leaf_value;
                    s += super::log_loss(margin, m.labels[i]);
                }
                s / n as f64
            };
            if candidate <= loss {
                accepted_loss = Some(candidate);
                break;
            }
            factor *= 0.5;
        }
        let factor = if accepted_loss.is_some() { factor } else { 0.0 };
        if factor != 1.0 {
            scale_leaves(&mut tree, factor);
        }
        for i in 0..n {
            margins[i] += tree.nodes[leaf_of[i]].leaf_value;
        }
        loss = accepted_loss.unwrap_or(loss);
        trees.push(tree);
    }

    Ok(Model {
        algorithm: Algorithm::Gbm,
        kind: ModelKind::Trees(Ensemble {
            trees,
            base_score: base,
            learning_rate: h.learning_rate,
            mode: EnsembleMode::Boosted,
        }),
        n_features: m.n_cols(),
        schema_digest: m.schema.digest(),
    })
}

/// Second-order regularized boosting with per-node cover bookkeeping.
pub fn fit_xgboost(m: &FeatureMatrix, h: &Hyperparameters) -> Result<Model, ModelError> {
    validate_boost(m, h)?;
    let n = m.n_rows();
    let binned = Binned::build(m)?;
    let base = clamped_base_score(&m.labels);
    let mut margins = vec![base; n];
    let mut trees = Vec::with_capacity(h.n_estimators);

    for _ in 0..h.n_estimators {
        // gradient/hessian of the logistic loss at the current margins
        let grad: Vec<f64> = margins
            .iter()
            .zip(&m.labels)
            .map(|(&mg, &y)| sigmoid(mg) - y as u8 as f64)
            .collect();
        let hess: Vec<f64> = margins
            .iter()
            .map(|&mg| {
                let p = sigmoid(mg);
                p * (1.0 - p)
            })
            .collect();
        let leaf_value = {
            let grad = &grad;
            let hess = &hess;
            let eta = h.learning_rate;
            move |rows: &[u32]| {
                let g: f64 = rows.iter().map(|&r| grad[r as usize]).sum();
                let hh: f64 = rows.iter().map(|&r| hess[r as usize]).sum();
                eta * (-g / (hh + XGB_LEAF_L2))
            }
        };
        let worth_splitting = |_: &[u32]| true; // the gain rule rejects useless splits
        let tree = grow(
            &binned,
            (0..n as u32).collect(),
            &GrowSpec {
                g: &grad,
                h: &hess,
                gain: GainKind::SecondOrder {
                    gamma: h.gamma,
                    lambda: XGB_LEAF_L2,
                },
                max_depth: h.max_depth,
                features_per_split: None,
                leaf_value: &leaf_value,
                worth_splitting: &worth_splitting,
            },
            None,
        );
        for (i, margin) in margins.iter_mut().enumerate() {
            *margin += tree.margin(m.row(i));
        }
        trees.push(tree);
    }

    Ok(Model {
        algorithm: Algorithm::Xgboost,
        kind: ModelKind::Trees(Ensemble {
            trees,
            base_score: base,
            learning_rate: h.learning_rate,
            mode: EnsembleMode::Boosted,
        }),
        n_features: m.n_cols(),
        schema_digest: m.schema.digest(),
    })
}

/// Margins after each stage, recomputed from the stored trees (stage k uses
/// the first k trees). Useful for loss-curve checks.
pub fn staged_margins(model: &Model, m: &FeatureMatrix) -> Result<Vec<Vec<f64>>, ModelError> {
    let ModelKind::Trees(e) = &model.kind else {
        return Err(ModelError::InvalidModel("not a tree ensemble".into()));
    };
    if e.mode != EnsembleMode::Boosted {
        return Err(ModelError::InvalidModel("not a boosted ensemble".into()));
    }
    let mut current = vec![e.base_score; m.n_rows()];
    let mut out = vec![current.clone()];
    for t in &e.trees {
        for (i, c) in current.iter_mut().enumerate() {
            *c += t.margin(m.row(i));
        }
        out.push(current.clone());
    }
    Ok(out)
}
