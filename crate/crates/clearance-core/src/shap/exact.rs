//! Exact Shapley values by subset enumeration.
//!
//! For every feature i,
//! `phi_i = sum over S in N\{i} of |S|!(|N|-|S|-1)!/|N|! * (v(S u {i}) - v(S))`,
//! with the coalition value `v(S)` given by either the interventional game
//! (features outside S take background-row values, averaged over the
//! background) or the tree-conditional game (absent features descend both
//! children weighted by cover). Cost is `2^p` coalition evaluations.

use super::{boosted_ensemble, BackgroundSet, ShapError, ShapExplanation, EXACT_MAX_FEATURES};
use crate::models::{Ensemble, Model, Tree};

/// `|S|!(p-|S|-1)!/p!` computed exactly as `1/(p * C(p-1, |S|))`.
fn subset_weight(p: usize, s: usize) -> f64 {
    let mut binom: u128 = 1;
    for k in 0..s {
        binom = binom * (p - 1 - k) as u128 / (k + 1) as u128;
    }
    1.0 / (p as u128 * binom) as f64
}

/// Enumerate all coalitions once, then combine marginal contributions.
fn shapley_from_value_table(p: usize, value: &dyn Fn(u32) -> f64) -> Vec<f64> {
    let full = 1u32 << p;
    let table: Vec<f64> = (0..full).map(value).collect();
    let weights: Vec<f64> = (0..p).map(|s| subset_weight(p, s)).collect();
    let mut phi = vec![0.0f64; p];
    for (i, phi_i) in phi.iter_mut().enumerate() {
        let bit = 1u32 << i;
        for mask in 0..full {
            if mask & bit == 0 {
                let s = mask.count_ones() as usize;
                *phi_i += weights[s] * (table[(mask | bit) as usize] - table[mask as usize]);
            }
        }
    }
    phi
}

/// Interventional coalition value: rows take `x` on S and the background row
/// elsewhere; the margin is averaged over the background set.
fn interventional_value(model: &Model, x: &[f32], bg: &BackgroundSet, mask: u32) -> f64 {
    let mut hybrid = vec![0.0f32; x.len()];
    let mut total = 0.0;
    for b in bg.rows() {
        for j in 0..x.len() {
            hybrid[j] = if mask & (1 << j) != 0 { x[j] } else { b[j] };
        }
        total += model
            .predict_margin(&hybrid)
            .expect("widths validated upfront");
    }
    total / bg.len() as f64
}

/// Tree-conditional coalition value: follow `x` on features in S, split
/// cover-proportionally elsewhere.
fn conditional_tree_value(tree: &Tree, x: &[f32], mask: u32, node: u32) -> f64 {
    let n = &tree.nodes[node as usize];
    match n.feature {
        None => n.leaf_value,
        Some(f) => {
            if mask & (1 << f) != 0 {
                let next = if (x[f as usize] as f64) < n.threshold {
                    n.left
                } else {
                    n.right
                };
                conditional_tree_value(tree, x, mask, next)
            } else {
                let l = &tree.nodes[n.left as usize];
                let r = &tree.nodes[n.right as usize];
                (l.cover * conditional_tree_value(tree, x, mask, n.left)
                    + r.cover * conditional_tree_value(tree, x, mask, n.right))
                    / n.cover
            }
        }
    }
}

fn conditional_value(ensemble: &Ensemble, x: &[f32], mask: u32) -> f64 {
    ensemble.base_score
        + ensemble
            .trees
            .iter()
            .map(|t| conditional_tree_value(t, x, mask, 0))
            .sum::<f64>()
}

fn check_width(model: &Model, x: &[f32]) -> Result<(), ShapError> {
    if x.len() != model.n_features {
        return Err(ShapError::Model(crate::models::ModelError::WidthMismatch {
            expected: model.n_features,
            got: x.len(),
        }));
    }
    if model.n_features > EXACT_MAX_FEATURES {
        return Err(ShapError::TooManyFeatures(model.n_features));
    }
    Ok(())
}

/// Exact interventional Shapley values against a background set. Works for
/// any model exposing a margin.
pub fn exact_shapley(
    model: &Model,
    x: &[f32],
    background: &BackgroundSet,
    row_id: &str,
) -> Result<ShapExplanation, ShapError> {
    check_width(model, x)?;
    if background.is_empty() {
        return Err(ShapError::EmptyBackground);
    }
    for row in background.rows() {
        if row.len() != model.n_features {
            return Err(ShapError::BackgroundWidth {
                expected: model.n_features,
                got: row.len(),
            });
        }
    }
    let p = model.n_features;
    let phi = shapley_from_value_table(p, &|mask| interventional_value(model, x, background, mask));
    let base_value = interventional_value(model, x, background, 0);
    Ok(ShapExplanation {
        row_id: row_id.to_string(),
        phi,
        base_value,
        prediction: model.predict_margin(x)?,
        schema_digest: model.schema_digest.clone(),
    })
}

/// Exact Shapley values under the tree-conditional (cover-weighted) game;
/// the oracle for cover-mode `tree_shap`.
pub fn exact_shapley_conditional(
    model: &Model,
    x: &[f32],
    row_id: &str,
) -> Result<ShapExplanation, ShapError> {
    check_width(model, x)?;
    let ensemble = boosted_ensemble(model)?;
    let p = model.n_features;
    let phi = shapley_from_value_table(p, &|mask| conditional_value(ensemble, x, mask));
    Ok(ShapExplanation {
        row_id: row_id.to_string(),
        phi,
        base_value: conditional_value(ensemble, x, 0),
        prediction: ensemble.margin(x),
        schema_digest: model.schema_digest.clone(),
    })
}
