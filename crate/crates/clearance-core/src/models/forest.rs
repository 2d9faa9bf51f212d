//! Single classification trees and bootstrap-averaged forests.
//!
//! Leaves store Laplace-smoothed class log-odds: `p = (pos+1)/(n+2)`. A
//! single tree therefore predicts in margin space like every other learner;
//! forests average the per-tree probabilities.

use super::tree::{grow, Binned, GainKind, GrowSpec};
use super::{
    ensure_finite, Algorithm, Ensemble, EnsembleMode, Hyperparameters, Model, ModelError,
    ModelKind, SplitCriterion,
};
use crate::features::FeatureMatrix;
use crate::rng::Rng;

fn criterion_gain(c: SplitCriterion) -> GainKind {
    match c {
        SplitCriterion::Gini => GainKind::Gini,
        SplitCriterion::Entropy => GainKind::Entropy,
    }
}

fn grow_classification_tree(
    binned: &Binned,
    m: &FeatureMatrix,
    h: &Hyperparameters,
    rows: Vec<u32>,
    features_per_split: Option<usize>,
    rng: Option<&mut Rng>,
) -> super::Tree {
    let g: Vec<f64> = m.labels.iter().map(|&l| l as u8 as f64).collect();
    let ones = vec![1.0f64; m.n_rows()];
    let labels = &m.labels;
    let leaf_value = move |rows: &[u32]| {
        let pos = rows.iter().filter(|&&r| labels[r as usize]).count() as f64;
        let p = (pos + 1.0) / (rows.len() as f64 + 2.0);
        (p / (1.0 - p)).ln()
    };
    let worth_splitting = move |rows: &[u32]| {
        let pos = rows.iter().filter(|&&r| labels[r as usize]).count();
        pos > 0 && pos < rows.len()
    };
    grow(
        binned,
        rows,
        &GrowSpec {
            g: &g,
            h: &ones,
            gain: criterion_gain(h.criterion),
            max_depth: h.max_depth,
            features_per_split,
            leaf_value: &leaf_value,
            worth_splitting: &worth_splitting,
        },
        rng,
    )
}

/// Greedy CART with gini or entropy impurity.
pub fn fit_decision_tree(m: &FeatureMatrix, h: &Hyperparameters) -> Result<Model, ModelError> {
    if m.n_rows() == 0 {
        return Err(ModelError::EmptyMatrix);
    }
    if h.max_depth < 1 {
        return Err(ModelError::BadHyperparameter(
            "max_depth must be >= 1".into(),
        ));
    }
    ensure_finite(m)?;
    let binned = Binned::build(m)?;
    let tree =
        grow_classification_tree(&binned, m, h, (0..m.n_rows() as u32).collect(), None, None);
    Ok(Model {
        algorithm: Algorithm::DecisionTree,
        kind: ModelKind::Trees(Ensemble {
            trees: vec![tree],
            base_score: 0.0,
            learning_rate: 1.0,
            mode: EnsembleMode::Boosted,
        }),
        n_features: m.n_cols(),
        schema_digest: m.schema.digest(),
    })
}

/// Bootstrap-sampled trees with sqrt(p) feature subsampling per split,
/// averaged in probability space. Deterministic for a given seed.
pub fn fit_random_forest(m: &FeatureMatrix, h: &Hyperparameters) -> Result<Model, ModelError> {
    if m.n_rows() == 0 {
        return Err(ModelError::EmptyMatrix);
    }
    if h.n_estimators < 1 {
        return Err(ModelError::BadHyperparameter(
            "n_estimators must be >= 1".into(),
        ));
    }
    if h.max_depth < 1 {
        return Err(ModelError::BadHyperparameter(
            "max_depth must be >= 1".into(),
        ));
    }
    ensure_finite(m)?;
    let binned = Binned::build(m)?;
    let n = m.n_rows();
    let features_per_split = if h.bootstrap {
        Some(((m.n_cols() as f64).sqrt().floor() as usize).max(1))
    } else {
        // degenerate mode used to reduce a forest to a plain tree
        None
    };
    let root = Rng::new(h.seed);
    let trees: Vec<super::Tree> = (0..h.n_estimators)
        .map(|t| {
            let mut rng = root.child(t as u64);
            let rows: Vec<u32> = if h.bootstrap {
                (0..n).map(|_| rng.below(n as u64) as u32).collect()
            } else {
                (0..n as u32).collect()
            };
            grow_classification_tree(&binned, m, h, rows, features_per_split, Some(&mut rng))
        })
        .collect();
    Ok(Model {
        algorithm: Algorithm::RandomForest,
        kind: ModelKind::Trees(Ensemble {
            trees,
            base_score: 0.0,
            learning_rate: 1.0,
            mode: EnsembleMode::Averaged,
        }),
        n_features: m.n_cols(),
        schema_digest: m.schema.digest(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::anonymous_schema;
    use std::sync::Arc;

    fn matrix(rows: Vec<Vec<f32>>, labels: Vec<bool>) -> FeatureMatrix {
        let schema = Arc::new(anonymous_schema(rows[0].len()));
        FeatureMatrix::from_rows(schema, rows, labels)
    }

    #[test]
    fn pure_data_yields_single_leaf() {
        let m = matrix(
            vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![true, true, true],
        );
        let model = fit_decision_tree(&m, &Hyperparameters::decision_tree(SplitCriterion::Gini, 5))
            .unwrap();
        let e = model.ensemble().unwrap();
        assert_eq!(e.trees[0].leaf_count(), 1);
        assert!(model.predict_proba(&[0.0, 1.0]).unwrap() > 0.5);
    }

    #[test]
    fn xor_is_learnable_at_depth_two() {
        let m = matrix(
            vec![
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
            ],
            vec![false, true, true, false],
        );
        let model = fit_decision_tree(&m, &Hyperparameters::decision_tree(SplitCriterion::Gini, 2))
            .unwrap();
        let preds = model.predict_labels(&m).unwrap();
        assert_eq!(preds, m.labels, "depth-2 tree must fit xor exactly");
    }

    #[test]
    fn conflicting_duplicates_depth_one_gives_smoothed_frequency() {
        // identical rows, 3 positive / 1 negative: no split is possible, the
        // root leaf must carry p = (3+1)/(4+2)
        let m = matrix(vec![vec![1.0, 2.0]; 4], vec![true, true, true, false]);
        let model = fit_decision_tree(&m, &Hyperparameters::decision_tree(SplitCriterion::Gini, 1))
            .unwrap();
        let p = model.predict_proba(&[1.0, 2.0]).unwrap();
        assert!((p - 4.0 / 6.0).abs() < 1e-12);
        assert_eq!(model.ensemble().unwrap().trees[0].leaf_count(), 1);
    }

    #[test]
    fn degenerate_forest_equals_single_tree() {
        let rows: Vec<Vec<f32>> = (0..30)
            .map(|i| vec![(i % 5) as f32, (i % 2) as f32, (i % 7) as f32])
            .collect();
        let labels: Vec<bool> = (0..30).map(|i| (i % 5) >= 2).collect();
        let m = matrix(rows, labels);
        let mut hf = Hyperparameters::random_forest(SplitCriterion::Gini, 4, 1, 7);
        hf.bootstrap = false;
        let forest = fit_random_forest(&m, &hf).unwrap();
        let tree = fit_decision_tree(&m, &Hyperparameters::decision_tree(SplitCriterion::Gini, 4))
            .unwrap();
        for i in 0..m.n_rows() {
            let a = forest.predict_proba(m.row(i)).unwrap();
            let b = tree.predict_proba(m.row(i)).unwrap();
            assert!((a - b).abs() < 1e-12, "row {i}: forest {a} vs tree {b}");
        }
    }

    #[test]
    fn forest_is_deterministic_per_seed() {
        let rows: Vec<Vec<f32>> = (0..60)
            .map(|i| vec![(i % 5) as f32, (i % 3) as f32, ((i * 7) % 11) as f32])
            .collect();
        let labels: Vec<bool> = (0..60).map(|i| (i * 13) % 5 >= 2).collect();
        let m = matrix(rows, labels);
        let h = Hyperparameters::random_forest(SplitCriterion::Entropy, 5, 20, 99);
        let a = fit_random_forest(&m, &h).unwrap();
        let b = fit_random_forest(&m, &h).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let h2 = Hyperparameters::random_forest(SplitCriterion::Entropy, 5, 20, 100);
        let c = fit_random_forest(&m, &h2).unwrap();
        assert_ne!(
            a.to_json(),
            c.to_json(),
            "different seeds, different forests"
        );
    }

    #[test]
    fn forest_beats_or_matches_tree_on_separable_data() {
        // separable: label = f0 >= 3
        let rows: Vec<Vec<f32>> = (0..80)
            .map(|i| vec![(i % 6) as f32, ((i * 3) % 5) as f32])
            .collect();
        let labels: Vec<bool> = rows.iter().map(|r| r[0] >= 3.0).collect();
        let m = matrix(rows, labels);
        let tree = fit_decision_tree(&m, &Hyperparameters::decision_tree(SplitCriterion::Gini, 3))
            .unwrap();
        let forest = fit_random_forest(
            &m,
            &Hyperparameters::random_forest(SplitCriterion::Gini, 3, 100, 5),
        )
        .unwrap();
        let acc = |model: &Model| {
            let preds = model.predict_labels(&m).unwrap();
            let tp = preds
                .iter()
                .zip(&m.labels)
                .filter(|(p, l)| p == l && **l)
                .count() as f64;
            let tn = preds
                .iter()
                .zip(&m.labels)
                .filter(|(p, l)| p == l && !**l)
                .count() as f64;
            let pos = m.labels.iter().filter(|&&l| l).count() as f64;
            let neg = m.n_rows() as f64 - pos;
            (tp / pos + tn / neg) / 2.0
        };
        assert!(acc(&forest) >= acc(&tree) - 1e-12);
    }
}
