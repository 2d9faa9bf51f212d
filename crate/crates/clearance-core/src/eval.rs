//! Metrics, stratified cross-validation, grid search, and the per-state
//! model sweep.
//!
//! Balanced accuracy and precision are computed as a single division of
//! exactly-representable integers, so the returned double is the correctly
//! rounded value of the underlying rational; an undefined precision
//! (no positive predictions) is an error, never a silent zero, because a
//! zero would corrupt grid means.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{shuffled_split, DataError, Dataset};
use crate::features::{encode, fit_schema, FeatureError, FeatureMatrix, FeatureOptions};
use crate::models::{fit, Hyperparameters, ModelError};
use crate::rng;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("predictions ({0}) and labels ({1}) differ in length")]
    LengthMismatch(usize, usize),
    #[error("no scored rows")]
    EmptyInput,
    #[error("balanced accuracy undefined: no {0} examples among the labels")]
    AbsentClass(&'static str),
    #[error("precision undefined: no positive predictions")]
    UndefinedPrecision,
    #[error("k must be at least 2, got {0}")]
    KTooSmall(usize),
    #[error("{class} class has {count} members, fewer than k = {k}")]
    ClassSmallerThanK {
        class: &'static str,
        count: usize,
        k: usize,
    },
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("every grid configuration failed cross-validation")]
    NoViableConfiguration,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Standard binary counts; positive means solved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Count prediction outcomes against labels.
pub fn confusion(predictions: &[bool], labels: &[bool]) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch(predictions.len(), labels.len()));
    }
    if predictions.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut c = ConfusionMatrix::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Mean of sensitivity `tp/(tp+fn)` and specificity `tn/(tn+fp)`.
pub fn balanced_accuracy(c: &ConfusionMatrix) -> Result<f64, EvalError> {
    let pos = c.tp + c.fn_;
    let neg = c.tn + c.fp;
    if pos == 0 {
        return Err(EvalError::AbsentClass("positive"));
    }
    if neg == 0 {
        return Err(EvalError::AbsentClass("negative"));
    }
    // (tp/pos + tn/neg) / 2 as one exact rational
    let num = c.tp as u128 * neg as u128 + c.tn as u128 * pos as u128;
    let den = 2 * pos as u128 * neg as u128;
    Ok(num as f64 / den as f64)
}

/// `tp / (tp + fp)`; an error when nothing was predicted positive.
pub fn precision(c: &ConfusionMatrix) -> Result<f64, EvalError> {
    let predicted_pos = c.tp + c.fp;
    if predicted_pos == 0 {
        return Err(EvalError::UndefinedPrecision);
    }
    Ok(c.tp as f64 / predicted_pos as f64)
}

/// Deterministic stratified fold assignment: per class, indices are permuted
/// by a seed-keyed counter hash and dealt round-robin, with the dealing
/// origin rotated by the previous class's remainder so no fold
/// systematically collects the extras.
pub fn stratified_kfold(labels: &[bool], k: usize, seed: u64) -> Result<Vec<usize>, EvalError> {
    if k < 2 {
        return Err(EvalError::KTooSmall(k));
    }
    let mut assignment = vec![0usize; labels.len()];
    let mut start = 0usize;
    for (class, name) in [(false, "negative"), (true, "positive")] {
        let members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        if members.len() < k {
            return Err(EvalError::ClassSmallerThanK {
                class: name,
                count: members.len(),
                k,
            });
        }
        let order = rng::permutation(seed ^ rng::mix64(class as u64 + 1), members.len());
        for (rank, &slot) in order.iter().enumerate() {
            assignment[members[slot]] = (start + rank) % k;
        }
        start = (start + members.len()) % k;
    }
    Ok(assignment)
}

/// Held-out scores for one fold. `precision` is `None` when undefined, with
/// the reason preserved.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub balanced_accuracy: f64,
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision_error: Option<String>,
}

/// Per-fold scores with their summary statistics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<FoldScore>,
    pub k: usize,
    pub seed: u64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
fn sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

impl CvResult {
    pub fn mean_balanced_accuracy(&self) -> f64 {
        mean(
            &self
                .folds
                .iter()
                .map(|f| f.balanced_accuracy)
                .collect::<Vec<_>>(),
        )
    }

    pub fn sd_balanced_accuracy(&self) -> f64 {
        sd(&self
            .folds
            .iter()
            .map(|f| f.balanced_accuracy)
            .collect::<Vec<_>>())
    }

    /// Mean precision; undefined if any fold's precision was.
    pub fn mean_precision(&self) -> Result<f64, EvalError> {
        let vals: Option<Vec<f64>> = self.folds.iter().map(|f| f.precision).collect();
        vals.map(|v| mean(&v)).ok_or(EvalError::UndefinedPrecision)
    }

    pub fn sd_precision(&self) -> Result<f64, EvalError> {
        let vals: Option<Vec<f64>> = self.folds.iter().map(|f| f.precision).collect();
        vals.map(|v| sd(&v)).ok_or(EvalError::UndefinedPrecision)
    }

    /// Selection score: unweighted mean of the two metric means.
    pub fn combined_score(&self) -> Result<f64, EvalError> {
        Ok((self.mean_balanced_accuracy() + self.mean_precision()?) / 2.0)
    }
}

fn cross_validate_with_folds(
    m: &FeatureMatrix,
    h: &Hyperparameters,
    assignment: &[usize],
    k: usize,
    seed: u64,
) -> Result<CvResult, EvalError> {
    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let train_rows: Vec<usize> = (0..m.n_rows()).filter(|&i| assignment[i] != fold).collect();
        let test_rows: Vec<usize> = (0..m.n_rows()).filter(|&i| assignment[i] == fold).collect();
        let train = m.select_rows(&train_rows);
        let test = m.select_rows(&test_rows);
        let model = fit(&train, h)?;
        let predictions = model.predict_labels(&test)?;
        let c = confusion(&predictions, &test.labels)?;
        let ba = balanced_accuracy(&c)?;
        let (precision_value, precision_error) = match precision(&c) {
            Ok(p) => (Some(p), None),
            Err(e) => (None, Some(e.to_string())),
        };
        folds.push(FoldScore {
            fold,
            balanced_accuracy: ba,
            precision: precision_value,
            precision_error,
        });
    }
    Ok(CvResult { folds, k, seed })
}

/// Stratified k-fold cross-validation of one configuration: for each fold,
/// fit on the other k-1 folds and score the held-out fold with both metrics.
pub fn cross_validate(
    m: &FeatureMatrix,
    h: &Hyperparameters,
    k: usize,
    seed: u64,
) -> Result<CvResult, EvalError> {
    let assignment = stratified_kfold(&m.labels, k, seed)?;
    cross_validate_with_folds(m, h, &assignment, k, seed)
}

/// One grid candidate's outcome. Configurations whose cross-validation
/// failed stay in the table with the reason and cannot win.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridEntry {
    pub hyperparameters: Hyperparameters,
    pub cv: Option<CvResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub combined_score: Option<f64>,
}

/// Full grid-search table plus the winning index.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridResult {
    pub entries: Vec<GridEntry>,
    pub winner: usize,
}

impl GridResult {
    pub fn winner_entry(&self) -> &GridEntry {
        &self.entries[self.winner]
    }
}

/// Cross-validate every configuration on shared folds. The winner maximizes
/// the mean of (mean balanced accuracy, mean precision); ties break by
/// balanced accuracy, then declaration order.
pub fn grid_search(
    m: &FeatureMatrix,
    grid: &[Hyperparameters],
    k: usize,
    seed: u64,
) -> Result<GridResult, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    let assignment = stratified_kfold(&m.labels, k, seed)?;
    let mut entries = Vec::with_capacity(grid.len());
    for h in grid {
        match cross_validate_with_folds(m, h, &assignment, k, seed) {
            Ok(cv) => {
                let combined = cv.combined_score().ok();
                entries.push(GridEntry {
                    hyperparameters: h.clone(),
                    error: if combined.is_none() {
                        Some("precision undefined in at least one fold".to_string())
                    } else {
                        None
                    },
                    cv: Some(cv),
                    combined_score: combined,
                });
            }
            Err(e) => entries.push(GridEntry {
                hyperparameters: h.clone(),
                cv: None,
                error: Some(e.to_string()),
                combined_score: None,
            }),
        }
    }
    let mut winner: Option<usize> = None;
    for (i, e) in entries.iter().enumerate() {
        let Some(score) = e.combined_score else {
            continue;
        };
        let ba = e.cv.as_ref().unwrap().mean_balanced_accuracy();
        let better = match winner {
            None => true,
            Some(w) => {
                let ws = entries[w].combined_score.unwrap();
                let wba = entries[w].cv.as_ref().unwrap().mean_balanced_accuracy();
                score > ws || (score == ws && ba > wba)
            }
        };
        if better {
            winner = Some(i);
        }
    }
    let winner = winner.ok_or(EvalError::NoViableConfiguration)?;
    Ok(GridResult { entries, winner })
}

/// Per-state sweep outcome; skipped states carry the reason instead of
/// scores.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateOutcome {
    pub state: String,
    pub n_records: usize,
    pub best: Option<Hyperparameters>,
    pub cv_balanced_accuracy: Option<f64>,
    pub cv_precision: Option<f64>,
    pub test_balanced_accuracy: Option<f64>,
    pub test_precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub states: Vec<StateOutcome>,
    /// Grid configurations cross-validated over all non-skipped states.
    pub total_fitted_configs: usize,
    pub k: usize,
    pub seed: u64,
    pub train_fraction: f64,
}

impl SweepResult {
    /// Pearson correlation between the per-state test metrics.
    pub fn metric_correlation(&self) -> Option<f64> {
        let pairs: Vec<(f64, f64)> = self
            .states
            .iter()
            .filter_map(|s| Some((s.test_balanced_accuracy?, s.test_precision?)))
            .collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        pearson(&xs, &ys)
    }
}

/// Sample Pearson correlation; `None` below two points or at zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

/// Per-state pipeline: split, fit the schema on the state's training split,
/// grid-search under cross-validation, refit the winner, score the held-out
/// test split. States that cannot complete (too small, single-class) are
/// recorded as skipped, never a crash.
pub fn state_sweep(
    partitions: &BTreeMap<String, Dataset>,
    grid: &[Hyperparameters],
    k: usize,
    seed: u64,
    train_fraction: f64,
    options: &FeatureOptions,
) -> Result<SweepResult, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    // states are independent; the ordered collect keeps the result (and any
    // export built from it) identical whatever the thread count
    let parts: Vec<(&String, &Dataset)> = partitions.iter().collect();
    let states: Vec<StateOutcome> = parts
        .par_iter()
        .map(
            |(state, part)| match sweep_one_state(part, grid, k, seed, train_fraction, options) {
                Ok((best, cv_ba, cv_prec, test_ba, test_prec)) => StateOutcome {
                    state: (*state).clone(),
                    n_records: part.len(),
                    best: Some(best),
                    cv_balanced_accuracy: Some(cv_ba),
                    cv_precision: cv_prec,
                    test_balanced_accuracy: Some(test_ba),
                    test_precision: test_prec,
                    skipped: None,
                },
                Err(reason) => StateOutcome {
                    state: (*state).clone(),
                    n_records: part.len(),
                    best: None,
                    cv_balanced_accuracy: None,
                    cv_precision: None,
                    test_balanced_accuracy: None,
                    test_precision: None,
                    skipped: Some(reason),
                },
            },
        )
        .collect();
    let total_fitted = states.iter().filter(|s| s.skipped.is_none()).count() * grid.len();
    Ok(SweepResult {
        states,
        total_fitted_configs: total_fitted,
        k,
        seed,
        train_fraction,
    })
}

#[allow(clippy::type_complexity)]
fn sweep_one_state(
    part: &Dataset,
    grid: &[Hyperparameters],
    k: usize,
    seed: u64,
    train_fraction: f64,
    options: &FeatureOptions,
) -> Result<(Hyperparameters, f64, Option<f64>, f64, Option<f64>), String> {
    let split = shuffled_split(part, train_fraction, seed).map_err(|e| e.to_string())?;
    let schema = fit_schema(&split.train, options).map_err(|e| e.to_string())?;
    let train = encode(&split.train, &schema).map_err(|e| e.to_string())?;
    let test = encode(&split.test, &schema).map_err(|e| e.to_string())?;
    let result = grid_search(&train, grid, k, seed).map_err(|e| e.to_string())?;
    let entry = result.winner_entry();
    let best = entry.hyperparameters.clone();
    let cv = entry.cv.as_ref().unwrap();
    let model = fit(&train, &best).map_err(|e| e.to_string())?;
    let predictions = model.predict_labels(&test).map_err(|e| e.to_string())?;
    let c = confusion(&predictions, &test.labels).map_err(|e| e.to_string())?;
    let test_ba = balanced_accuracy(&c).map_err(|e| e.to_string())?;
    let test_prec = precision(&c).ok();
    Ok((
        best,
        cv.mean_balanced_accuracy(),
        cv.mean_precision().ok(),
        test_ba,
        test_prec,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::anonymous_schema;
    use crate::models::{grids, Algorithm, Penalty, SplitCriterion};
    use crate::rng::Rng;
    use std::sync::Arc;

    fn cm(tp: u64, fp: u64, tn: u64, fn_: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, fp, tn, fn_ }
    }

    #[test]
    fn confusion_counts_and_errors() {
        let c = confusion(&[true, false, true, false], &[true, false, false, true]).unwrap();
        assert_eq!(c, cm(1, 1, 1, 1));
        // all correct
        let c = confusion(&[true, false], &[true, false]).unwrap();
        assert_eq!(c.fp, 0);
        assert_eq!(c.fn_, 0);
        // hand count on an 8-row fixture: everything predicted positive,
        // half actually positive
        let preds = vec![true; 8];
        let labels = vec![true, true, true, true, false, false, false, false];
        let c = confusion(&preds, &labels).unwrap();
        assert_eq!(c, cm(4, 4, 0, 0));
        assert!(matches!(confusion(&[], &[]), Err(EvalError::EmptyInput)));
        assert!(matches!(
            confusion(&[true], &[true, false]),
            Err(EvalError::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn balanced_accuracy_reference_values() {
        assert_eq!(balanced_accuracy(&cm(5, 0, 7, 0)).unwrap(), 1.0);
        // (3/4 + 2/6) / 2 = 13/24
        let v = balanced_accuracy(&cm(3, 4, 2, 1)).unwrap();
        assert_eq!(v, 13.0 / 24.0);
        // degenerate all-positive predictions on balanced labels
        let v = balanced_accuracy(&cm(4, 4, 0, 0)).unwrap();
        assert_eq!(v, 0.5);
        assert!(matches!(
            balanced_accuracy(&cm(0, 3, 2, 0)),
            Err(EvalError::AbsentClass("positive"))
        ));
        assert!(matches!(
            balanced_accuracy(&cm(1, 0, 0, 2)),
            Err(EvalError::AbsentClass("negative"))
        ));
    }

    #[test]
    fn label_swap_complements_balanced_accuracy() {
        let mut rng = Rng::new(4);
        for _ in 0..50 {
            let n = 5 + rng.below(40) as usize;
            let labels: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.5)).collect();
            let preds: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.5)).collect();
            let c = confusion(&preds, &labels).unwrap();
            let Ok(ba) = balanced_accuracy(&c) else {
                continue;
            };
            let swapped: Vec<bool> = preds.iter().map(|p| !p).collect();
            let cs = confusion(&swapped, &labels).unwrap();
            let bs = balanced_accuracy(&cs).unwrap();
            assert!((ba + bs - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn precision_reference_values() {
        assert_eq!(precision(&cm(5, 0, 2, 1)).unwrap(), 1.0);
        assert_eq!(precision(&cm(3, 1, 0, 0)).unwrap(), 0.75);
        assert!(matches!(
            precision(&cm(0, 0, 5, 2)),
            Err(EvalError::UndefinedPrecision)
        ));
    }

    #[test]
    fn stratified_folds_balance_classes() {
        // 70 positive, 30 negative, k = 5: every fold gets 14 + 6
        let labels: Vec<bool> = (0..100).map(|i| i < 70).collect();
        let a = stratified_kfold(&labels, 5, 3).unwrap();
        for fold in 0..5 {
            let pos = labels
                .iter()
                .enumerate()
                .filter(|(i, &l)| a[*i] == fold && l)
                .count();
            let neg = labels
                .iter()
                .enumerate()
                .filter(|(i, &l)| a[*i] == fold && !l)
                .count();
            assert_eq!(pos, 14);
            assert_eq!(neg, 6);
        }
        // overall fold sizes 100/5 = 20
        for fold in 0..5 {
            assert_eq!(a.iter().filter(|&&f| f == fold).count(), 20);
        }
    }

    #[test]
    fn stratified_folds_deterministic_and_guarded() {
        let labels: Vec<bool> = (0..40).map(|i| i % 3 == 0).collect();
        assert_eq!(
            stratified_kfold(&labels, 5, 11).unwrap(),
            stratified_kfold(&labels, 5, 11).unwrap()
        );
        assert_ne!(
            stratified_kfold(&labels, 5, 11).unwrap(),
            stratified_kfold(&labels, 5, 12).unwrap()
        );
        assert!(matches!(
            stratified_kfold(&labels, 1, 0),
            Err(EvalError::KTooSmall(1))
        ));
        let rare: Vec<bool> = (0..40).map(|i| i < 3).collect();
        assert!(matches!(
            stratified_kfold(&rare, 5, 0),
            Err(EvalError::ClassSmallerThanK {
                class: "positive",
                count: 3,
                k: 5
            })
        ));
    }

    fn separable_matrix(n: usize) -> FeatureMatrix {
        let rows: Vec<Vec<f32>> = (0..n)
            .map(|i| vec![(i % 4) as f32, (i % 3) as f32])
            .collect();
        let labels: Vec<bool> = rows.iter().map(|r| r[0] >= 2.0).collect();
        FeatureMatrix::from_rows(Arc::new(anonymous_schema(2)), rows, labels)
    }

    #[test]
    fn memorizer_scores_perfectly_per_fold() {
        let m = separable_matrix(60);
        let h = Hyperparameters::decision_tree(SplitCriterion::Gini, 4);
        let cv = cross_validate(&m, &h, 5, 1).unwrap();
        for f in &cv.folds {
            assert_eq!(f.balanced_accuracy, 1.0);
            assert_eq!(f.precision, Some(1.0));
        }
        assert_eq!(cv.mean_balanced_accuracy(), 1.0);
        assert_eq!(cv.sd_balanced_accuracy(), 0.0);
    }

    #[test]
    fn undefined_precision_is_surfaced_per_fold() {
        // heavily imbalanced with an L1 hammer: the model predicts the
        // majority (negative) class everywhere, so precision is undefined
        let rows: Vec<Vec<f32>> = (0..60).map(|i| vec![(i % 2) as f32]).collect();
        let labels: Vec<bool> = (0..60).map(|i| i % 10 == 0).collect();
        let m = FeatureMatrix::from_rows(Arc::new(anonymous_schema(1)), rows, labels);
        let h = Hyperparameters::logistic(Penalty::L1, 1e-4, 1.0);
        let cv = cross_validate(&m, &h, 5, 1).unwrap();
        for f in &cv.folds {
            assert_eq!(f.precision, None);
            assert!(f
                .precision_error
                .as_deref()
                .unwrap()
                .contains("precision undefined"));
        }
        assert!(matches!(
            cv.mean_precision(),
            Err(EvalError::UndefinedPrecision)
        ));
    }

    #[test]
    fn single_config_grid_wins_trivially() {
        let m = separable_matrix(50);
        let grid = vec![Hyperparameters::decision_tree(SplitCriterion::Gini, 3)];
        let r = grid_search(&m, &grid, 5, 2).unwrap();
        assert_eq!(r.winner, 0);
        assert!(r.entries[0].combined_score.unwrap() > 0.9);
    }

    #[test]
    fn grid_ties_break_by_declaration_order() {
        let m = separable_matrix(40);
        // both configurations fit the separable data perfectly: scores tie,
        // the first declared must win
        let grid = vec![
            Hyperparameters::decision_tree(SplitCriterion::Entropy, 4),
            Hyperparameters::decision_tree(SplitCriterion::Gini, 4),
        ];
        let r = grid_search(&m, &grid, 4, 2).unwrap();
        assert_eq!(r.entries[0].combined_score, r.entries[1].combined_score);
        assert_eq!(r.winner, 0);
    }

    #[test]
    fn national_default_grid_has_36_candidates() {
        assert_eq!(grids::xgboost_national(0).len(), 36);
        assert_eq!(grids::xgboost_state(0).len(), 12);
    }

    #[test]
    fn grid_errors() {
        let m = separable_matrix(30);
        assert!(matches!(
            grid_search(&m, &[], 5, 0),
            Err(EvalError::EmptyGrid)
        ));
    }

    #[test]
    fn sweep_counts_and_skips() {
        use crate::dataset::partition_by_state;
        use crate::synth;
        let d = synth::generate(&synth::SynthConfig {
            rows: 900,
            seed: 5,
            states: 6,
            ..Default::default()
        });
        let d = crate::dataset::filter_unknown_age(&d).with_monthly_overlap();
        let mut parts = partition_by_state(&d);
        // engineer one unusable state: 3 records cannot be split 70/30 and
        // cross-validated
        let mut tiny = Dataset::from_records(d.records[0..3].to_vec(), "tiny");
        tiny.overlap_attached = true;
        parts.insert("TINYLAND".to_string(), tiny);

        let grid = vec![
            Hyperparameters::xgboost(10, 0.3, 0.0, 7),
            Hyperparameters::xgboost(20, 0.3, 0.0, 7),
        ];
        let sweep = state_sweep(&parts, &grid, 3, 7, 0.7, &FeatureOptions::default()).unwrap();
        let skipped: Vec<&StateOutcome> = sweep
            .states
            .iter()
            .filter(|s| s.skipped.is_some())
            .collect();
        let completed = sweep.states.len() - skipped.len();
        assert!(skipped.iter().any(|s| s.state == "TINYLAND"));
        assert_eq!(sweep.total_fitted_configs, grid.len() * completed);
        for s in &sweep.states {
            if s.skipped.is_none() {
                assert!(s.test_balanced_accuracy.unwrap() > 0.3);
                assert!(s.best.is_some());
            }
        }
        // correlation machinery runs over completed states
        let _ = sweep.metric_correlation();
    }

    #[test]
    fn pearson_reference() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.0, 4.0, 6.0, 8.0];
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
        let ys = [8.0, 6.0, 4.0, 2.0];
        assert!((pearson(&xs, &ys).unwrap() + 1.0).abs() < 1e-12);
        assert!(pearson(&xs, &[1.0, 1.0, 1.0, 1.0]).is_none());
        assert!(pearson(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn cross_validate_is_reproducible() {
        let m = separable_matrix(45);
        let h = Hyperparameters {
            algorithm: Algorithm::Xgboost,
            n_estimators: 5,
            learning_rate: 0.3,
            ..Default::default()
        };
        let a = cross_validate(&m, &h, 3, 9).unwrap();
        let b = cross_validate(&m, &h, 3, 9).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
