//! Default hyperparameter grids for national and state-level searches.
//!
//! Declaration order is part of the contract: grid-search ties resolve to the
//! earliest configuration, so grids enumerate estimators outermost, then
//! learning rate / depth, then the remaining knob.

use super::{Algorithm, Hyperparameters, Penalty, SplitCriterion};

pub const XGB_ESTIMATORS: [usize; 3] = [50, 100, 200];
pub const XGB_LEARNING_RATES: [f64; 4] = [0.01, 0.1, 0.3, 0.5];
pub const XGB_GAMMAS: [f64; 3] = [0.0, 0.5, 1.0];
/// State sweeps drop gamma (it moved nothing nationally) and swap 0.3 -> 0.2.
pub const STATE_LEARNING_RATES: [f64; 4] = [0.01, 0.1, 0.2, 0.5];
pub const GBM_LEARNING_RATES: [f64; 5] = [0.001, 0.01, 0.1, 0.3, 0.5];
pub const TREE_DEPTHS: [usize; 3] = [5, 10, 20];
pub const FOREST_DEPTHS: [usize; 6] = [5, 10, 20, 30, 50, 100];
pub const FOREST_ESTIMATORS: [usize; 4] = [100, 200, 500, 700];
pub const LINEAR_C: [f64; 6] = [0.01, 0.5, 1.0, 5.0, 10.0, 50.0];

/// 3 x 4 x 3 = 36 national candidates.
pub fn xgboost_national(seed: u64) -> Vec<Hyperparameters> {
    let mut grid = Vec::new();
    for &n in &XGB_ESTIMATORS {
        for &lr in &XGB_LEARNING_RATES {
            for &gamma in &XGB_GAMMAS {
                grid.push(Hyperparameters::xgboost(n, lr, gamma, seed));
            }
        }
    }
    grid
}

/// 3 x 4 = 12 per-state candidates.
pub fn xgboost_state(seed: u64) -> Vec<Hyperparameters> {
    let mut grid = Vec::new();
    for &n in &XGB_ESTIMATORS {
        for &lr in &STATE_LEARNING_RATES {
            grid.push(Hyperparameters::xgboost(n, lr, 0.0, seed));
        }
    }
    grid
}

pub fn gbm(seed: u64) -> Vec<Hyperparameters> {
    let mut grid = Vec::new();
    for &n in &XGB_ESTIMATORS {
        for &lr in &GBM_LEARNING_RATES {
            grid.push(Hyperparameters::gbm(n, lr, seed));
        }
    }
    grid
}

pub fn decision_tree() -> Vec<Hyperparameters> {
    let mut grid = Vec::new();
    for &criterion in &[SplitCriterion::Gini, SplitCriterion::Entropy] {
        for &depth in &TREE_DEPTHS {
            grid.push(Hyperparameters::decision_tree(criterion, depth));
        }
    }
    grid
}

pub fn random_forest(seed: u64) -> Vec<Hyperparameters> {
    let mut grid = Vec::new();
    for &criterion in &[SplitCriterion::Gini, SplitCriterion::Entropy] {
        for &depth in &FOREST_DEPTHS {
            for &n in &FOREST_ESTIMATORS {
                grid.push(Hyperparameters::random_forest(criterion, depth, n, seed));
            }
        }
    }
    grid
}

fn linear(penalty: Penalty, l1_ratio: f64) -> Vec<Hyperparameters> {
    LINEAR_C
        .iter()
        .map(|&c| Hyperparameters::logistic(penalty, c, l1_ratio))
        .collect()
}

pub fn ridge() -> Vec<Hyperparameters> {
    linear(Penalty::L2, 0.0)
}

pub fn lasso() -> Vec<Hyperparameters> {
    linear(Penalty::L1, 1.0)
}

pub fn elastic_net() -> Vec<Hyperparameters> {
    linear(Penalty::ElasticNet, 0.5)
}

/// Default national grid for an algorithm family.
pub fn national(algorithm: Algorithm, seed: u64) -> Vec<Hyperparameters> {
    match algorithm {
        Algorithm::DecisionTree => decision_tree(),
        Algorithm::RandomForest => random_forest(seed),
        Algorithm::Gbm => gbm(seed),
        Algorithm::Xgboost => xgboost_national(seed),
        Algorithm::PenalizedLogistic => {
            let mut grid = ridge();
            grid.extend(lasso());
            grid.extend(elastic_net());
            grid
        }
    }
}

/// The strongest national configuration: 200 estimators,
/// learning rate 0.5, no gamma regularization.
pub fn best_national_xgboost(seed: u64) -> Hyperparameters {
    Hyperparameters::xgboost(200, 0.5, 0.0, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes_match_the_documented_counts() {
        assert_eq!(xgboost_national(0).len(), 36);
        assert_eq!(xgboost_state(0).len(), 12);
        assert_eq!(decision_tree().len(), 6);
        assert_eq!(random_forest(0).len(), 48);
        assert_eq!(ridge().len(), 6);
        assert_eq!(lasso().len(), 6);
        assert_eq!(elastic_net().len(), 6);
        assert_eq!(gbm(0).len(), 15);
    }

    #[test]
    fn best_national_config_is_in_the_grid() {
        let grid = xgboost_national(1);
        let best = best_national_xgboost(1);
        assert!(grid.contains(&best));
    }
}
