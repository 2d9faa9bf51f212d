//! Penalized logistic regression by monotone proximal gradient descent.
//!
//! The objective is `mean logistic loss + (1/C) * P(w)` with an unpenalized
//! intercept, where `P` is `0.5*||w||^2` (L2), `||w||_1` (L1), or
//! `alpha*||w||_1 + (1-alpha)*0.5*||w||^2` (elastic net); `alpha = 0`
//! therefore reproduces the L2 objective and `alpha = 1` the L1 one. Each
//! iteration takes a gradient step on the smooth part under backtracking
//! line search and soft-thresholds the L1 part, so the objective never
//! increases and L1 solutions carry exact zeros.

use rayon::prelude::*;

use super::{
    ensure_finite, log_loss, sigmoid, Algorithm, Hyperparameters, LinearModel, Model, ModelError,
    ModelKind, Penalty,
};
use crate::features::FeatureMatrix;

const MAX_ITERATIONS: usize = 5_000;
const OBJECTIVE_TOLERANCE: f64 = 1e-10;

fn penalty_mix(penalty: Penalty, l1_ratio: f64) -> (f64, f64) {
    // (l1 coefficient, l2 coefficient) before the 1/C scale
    match penalty {
        Penalty::L2 => (0.0, 1.0),
        Penalty::L1 => (1.0, 0.0),
        Penalty::ElasticNet => (l1_ratio, 1.0 - l1_ratio),
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

struct Problem<'a> {
    m: &'a FeatureMatrix,
    /// 1/C times the elastic-net l1/l2 coefficients.
    l1: f64,
    l2: f64,
}

impl Problem<'_> {
    fn margins(&self, w: &[f64], b: f64) -> Vec<f64> {
        (0..self.m.n_rows())
            .into_par_iter()
            .map(|i| {
                let mut s = b;
                for (wj, x) in w.iter().zip(self.m.row(i)) {
                    s += wj * *x as f64;
                }
                s
            })
            .collect()
    }

    /// Smooth part: data term plus the L2 component.
    fn smooth(&self, w: &[f64], margins: &[f64]) -> f64 {
        let n = self.m.n_rows() as f64;
        let data: f64 = margins
            .par_iter()
            .zip(&self.m.labels)
            .map(|(&mg, &y)| log_loss(mg, y))
            .sum::<f64>()
            / n;
        data + 0.5 * self.l2 * w.iter().map(|x| x * x).sum::<f64>()
    }

    /// Gradient of the smooth part in (w, b).
    fn smooth_grad(&self, w: &[f64], margins: &[f64]) -> (Vec<f64>, f64) {
        let n = self.m.n_rows();
        let p = self.m.n_cols();
        let inv_n = 1.0 / n as f64;
        let (mut gw, gb) = (0..n)
            .into_par_iter()
            .fold(
                || (vec![0.0f64; p], 0.0f64),
                |(mut gw, mut gb), i| {
                    let r = (sigmoid(margins[i]) - self.m.labels[i] as u8 as f64) * inv_n;
                    for (g, x) in gw.iter_mut().zip(self.m.row(i)) {
                        *g += r * *x as f64;
                    }
                    gb += r;
                    (gw, gb)
                },
            )
            .reduce(
                || (vec![0.0f64; p], 0.0f64),
                |(mut a, ab), (b, bb)| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    (a, ab + bb)
                },
            );
        for (g, wj) in gw.iter_mut().zip(w) {
            *g += self.l2 * wj;
        }
        (gw, gb)
    }
}

/// Fit by ISTA with backtracking; converges when the objective change drops
/// below tolerance. Initialized at zero, and monotone, so the final objective
/// can never exceed the zero vector's.
pub fn fit_penalized_logistic(m: &FeatureMatrix, h: &Hyperparameters) -> Result<Model, ModelError> {
    if m.n_rows() == 0 {
        return Err(ModelError::EmptyMatrix);
    }
    if h.c.is_nan() || h.c <= 0.0 {
        return Err(ModelError::BadHyperparameter(format!(
            "C must be positive, got {}",
            h.c
        )));
    }
    if !(0.0..=1.0).contains(&h.l1_ratio) {
        return Err(ModelError::BadHyperparameter(format!(
            "l1_ratio must be in [0, 1], got {}",
            h.l1_ratio
        )));
    }
    ensure_finite(m)?;

    let (c1, c2) = penalty_mix(h.penalty, h.l1_ratio);
    let problem = Problem {
        m,
        l1: c1 / h.c,
        l2: c2 / h.c,
    };

    let p = m.n_cols();
    let mut w = vec![0.0f64; p];
    let mut b = 0.0f64;
    let mut margins = problem.margins(&w, b);
    let mut smooth = problem.smooth(&w, &margins);
    let mut objective = smooth; // l1 of zero vector is zero
    let mut step = 1.0f64;

    for _ in 0..MAX_ITERATIONS {
        let (gw, gb) = problem.smooth_grad(&w, &margins);
        // backtracking on the proximal step
        let (nw, nb, n_margins, n_smooth) = loop {
            let cand_w: Vec<f64> = w
                .iter()
                .zip(&gw)
                .map(|(wj, gj)| soft_threshold(wj - step * gj, step * problem.l1))
                .collect();
            let cand_b = b - step * gb;
            let cand_margins = problem.margins(&cand_w, cand_b);
            let cand_smooth = problem.smooth(&cand_w, &cand_margins);
            let mut linear = 0.0;
            let mut quad = 0.0;
            for ((cw, ow), g) in cand_w.iter().zip(&w).zip(&gw) {
                let d = cw - ow;
                linear += g * d;
                quad += d * d;
            }
            let db = cand_b - b;
            linear += gb * db;
            quad += db * db;
            if cand_smooth <= smooth + linear + quad / (2.0 * step) + 1e-15 {
                break (cand_w, cand_b, cand_margins, cand_smooth);
            }
            step *= 0.5;
            if step < 1e-18 {
                break (cand_w, cand_b, cand_margins, cand_smooth);
            }
        };
        let n_objective = n_smooth + problem.l1 * nw.iter().map(|x| x.abs()).sum::<f64>();
        let done = (objective - n_objective).abs() < OBJECTIVE_TOLERANCE;
        if n_objective <= objective {
            w = nw;
            b = nb;
            margins = n_margins;
            smooth = n_smooth;
            objective = n_objective;
        }
        if done {
            break;
        }
        step *= 1.25;
    }

    Ok(Model {
        algorithm: Algorithm::PenalizedLogistic,
        kind: ModelKind::Linear(LinearModel {
            weights: w,
            intercept: b,
            penalty: h.penalty,
            c: h.c,
            l1_ratio: h.l1_ratio,
        }),
        n_features: p,
        schema_digest: m.schema.digest(),
    })
}

/// Full objective and its gradient at `(w, b)`, for derivative checking.
/// The L1 term contributes `sign(w)` so the gradient is exact wherever no
/// coordinate sits at zero.
pub fn logistic_objective_grad(
    m: &FeatureMatrix,
    w: &[f64],
    b: f64,
    penalty: Penalty,
    c: f64,
    l1_ratio: f64,
) -> (f64, Vec<f64>, f64) {
    let (c1, c2) = penalty_mix(penalty, l1_ratio);
    let problem = Problem {
        m,
        l1: c1 / c,
        l2: c2 / c,
    };
    let margins = problem.margins(w, b);
    let obj = problem.smooth(w, &margins) + problem.l1 * w.iter().map(|x| x.abs()).sum::<f64>();
    let (mut gw, gb) = problem.smooth_grad(w, &margins);
    for (g, wj) in gw.iter_mut().zip(w) {
        *g += problem.l1 * wj.signum();
    }
    (obj, gw, gb)
}
