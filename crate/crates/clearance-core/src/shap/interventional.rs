//! Interventional (background-mode) attributions for boosted trees in
//! polynomial time.
//!
//! For one explained row and one background row, a hybrid coalition only
//! ever changes the traversal at splits where the two rows diverge. Walking
//! the tree while tracking which diverging features were forced to the
//! explained row's branch (set A) and which to the background's (set B)
//! writes each leaf as the veto game `A present, B absent`, whose Shapley
//! values have the closed form `(|A|-1)!|B|!/(|A|+|B|)!` for members of A
//! and `-|A|!(|B|-1)!/(|A|+|B|)!` for members of B. Summing over leaves and
//! averaging over background rows yields exactly the enumeration values.

use crate::models::{Ensemble, Tree};

use super::BackgroundSet;

/// Factorials up to the deepest path this needs; f64 is exact to 22! and
/// keeps ~1e-16 relative error far beyond any sane tree depth.
fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0f64; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

struct TwoRowWalk<'a> {
    tree: &'a Tree,
    x: &'a [f32],
    b: &'a [f32],
    scale: f64,
    fact: &'a [f64],
    a_set: Vec<u32>,
    b_set: Vec<u32>,
}

impl TwoRowWalk<'_> {
    fn leaf(&self, value: f64, phi: &mut [f64]) {
        let na = self.a_set.len();
        let nb = self.b_set.len();
        if na > 0 {
            let w = self.fact[na - 1] * self.fact[nb] / self.fact[na + nb];
            for &f in &self.a_set {
                phi[f as usize] += self.scale * w * value;
            }
        }
        if nb > 0 {
            let w = self.fact[na] * self.fact[nb - 1] / self.fact[na + nb];
            for &f in &self.b_set {
                phi[f as usize] -= self.scale * w * value;
            }
        }
    }

    fn walk(&mut self, node: u32, phi: &mut [f64]) {
        let n = &self.tree.nodes[node as usize];
        let Some(f) = n.feature else {
            self.leaf(n.leaf_value, phi);
            return;
        };
        let x_child = if (self.x[f as usize] as f64) < n.threshold {
            n.left
        } else {
            n.right
        };
        let b_child = if (self.b[f as usize] as f64) < n.threshold {
            n.left
        } else {
            n.right
        };
        if x_child == b_child {
            // agreeing split: every hybrid goes the same way
            self.walk(x_child, phi);
        } else if self.a_set.contains(&f) {
            // already committed to the explained row's branch on f
            self.walk(x_child, phi);
        } else if self.b_set.contains(&f) {
            self.walk(b_child, phi);
        } else {
            self.a_set.push(f);
            self.walk(x_child, phi);
            self.a_set.pop();
            self.b_set.push(f);
            self.walk(b_child, phi);
            self.b_set.pop();
        }
    }
}

/// Background-mode attributions and base value for a boosted ensemble.
pub(crate) fn ensemble_interventional_shap(
    ensemble: &Ensemble,
    x: &[f32],
    background: &BackgroundSet,
    p: usize,
) -> (Vec<f64>, f64) {
    let max_depth = ensemble.trees.iter().map(|t| t.depth()).max().unwrap_or(0);
    let fact = factorials(2 * max_depth + 2);
    let mut phi = vec![0.0f64; p];
    let scale = 1.0 / background.len() as f64;
    let mut base = 0.0;
    for b in background.rows() {
        base += ensemble.margin(b) * scale;
        for tree in &ensemble.trees {
            let mut walk = TwoRowWalk {
                tree,
                x,
                b,
                scale,
                fact: &fact,
                a_set: Vec::with_capacity(max_depth),
                b_set: Vec::with_capacity(max_depth),
            };
            walk.walk(0, &mut phi);
        }
    }
    (phi, base)
}
