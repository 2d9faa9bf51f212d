//! Path-dependent polynomial attributions for boosted trees.
//!
//! A depth-first walk maintains, for each unique feature on the current
//! path, the fraction of coalitions that keep the path alive when the
//! feature is present (`one_fraction`) or absent (`zero_fraction`, the
//! cover ratio of the taken branch), together with permutation weights
//! (`pweight`) for every possible number of present features. Extension and
//! unwinding of that weight vector are exact inverses, which is what makes
//! the per-leaf contribution sums equal the exponential-enumeration values.

use crate::models::{Ensemble, Tree};

#[derive(Clone, Copy, Debug, Default)]
struct PathElement {
    /// Column index, or -1 for the root placeholder.
    feature: i32,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

/// Append an element and refresh the permutation weights. `unique_depth` is
/// the live length before the append.
fn extend(path: &mut [PathElement], unique_depth: usize, pz: f64, po: f64, feature: i32) {
    path[unique_depth] = PathElement {
        feature,
        zero_fraction: pz,
        one_fraction: po,
        pweight: if unique_depth == 0 { 1.0 } else { 0.0 },
    };
    let u1 = unique_depth as f64 + 1.0;
    for i in (0..unique_depth).rev() {
        path[i + 1].pweight += po * path[i].pweight * (i as f64 + 1.0) / u1;
        path[i].pweight = pz * path[i].pweight * (unique_depth - i) as f64 / u1;
    }
}

/// Remove element `index`, restoring the weights extend would have produced
/// without it. Extensions commute, so any element can be removed as if it
/// were added last.
fn unwind(path: &mut [PathElement], unique_depth: usize, index: usize) {
    let po = path[index].one_fraction;
    let pz = path[index].zero_fraction;
    let u1 = unique_depth as f64 + 1.0;
    let mut next_one = path[unique_depth].pweight;
    for i in (0..unique_depth).rev() {
        if po != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next_one * u1 / ((i as f64 + 1.0) * po);
            next_one = tmp - path[i].pweight * pz * (unique_depth - i) as f64 / u1;
        } else {
            path[i].pweight = path[i].pweight * u1 / (pz * (unique_depth - i) as f64);
        }
    }
    for i in index..unique_depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

/// Total permutation weight the path would carry with element `index`
/// unwound; the leaf-contribution weight of that element.
fn unwound_sum(path: &[PathElement], unique_depth: usize, index: usize) -> f64 {
    let po = path[index].one_fraction;
    let pz = path[index].zero_fraction;
    let u1 = unique_depth as f64 + 1.0;
    let mut next_one = path[unique_depth].pweight;
    let mut total = 0.0;
    if po != 0.0 {
        for i in (0..unique_depth).rev() {
            let tmp = next_one * u1 / ((i as f64 + 1.0) * po);
            total += tmp;
            next_one = path[i].pweight - tmp * pz * (unique_depth - i) as f64 / u1;
        }
    } else {
        for i in (0..unique_depth).rev() {
            total += path[i].pweight * u1 / (pz * (unique_depth - i) as f64);
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &Tree,
    x: &[f32],
    phi: &mut [f64],
    arena: &mut [PathElement],
    parent_offset: usize,
    mut unique_depth: usize,
    node: u32,
    parent_zero_fraction: f64,
    parent_one_fraction: f64,
    parent_feature: i32,
) {
    // each recursion level works on its own copy of the path
    let offset = parent_offset + unique_depth;
    if unique_depth > 0 {
        arena.copy_within(parent_offset..parent_offset + unique_depth, offset);
    }
    extend(
        &mut arena[offset..],
        unique_depth,
        parent_zero_fraction,
        parent_one_fraction,
        parent_feature,
    );

    let n = &tree.nodes[node as usize];
    match n.feature {
        None => {
            #[allow(clippy::needless_range_loop)] // unwound_sum needs the index
            for i in 1..=unique_depth {
                let w = unwound_sum(&arena[offset..], unique_depth, i);
                let el = arena[offset + i];
                phi[el.feature as usize] += w * (el.one_fraction - el.zero_fraction) * n.leaf_value;
            }
        }
        Some(split_feature) => {
            let goes_left = (x[split_feature as usize] as f64) < n.threshold;
            let (hot, cold) = if goes_left {
                (n.left, n.right)
            } else {
                (n.right, n.left)
            };
            let hot_zero = tree.nodes[hot as usize].cover / n.cover;
            let cold_zero = tree.nodes[cold as usize].cover / n.cover;

            // a repeated feature is unwound so this node can re-apply it
            let mut incoming_zero = 1.0;
            let mut incoming_one = 1.0;
            let path = &mut arena[offset..];
            let found = path[1..=unique_depth]
                .iter()
                .position(|el| el.feature == split_feature as i32)
                .map(|k| k + 1);
            if let Some(i) = found {
                incoming_zero = path[i].zero_fraction;
                incoming_one = path[i].one_fraction;
                unwind(path, unique_depth, i);
                unique_depth -= 1;
            }

            recurse(
                tree,
                x,
                phi,
                arena,
                offset,
                unique_depth + 1,
                hot,
                hot_zero * incoming_zero,
                incoming_one,
                split_feature as i32,
            );
            recurse(
                tree,
                x,
                phi,
                arena,
                offset,
                unique_depth + 1,
                cold,
                cold_zero * incoming_zero,
                0.0,
                split_feature as i32,
            );
        }
    }
}

/// Cover-weighted mean leaf value: the tree's expected margin when every
/// split is taken proportionally.
fn expected_value(tree: &Tree, node: u32) -> f64 {
    let n = &tree.nodes[node as usize];
    match n.feature {
        None => n.leaf_value,
        Some(_) => {
            let l = &tree.nodes[n.left as usize];
            let r = &tree.nodes[n.right as usize];
            (l.cover * expected_value(tree, n.left) + r.cover * expected_value(tree, n.right))
                / n.cover
        }
    }
}

fn arena_size(depth: usize) -> usize {
    let maxd = depth + 2;
    maxd * (maxd + 1) / 2 + 1
}

/// Cover-mode attributions and base value for a boosted ensemble. One arena
/// serves every tree of the call.
pub(crate) fn ensemble_path_shap(ensemble: &Ensemble, x: &[f32], p: usize) -> (Vec<f64>, f64) {
    let mut phi = vec![0.0f64; p];
    let mut base = ensemble.base_score;
    let max_depth = ensemble.trees.iter().map(|t| t.depth()).max().unwrap_or(0);
    let mut arena = vec![PathElement::default(); arena_size(max_depth)];
    for tree in &ensemble.trees {
        recurse(tree, x, &mut phi, &mut arena, 0, 0, 0, 1.0, 1.0, -1);
        base += expected_value(tree, 0);
    }
    (phi, base)
}
