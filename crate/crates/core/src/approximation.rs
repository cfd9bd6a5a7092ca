//! Sound, incomplete output bounds from per-tree leaf extremes.
//!
//! Every tree output lies between the componentwise minimum and maximum of
//! its leaves, so the ensemble sum lies between the sums of those extremes.
//! The sums are accumulated in `f32` in tree order, exactly like
//! [`Ensemble::raw_sum`]; since rounded addition is monotone in each operand,
//! the bounds hold for the computed values and not only over the reals.

use crate::geometry::{round_down, round_up, OutputRange};
use crate::model::{Ensemble, PostProcess, Tree};

/// Componentwise extremes of a tree's leaf values.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeBounds {
    pub min: Vec<f32>,
    pub max: Vec<f32>,
}

/// Visits every leaf once.
pub fn tree_bounds(tree: &Tree) -> TreeBounds {
    let mut leaves = tree.leaves();
    let first = leaves.next().expect("a tree has at least one leaf");
    let mut bounds = TreeBounds {
        min: first.to_vec(),
        max: first.to_vec(),
    };
    for leaf in leaves {
        for (k, &v) in leaf.iter().enumerate() {
            bounds.min[k] = bounds.min[k].min(v);
            bounds.max[k] = bounds.max[k].max(v);
        }
    }
    bounds
}

/// Bounds on the summed tree outputs before post-processing.
pub fn raw_sum_bounds(e: &Ensemble) -> (Vec<f32>, Vec<f32>) {
    let m = e.n_outputs();
    let mut lo = vec![0.0f32; m];
    let mut hi = vec![0.0f32; m];
    for tree in e.trees() {
        let tb = tree_bounds(tree);
        for k in 0..m {
            lo[k] += tb.min[k];
            hi[k] += tb.max[k];
        }
    }
    (lo, hi)
}

/// Sound enclosure of every output the ensemble can produce.
///
/// For identity and division by the tree count the post-processor is applied
/// to the summed minima and summed maxima. Softmax is not monotone in each
/// component (raising one logit lowers every other probability), so its
/// enclosure pairs each class's lowest logit with the others' highest, and
/// vice versa, then widens outward to absorb single-precision rounding.
pub fn ensemble_bounds(e: &Ensemble) -> OutputRange {
    let (mut lo, mut hi) = raw_sum_bounds(e);
    match e.post_process() {
        PostProcess::Identity | PostProcess::DivideByTreeCount => {
            e.post_process().apply(&mut lo, e.tree_count());
            e.post_process().apply(&mut hi, e.tree_count());
            OutputRange::from_bounds(&lo, &hi)
        }
        PostProcess::Softmax => softmax_enclosure(&lo, &hi),
    }
}

/// Interval softmax over logit boxes `[lo, hi]`.
pub(crate) fn softmax_enclosure(lo: &[f32], hi: &[f32]) -> OutputRange {
    let m = lo.len();
    let lo64: Vec<f64> = lo.iter().map(|&v| f64::from(v)).collect();
    let hi64: Vec<f64> = hi.iter().map(|&v| f64::from(v)).collect();
    let spread = hi64.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - lo64.iter().copied().fold(f64::INFINITY, f64::min);
    // Relative error of the f32 evaluation: the shifted logits carry an
    // absolute error up to spread * 2^-24, which exp turns into a relative
    // one; sum and division add (m + 2) roundings; exp itself one more ulp.
    let rel = (2.0 * spread + m as f64 + 8.0) * f64::from(f32::EPSILON);
    let mut lower = Vec::with_capacity(m);
    let mut upper = Vec::with_capacity(m);
    for i in 0..m {
        let p_lo = share(i, &lo64, &hi64);
        let p_hi = share(i, &hi64, &lo64);
        lower.push(round_down((p_lo * (1.0 - rel) - 1e-38).max(0.0)));
        upper.push(round_up((p_hi * (1.0 + rel) + 1e-38).min(1.0)));
    }
    OutputRange::from_bounds(&lower, &upper)
}

/// `e^own[i] / (e^own[i] + sum_{j != i} e^other[j])`, shifted for stability.
fn share(i: usize, own: &[f64], other: &[f64]) -> f64 {
    let logit = |j: usize| if j == i { own[j] } else { other[j] };
    let shift = (0..own.len()).map(logit).fold(f64::NEG_INFINITY, f64::max);
    let den: f64 = (0..own.len()).map(|j| (logit(j) - shift).exp()).sum();
    (own[i] - shift).exp() / den
}
