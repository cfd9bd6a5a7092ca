//! Random ensembles with thresholds drawn from a small grid, so that trees
//! share split points and produce plenty of empty path combinations.

use rand::seq::SliceRandom;
use rand::Rng;
use treecert::{Ensemble, PostProcess, Tree};

#[derive(Debug, Clone)]
pub struct RandomModel {
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub max_depth: usize,
    pub trees: usize,
    pub post: PostProcess,
    /// Probability that a node above `max_depth` becomes a leaf early.
    pub early_leaf: f64,
    /// Candidate thresholds.
    pub thresholds: Vec<f32>,
}

impl RandomModel {
    pub fn new(n_inputs: usize, n_outputs: usize, max_depth: usize, trees: usize) -> Self {
        RandomModel {
            n_inputs,
            n_outputs,
            max_depth,
            trees,
            post: PostProcess::Identity,
            early_leaf: 0.2,
            thresholds: (-8..=8).map(|i| i as f32 * 0.5).collect(),
        }
    }

    pub fn post(mut self, post: PostProcess) -> Self {
        self.post = post;
        self
    }
}

fn leaf_value<R: Rng>(rng: &mut R, m: usize) -> Vec<f32> {
    // A mix of small integers and arbitrary fractions exercises exact sums
    // as well as rounding.
    (0..m)
        .map(|_| {
            if rng.gen_bool(0.5) {
                rng.gen_range(-4i32..=4) as f32
            } else {
                rng.gen_range(-3.0f32..3.0)
            }
        })
        .collect()
}

pub fn random_tree<R: Rng>(rng: &mut R, spec: &RandomModel, depth: usize) -> Tree {
    if depth == 0 || (depth < spec.max_depth && rng.gen_bool(spec.early_leaf)) {
        return Tree::leaf(leaf_value(rng, spec.n_outputs));
    }
    let feature = rng.gen_range(0..spec.n_inputs);
    let threshold = *spec.thresholds.choose(rng).expect("threshold pool is empty");
    let left = random_tree(rng, spec, depth - 1);
    let right = random_tree(rng, spec, depth - 1);
    Tree::split(feature, threshold, left, right)
}

pub fn random_ensemble<R: Rng>(rng: &mut R, spec: &RandomModel) -> Ensemble {
    let trees = (0..spec.trees)
        .map(|_| random_tree(rng, spec, spec.max_depth))
        .collect();
    Ensemble::new(trees, spec.n_inputs, spec.n_outputs, spec.post).expect("generated model is valid")
}
