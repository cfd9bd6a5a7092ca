//! Minimal reference trainers producing [`treecert::Ensemble`]s: a bagged
//! random forest of Gini trees and a softmax gradient-boosting classifier
//! with vector-valued leaves.
//!
//! Both grow trees by minimising the summed squared error of a per-sample
//! target vector. For one-hot targets that is exactly the sample-weighted
//! Gini impurity.

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treecert::{Ensemble, PostProcess, Sample, Tree};

use crate::data::Dataset;

struct Grower<'a, L> {
    x: &'a [Sample],
    targets: &'a [Vec<f64>],
    k: usize,
    max_depth: usize,
    min_leaf: usize,
    features_per_split: usize,
    leaf: L,
}

impl<L> Grower<'_, L>
where
    L: Fn(&[usize]) -> Vec<f32>,
{
    fn grow<R: Rng>(&self, rng: &mut R, idx: &mut [usize], depth: usize) -> Tree {
        if depth == self.max_depth || idx.len() < 2 * self.min_leaf {
            return Tree::leaf((self.leaf)(idx));
        }
        let n_features = self.x[0].features.len();
        let candidates = sample(rng, n_features, self.features_per_split.min(n_features));
        let parent = self.sse(idx);
        let mut best: Option<(f64, usize, f32)> = None;
        for f in candidates.iter() {
            idx.sort_by(|&a, &b| self.x[a].features[f].total_cmp(&self.x[b].features[f]));
            let mut sum_l = vec![0.0; self.k];
            let mut sq_l = 0.0;
            let total: Vec<f64> = (0..self.k)
                .map(|c| idx.iter().map(|&i| self.targets[i][c]).sum())
                .collect();
            let total_sq: f64 = idx
                .iter()
                .map(|&i| self.targets[i].iter().map(|v| v * v).sum::<f64>())
                .sum();
            for pos in 0..idx.len() - 1 {
                let t = &self.targets[idx[pos]];
                for c in 0..self.k {
                    sum_l[c] += t[c];
                }
                sq_l += t.iter().map(|v| v * v).sum::<f64>();
                let (a, b) = (self.x[idx[pos]].features[f], self.x[idx[pos + 1]].features[f]);
                let nl = (pos + 1) as f64;
                let nr = (idx.len() - pos - 1) as f64;
                if a == b || (pos + 1) < self.min_leaf || idx.len() - pos - 1 < self.min_leaf {
                    continue;
                }
                let sse_l = sq_l - sum_l.iter().map(|s| s * s).sum::<f64>() / nl;
                let sse_r = (total_sq - sq_l)
                    - total
                        .iter()
                        .zip(&sum_l)
                        .map(|(t, l)| (t - l) * (t - l))
                        .sum::<f64>()
                        / nr;
                let score = sse_l + sse_r;
                if best.is_none_or(|(s, _, _)| score < s) {
                    let mut thr = a + (b - a) / 2.0;
                    if !(a <= thr && thr < b) {
                        thr = a;
                    }
                    best = Some((score, f, thr));
                }
            }
        }
        match best {
            Some((score, f, thr)) if score < parent - 1e-9 => {
                let (mut left, mut right): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| self.x[i].features[f] <= thr);
                let l = self.grow(rng, &mut left, depth + 1);
                let r = self.grow(rng, &mut right, depth + 1);
                Tree::split(f, thr, l, r)
            }
            _ => Tree::leaf((self.leaf)(idx)),
        }
    }

    fn sse(&self, idx: &[usize]) -> f64 {
        let n = idx.len() as f64;
        (0..self.k)
            .map(|c| {
                let s: f64 = idx.iter().map(|&i| self.targets[i][c]).sum();
                let sq: f64 = idx.iter().map(|&i| self.targets[i][c].powi(2)).sum();
                sq - s * s / n
            })
            .sum()
    }
}

fn one_hot(label: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[label] = 1.0;
    v
}

/// Bagged Gini trees with `sqrt(n)` candidate features per split. Leaves
/// hold class frequencies; the ensemble averages them.
#[derive(Debug, Clone)]
pub struct RandomForest {
    pub trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl RandomForest {
    pub fn fit(&self, data: &Dataset) -> Ensemble {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let k = data.n_classes;
        let targets: Vec<Vec<f64>> = data.samples.iter().map(|s| one_hot(s.label, k)).collect();
        let grower = Grower {
            x: &data.samples,
            targets: &targets,
            k,
            max_depth: self.max_depth,
            min_leaf: 1,
            features_per_split: ((data.n_inputs as f64).sqrt() as usize).max(1),
            leaf: |idx: &[usize]| {
                let mut counts = vec![0.0f32; k];
                for &i in idx {
                    counts[data.samples[i].label] += 1.0;
                }
                let n = idx.len() as f32;
                counts.iter().map(|c| c / n).collect()
            },
        };
        let n = data.samples.len();
        let trees = (0..self.trees)
            .map(|_| {
                let mut idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                grower.grow(&mut rng, &mut idx, 0)
            })
            .collect();
        Ensemble::new(trees, data.n_inputs, k, PostProcess::DivideByTreeCount)
            .expect("trained forest is valid")
    }
}

/// Multiclass boosting on the softmax cross-entropy with one vector-leaf
/// tree per round and Newton leaf steps.
#[derive(Debug, Clone)]
pub struct GradientBoosting {
    pub trees: usize,
    pub max_depth: usize,
    pub learning_rate: f32,
    pub seed: u64,
}

impl GradientBoosting {
    pub fn new(trees: usize, max_depth: usize) -> Self {
        GradientBoosting {
            trees,
            max_depth,
            learning_rate: 0.5,
            seed: 0,
        }
    }

    pub fn fit(&self, data: &Dataset) -> Ensemble {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let k = data.n_classes;
        let n = data.samples.len();
        let mut scores = vec![vec![0.0f32; k]; n];
        let mut trees = Vec::with_capacity(self.trees);
        for _ in 0..self.trees {
            let mut grads = Vec::with_capacity(n);
            let mut hess = Vec::with_capacity(n);
            for (s, f) in data.samples.iter().zip(&scores) {
                let max = f.iter().copied().fold(f32::NEG_INFINITY, f32::max);
                let e: Vec<f64> = f.iter().map(|&v| f64::from(v - max).exp()).collect();
                let z: f64 = e.iter().sum();
                let p: Vec<f64> = e.iter().map(|v| v / z).collect();
                let y = one_hot(s.label, k);
                grads.push((0..k).map(|c| y[c] - p[c]).collect::<Vec<f64>>());
                hess.push(p.iter().map(|p| (p * (1.0 - p)).max(1e-6)).collect::<Vec<f64>>());
            }
            let lr = f64::from(self.learning_rate);
            let scale = (k as f64 - 1.0) / k as f64;
            let grower = Grower {
                x: &data.samples,
                targets: &grads,
                k,
                max_depth: self.max_depth,
                min_leaf: 3,
                features_per_split: data.n_inputs,
                leaf: |idx: &[usize]| {
                    (0..k)
                        .map(|c| {
                            let g: f64 = idx.iter().map(|&i| grads[i][c]).sum();
                            let h: f64 = idx.iter().map(|&i| hess[i][c]).sum();
                            (lr * scale * g / h) as f32
                        })
                        .collect()
                },
            };
            let mut idx: Vec<usize> = (0..n).collect();
            let tree = grower.grow(&mut rng, &mut idx, 0);
            for (s, f) in data.samples.iter().zip(scores.iter_mut()) {
                let out = tree.eval(data.n_inputs, &s.features).expect("arity");
                for c in 0..k {
                    f[c] += out[c];
                }
            }
            trees.push(tree);
        }
        Ensemble::new(trees, data.n_inputs, k, PostProcess::Softmax).expect("trained model is valid")
    }
}

/// Fraction of samples classified correctly.
pub fn accuracy(e: &Ensemble, data: &Dataset) -> f64 {
    let ok = data
        .samples
        .iter()
        .filter(|s| e.classify(&s.features).expect("arity") == s.label)
        .count();
    ok as f64 / data.samples.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{collision_dataset, digits_dataset};

    #[test]
    fn forest_learns_collisions() {
        let d = collision_dataset(3000, 7);
        let (train, test) = d.split(0.8);
        let rf = RandomForest {
            trees: 10,
            max_depth: 8,
            seed: 1,
        }
        .fit(&train);
        assert!(accuracy(&rf, &test) > 0.8, "{}", accuracy(&rf, &test));
        assert!(rf.trees().iter().all(|t| t.depth() <= 8));
    }

    #[test]
    fn boosting_learns_digits() {
        let d = digits_dataset(1500, 3);
        let (train, test) = d.split(0.85);
        let gb = GradientBoosting::new(10, 4).fit(&train);
        assert!(accuracy(&gb, &test) > 0.7, "{}", accuracy(&gb, &test));
    }
}
