//! Tree ensembles: univariate hard decision trees summed in stored order and
//! post-processed once.
//!
//! All numerics are `f32`. Prediction adds tree outputs componentwise in
//! tree order and then applies the post-processor, so the verifier computes
//! exactly the values a single-precision library would.

use crate::error::{Error, Result};

/// Index of a node inside its tree's arena.
pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// `x[feature] <= threshold` goes left, otherwise right.
    Split {
        feature: usize,
        threshold: f32,
        left: NodeId,
        right: NodeId,
    },
    Leaf { value: Box<[f32]> },
}

/// A binary decision tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// A tree consisting of a single leaf.
    pub fn leaf(value: Vec<f32>) -> Self {
        Tree {
            nodes: vec![Node::Leaf {
                value: value.into_boxed_slice(),
            }],
        }
    }

    /// Joins two subtrees under a new split node.
    pub fn split(feature: usize, threshold: f32, left: Tree, right: Tree) -> Self {
        let left_len = left.nodes.len() as NodeId;
        let mut nodes = Vec::with_capacity(1 + left.nodes.len() + right.nodes.len());
        nodes.push(Node::Split {
            feature,
            threshold,
            left: 1,
            right: 1 + left_len,
        });
        nodes.extend(left.nodes.into_iter().map(|n| n.shifted(1)));
        nodes.extend(right.nodes.into_iter().map(|n| n.shifted(1 + left_len)));
        Tree { nodes }
    }

    /// A depth-1 tree.
    pub fn stump(feature: usize, threshold: f32, left: Vec<f32>, right: Vec<f32>) -> Self {
        Tree::split(feature, threshold, Tree::leaf(left), Tree::leaf(right))
    }

    /// Builds a tree from a raw arena. Every node other than the root must
    /// be referenced by exactly one split, and the root by none, which rules
    /// out cycles and unreachable nodes.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Schema {
                path: "$".into(),
                message: "tree has no nodes".into(),
            });
        }
        let mut parents = vec![0u32; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = node {
                for child in [*left, *right] {
                    let c = child as usize;
                    if c >= nodes.len() || c == 0 {
                        return Err(Error::Schema {
                            path: format!("$.nodes[{i}]"),
                            message: format!("child index {child} is invalid"),
                        });
                    }
                    parents[c] += 1;
                }
            }
        }
        if let Some(i) = parents.iter().skip(1).position(|&p| p != 1) {
            return Err(Error::Schema {
                path: format!("$.nodes[{}]", i + 1),
                message: format!("node has {} parents, expected 1", parents[i + 1]),
            });
        }
        // With unique parents, a cycle would leave some node unreachable from the root.
        let tree = Tree { nodes };
        if tree.reachable_count() != tree.nodes.len() {
            return Err(Error::Schema {
                path: "$".into(),
                message: "tree contains a cycle".into(),
            });
        }
        Ok(tree)
    }

    fn reachable_count(&self) -> usize {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0 as NodeId];
        let mut count = 0;
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id as usize], true) {
                continue;
            }
            count += 1;
            if let Node::Split { left, right, .. } = &self.nodes[id as usize] {
                stack.push(*right);
                stack.push(*left);
            }
        }
        count
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaves(&self) -> impl Iterator<Item = &[f32]> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value } => Some(&value[..]),
            Node::Split { .. } => None,
        })
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// Length of the longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        fn go(t: &Tree, id: NodeId) -> usize {
            match t.node(id) {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, self.root())
    }

    /// The leaf reached by `x`. Callers check arity.
    pub(crate) fn leaf_for(&self, x: &[f32]) -> &[f32] {
        let mut id = self.root();
        loop {
            match self.node(id) {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Evaluates the tree on a point with `n_inputs` components.
    pub fn eval(&self, n_inputs: usize, x: &[f32]) -> Result<Vec<f32>> {
        check_input(n_inputs, x)?;
        if let Some(f) = self.max_feature() {
            if f >= n_inputs {
                return Err(Error::InputShape {
                    expected: f + 1,
                    found: n_inputs,
                });
            }
        }
        Ok(self.leaf_for(x).to_vec())
    }

    fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

impl Node {
    fn shifted(self, by: NodeId) -> Node {
        match self {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => Node::Split {
                feature,
                threshold,
                left: left + by,
                right: right + by,
            },
            leaf => leaf,
        }
    }
}

fn check_input(n: usize, x: &[f32]) -> Result<()> {
    if x.len() != n {
        return Err(Error::InputShape {
            expected: n,
            found: x.len(),
        });
    }
    if let Some(i) = x.iter().position(|v| v.is_nan()) {
        return Err(Error::NanInput(i));
    }
    Ok(())
}

/// Function applied once to the summed tree outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PostProcess {
    Identity,
    /// Divide by the number of trees (random-forest averaging).
    DivideByTreeCount,
    /// Normalize log-domain sums into class probabilities.
    Softmax,
}

impl PostProcess {
    /// Name used in the JSON model format.
    pub fn tag(self) -> &'static str {
        match self {
            PostProcess::Identity => "none",
            PostProcess::DivideByTreeCount => "divisor",
            PostProcess::Softmax => "softmax",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "none" => Some(PostProcess::Identity),
            "divisor" => Some(PostProcess::DivideByTreeCount),
            "softmax" => Some(PostProcess::Softmax),
            _ => None,
        }
    }

    /// True when `v1 <= v2` componentwise implies `p(v1) <= p(v2)`
    /// componentwise. Softmax is not: raising one logit lowers the other
    /// probabilities.
    pub fn is_componentwise_monotone(self) -> bool {
        !matches!(self, PostProcess::Softmax)
    }

    /// Applies the post-processor in place. `tree_count` is the ensemble's B.
    pub fn apply(self, values: &mut [f32], tree_count: usize) {
        match self {
            PostProcess::Identity => {}
            PostProcess::DivideByTreeCount => {
                let b = tree_count as f32;
                for v in values.iter_mut() {
                    *v /= b;
                }
            }
            PostProcess::Softmax => softmax_in_place(values),
        }
    }
}

/// `e^{y_i - max} / sum_j e^{y_j - max}` in single precision.
pub(crate) fn softmax_in_place(values: &mut [f32]) {
    let max = values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
}

/// Index of the largest component; ties go to the lowest index.
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Like [`argmax`] but `None` when the maximum is shared by several classes.
pub fn strict_argmax(values: &[f32]) -> Option<usize> {
    let best = argmax(values);
    let tied = values
        .iter()
        .enumerate()
        .any(|(i, &v)| i != best && v >= values[best]);
    (!tied).then_some(best)
}

/// A tree ensemble `f(x) = post(t_1(x) + ... + t_B(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    trees: Vec<Tree>,
    n_inputs: usize,
    n_outputs: usize,
    post: PostProcess,
}

impl Ensemble {
    /// Validates arities and numerics: at least one tree, features below
    /// `n_inputs`, every leaf of length `n_outputs`, all numbers finite.
    pub fn new(
        trees: Vec<Tree>,
        n_inputs: usize,
        n_outputs: usize,
        post: PostProcess,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::Schema {
                path: "$.trees".into(),
                message: "ensemble needs at least one tree".into(),
            });
        }
        if n_inputs == 0 || n_outputs == 0 {
            return Err(Error::Schema {
                path: "$".into(),
                message: "input and output arity must be positive".into(),
            });
        }
        for (b, tree) in trees.iter().enumerate() {
            for (i, node) in tree.nodes.iter().enumerate() {
                let path = format!("$.trees[{b}].nodes[{i}]");
                match node {
                    Node::Split {
                        feature, threshold, ..
                    } => {
                        if *feature >= n_inputs {
                            return Err(Error::Schema {
                                path,
                                message: format!(
                                    "feature {feature} out of range for {n_inputs} inputs"
                                ),
                            });
                        }
                        if !threshold.is_finite() {
                            return Err(Error::Schema {
                                path,
                                message: format!("threshold {threshold} is not finite"),
                            });
                        }
                    }
                    Node::Leaf { value } => {
                        if value.len() != n_outputs {
                            return Err(Error::Arity {
                                path,
                                expected: n_outputs,
                                found: value.len(),
                            });
                        }
                        if value.iter().any(|v| !v.is_finite()) {
                            return Err(Error::Schema {
                                path,
                                message: "leaf value is not finite".into(),
                            });
                        }
                    }
                }
            }
        }
        Ok(Ensemble {
            trees,
            n_inputs,
            n_outputs,
            post,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn post_process(&self) -> PostProcess {
        self.post
    }

    /// Evaluates a single member tree of this ensemble.
    pub fn tree_eval(&self, tree: usize, x: &[f32]) -> Result<Vec<f32>> {
        check_input(self.n_inputs, x)?;
        Ok(self.trees[tree].leaf_for(x).to_vec())
    }

    /// Sums the raw tree outputs without post-processing.
    pub fn raw_sum(&self, x: &[f32]) -> Result<Vec<f32>> {
        check_input(self.n_inputs, x)?;
        let mut acc = vec![0.0f32; self.n_outputs];
        for tree in &self.trees {
            for (a, v) in acc.iter_mut().zip(tree.leaf_for(x)) {
                *a += *v;
            }
        }
        Ok(acc)
    }

    pub fn eval(&self, x: &[f32]) -> Result<Vec<f32>> {
        let mut y = self.raw_sum(x)?;
        self.post.apply(&mut y, self.trees.len());
        Ok(y)
    }

    pub fn classify(&self, x: &[f32]) -> Result<usize> {
        Ok(argmax(&self.eval(x)?))
    }

    /// Upper bound on the number of path combinations: the product of
    /// per-tree leaf counts, saturating.
    pub fn path_combinations(&self) -> u128 {
        self.trees
            .iter()
            .fold(1u128, |acc, t| acc.saturating_mul(t.leaf_count() as u128))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// x <= 0 -> 1, else 2
    pub(crate) fn one_stump() -> Tree {
        Tree::stump(0, 0.0, vec![1.0], vec![2.0])
    }

    pub(crate) fn two_trees(post: PostProcess) -> Ensemble {
        Ensemble::new(
            vec![
                Tree::stump(0, 0.0, vec![0.0], vec![1.0]),
                Tree::stump(0, 5.0, vec![2.0], vec![3.0]),
            ],
            1,
            1,
            post,
        )
        .unwrap()
    }

    #[test]
    fn tree_eval_follows_inclusive_left_branch() {
        let t = one_stump();
        assert_eq!(t.eval(1, &[-1.0]).unwrap(), vec![1.0]);
        assert_eq!(t.eval(1, &[0.0]).unwrap(), vec![1.0]);
        assert_eq!(t.eval(1, &[-0.0]).unwrap(), vec![1.0]);
        assert_eq!(t.eval(1, &[0.5]).unwrap(), vec![2.0]);
        assert!(matches!(
            t.eval(1, &[0.5, 1.0]),
            Err(Error::InputShape {
                expected: 1,
                found: 2
            })
        ));
        assert!(matches!(t.eval(1, &[f32::NAN]), Err(Error::NanInput(0))));
    }

    #[test]
    fn ensemble_eval_sums_then_post_processes() {
        let e = two_trees(PostProcess::Identity);
        assert_eq!(e.eval(&[-1.0]).unwrap(), vec![2.0]);
        assert_eq!(e.eval(&[3.0]).unwrap(), vec![3.0]);
        assert_eq!(e.eval(&[7.0]).unwrap(), vec![4.0]);
        let e = two_trees(PostProcess::DivideByTreeCount);
        assert_eq!(e.eval(&[7.0]).unwrap(), vec![2.0]);
        assert!(e.eval(&[]).is_err());
    }

    #[test]
    fn division_happens_after_the_sum() {
        // 0.1 + 0.2 then / 3 differs from 0.1/3 + 0.2/3 in f32
        let e = Ensemble::new(
            vec![
                Tree::leaf(vec![0.1]),
                Tree::leaf(vec![0.2]),
                Tree::leaf(vec![0.7]),
            ],
            1,
            1,
            PostProcess::DivideByTreeCount,
        )
        .unwrap();
        let expected = (0.1f32 + 0.2f32 + 0.7f32) / 3.0f32;
        assert_eq!(e.eval(&[0.0]).unwrap()[0].to_bits(), expected.to_bits());
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(argmax(&[0.3, 0.7]), 1);
        assert_eq!(argmax(&[0.5, 0.5, 0.0]), 0);
        assert_eq!(strict_argmax(&[0.5, 0.5, 0.0]), None);
        assert_eq!(strict_argmax(&[0.2, 0.5, 0.3]), Some(1));
        let stump = Ensemble::new(
            vec![Tree::stump(0, 0.0, vec![1.0, 0.0], vec![0.0, 1.0])],
            1,
            2,
            PostProcess::Identity,
        )
        .unwrap();
        assert_eq!(stump.classify(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn construction_rejects_bad_arity_and_numerics() {
        let bad_leaf = Ensemble::new(vec![Tree::leaf(vec![1.0, 2.0])], 1, 1, PostProcess::Identity);
        assert!(matches!(bad_leaf, Err(Error::Arity { expected: 1, found: 2, .. })));
        let bad_feature = Ensemble::new(
            vec![Tree::stump(3, 0.0, vec![0.0], vec![1.0])],
            2,
            1,
            PostProcess::Identity,
        );
        assert!(matches!(bad_feature, Err(Error::Schema { .. })));
        let nan = Ensemble::new(
            vec![Tree::stump(0, f32::NAN, vec![0.0], vec![1.0])],
            1,
            1,
            PostProcess::Identity,
        );
        assert!(nan.is_err());
        assert!(Ensemble::new(vec![], 1, 1, PostProcess::Identity).is_err());
    }

    #[test]
    fn from_nodes_rejects_cycles_and_sharing() {
        let leaf = || Node::Leaf {
            value: vec![0.0].into_boxed_slice(),
        };
        let split = |l, r| Node::Split {
            feature: 0,
            threshold: 0.0,
            left: l,
            right: r,
        };
        assert!(Tree::from_nodes(vec![split(1, 2), leaf(), leaf()]).is_ok());
        // shared child
        assert!(Tree::from_nodes(vec![split(1, 1), leaf()]).is_err());
        // 1 -> 2 -> 1 cycle, detached from the root
        assert!(Tree::from_nodes(vec![leaf(), split(2, 3), split(1, 4), leaf(), leaf()]).is_err());
        // back edge to the root
        assert!(Tree::from_nodes(vec![split(0, 1), leaf()]).is_err());
        assert!(Tree::from_nodes(vec![]).is_err());
    }

    #[test]
    fn split_combinator_builds_consistent_arena() {
        let t = Tree::split(
            0,
            1.0,
            Tree::stump(1, 2.0, vec![1.0], vec![2.0]),
            Tree::stump(1, 3.0, vec![3.0], vec![4.0]),
        );
        assert_eq!(t.leaf_count(), 4);
        assert_eq!(t.depth(), 2);
        assert!(Tree::from_nodes(t.nodes().to_vec()).is_ok());
        assert_eq!(t.eval(2, &[1.0, 2.5]).unwrap(), vec![2.0]);
        assert_eq!(t.eval(2, &[1.5, 2.5]).unwrap(), vec![3.0]);
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut v = vec![1.0, 2.0, 3.0];
        softmax_in_place(&mut v);
        let s: f32 = v.iter().sum();
        assert!((s - 1.0).abs() <= 1e-6);
        assert!(v[2] > v[1] && v[1] > v[0]);
        let mut big = vec![1000.0, -1000.0];
        softmax_in_place(&mut big);
        assert_eq!(big, vec![1.0, 0.0]);
    }

    mod props {
        use super::*;
        use proptest::collection::vec;
        use proptest::prelude::*;

        fn logits(m: usize) -> impl Strategy<Value = Vec<f32>> {
            vec(-30.0f32..30.0, m)
        }

        proptest! {
            #[test]
            fn softmax_is_a_distribution(v in (2usize..8).prop_flat_map(logits)) {
                let mut p = v.clone();
                softmax_in_place(&mut p);
                prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
                let s: f32 = p.iter().sum();
                prop_assert!((s - 1.0).abs() <= 1e-6, "sum {}", s);
            }

            #[test]
            fn identity_and_divisor_are_monotone(
                pairs in (1usize..6).prop_flat_map(|m| vec((-50.0f32..50.0, 0.0f32..20.0), m)),
                b in 1usize..30,
            ) {
                let v1: Vec<f32> = pairs.iter().map(|p| p.0).collect();
                let v2: Vec<f32> = pairs.iter().map(|p| p.0 + p.1).collect();
                for post in [PostProcess::Identity, PostProcess::DivideByTreeCount] {
                    let (mut a, mut c) = (v1.clone(), v2.clone());
                    post.apply(&mut a, b);
                    post.apply(&mut c, b);
                    prop_assert!(a.iter().zip(&c).all(|(x, y)| x <= y));
                }
            }

            // Softmax is monotone per coordinate in its own logit and
            // antitone in every other logit, not componentwise monotone.
            #[test]
            fn softmax_own_logit_monotone_others_antitone(
                v in (2usize..6).prop_flat_map(logits),
                k in 0usize..6,
                bump in 0.0f32..10.0,
            ) {
                let k = k % v.len();
                let mut a = v.clone();
                let mut c = v.clone();
                c[k] += bump;
                softmax_in_place(&mut a);
                softmax_in_place(&mut c);
                for i in 0..v.len() {
                    if i == k {
                        prop_assert!(c[i] >= a[i]);
                    } else {
                        prop_assert!(c[i] <= a[i]);
                    }
                }
            }

            #[test]
            fn eval_is_deterministic(x in -10.0f32..10.0) {
                let e = two_trees(PostProcess::DivideByTreeCount);
                let a = e.eval(&[x]).unwrap();
                let b = e.eval(&[x]).unwrap();
                prop_assert_eq!(a[0].to_bits(), b[0].to_bits());
            }
        }
    }
}
