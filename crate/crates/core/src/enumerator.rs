//! Equivalence-class enumeration.
//!
//! The trees of an ensemble are walked depth-first, one after another in
//! stored order. The walk carries the current input region and the running
//! single-precision sum of leaf values. At a split, the region is cut at the
//! threshold and each non-empty side is explored; empty sides are path
//! combinations that can never fire together and are dropped. When the last
//! tree has contributed its leaf, the post-processor is applied and the
//! resulting (region, output) pair is handed to the consumer.
//!
//! Regions emitted by one run are pairwise disjoint and cover the domain, and
//! each output equals [`Ensemble::eval`] bit for bit at every point inside.

use std::fmt;
use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::geometry::{Interval, OutputRange, Region};
use crate::model::{Ensemble, Node, NodeId};

/// Order in which the two children of a split are explored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SelectionStrategy {
    LeftFirst,
    RightFirst,
    /// Explore the slice with the smaller width on the split axis first;
    /// equal widths go left first.
    #[default]
    LeastPointsFirst,
}

impl SelectionStrategy {
    pub const ALL: [SelectionStrategy; 3] = [
        SelectionStrategy::LeftFirst,
        SelectionStrategy::RightFirst,
        SelectionStrategy::LeastPointsFirst,
    ];

    fn left_first(self, interval: &Interval, threshold: f32) -> bool {
        match self {
            SelectionStrategy::LeftFirst => true,
            SelectionStrategy::RightFirst => false,
            SelectionStrategy::LeastPointsFirst => {
                let (l, r) = interval.side_measure(threshold);
                l <= r
            }
        }
    }
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionStrategy::LeftFirst => "left",
            SelectionStrategy::RightFirst => "right",
            SelectionStrategy::LeastPointsFirst => "least-points",
        })
    }
}

impl std::str::FromStr for SelectionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "left" | "left-first" => Ok(SelectionStrategy::LeftFirst),
            "right" | "right-first" => Ok(SelectionStrategy::RightFirst),
            "least-points" | "least-points-first" | "lpf" => {
                Ok(SelectionStrategy::LeastPointsFirst)
            }
            other => Err(format!(
                "unknown strategy {other:?}; expected left, right or least-points"
            )),
        }
    }
}

/// An input region together with the outputs it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct Mapping {
    pub region: Region,
    pub outputs: OutputRange,
    /// Number of trees refined into this mapping.
    pub trees_applied: usize,
}

impl fmt::Display for Mapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.region, self.outputs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Pass,
    Fail { counterexample: Mapping },
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    pub fn counterexample(&self) -> Option<&Mapping> {
        match self {
            Verdict::Pass => None,
            Verdict::Fail { counterexample } => Some(counterexample),
        }
    }
}

/// Whether an enumeration ran to the end or was stopped by its consumer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    Stopped,
}

/// Counters gathered during one enumeration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    /// Tree nodes entered, leaves included.
    pub nodes_visited: u64,
    /// Equivalence classes handed to the consumer.
    pub classes: u64,
    /// Split children skipped because their region was empty.
    pub empty_branches: u64,
    /// Path combinations ruled out by those empty branches (saturating).
    pub discarded_combinations: u128,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Summary {
    pub outcome: Outcome,
    pub stats: Stats,
}

/// Configured enumeration over one ensemble and domain.
pub struct Enumerator<'e> {
    ensemble: &'e Ensemble,
    domain: Region,
    strategy: SelectionStrategy,
}

impl<'e> Enumerator<'e> {
    pub fn new(ensemble: &'e Ensemble, domain: Region) -> Result<Self> {
        if domain.arity() != ensemble.n_inputs() {
            return Err(Error::InputShape {
                expected: ensemble.n_inputs(),
                found: domain.arity(),
            });
        }
        if domain.is_empty() {
            return Err(Error::EmptyDomain);
        }
        Ok(Enumerator {
            ensemble,
            domain,
            strategy: SelectionStrategy::default(),
        })
    }

    pub fn strategy(mut self, strategy: SelectionStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    /// Emits every equivalence class to `consumer` until it breaks.
    pub fn run<F>(&self, mut consumer: F) -> Result<Summary>
    where
        F: FnMut(&Mapping) -> ControlFlow<()>,
    {
        let e = self.ensemble;
        let m = e.n_outputs();
        let b = e.tree_count();
        let mut walk = Walk {
            ensemble: e,
            strategy: self.strategy,
            leaf_counts: e.trees().iter().map(subtree_leaf_counts).collect(),
            combos_after: combos_after(e),
            sums: vec![0.0; (b + 1) * m],
            current: Mapping {
                region: self.domain.clone(),
                outputs: OutputRange::from_point(&vec![0.0; m]),
                trees_applied: 0,
            },
            scratch: vec![0.0; m],
            stats: Stats::default(),
            consumer: &mut consumer,
        };
        let flow = walk.enter_tree(0)?;
        Ok(Summary {
            outcome: match flow {
                ControlFlow::Continue(()) => Outcome::Completed,
                ControlFlow::Break(()) => Outcome::Stopped,
            },
            stats: walk.stats,
        })
    }

    /// Checks `predicate` on every class; stops at the first violation.
    pub fn forall<P>(&self, mut predicate: P) -> Result<(Verdict, Stats)>
    where
        P: FnMut(&Mapping) -> bool,
    {
        let mut failure = None;
        let summary = self.run(|mapping| {
            if predicate(mapping) {
                ControlFlow::Continue(())
            } else {
                failure = Some(mapping.clone());
                ControlFlow::Break(())
            }
        })?;
        let verdict = match failure {
            None => Verdict::Pass,
            Some(counterexample) => Verdict::Fail { counterexample },
        };
        Ok((verdict, summary.stats))
    }

    /// Enumerates everything and returns the statistics.
    pub fn count(&self) -> Result<Stats> {
        Ok(self.run(|_| ControlFlow::Continue(()))?.stats)
    }
}

struct Walk<'a, F> {
    ensemble: &'a Ensemble,
    strategy: SelectionStrategy,
    /// Per tree, per node: number of leaves in that node's subtree.
    leaf_counts: Vec<Vec<u64>>,
    /// `combos_after[b]` = product of leaf counts of trees `b..B`.
    combos_after: Vec<u128>,
    /// Row `b` holds the partial sum after `b` trees.
    sums: Vec<f32>,
    current: Mapping,
    scratch: Vec<f32>,
    stats: Stats,
    consumer: &'a mut F,
}

impl<F> Walk<'_, F>
where
    F: FnMut(&Mapping) -> ControlFlow<()>,
{
    fn enter_tree(&mut self, b: usize) -> Result<ControlFlow<()>> {
        if b == self.ensemble.tree_count() {
            return Ok(self.emit());
        }
        self.visit(b, self.ensemble.trees()[b].root())
    }

    fn visit(&mut self, b: usize, id: NodeId) -> Result<ControlFlow<()>> {
        self.stats.nodes_visited += 1;
        let tree = &self.ensemble.trees()[b];
        match tree.node(id) {
            Node::Leaf { value } => {
                let m = value.len();
                let (done, rest) = self.sums.split_at_mut((b + 1) * m);
                let prev = &done[b * m..];
                let next = &mut rest[..m];
                for (k, ((n, p), v)) in next.iter_mut().zip(prev).zip(value.iter()).enumerate() {
                    *n = *p + *v;
                    if !n.is_finite() {
                        return Err(Error::NumericOverflow {
                            component: k,
                            value: *n,
                            trees_applied: b + 1,
                        });
                    }
                }
                self.enter_tree(b + 1)
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let (feature, threshold, left, right) = (*feature, *threshold, *left, *right);
                let saved = self.current.region.dims[feature];
                let children = [
                    (saved.below(threshold), left),
                    (saved.above(threshold), right),
                ];
                let order = if self.strategy.left_first(&saved, threshold) {
                    [0, 1]
                } else {
                    [1, 0]
                };
                for i in order {
                    let (slice, child) = children[i];
                    if slice.is_empty() {
                        self.stats.empty_branches += 1;
                        let pruned = (self.leaf_counts[b][child as usize] as u128)
                            .saturating_mul(self.combos_after[b + 1]);
                        self.stats.discarded_combinations =
                            self.stats.discarded_combinations.saturating_add(pruned);
                        continue;
                    }
                    self.current.region.dims[feature] = slice;
                    let flow = self.visit(b, child);
                    self.current.region.dims[feature] = saved;
                    if flow?.is_break() {
                        return Ok(ControlFlow::Break(()));
                    }
                }
                Ok(ControlFlow::Continue(()))
            }
        }
    }

    fn emit(&mut self) -> ControlFlow<()> {
        let e = self.ensemble;
        let m = e.n_outputs();
        let b = e.tree_count();
        self.scratch.copy_from_slice(&self.sums[b * m..]);
        e.post_process().apply(&mut self.scratch, b);
        for (iv, &y) in self.current.outputs.dims.iter_mut().zip(&self.scratch) {
            *iv = Interval::point(y);
        }
        self.current.trees_applied = b;
        self.stats.classes += 1;
        (self.consumer)(&self.current)
    }
}

fn subtree_leaf_counts(tree: &crate::model::Tree) -> Vec<u64> {
    let nodes = tree.nodes();
    let mut counts = vec![0u64; nodes.len()];
    // Children always sit at higher indices than their parent for trees
    // built by this crate, but from_nodes accepts any order; resolve with
    // an explicit post-order walk.
    fn go(tree: &crate::model::Tree, id: NodeId, counts: &mut [u64]) -> u64 {
        let c = match tree.node(id) {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => go(tree, *left, counts) + go(tree, *right, counts),
        };
        counts[id as usize] = c;
        c
    }
    go(tree, tree.root(), &mut counts);
    counts
}

fn combos_after(e: &Ensemble) -> Vec<u128> {
    let mut out = vec![1u128; e.tree_count() + 1];
    for b in (0..e.tree_count()).rev() {
        out[b] = out[b + 1].saturating_mul(e.trees()[b].leaf_count() as u128);
    }
    out
}

/// Emits every equivalence class of `e` over `domain`.
pub fn for_each_class<F>(
    e: &Ensemble,
    domain: &Region,
    strategy: SelectionStrategy,
    consumer: F,
) -> Result<Outcome>
where
    F: FnMut(&Mapping) -> ControlFlow<()>,
{
    Ok(Enumerator::new(e, domain.clone())?
        .strategy(strategy)
        .run(consumer)?
        .outcome)
}

/// `Pass` iff `predicate` holds on every equivalence class.
pub fn forall<P>(
    e: &Ensemble,
    domain: &Region,
    strategy: SelectionStrategy,
    predicate: P,
) -> Result<Verdict>
where
    P: FnMut(&Mapping) -> bool,
{
    Ok(Enumerator::new(e, domain.clone())?
        .strategy(strategy)
        .forall(predicate)?
        .0)
}

/// Number of equivalence classes over `domain`.
pub fn count_classes(e: &Ensemble, domain: &Region) -> Result<u64> {
    Ok(Enumerator::new(e, domain.clone())?.count()?.classes)
}
