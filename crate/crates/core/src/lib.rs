//! Formal verification of tree ensembles by equivalence-class enumeration.
//!
//! An ensemble of univariate decision trees partitions its input space into
//! hyperrectangles on which the prediction is constant. This crate enumerates
//! those regions exactly ([`enumerator`]), bounds the outputs cheaply
//! ([`approximation`]), and builds property checkers on top of both
//! ([`properties`]): plausibility of output range and robustness against
//! bounded input noise. A property either holds on every region or fails
//! with a concrete region as counterexample.

// `!(a <= b)` is used where NaN must count as a violation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approximation;
pub mod enumerator;
pub mod error;
pub mod format;
pub mod geometry;
pub mod model;
pub mod properties;

pub use approximation::{ensemble_bounds, tree_bounds, TreeBounds};
pub use enumerator::{
    count_classes, for_each_class, forall, Enumerator, Mapping, Outcome, SelectionStrategy, Stats,
    Summary, Verdict,
};
pub use error::{Error, Result};
pub use format::{load_model, load_model_file, save_model};
pub use geometry::{succ32, Interval, OutputRange, Region};
pub use model::{argmax, strict_argmax, Ensemble, Node, NodeId, PostProcess, Tree};
pub use properties::{
    batch_robustness, check_range, check_robustness, check_robustness_sliding_window,
    read_test_set, BatchOptions, BatchSummary, ImageDims, Method, RangeCheck, RangeSpec,
    RobustnessCheck, RobustnessMode, RobustnessQuery, Sample, SlidingWindow, WindowOutcome,
    WindowReport,
};
