//! Test support for treecert: random model generators, synthetic datasets
//! and small reference trainers. Nothing here is part of the verifier.

pub mod data;
pub mod random;
pub mod train;

pub use data::{collision_dataset, digits_dataset, Dataset};
pub use random::{random_ensemble, random_tree, RandomModel};
pub use train::{accuracy, GradientBoosting, RandomForest};
