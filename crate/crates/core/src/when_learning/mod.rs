//! When-learning: per-skill binary classifiers deciding whether a
//! candidate skill application is appropriate in a state.

pub mod features;
pub mod tree;

pub use features::{absolute_features, augment_state, preprocess_append, preprocess_relative, AugmentedState, Preprocessor};
pub use tree::{SplitCriterion, DecisionTree, Dataset, FeatureMap, Node, TreeConfig, ABSENT};
