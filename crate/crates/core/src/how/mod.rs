//! How-learning: explaining a demonstrated value as a composition of
//! domain-general functions over values in the interface.

pub mod registry;
pub mod search;

pub use registry::{parse_value, FunctionSpec, Registry, RegistryConfig};
pub use search::{
    bottom_out, consistent_compositions, eval_term, eval_value, how_search, how_search_with_stats,
    preference_cmp, produced_values, term_preference_cmp, ConsistentComposition, Demo, ExplanationSet,
    HowSearchConfig, SearchOptions, SearchStats,
};
