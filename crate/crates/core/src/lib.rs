//! Sensor selection by greedy, group-greedy and randomized group-greedy
//! search under D- and E-optimality.
//!
//! Candidate rows are indexed from zero. The library is organized as:
//!
//! * [`objective`]: objective evaluation, direct and incremental;
//! * [`selection`]: the four selectors and the beam-search engine;
//! * [`sketch`]: seeded sampling of candidate sketches;
//! * [`oracle`]: brute-force references for testing;
//! * [`experiment`]: the multi-trial benchmark harness;
//! * [`cli`]: the command-line front end.

pub mod candidate;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod objective;
pub mod oracle;
pub mod selection;
pub mod sketch;

pub use candidate::{CandidateMatrix, SensorSubset};
pub use error::{Error, Result};
pub use objective::{build_state, eval_direct, eval_extended, extend_state, GramState, ObjectiveKind};
pub use selection::{
    common_greedy, elite_randomized_group_greedy, group_greedy, l_best_search, randomized_group_greedy,
    select_elites, Group, ScoredSubset, SelectorReport, Selector, SketchOptions,
};
pub use sketch::{compose_sketch, sample_without_replacement, SketchConfig, StreamKey};
