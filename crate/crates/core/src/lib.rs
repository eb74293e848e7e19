//! Elo ratings with a graph-embedding adjustment (GElo).
//!
//! The crate replays match histories with Elo, builds a skill gap graph from
//! head-to-head records, embeds players with random walks and skip-gram
//! training, and rewards active players by their similarity to the top-rated
//! active player. A sliding-window harness compares both systems.
//!
//! ```
//! use gelo::elo::{replay, KFactor, DEFAULT_RATING};
//! use gelo::matches::{Dataset, MatchRecord};
//!
//! let ds = Dataset::from_matches(vec![MatchRecord::duel(0, "alice", "bob").unwrap()]);
//! let table = replay(&ds, KFactor::default(), DEFAULT_RATING);
//! assert_eq!(table.get(&"alice".parse().unwrap()), 1525.0);
//! ```

pub mod adjust;
pub mod cli;
pub mod elo;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod graph;
pub mod matches;
pub mod pipeline;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
pub use matches::{Dataset, MatchRecord, PlayerId, Winner};
