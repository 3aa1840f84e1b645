//! Gamified test-gap engine.
//!
//! Coverage and mutation-analysis gaps found in CI artifacts are turned into
//! challenges and quests; solving them earns points, unlocks achievements and
//! moves users up the leaderboard. Everything is evaluated run by run.

pub mod analytics;
pub mod challenge;
pub mod ingest;
pub mod orchestrator;
pub mod progression;
pub mod quest;
mod seed;

pub use ingest::{assemble_model, parse_coverage, parse_mutations, parse_test_results, SourceModel};
