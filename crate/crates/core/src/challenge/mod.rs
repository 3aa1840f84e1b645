//! Challenges: single test-improvement tasks generated from the gaps of a
//! [`SourceModel`](crate::SourceModel), priced by difficulty and resolved by
//! comparing consecutive runs.

mod evaluate;
mod generate;
mod select;
mod targets;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{LineRef, MutantKey};

pub use evaluate::{evaluate, Outcome};
pub use generate::{generate, RunContext};
pub use select::{select_class, NoEligibleClass};
pub use targets::valid_targets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildStatus {
    Success,
    Failure,
}

impl BuildStatus {
    pub fn is_success(self) -> bool {
        self == BuildStatus::Success
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChallengeKind {
    Build,
    Test,
    ClassCoverage,
    MethodCoverage,
    LineCoverage,
    BranchCoverage,
    Mutation,
}

impl ChallengeKind {
    pub const ALL: [ChallengeKind; 7] = [
        ChallengeKind::Build,
        ChallengeKind::Test,
        ChallengeKind::ClassCoverage,
        ChallengeKind::MethodCoverage,
        ChallengeKind::LineCoverage,
        ChallengeKind::BranchCoverage,
        ChallengeKind::Mutation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChallengeKind::Build => "build",
            ChallengeKind::Test => "test",
            ChallengeKind::ClassCoverage => "class_coverage",
            ChallengeKind::MethodCoverage => "method_coverage",
            ChallengeKind::LineCoverage => "line_coverage",
            ChallengeKind::BranchCoverage => "branch_coverage",
            ChallengeKind::Mutation => "mutation",
        }
    }
}

impl fmt::Display for ChallengeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a challenge points at.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Target {
    /// Build and test challenges are not tied to any code location.
    None,
    Class {
        class_name: String,
    },
    Method {
        class_name: String,
        method_name: String,
        signature: String,
    },
    Line(LineRef),
    Mutant(MutantKey),
}

impl Target {
    pub fn class_name(&self) -> Option<&str> {
        match self {
            Target::None => None,
            Target::Class { class_name } | Target::Method { class_name, .. } => Some(class_name),
            Target::Line(line) => Some(&line.class_name),
            Target::Mutant(key) => Some(&key.class_name),
        }
    }
}

/// Metrics captured when a challenge is generated. Improvement is always
/// measured against these, never against the previous run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Baseline {
    pub tests_total: u32,
    /// Covered lines of the target class or method, or covered branches of
    /// the target line, depending on the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_covered: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChallengeState {
    Current,
    Solved,
    Rejected,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LifecycleError {
    #[error("challenge {id} is {state:?}, not current")]
    NotCurrent { id: String, state: ChallengeState },
    #[error("a rejection needs a non-empty reason")]
    EmptyReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Challenge {
    pub id: String,
    pub kind: ChallengeKind,
    pub target: Target,
    pub baseline: Baseline,
    pub points: u32,
    pub state: ChallengeState,
    pub created_run: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_run: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection_reason: Option<String>,
    /// Human-readable task text, e.g. the mutant description.
    pub description: String,
}

impl Challenge {
    pub fn is_current(&self) -> bool {
        self.state == ChallengeState::Current
    }

    fn close(&mut self, state: ChallengeState, run: u64) -> Result<(), LifecycleError> {
        if !self.is_current() {
            return Err(LifecycleError::NotCurrent {
                id: self.id.clone(),
                state: self.state,
            });
        }
        self.state = state;
        self.resolved_run = Some(run);
        Ok(())
    }

    pub fn solve(&mut self, run: u64) -> Result<(), LifecycleError> {
        self.close(ChallengeState::Solved, run)
    }

    pub fn expire(&mut self, run: u64) -> Result<(), LifecycleError> {
        self.close(ChallengeState::Expired, run)
    }

    pub fn reject(&mut self, run: u64, reason: &str) -> Result<(), LifecycleError> {
        let reason = reason.trim();
        if reason.is_empty() {
            return Err(LifecycleError::EmptyReason);
        }
        self.close(ChallengeState::Rejected, run)?;
        self.rejection_reason = Some(reason.to_owned());
        Ok(())
    }

    /// Checks the state/field coupling: `resolved_run` is set iff the
    /// challenge is closed, and a reason is present iff it was rejected.
    pub fn is_consistent(&self) -> bool {
        let closed = self.state != ChallengeState::Current;
        let rejected = self.state == ChallengeState::Rejected;
        self.points > 0
            && self.resolved_run.is_some() == closed
            && self.rejection_reason.is_some() == rejected
            && self.rejection_reason.as_ref().is_none_or(|r| !r.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("max_current must be at least 1")]
    ZeroMaxCurrent,
    #[error("weight for {0} must be finite and non-negative")]
    BadWeight(ChallengeKind),
    #[error("build challenges are event-driven and cannot carry a draw weight")]
    BuildWeighted,
    #[error("all challenge weights are zero")]
    AllWeightsZero,
    #[error("points for {0} must be positive")]
    ZeroPoints(ChallengeKind),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub max_current: usize,
    pub kind_weights: BTreeMap<ChallengeKind, f64>,
    pub points_table: BTreeMap<ChallengeKind, u32>,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        use ChallengeKind::*;
        GenerationConfig {
            max_current: 3,
            kind_weights: BTreeMap::from([
                (Mutation, 0.30),
                (LineCoverage, 0.30),
                (BranchCoverage, 0.15),
                (MethodCoverage, 0.10),
                (ClassCoverage, 0.10),
                (Test, 0.05),
            ]),
            points_table: default_points_table(),
            seed: 0,
        }
    }
}

pub fn default_points_table() -> BTreeMap<ChallengeKind, u32> {
    use ChallengeKind::*;
    BTreeMap::from([
        (Build, 1),
        (Test, 1),
        (ClassCoverage, 2),
        (MethodCoverage, 2),
        (LineCoverage, 2),
        (BranchCoverage, 3),
        (Mutation, 4),
    ])
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_current == 0 {
            return Err(ConfigError::ZeroMaxCurrent);
        }
        for (&kind, &weight) in &self.kind_weights {
            if !weight.is_finite() || weight < 0.0 {
                return Err(ConfigError::BadWeight(kind));
            }
            if kind == ChallengeKind::Build && weight > 0.0 {
                return Err(ConfigError::BuildWeighted);
            }
        }
        if !self.kind_weights.values().any(|&w| w > 0.0) {
            return Err(ConfigError::AllWeightsZero);
        }
        if let Some((&kind, _)) = self.points_table.iter().find(|(_, &p)| p == 0) {
            return Err(ConfigError::ZeroPoints(kind));
        }
        Ok(())
    }

    /// Kinds eligible for the weighted draw, in canonical order.
    pub fn drawable_kinds(&self) -> Vec<(ChallengeKind, f64)> {
        self.kind_weights
            .iter()
            .filter(|(&k, &w)| k != ChallengeKind::Build && w > 0.0)
            .map(|(&k, &w)| (k, w))
            .collect()
    }
}

/// Points awarded for solving a challenge of `kind`. Kinds missing from a
/// custom table fall back to the default price.
pub fn points_for(kind: ChallengeKind, config: &GenerationConfig) -> u32 {
    match config.points_table.get(&kind) {
        Some(&points) => points,
        None => default_points_table()[&kind],
    }
}
