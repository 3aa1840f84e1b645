//! Per-user interaction statistics, their aggregates, and test suite quality
//! metrics. Everything here reads finished state and never mutates it.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::challenge::{ChallengeKind, ChallengeState};
use crate::ingest::SourceModel;
use crate::orchestrator::{solved_by_kind, ProjectState, Store, StoreError};
use crate::quest::QuestState;

/// Quality of a test suite as measured by one run. A ratio whose denominator
/// is zero is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteMetrics {
    pub tests: u32,
    pub line_coverage: Option<f64>,
    pub branch_coverage: Option<f64>,
    /// Killed and timed-out mutants over all mutants.
    pub mutation_score: Option<f64>,
}

fn ratio(num: u32, den: u32) -> Option<f64> {
    (den > 0).then(|| f64::from(num) / f64::from(den))
}

pub fn suite_metrics(model: &SourceModel) -> SuiteMetrics {
    let detected = model.mutants().iter().filter(|m| m.status.is_detected()).count();
    SuiteMetrics {
        tests: model.tests().total,
        line_coverage: ratio(model.lines_covered(), model.lines_total()),
        branch_coverage: ratio(model.branches_covered(), model.branches_total()),
        mutation_score: ratio(detected as u32, model.mutants().len() as u32),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserStats {
    pub user_id: String,
    pub team: Option<String>,
    pub solved_by_kind: BTreeMap<ChallengeKind, u64>,
    pub solved: u64,
    pub rejected: u64,
    pub expired: u64,
    pub quests_completed: u64,
    pub runs: u64,
    pub score: u64,
}

pub fn user_stats(project: &ProjectState) -> Vec<UserStats> {
    project
        .users
        .values()
        .map(|record| {
            let user = &record.state;
            let count = |s| user.challenges_in(s).count() as u64;
            UserStats {
                user_id: user.user_id.clone(),
                team: user.team.clone(),
                solved_by_kind: solved_by_kind(user),
                solved: count(ChallengeState::Solved),
                rejected: count(ChallengeState::Rejected),
                expired: count(ChallengeState::Expired),
                quests_completed: user.quests_in(QuestState::Completed).count() as u64,
                runs: record.runs.len() as u64,
                score: user.score,
            }
        })
        .collect()
}

/// Statistics of a project as stored on disk.
pub fn load_stats(store: &Store, project_id: &str) -> Result<Vec<UserStats>, StoreError> {
    Ok(user_stats(&store.load(project_id)?))
}

/// An exact non-negative fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    /// Value in tenths, rounded half-up.
    pub fn tenths(self) -> u64 {
        let (num, den) = (u128::from(self.num), u128::from(self.den));
        ((20 * num + den) / (2 * den)) as u64
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Fraction {
    /// One decimal, rounded half-up.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.tenths();
        write!(f, "{}.{}", t / 10, t % 10)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub total: u64,
    pub min: u64,
    pub max: u64,
    pub mean: f64,
    /// `mean` rounded to one decimal.
    pub mean_display: String,
    pub mean_exact: Fraction,
}

impl MetricSummary {
    fn of(values: &[u64]) -> Self {
        let total: u64 = values.iter().sum();
        let mean_exact = Fraction {
            num: total,
            den: values.len() as u64,
        };
        MetricSummary {
            total,
            min: values.iter().copied().min().unwrap_or(0),
            max: values.iter().copied().max().unwrap_or(0),
            mean: mean_exact.to_f64(),
            mean_display: mean_exact.to_string(),
            mean_exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub users: u64,
    pub challenges_solved: MetricSummary,
    pub challenges_rejected: MetricSummary,
    pub challenges_expired: MetricSummary,
    pub quests_completed: MetricSummary,
    pub runs: MetricSummary,
    pub score: MetricSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("the project has no users")]
pub struct EmptyProject;

pub fn aggregate(rows: &[UserStats]) -> Result<Aggregate, EmptyProject> {
    if rows.is_empty() {
        return Err(EmptyProject);
    }
    let metric = |f: fn(&UserStats) -> u64| MetricSummary::of(&rows.iter().map(f).collect::<Vec<_>>());
    Ok(Aggregate {
        users: rows.len() as u64,
        challenges_solved: metric(|r| r.solved),
        challenges_rejected: metric(|r| r.rejected),
        challenges_expired: metric(|r| r.expired),
        quests_completed: metric(|r| r.quests_completed),
        runs: metric(|r| r.runs),
        score: metric(|r| r.score),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown export format {0:?}, expected csv or json")]
pub struct UnknownFormat(pub String);

impl FromStr for Format {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(UnknownFormat(other.to_owned())),
        }
    }
}

impl Format {
    pub fn content_type(self) -> &'static str {
        match self {
            Format::Csv => "text/csv; charset=utf-8",
            Format::Json => "application/json",
        }
    }
}

/// CSV column names, in order.
pub fn csv_header() -> Vec<String> {
    let mut header: Vec<String> = ["user_id", "team"].map(String::from).into();
    header.extend(ChallengeKind::ALL.iter().map(|k| format!("solved_{}", k.as_str())));
    header.extend(
        ["solved", "rejected", "expired", "quests_completed", "runs", "score"].map(String::from),
    );
    header
}

pub fn export(rows: &[UserStats], format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(rows).expect("stats serialize");
            out.push(b'\n');
            out
        }
        Format::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer.write_record(csv_header()).expect("write to memory");
            for row in rows {
                let mut record = vec![row.user_id.clone(), row.team.clone().unwrap_or_default()];
                record.extend(
                    ChallengeKind::ALL
                        .iter()
                        .map(|k| row.solved_by_kind.get(k).copied().unwrap_or(0).to_string()),
                );
                record.extend(
                    [row.solved, row.rejected, row.expired, row.quests_completed, row.runs, row.score]
                        .map(|n| n.to_string()),
                );
                writer.write_record(record).expect("write to memory");
            }
            writer.into_inner().expect("flush to memory")
        }
    }
}

pub fn import_json(bytes: &[u8]) -> Result<Vec<UserStats>, serde_json::Error> {
    serde_json::from_slice(bytes)
}
