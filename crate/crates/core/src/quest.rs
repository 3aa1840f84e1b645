//! Quests: multi-step tasks with a goal count and a completion percentage.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::challenge::{valid_targets, ChallengeKind, GenerationConfig, Outcome};
use crate::ingest::SourceModel;
use crate::progression::UserState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestKind {
    AddTests,
    CoverBranches,
    CoverLines,
    SolveChallengesOfKind,
    SolveWithoutRejection,
}

impl QuestKind {
    pub const ALL: [QuestKind; 5] = [
        QuestKind::AddTests,
        QuestKind::CoverBranches,
        QuestKind::CoverLines,
        QuestKind::SolveChallengesOfKind,
        QuestKind::SolveWithoutRejection,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestState {
    Current,
    Completed,
    Failed,
}

/// Project counters captured when the quest was handed out.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestBaseline {
    pub tests_total: u32,
    pub covered_lines: u32,
    pub covered_branches: u32,
}

impl QuestBaseline {
    pub fn of(model: &SourceModel) -> Self {
        QuestBaseline {
            tests_total: model.tests().total,
            covered_lines: model.lines_covered(),
            covered_branches: model.branches_covered(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quest {
    pub id: String,
    pub kind: QuestKind,
    pub goal: u32,
    pub progress: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<ChallengeKind>,
    pub baseline: QuestBaseline,
    pub state: QuestState,
    pub points: u32,
    pub created_run: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_run: Option<u64>,
}

impl Quest {
    pub fn is_current(&self) -> bool {
        self.state == QuestState::Current
    }

    /// `floor(100 * progress / goal)`.
    pub fn percent(&self) -> u32 {
        percent(self.progress, self.goal)
    }

    pub fn description(&self) -> String {
        let n = self.goal;
        match self.kind {
            QuestKind::AddTests => format!("Add {n} tests to the test suite"),
            QuestKind::CoverBranches => format!("Cover {n} additional branches"),
            QuestKind::CoverLines => format!("Cover {n} additional lines"),
            QuestKind::SolveChallengesOfKind => format!(
                "Solve {n} {} challenges",
                self.constraint.map_or("", ChallengeKind::as_str)
            ),
            QuestKind::SolveWithoutRejection => {
                format!("Solve {n} challenges in a row without rejecting one")
            }
        }
    }
}

pub fn percent(progress: u32, goal: u32) -> u32 {
    if goal == 0 {
        return 100;
    }
    (u64::from(progress.min(goal)) * 100 / u64::from(goal)) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalRange {
    pub min: u32,
    pub max: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestPoints {
    PerGoal(u32),
    Flat(u32),
}

impl QuestPoints {
    fn for_goal(self, goal: u32) -> u32 {
        match self {
            QuestPoints::PerGoal(p) => p * goal,
            QuestPoints::Flat(p) => p,
        }
    }
}

/// What a rejection does to a running solve-without-rejection quest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionPolicy {
    #[default]
    Reset,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestConfig {
    pub kinds: Vec<QuestKind>,
    pub goals: BTreeMap<QuestKind, GoalRange>,
    pub points: BTreeMap<QuestKind, QuestPoints>,
    #[serde(default)]
    pub rejection_policy: RejectionPolicy,
}

impl Default for QuestConfig {
    fn default() -> Self {
        use QuestKind::*;
        let range = |min, max| GoalRange { min, max };
        QuestConfig {
            kinds: QuestKind::ALL.to_vec(),
            goals: BTreeMap::from([
                (AddTests, range(2, 4)),
                (CoverLines, range(3, 8)),
                (CoverBranches, range(2, 5)),
                (SolveChallengesOfKind, range(2, 3)),
                (SolveWithoutRejection, range(2, 3)),
            ]),
            points: BTreeMap::from([
                (AddTests, QuestPoints::PerGoal(1)),
                (CoverLines, QuestPoints::PerGoal(1)),
                (CoverBranches, QuestPoints::PerGoal(2)),
                (SolveChallengesOfKind, QuestPoints::Flat(5)),
                (SolveWithoutRejection, QuestPoints::Flat(5)),
            ]),
            rejection_policy: RejectionPolicy::Reset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuestError {
    #[error("user already has a current quest")]
    QuestAlreadyActive,
    #[error("no quest kind has an attainable goal")]
    NoAttainableQuest,
    #[error("quest kind {0:?} has no valid goal range or points entry")]
    BadConfig(QuestKind),
}

impl QuestConfig {
    pub fn validate(&self) -> Result<(), QuestError> {
        for &kind in &self.kinds {
            let range = self.goals.get(&kind).ok_or(QuestError::BadConfig(kind))?;
            let points = self.points.get(&kind).ok_or(QuestError::BadConfig(kind))?;
            if range.min == 0 || range.min > range.max || points.for_goal(range.min) == 0 {
                return Err(QuestError::BadConfig(kind));
            }
        }
        Ok(())
    }
}

/// Hands out a new quest. Only kinds whose goal can still be reached in
/// `model` take part in the uniform kind draw; for coverage quests the goal is
/// capped by the number of uncovered lines or branches.
pub fn generate_quest<R: Rng + ?Sized>(
    user: &UserState,
    model: &SourceModel,
    config: &QuestConfig,
    challenges: &GenerationConfig,
    run_seq: u64,
    rng: &mut R,
) -> Result<Quest, QuestError> {
    if user.quests.iter().any(Quest::is_current) {
        return Err(QuestError::QuestAlreadyActive);
    }
    config.validate()?;

    let uncovered_lines = model.lines_total() - model.lines_covered();
    let uncovered_branches = model.branches_total() - model.branches_covered();
    let solvable_kinds: Vec<ChallengeKind> = challenges
        .drawable_kinds()
        .into_iter()
        .map(|(k, _)| k)
        .filter(|&k| !valid_targets(model, k).is_empty())
        .collect();

    let mut candidates: Vec<(QuestKind, u32)> = Vec::new();
    for &kind in &config.kinds {
        let range = config.goals[&kind];
        let cap = match kind {
            QuestKind::CoverLines => uncovered_lines,
            QuestKind::CoverBranches => uncovered_branches,
            QuestKind::SolveChallengesOfKind if solvable_kinds.is_empty() => 0,
            _ => range.max,
        };
        if cap >= range.min {
            candidates.push((kind, range.max.min(cap)));
        }
    }
    if candidates.is_empty() {
        return Err(QuestError::NoAttainableQuest);
    }

    let (kind, max_goal) = candidates[rng.gen_range(0..candidates.len())];
    let goal = rng.gen_range(config.goals[&kind].min..=max_goal);
    let constraint = (kind == QuestKind::SolveChallengesOfKind)
        .then(|| solvable_kinds[rng.gen_range(0..solvable_kinds.len())]);

    Ok(Quest {
        id: format!("q{}", user.quests.len() + 1),
        kind,
        goal,
        progress: 0,
        constraint,
        baseline: QuestBaseline::of(model),
        state: QuestState::Current,
        points: config.points[&kind].for_goal(goal),
        created_run: run_seq,
        resolved_run: None,
    })
}

/// What happened to the user's challenges in one run, as seen by quests.
#[derive(Debug, Clone, Default)]
pub struct RunActivity<'a> {
    pub outcomes: &'a [(ChallengeKind, Outcome)],
    /// Rejections made since the previous run.
    pub rejections: u32,
}

/// Advances a current quest by one run.
///
/// Counter-based quests are measured against the quest baseline and never
/// move backwards. Rejections are applied before the run's solves, so a
/// rejection followed by a solve in the same run leaves progress at 1.
pub fn apply_run(
    quest: &Quest,
    _prev_model: &SourceModel,
    new_model: &SourceModel,
    activity: &RunActivity<'_>,
    policy: RejectionPolicy,
    run_seq: u64,
) -> Quest {
    let mut next = quest.clone();
    if !quest.is_current() {
        return next;
    }
    let gain = |now: u32, base: u32| now.saturating_sub(base).min(quest.goal);
    let solved = |filter: &dyn Fn(ChallengeKind) -> bool| {
        activity
            .outcomes
            .iter()
            .filter(|(k, o)| *o == Outcome::Solved && filter(*k))
            .count() as u32
    };

    next.progress = match quest.kind {
        QuestKind::AddTests => quest
            .progress
            .max(gain(new_model.tests().total, quest.baseline.tests_total)),
        QuestKind::CoverLines => quest
            .progress
            .max(gain(new_model.lines_covered(), quest.baseline.covered_lines)),
        QuestKind::CoverBranches => quest
            .progress
            .max(gain(new_model.branches_covered(), quest.baseline.covered_branches)),
        QuestKind::SolveChallengesOfKind => {
            let n = solved(&|k| Some(k) == quest.constraint);
            (quest.progress + n).min(quest.goal)
        }
        QuestKind::SolveWithoutRejection => {
            if activity.rejections > 0 && policy == RejectionPolicy::Fail {
                next.state = QuestState::Failed;
                next.resolved_run = Some(run_seq);
                return next;
            }
            let start = if activity.rejections > 0 { 0 } else { quest.progress };
            (start + solved(&|_| true)).min(quest.goal)
        }
    };
    if next.progress == next.goal {
        next.state = QuestState::Completed;
        next.resolved_run = Some(run_seq);
    }
    next
}

/// Immediate effect of a rejection on a stored quest.
pub fn apply_rejection(quest: &Quest, policy: RejectionPolicy, run_seq: u64) -> Quest {
    let mut next = quest.clone();
    if quest.is_current() && quest.kind == QuestKind::SolveWithoutRejection {
        match policy {
            RejectionPolicy::Reset => next.progress = 0,
            RejectionPolicy::Fail => {
                next.state = QuestState::Failed;
                next.resolved_run = Some(run_seq);
            }
        }
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{assemble_model, ClassCov, LineCov, LineRef, TestId, TestSnapshot};
    use crate::seed;

    fn model(covered: u32, total: u32, tests: u32) -> SourceModel {
        let lines = (1..=total)
            .map(|n| LineCov {
                line_ref: LineRef {
                    file: "A.java".into(),
                    class_name: "A".into(),
                    line: n,
                },
                hits: u64::from(n <= covered),
                branch_total: 0,
                branch_covered: 0,
            })
            .collect();
        let class = ClassCov::new("A".into(), "A.java".into(), vec![], lines);
        let test_ids = (0..tests)
            .map(|i| TestId {
                classname: "T".into(),
                name: format!("t{i}"),
            })
            .collect();
        assemble_model(
            vec![class],
            vec![],
            TestSnapshot {
                total: tests,
                test_ids,
                ..Default::default()
            },
        )
        .unwrap()
    }

    fn quest(kind: QuestKind, goal: u32, baseline: QuestBaseline) -> Quest {
        Quest {
            id: "q1".into(),
            kind,
            goal,
            progress: 0,
            constraint: (kind == QuestKind::SolveChallengesOfKind).then_some(ChallengeKind::Mutation),
            baseline,
            state: QuestState::Current,
            points: 5,
            created_run: 1,
            resolved_run: None,
        }
    }

    fn user() -> UserState {
        UserState::new("u1", "User One", 0, None)
    }

    #[test]
    fn percent_floors() {
        assert_eq!(percent(0, 3), 0);
        assert_eq!(percent(1, 3), 33);
        assert_eq!(percent(2, 3), 66);
        assert_eq!(percent(3, 3), 100);
    }

    #[test]
    fn add_tests_progression() {
        let base = model(0, 5, 10);
        let mut q = quest(QuestKind::AddTests, 3, QuestBaseline::of(&base));
        let mut percents = Vec::new();
        for (run, tests) in [(2, 11), (3, 12), (4, 13)] {
            q = apply_run(&q, &base, &model(0, 5, tests), &RunActivity::default(), RejectionPolicy::Reset, run);
            percents.push(q.percent());
        }
        assert_eq!(percents, [33, 66, 100]);
        assert_eq!(q.state, QuestState::Completed);
        assert_eq!(q.resolved_run, Some(4));
    }

    #[test]
    fn progress_never_regresses_or_goes_negative() {
        let base = model(3, 10, 10);
        let q = quest(QuestKind::CoverLines, 5, QuestBaseline::of(&base));
        let q = apply_run(&q, &base, &model(5, 10, 10), &RunActivity::default(), RejectionPolicy::Reset, 2);
        assert_eq!(q.progress, 2);
        let q = apply_run(&q, &base, &model(1, 10, 10), &RunActivity::default(), RejectionPolicy::Reset, 3);
        assert_eq!(q.progress, 2);
        let q = apply_run(&q, &base, &model(10, 10, 10), &RunActivity::default(), RejectionPolicy::Reset, 4);
        assert_eq!((q.progress, q.state), (5, QuestState::Completed));
    }

    #[test]
    fn cover_lines_clamps_at_goal() {
        let base = model(0, 10, 0);
        let q = quest(QuestKind::CoverLines, 5, QuestBaseline::of(&base));
        let q = apply_run(&q, &base, &model(7, 10, 0), &RunActivity::default(), RejectionPolicy::Reset, 2);
        assert_eq!(q.progress, 5);
        assert_eq!(q.state, QuestState::Completed);
    }

    #[test]
    fn rejection_resets_solve_without_rejection() {
        let m = model(0, 5, 1);
        let mut q = quest(QuestKind::SolveWithoutRejection, 3, QuestBaseline::of(&m));
        q.progress = 2;
        let after = apply_run(&q, &m, &m, &RunActivity { outcomes: &[], rejections: 1 }, RejectionPolicy::Reset, 5);
        assert_eq!(after.progress, 0);
        assert!(after.is_current());

        let solved = [(ChallengeKind::LineCoverage, Outcome::Solved)];
        let after = apply_run(&q, &m, &m, &RunActivity { outcomes: &solved, rejections: 1 }, RejectionPolicy::Reset, 5);
        assert_eq!(after.progress, 1);

        let failed = apply_run(&q, &m, &m, &RunActivity { outcomes: &[], rejections: 1 }, RejectionPolicy::Fail, 5);
        assert_eq!(failed.state, QuestState::Failed);

        assert_eq!(apply_rejection(&q, RejectionPolicy::Reset, 5).progress, 0);
        let other = quest(QuestKind::AddTests, 3, QuestBaseline::of(&m));
        assert_eq!(apply_rejection(&other, RejectionPolicy::Reset, 5), other);
    }

    #[test]
    fn solve_of_kind_counts_matching_solves_only() {
        let m = model(0, 5, 1);
        let q = quest(QuestKind::SolveChallengesOfKind, 2, QuestBaseline::of(&m));
        let outcomes = [
            (ChallengeKind::Mutation, Outcome::Solved),
            (ChallengeKind::LineCoverage, Outcome::Solved),
            (ChallengeKind::Mutation, Outcome::Expired),
        ];
        let q = apply_run(&q, &m, &m, &RunActivity { outcomes: &outcomes, rejections: 0 }, RejectionPolicy::Reset, 2);
        assert_eq!(q.progress, 1);
        assert_eq!(q.percent(), 50);
    }

    #[test]
    fn cover_lines_excluded_without_uncovered_lines() {
        let full = model(5, 5, 2);
        let config = QuestConfig::default();
        for s in 0..200 {
            let q = generate_quest(&user(), &full, &config, &GenerationConfig::default(), 1, &mut seed::rng(s)).unwrap();
            assert_ne!(q.kind, QuestKind::CoverLines);
            assert_ne!(q.kind, QuestKind::CoverBranches);
        }
    }

    #[test]
    fn generated_fields_and_determinism() {
        let m = model(0, 5, 10);
        let config = QuestConfig {
            kinds: vec![QuestKind::AddTests],
            ..Default::default()
        };
        let q = generate_quest(&user(), &m, &config, &GenerationConfig::default(), 1, &mut seed::rng(4)).unwrap();
        assert_eq!(q.kind, QuestKind::AddTests);
        assert!((2..=4).contains(&q.goal));
        assert_eq!(q.points, q.goal);
        assert_eq!(q.baseline.tests_total, 10);
        let again = generate_quest(&user(), &m, &config, &GenerationConfig::default(), 1, &mut seed::rng(4)).unwrap();
        assert_eq!(q, again);
    }

    #[test]
    fn coverage_goal_capped_by_gap() {
        let m = model(1, 5, 0);
        let config = QuestConfig {
            kinds: vec![QuestKind::CoverLines],
            ..Default::default()
        };
        for s in 0..50 {
            let q = generate_quest(&user(), &m, &config, &GenerationConfig::default(), 1, &mut seed::rng(s)).unwrap();
            assert!((3..=4).contains(&q.goal));
        }
        let tight = model(3, 5, 0);
        assert_eq!(
            generate_quest(&user(), &tight, &config, &GenerationConfig::default(), 1, &mut seed::rng(0)),
            Err(QuestError::NoAttainableQuest)
        );
    }

    #[test]
    fn one_quest_at_a_time() {
        let m = model(0, 5, 0);
        let mut u = user();
        u.quests.push(quest(QuestKind::AddTests, 2, QuestBaseline::default()));
        assert_eq!(
            generate_quest(&u, &m, &QuestConfig::default(), &GenerationConfig::default(), 1, &mut seed::rng(0)),
            Err(QuestError::QuestAlreadyActive)
        );
    }
}
