//! Points, achievements and rankings.

mod achievements;
mod leaderboard;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::challenge::{Challenge, ChallengeKind, ChallengeState};
use crate::quest::{Quest, QuestState};

pub use achievements::{
    check_achievements, default_catalog, AchievementDef, AchievementRule, AchievementScope,
};
pub use leaderboard::{compare_rows, leaderboard, team_leaderboard, LeaderboardRow};

/// Number of selectable avatars; indices run from 0 to `AVATAR_COUNT - 1`.
pub const AVATAR_COUNT: u8 = 50;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unlock {
    pub run_seq: u64,
    pub unlocked_at: DateTime<Utc>,
    /// Position in the user's unlock history, starting at 1.
    pub ordinal: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserState {
    pub user_id: String,
    pub display_name: String,
    pub avatar_index: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub team: Option<String>,
    pub score: u64,
    pub challenges: Vec<Challenge>,
    pub quests: Vec<Quest>,
    pub achievements: BTreeMap<String, Unlock>,
    /// Sum of positive run-to-run increases of the test count.
    #[serde(default)]
    pub tests_added: u64,
    pub event_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AccountingError {
    #[error("challenge {0} awarded twice")]
    DoubleAward(String),
    #[error("quest {0} awarded twice")]
    DoubleQuestAward(String),
    #[error("challenge {0} does not belong to this user")]
    UnknownChallenge(String),
    #[error("quest {0} does not belong to this user")]
    UnknownQuest(String),
    #[error("challenge {0} is not in the solved state")]
    NotSolved(String),
    #[error("quest {0} is not in the completed state")]
    NotCompleted(String),
}

impl UserState {
    pub fn new(user_id: &str, display_name: &str, avatar_index: u8, team: Option<String>) -> Self {
        UserState {
            user_id: user_id.to_owned(),
            display_name: display_name.to_owned(),
            avatar_index,
            team,
            score: 0,
            challenges: Vec::new(),
            quests: Vec::new(),
            achievements: BTreeMap::new(),
            tests_added: 0,
            event_seq: 0,
        }
    }

    pub fn challenges_in(&self, state: ChallengeState) -> impl Iterator<Item = &Challenge> {
        self.challenges.iter().filter(move |c| c.state == state)
    }

    pub fn quests_in(&self, state: QuestState) -> impl Iterator<Item = &Quest> {
        self.quests.iter().filter(move |q| q.state == state)
    }

    pub fn current_quest(&self) -> Option<&Quest> {
        self.quests.iter().find(|q| q.is_current())
    }

    pub fn solved_count(&self) -> usize {
        self.challenges_in(ChallengeState::Solved).count()
    }

    pub fn solved_of_kind(&self, kind: ChallengeKind) -> usize {
        self.challenges_in(ChallengeState::Solved)
            .filter(|c| c.kind == kind)
            .count()
    }

    pub fn completed_quest_count(&self) -> usize {
        self.quests_in(QuestState::Completed).count()
    }

    /// Score rebuilt from the item lists; must always equal `score`.
    pub fn recompute_score(&self) -> u64 {
        let challenges: u64 = self
            .challenges_in(ChallengeState::Solved)
            .map(|c| u64::from(c.points))
            .sum();
        let quests: u64 = self
            .quests_in(QuestState::Completed)
            .map(|q| u64::from(q.points))
            .sum();
        challenges + quests
    }

    pub fn score_is_consistent(&self) -> bool {
        self.score == self.recompute_score()
    }

    pub fn unlock(&mut self, key: &str, run_seq: u64, at: DateTime<Utc>) -> bool {
        if self.achievements.contains_key(key) {
            return false;
        }
        let ordinal = self.achievements.len() as u32 + 1;
        self.achievements.insert(
            key.to_owned(),
            Unlock {
                run_seq,
                unlocked_at: at,
                ordinal,
            },
        );
        true
    }
}

/// Credits solved challenges and completed quests.
///
/// The inputs are the resolved versions of items the user already holds as
/// current; they replace the stored entries and their points are added to the
/// score. Awarding an item that was already awarded, or listing it twice, is
/// an [`AccountingError`] and leaves the state untouched.
pub fn apply_outcomes(
    state: &UserState,
    solved: &[Challenge],
    completed_quests: &[Quest],
) -> Result<UserState, AccountingError> {
    let mut next = state.clone();
    let mut seen = BTreeSet::new();
    for challenge in solved {
        if challenge.state != ChallengeState::Solved {
            return Err(AccountingError::NotSolved(challenge.id.clone()));
        }
        if !seen.insert(challenge.id.as_str()) {
            return Err(AccountingError::DoubleAward(challenge.id.clone()));
        }
        let slot = next
            .challenges
            .iter_mut()
            .find(|c| c.id == challenge.id)
            .ok_or_else(|| AccountingError::UnknownChallenge(challenge.id.clone()))?;
        if slot.state == ChallengeState::Solved {
            return Err(AccountingError::DoubleAward(challenge.id.clone()));
        }
        *slot = challenge.clone();
        next.score += u64::from(challenge.points);
    }

    let mut seen = BTreeSet::new();
    for quest in completed_quests {
        if quest.state != QuestState::Completed {
            return Err(AccountingError::NotCompleted(quest.id.clone()));
        }
        if !seen.insert(quest.id.as_str()) {
            return Err(AccountingError::DoubleQuestAward(quest.id.clone()));
        }
        let slot = next
            .quests
            .iter_mut()
            .find(|q| q.id == quest.id)
            .ok_or_else(|| AccountingError::UnknownQuest(quest.id.clone()))?;
        if slot.state == QuestState::Completed {
            return Err(AccountingError::DoubleQuestAward(quest.id.clone()));
        }
        *slot = quest.clone();
        next.score += u64::from(quest.points);
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::challenge::{Baseline, Target};
    use crate::quest::{QuestBaseline, QuestKind};

    fn challenge(id: &str, kind: ChallengeKind, points: u32) -> Challenge {
        Challenge {
            id: id.into(),
            kind,
            target: Target::None,
            baseline: Baseline::default(),
            points,
            state: ChallengeState::Current,
            created_run: 1,
            resolved_run: None,
            rejection_reason: None,
            description: String::new(),
        }
    }

    fn solved(mut c: Challenge) -> Challenge {
        c.solve(2).unwrap();
        c
    }

    fn user_with(challenges: Vec<Challenge>) -> UserState {
        let mut u = UserState::new("u", "U", 3, None);
        u.challenges = challenges;
        u
    }

    #[test]
    fn points_are_summed() {
        let line = challenge("c1", ChallengeKind::LineCoverage, 2);
        let mutation = challenge("c2", ChallengeKind::Mutation, 4);
        let user = user_with(vec![line.clone(), mutation.clone()]);
        let next = apply_outcomes(&user, &[solved(line), solved(mutation)], &[]).unwrap();
        assert_eq!(next.score, 6);
        assert_eq!(next.solved_count(), 2);
        assert!(next.score_is_consistent());
    }

    #[test]
    fn empty_inputs_change_nothing() {
        let user = user_with(vec![challenge("c1", ChallengeKind::Test, 1)]);
        assert_eq!(apply_outcomes(&user, &[], &[]).unwrap(), user);
    }

    #[test]
    fn double_award_is_rejected() {
        let c = challenge("c1", ChallengeKind::LineCoverage, 2);
        let user = user_with(vec![c.clone()]);
        assert_eq!(
            apply_outcomes(&user, &[solved(c.clone()), solved(c.clone())], &[]),
            Err(AccountingError::DoubleAward("c1".into()))
        );
        let once = apply_outcomes(&user, &[solved(c.clone())], &[]).unwrap();
        assert_eq!(
            apply_outcomes(&once, &[solved(c)], &[]),
            Err(AccountingError::DoubleAward("c1".into()))
        );
    }

    #[test]
    fn foreign_or_unsolved_items() {
        let user = user_with(vec![]);
        let c = challenge("c9", ChallengeKind::Test, 1);
        assert_eq!(
            apply_outcomes(&user, &[solved(c.clone())], &[]),
            Err(AccountingError::UnknownChallenge("c9".into()))
        );
        assert_eq!(
            apply_outcomes(&user, &[c], &[]),
            Err(AccountingError::NotSolved("c9".into()))
        );
    }

    #[test]
    fn quests_are_credited() {
        let mut q = Quest {
            id: "q1".into(),
            kind: QuestKind::AddTests,
            goal: 3,
            progress: 2,
            constraint: None,
            baseline: QuestBaseline::default(),
            state: QuestState::Current,
            points: 3,
            created_run: 1,
            resolved_run: None,
        };
        let mut user = user_with(vec![]);
        user.quests.push(q.clone());
        q.progress = 3;
        q.state = QuestState::Completed;
        q.resolved_run = Some(4);
        let next = apply_outcomes(&user, &[], &[q.clone()]).unwrap();
        assert_eq!(next.score, 3);
        assert!(next.score_is_consistent());
        assert_eq!(
            apply_outcomes(&next, &[], &[q]),
            Err(AccountingError::DoubleQuestAward("q1".into()))
        );
    }
}
