use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::UserState;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    /// User id for individual rows, team name for team rows.
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avatar_index: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub team: Option<String>,
    pub score: u64,
    pub solved_challenges: u64,
    pub completed_quests: u64,
    pub achievements: u64,
    /// 1 for individual rows.
    pub members: u64,
}

/// Score descending, then solved challenges descending, then name and id
/// ascending. The id makes the order total even for equal display names.
pub fn compare_rows(a: &LeaderboardRow, b: &LeaderboardRow) -> Ordering {
    b.score
        .cmp(&a.score)
        .then(b.solved_challenges.cmp(&a.solved_challenges))
        .then_with(|| a.name.cmp(&b.name))
        .then_with(|| a.id.cmp(&b.id))
}

fn row(user: &UserState) -> LeaderboardRow {
    LeaderboardRow {
        id: user.user_id.clone(),
        name: user.display_name.clone(),
        avatar_index: Some(user.avatar_index),
        team: user.team.clone(),
        score: user.score,
        solved_challenges: user.solved_count() as u64,
        completed_quests: user.completed_quest_count() as u64,
        achievements: user.achievements.len() as u64,
        members: 1,
    }
}

pub fn leaderboard<'a>(users: impl IntoIterator<Item = &'a UserState>) -> Vec<LeaderboardRow> {
    let mut rows: Vec<_> = users.into_iter().map(row).collect();
    rows.sort_by(compare_rows);
    rows
}

/// One row per team with member sums. Users without a team are left out.
pub fn team_leaderboard<'a>(users: impl IntoIterator<Item = &'a UserState>) -> Vec<LeaderboardRow> {
    let mut teams: BTreeMap<&str, LeaderboardRow> = BTreeMap::new();
    for user in users {
        let Some(team) = user.team.as_deref() else {
            continue;
        };
        let member = row(user);
        let entry = teams.entry(team).or_insert_with(|| LeaderboardRow {
            id: team.to_owned(),
            name: team.to_owned(),
            avatar_index: None,
            team: None,
            score: 0,
            solved_challenges: 0,
            completed_quests: 0,
            achievements: 0,
            members: 0,
        });
        entry.score += member.score;
        entry.solved_challenges += member.solved_challenges;
        entry.completed_quests += member.completed_quests;
        entry.achievements += member.achievements;
        entry.members += 1;
    }
    let mut rows: Vec<_> = teams.into_values().collect();
    rows.sort_by(compare_rows);
    rows
}
