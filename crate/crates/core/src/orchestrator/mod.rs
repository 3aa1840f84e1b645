//! The per-run pipeline, rejections, the event log and durable state.
//!
//! [`ProjectState`] holds the in-memory transitions; [`Store`] persists them
//! and [`ProjectHandle`] serializes writers while letting readers see the last
//! committed snapshot.

mod events;
mod handle;
mod store;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::challenge::{
    evaluate, generate, BuildStatus, Challenge, ChallengeKind, ChallengeState, GenerationConfig,
    Outcome, RunContext,
};
use crate::ingest::{parse_run, IngestError, SourceModel};
use crate::progression::{
    apply_outcomes, check_achievements, default_catalog, leaderboard, team_leaderboard,
    AccountingError, AchievementDef, AchievementScope, LeaderboardRow, UserState, AVATAR_COUNT,
};
use crate::quest::{
    apply_rejection, apply_run, generate_quest, QuestConfig, QuestState, RunActivity,
};
use crate::seed;

pub use events::{Event, EventKind, EventPayload, RunReport};
pub use handle::ProjectHandle;
pub use store::{Store, StoreError, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectConfig {
    pub generation: GenerationConfig,
    pub quests: QuestConfig,
    pub achievements: Vec<AchievementDef>,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        ProjectConfig {
            generation: GenerationConfig::default(),
            quests: QuestConfig::default(),
            achievements: default_catalog(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactDigests {
    pub coverage: String,
    pub mutations: String,
    pub tests: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_seq: u64,
    pub commit: String,
    pub build_status: BuildStatus,
    pub received_at: DateTime<Utc>,
    pub digests: ArtifactDigests,
    /// Set when the artifacts could not be ingested; such runs change nothing
    /// but the run history.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingest_error: Option<String>,
}

/// Everything delivered by one CI run.
#[derive(Debug, Clone)]
pub struct RunInput {
    pub commit: String,
    pub build_status: BuildStatus,
    pub received_at: DateTime<Utc>,
    pub coverage: Vec<u8>,
    pub mutations: Vec<u8>,
    pub tests: Vec<Vec<u8>>,
    /// When set, the run is refused unless it would get exactly this number.
    pub expected_run_seq: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub state: UserState,
    pub runs: Vec<RunRecord>,
    /// Model of the latest successfully ingested run.
    pub prev_model: Option<SourceModel>,
    /// Rejections made since the latest run, applied to quests by the next one.
    pub pending_rejections: u32,
    pub events: Vec<Event>,
}

impl UserRecord {
    fn new(state: UserState) -> Self {
        UserRecord {
            state,
            runs: Vec::new(),
            prev_model: None,
            pending_rejections: 0,
            events: Vec::new(),
        }
    }

    pub fn last_run_seq(&self) -> u64 {
        self.runs.last().map_or(0, |r| r.run_seq)
    }

    fn push_event(&mut self, run_seq: u64, (kind, payload): (EventKind, EventPayload)) -> Event {
        self.state.event_seq += 1;
        let event = Event {
            seq: self.state.event_seq,
            run_seq,
            kind,
            payload,
        };
        self.events.push(event.clone());
        event
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("user {0} is not registered")]
    NotRegistered(String),
    #[error("user {0} already exists")]
    DuplicateUser(String),
    #[error("run {run_seq} could not be ingested: {source}")]
    Ingest {
        run_seq: u64,
        #[source]
        source: IngestError,
    },
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Conflict(String),
    #[error("challenge {0} not found")]
    UnknownChallenge(String),
    #[error("accounting invariant violated: {0}")]
    Accounting(#[from] AccountingError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Identifiers double as file names, so they are restricted to a safe set.
pub fn validate_id(kind: &str, id: &str) -> Result<(), EngineError> {
    let ok = !id.is_empty()
        && id.len() <= 64
        && !id.starts_with('.')
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'));
    if ok {
        Ok(())
    } else {
        Err(EngineError::Validation(format!(
            "{kind} id {id:?} must be 1-64 characters of [A-Za-z0-9._-] and not start with '.'"
        )))
    }
}

fn validate_commit(commit: &str) -> Result<(), EngineError> {
    if (4..=64).contains(&commit.len()) && commit.bytes().all(|b| b.is_ascii_hexdigit()) {
        Ok(())
    } else {
        Err(EngineError::Validation(format!(
            "commit {commit:?} must be 4-64 hex characters"
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectState {
    pub project_id: String,
    pub config: ProjectConfig,
    pub users: BTreeMap<String, UserRecord>,
}

impl ProjectState {
    pub fn new(project_id: &str, config: ProjectConfig) -> Result<Self, EngineError> {
        validate_id("project", project_id)?;
        config
            .generation
            .validate()
            .map_err(|e| EngineError::Validation(e.to_string()))?;
        config
            .quests
            .validate()
            .map_err(|e| EngineError::Validation(e.to_string()))?;
        Ok(ProjectState {
            project_id: project_id.to_owned(),
            config,
            users: BTreeMap::new(),
        })
    }

    pub fn add_user(
        &mut self,
        user_id: &str,
        display_name: &str,
        avatar_index: u8,
        team: Option<String>,
    ) -> Result<&UserState, EngineError> {
        validate_id("user", user_id)?;
        if avatar_index >= AVATAR_COUNT {
            return Err(EngineError::Validation(format!(
                "avatar index {avatar_index} out of range 0..{AVATAR_COUNT}"
            )));
        }
        if display_name.trim().is_empty() {
            return Err(EngineError::Validation("display name is empty".into()));
        }
        if self.users.contains_key(user_id) {
            return Err(EngineError::DuplicateUser(user_id.to_owned()));
        }
        let team = team.filter(|t| !t.trim().is_empty());
        let state = UserState::new(user_id, display_name.trim(), avatar_index, team);
        let record = self
            .users
            .entry(user_id.to_owned())
            .or_insert(UserRecord::new(state));
        Ok(&record.state)
    }

    pub fn user(&self, user_id: &str) -> Result<&UserRecord, EngineError> {
        self.users
            .get(user_id)
            .ok_or_else(|| EngineError::NotRegistered(user_id.to_owned()))
    }

    pub fn teams(&self) -> BTreeSet<&str> {
        self.users
            .values()
            .filter_map(|u| u.state.team.as_deref())
            .collect()
    }

    pub fn leaderboard(&self) -> Vec<LeaderboardRow> {
        leaderboard(self.users.values().map(|u| &u.state))
    }

    pub fn team_leaderboard(&self) -> Vec<LeaderboardRow> {
        team_leaderboard(self.users.values().map(|u| &u.state))
    }

    /// Events of `user_id` with `seq > after_seq`, ascending.
    pub fn events_since(&self, user_id: &str, after_seq: u64) -> Result<&[Event], EngineError> {
        let events = &self.user(user_id)?.events;
        let start = events.partition_point(|e| e.seq <= after_seq);
        Ok(&events[start..])
    }

    /// Score and lifecycle invariants for every user.
    pub fn verify(&self) -> Result<(), String> {
        for (id, record) in &self.users {
            let user = &record.state;
            if !user.score_is_consistent() {
                return Err(format!(
                    "user {id}: stored score {} but items add up to {}",
                    user.score,
                    user.recompute_score()
                ));
            }
            if let Some(c) = user.challenges.iter().find(|c| !c.is_consistent()) {
                return Err(format!("user {id}: challenge {} is inconsistent", c.id));
            }
            if user.avatar_index >= AVATAR_COUNT {
                return Err(format!("user {id}: avatar index out of range"));
            }
            let gapless = record
                .events
                .iter()
                .enumerate()
                .all(|(i, e)| e.seq == i as u64 + 1);
            if !gapless || record.events.len() as u64 != user.event_seq {
                return Err(format!("user {id}: event log is not 1..={}", user.event_seq));
            }
        }
        Ok(())
    }

    fn user_seed(&self, user_id: &str) -> u64 {
        seed::derive(self.config.generation.seed, &[b"user", user_id.as_bytes()])
    }

    fn user_generation_config(&self, user_id: &str) -> GenerationConfig {
        GenerationConfig {
            seed: self.user_seed(user_id),
            ..self.config.generation.clone()
        }
    }

    /// Runs the full pipeline for one CI run of `user_id`.
    ///
    /// Order: parse, evaluate current challenges, advance the quest, credit
    /// points, check achievements, top up challenges and quest, emit events.
    /// New challenges are generated after evaluation, so a run never solves
    /// what it creates. On an ingest error only the run history changes.
    pub fn ingest_run(&mut self, user_id: &str, input: RunInput) -> Result<RunReport, EngineError> {
        validate_commit(&input.commit)?;
        let gen_config = self.user_generation_config(user_id);
        let user_seed = self.user_seed(user_id);
        let record = self
            .users
            .get_mut(user_id)
            .ok_or_else(|| EngineError::NotRegistered(user_id.to_owned()))?;

        let run_seq = record.last_run_seq() + 1;
        if let Some(expected) = input.expected_run_seq {
            if expected != run_seq {
                return Err(EngineError::Conflict(format!(
                    "run {expected} is out of order, next run is {run_seq}"
                )));
            }
        }
        let digests = ArtifactDigests {
            coverage: seed::sha256_hex(&input.coverage),
            mutations: seed::sha256_hex(&input.mutations),
            tests: input.tests.iter().map(|t| seed::sha256_hex(t)).collect(),
        };
        if let Some(last) = record.runs.last() {
            if last.commit == input.commit
                && last.digests == digests
                && last.build_status == input.build_status
            {
                return Err(EngineError::Conflict(format!(
                    "run for commit {} was already ingested as run {}",
                    input.commit, last.run_seq
                )));
            }
        }
        let mut run = RunRecord {
            run_seq,
            commit: input.commit.clone(),
            build_status: input.build_status,
            received_at: input.received_at,
            digests,
            ingest_error: None,
        };

        let (model, warnings) = match parse_run(&input.coverage, &input.mutations, &input.tests) {
            Ok(parsed) => parsed,
            Err(source) => {
                run.ingest_error = Some(source.to_string());
                record.runs.push(run);
                return Err(EngineError::Ingest { run_seq, source });
            }
        };
        let build = input.build_status;
        let empty = SourceModel::empty();
        let prev = record.prev_model.as_ref().unwrap_or(&empty);

        // Evaluate current challenges.
        let mut user = record.state.clone();
        let mut solved = Vec::new();
        let mut expired = Vec::new();
        let mut outcomes = Vec::new();
        for challenge in user.challenges.iter_mut().filter(|c| c.is_current()) {
            let outcome = evaluate(challenge, prev, &model, build);
            outcomes.push((challenge.kind, outcome));
            match outcome {
                Outcome::Solved => {
                    let mut done = challenge.clone();
                    done.solve(run_seq).expect("challenge is current");
                    solved.push(done);
                }
                Outcome::Expired => {
                    challenge.expire(run_seq).expect("challenge is current");
                    expired.push(challenge.id.clone());
                }
                Outcome::StillOpen => {}
            }
        }

        // Advance the quest.
        let mut completed = Vec::new();
        let activity = RunActivity {
            outcomes: &outcomes,
            rejections: record.pending_rejections,
        };
        let policy = self.config.quests.rejection_policy;
        if let Some(slot) = user.quests.iter_mut().find(|q| q.is_current()) {
            let next = apply_run(slot, prev, &model, &activity, policy, run_seq);
            if next.state == QuestState::Completed {
                completed.push(next);
            } else {
                *slot = next;
            }
        }

        // Credit points and counters.
        let mut user = apply_outcomes(&user, &solved, &completed)?;
        if record.prev_model.is_some() {
            user.tests_added += u64::from(model.tests().total.saturating_sub(prev.tests().total));
        }

        // Achievements.
        let mut unlocked = Vec::new();
        let mut project_unlocks = Vec::new();
        for def in check_achievements(&user, &model, &self.config.achievements) {
            unlocked.push(def.key.clone());
            if def.scope == AchievementScope::Project {
                project_unlocks.push(def.key.clone());
            }
        }
        for key in &unlocked {
            user.unlock(key, run_seq, input.received_at);
        }

        // Top up challenges and quest.
        let new_challenges = generate(
            &model,
            &user.challenges,
            &gen_config,
            RunContext {
                run_seq,
                build_status: build,
            },
        );
        let new_ids: Vec<String> = new_challenges.iter().map(|c| c.id.clone()).collect();
        user.challenges.extend(new_challenges);

        let mut new_quest = None;
        if user.current_quest().is_none() {
            let mut rng = seed::rng(seed::derive(
                user_seed,
                &[
                    b"quest",
                    &run_seq.to_le_bytes(),
                    &(user.quests.len() as u64).to_le_bytes(),
                ],
            ));
            if let Ok(quest) = generate_quest(
                &user,
                &model,
                &self.config.quests,
                &gen_config,
                run_seq,
                &mut rng,
            ) {
                new_quest = Some(quest.id.clone());
                user.quests.push(quest);
            }
        }

        // Commit and emit.
        record.state = user;
        record.pending_rejections = 0;
        record.prev_model = Some(model);
        record.runs.push(run);

        let mut emitted = Vec::new();
        let build_event = EventPayload {
            build_status: Some(build),
            ..Default::default()
        };
        emitted.push(record.push_event(run_seq, (EventKind::BuildFinished, build_event)));
        for c in &solved {
            emitted.push(record.push_event(run_seq, Event::challenge(EventKind::ChallengeSolved, &c.id)));
        }
        for id in &expired {
            emitted.push(record.push_event(run_seq, Event::challenge(EventKind::ChallengeExpired, id)));
        }
        for q in &completed {
            emitted.push(record.push_event(run_seq, Event::quest(EventKind::QuestCompleted, &q.id)));
        }
        for key in &unlocked {
            emitted.push(record.push_event(run_seq, achievement_event(key)));
        }
        for id in &new_ids {
            emitted.push(record.push_event(run_seq, Event::challenge(EventKind::ChallengeNew, id)));
        }
        if let Some(id) = &new_quest {
            emitted.push(record.push_event(run_seq, Event::quest(EventKind::QuestNew, id)));
        }

        // Project milestones are shared by every member.
        for (other_id, other) in self.users.iter_mut() {
            if other_id == user_id {
                continue;
            }
            for key in &project_unlocks {
                if other.state.unlock(key, other.last_run_seq(), input.received_at) {
                    let seq = other.last_run_seq();
                    other.push_event(seq, achievement_event(key));
                }
            }
        }

        Ok(RunReport::new(run_seq, emitted, warnings))
    }

    /// Rejects a current challenge and immediately hands out a replacement
    /// generated against the latest model.
    pub fn reject_challenge(
        &mut self,
        user_id: &str,
        challenge_id: &str,
        reason: &str,
    ) -> Result<RunReport, EngineError> {
        if reason.trim().is_empty() {
            return Err(EngineError::Validation("a rejection needs a non-empty reason".into()));
        }
        let gen_config = self.user_generation_config(user_id);
        let policy = self.config.quests.rejection_policy;
        let record = self
            .users
            .get_mut(user_id)
            .ok_or_else(|| EngineError::NotRegistered(user_id.to_owned()))?;
        let run_seq = record.last_run_seq();

        let mut user = record.state.clone();
        let challenge = user
            .challenges
            .iter_mut()
            .find(|c| c.id == challenge_id)
            .ok_or_else(|| EngineError::UnknownChallenge(challenge_id.to_owned()))?;
        challenge
            .reject(run_seq, reason)
            .map_err(|e| EngineError::Conflict(e.to_string()))?;

        if let Some(slot) = user.quests.iter_mut().find(|q| q.is_current()) {
            *slot = apply_rejection(slot, policy, run_seq);
        }

        let build_status = record
            .runs
            .iter()
            .rev()
            .find(|r| r.ingest_error.is_none())
            .map_or(BuildStatus::Success, |r| r.build_status);
        let empty = SourceModel::empty();
        let model = record.prev_model.as_ref().unwrap_or(&empty);
        let replacements = generate(
            model,
            &user.challenges,
            &gen_config,
            RunContext {
                run_seq,
                build_status,
            },
        );
        let new_ids: Vec<String> = replacements.iter().map(|c| c.id.clone()).collect();
        user.challenges.extend(replacements);

        record.state = user;
        record.pending_rejections += 1;
        let events = new_ids
            .iter()
            .map(|id| record.push_event(run_seq, Event::challenge(EventKind::ChallengeNew, id)))
            .collect();
        Ok(RunReport::new(run_seq, events, Vec::new()))
    }

    /// The user's challenge with `id`, if any.
    pub fn challenge(&self, user_id: &str, id: &str) -> Result<&Challenge, EngineError> {
        self.user(user_id)?
            .state
            .challenges
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| EngineError::UnknownChallenge(id.to_owned()))
    }

    /// Total and mean number of recorded runs across users.
    pub fn run_totals(&self) -> (u64, Option<f64>) {
        let total: u64 = self.users.values().map(|u| u.runs.len() as u64).sum();
        let mean = (!self.users.is_empty()).then(|| total as f64 / self.users.len() as f64);
        (total, mean)
    }
}

fn achievement_event(key: &str) -> (EventKind, EventPayload) {
    (
        EventKind::AchievementUnlocked,
        EventPayload {
            achievement: Some(key.to_owned()),
            ..Default::default()
        },
    )
}

/// Challenge kinds solved by a user, for statistics.
pub fn solved_by_kind(user: &UserState) -> BTreeMap<ChallengeKind, u64> {
    let mut counts: BTreeMap<ChallengeKind, u64> =
        ChallengeKind::ALL.iter().map(|&k| (k, 0)).collect();
    for c in user.challenges_in(ChallengeState::Solved) {
        *counts.entry(c.kind).or_insert(0) += 1;
    }
    counts
}
