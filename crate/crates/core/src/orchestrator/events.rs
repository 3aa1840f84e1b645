use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::challenge::BuildStatus;
use crate::ingest::IngestWarning;

/// Kinds in the order they are emitted within one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    BuildFinished,
    ChallengeSolved,
    ChallengeExpired,
    QuestCompleted,
    AchievementUnlocked,
    ChallengeNew,
    QuestNew,
}

/// Ids of the entities an event is about. Clients resolve them through the
/// read API.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub challenge_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quest_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub achievement: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub build_status: Option<BuildStatus>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub run_seq: u64,
    pub kind: EventKind,
    #[serde(flatten)]
    pub payload: EventPayload,
}

impl Event {
    pub fn challenge(kind: EventKind, id: &str) -> (EventKind, EventPayload) {
        (
            kind,
            EventPayload {
                challenge_id: Some(id.to_owned()),
                ..Default::default()
            },
        )
    }

    pub fn quest(kind: EventKind, id: &str) -> (EventKind, EventPayload) {
        (
            kind,
            EventPayload {
                quest_id: Some(id.to_owned()),
                ..Default::default()
            },
        )
    }
}

/// Result of a write operation on a user's state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_seq: u64,
    pub events: Vec<Event>,
    pub counts: BTreeMap<EventKind, usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<IngestWarning>,
}

impl RunReport {
    pub fn new(run_seq: u64, events: Vec<Event>, warnings: Vec<IngestWarning>) -> Self {
        let mut counts = BTreeMap::new();
        for event in &events {
            *counts.entry(event.kind).or_insert(0) += 1;
        }
        RunReport {
            run_seq,
            events,
            counts,
            warnings,
        }
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.counts.get(&kind).copied().unwrap_or(0)
    }
}
