use serde::{Deserialize, Serialize};

use super::UserState;
use crate::challenge::ChallengeKind;
use crate::ingest::SourceModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AchievementScope {
    Individual,
    /// Unlocked for every member of the project at once.
    Project,
}

/// Unlock condition. Every rule is a threshold on a counter that only grows,
/// or on the latest model; an unlock is never revoked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AchievementRule {
    TestsAdded { at_least: u64 },
    ChallengesSolved { at_least: usize },
    ChallengesSolvedOfKind { kind: ChallengeKind, at_least: usize },
    QuestsCompleted { at_least: usize },
    AnyClassFullyLineCovered,
    ProjectLineCoverage { at_least_percent: u32 },
}

impl AchievementRule {
    pub fn holds(&self, user: &UserState, model: &SourceModel) -> bool {
        match *self {
            AchievementRule::TestsAdded { at_least } => user.tests_added >= at_least,
            AchievementRule::ChallengesSolved { at_least } => user.solved_count() >= at_least,
            AchievementRule::ChallengesSolvedOfKind { kind, at_least } => {
                user.solved_of_kind(kind) >= at_least
            }
            AchievementRule::QuestsCompleted { at_least } => {
                user.completed_quest_count() >= at_least
            }
            AchievementRule::AnyClassFullyLineCovered => {
                model.classes().iter().any(|c| c.is_fully_line_covered())
            }
            AchievementRule::ProjectLineCoverage { at_least_percent } => {
                let total = u64::from(model.lines_total());
                total > 0
                    && u64::from(model.lines_covered()) * 100 >= u64::from(at_least_percent) * total
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AchievementDef {
    pub key: String,
    pub title: String,
    pub description: String,
    /// Hidden from listings until unlocked.
    pub secret: bool,
    pub scope: AchievementScope,
    #[serde(flatten)]
    pub rule: AchievementRule,
}

fn def(
    key: &str,
    title: &str,
    description: &str,
    secret: bool,
    scope: AchievementScope,
    rule: AchievementRule,
) -> AchievementDef {
    AchievementDef {
        key: key.to_owned(),
        title: title.to_owned(),
        description: description.to_owned(),
        secret,
        scope,
        rule,
    }
}

pub fn default_catalog() -> Vec<AchievementDef> {
    use AchievementRule::*;
    use AchievementScope::*;
    vec![
        def("first_test", "First Test", "Add a test to the test suite", false, Individual, TestsAdded { at_least: 1 }),
        def("ten_tests", "Ten Tests", "Add ten tests to the test suite", false, Individual, TestsAdded { at_least: 10 }),
        def("challenge_novice", "Challenge Novice", "Solve your first challenge", false, Individual, ChallengesSolved { at_least: 1 }),
        def("challenge_adept", "Challenge Adept", "Solve ten challenges", false, Individual, ChallengesSolved { at_least: 10 }),
        def("quest_complete", "Quest Complete", "Complete a quest", false, Individual, QuestsCompleted { at_least: 1 }),
        def(
            "mutant_hunter",
            "Mutant Hunter",
            "Solve five mutation challenges",
            false,
            Individual,
            ChallengesSolvedOfKind { kind: ChallengeKind::Mutation, at_least: 5 },
        ),
        def("perfectionist", "Perfectionist", "Cover every line of a class", true, Individual, AnyClassFullyLineCovered),
        def("project_80", "Project 80", "Reach 80 % line coverage in the project", false, Project, ProjectLineCoverage { at_least_percent: 80 }),
    ]
}

/// Catalog entries whose rule now holds for `user` and that the user has not
/// unlocked yet, in catalog order.
pub fn check_achievements<'c>(
    user: &UserState,
    model: &SourceModel,
    catalog: &'c [AchievementDef],
) -> Vec<&'c AchievementDef> {
    catalog
        .iter()
        .filter(|def| !user.achievements.contains_key(&def.key))
        .filter(|def| def.rule.holds(user, model))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::challenge::{Baseline, Challenge, ChallengeState, Target};
    use crate::ingest::{assemble_model, ClassCov, LineCov, LineRef, TestSnapshot};
    use chrono::{TimeZone, Utc};

    fn model(classes: &[(&str, u32, u32)]) -> SourceModel {
        let classes = classes
            .iter()
            .map(|&(name, covered, total)| {
                let lines = (1..=total)
                    .map(|n| LineCov {
                        line_ref: LineRef {
                            file: format!("{name}.java"),
                            class_name: name.into(),
                            line: n,
                        },
                        hits: u64::from(n <= covered),
                        branch_total: 0,
                        branch_covered: 0,
                    })
                    .collect();
                ClassCov::new(name.into(), format!("{name}.java"), vec![], lines)
            })
            .collect();
        assemble_model(classes, vec![], TestSnapshot::default()).unwrap()
    }

    fn solved_challenge(id: &str) -> Challenge {
        Challenge {
            id: id.into(),
            kind: ChallengeKind::LineCoverage,
            target: Target::None,
            baseline: Baseline::default(),
            points: 2,
            state: ChallengeState::Solved,
            created_run: 1,
            resolved_run: Some(2),
            rejection_reason: None,
            description: String::new(),
        }
    }

    #[test]
    fn catalog_keys_unique() {
        let catalog = default_catalog();
        let keys: std::collections::BTreeSet<_> = catalog.iter().map(|d| &d.key).collect();
        assert_eq!(keys.len(), catalog.len());
        assert_eq!(catalog.len(), 8);
        assert_eq!(catalog.iter().filter(|d| d.secret).count(), 1);
    }

    #[test]
    fn first_solve_unlocks_novice_once() {
        let catalog = default_catalog();
        let m = model(&[("A", 1, 4)]);
        let mut user = UserState::new("u", "U", 0, None);
        assert!(check_achievements(&user, &m, &catalog).is_empty());

        user.challenges.push(solved_challenge("c1"));
        let unlocked: Vec<_> = check_achievements(&user, &m, &catalog)
            .into_iter()
            .map(|d| d.key.clone())
            .collect();
        assert_eq!(unlocked, ["challenge_novice"]);

        let at = Utc.with_ymd_and_hms(2024, 5, 1, 10, 0, 0).unwrap();
        assert!(user.unlock("challenge_novice", 2, at));
        assert!(!user.unlock("challenge_novice", 3, at));
        assert!(check_achievements(&user, &m, &catalog).is_empty());
    }

    #[test]
    fn perfectionist_and_project_80() {
        let catalog = default_catalog();
        let user = UserState::new("u", "U", 0, None);
        let keys = |m: &SourceModel| -> Vec<String> {
            check_achievements(&user, m, &catalog)
                .into_iter()
                .map(|d| d.key.clone())
                .collect()
        };
        assert!(keys(&model(&[("A", 3, 4), ("B", 0, 1)])).is_empty());
        assert_eq!(keys(&model(&[("A", 4, 4), ("B", 0, 6)])), ["perfectionist"]);
        assert_eq!(keys(&model(&[("A", 4, 4), ("B", 4, 6)])), ["perfectionist", "project_80"]);
        // Empty classes are never "fully covered".
        assert!(keys(&model(&[("A", 0, 0)])).is_empty());
    }

}
