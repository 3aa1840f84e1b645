use serde::{Deserialize, Serialize};

use super::{BuildStatus, Challenge, ChallengeKind, Target};
use crate::ingest::{MutationStatus, SourceModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    StillOpen,
    Solved,
    Expired,
}

/// Decides what a new run means for a current challenge.
///
/// Improvement is strict and measured against the challenge's generation
/// baseline, so `prev_model` does not influence the result; it is accepted
/// so callers can hand over both sides of the transition. A challenge whose
/// target vanished expires, unless it is solved in the same run.
pub fn evaluate(
    challenge: &Challenge,
    _prev_model: &SourceModel,
    new_model: &SourceModel,
    new_build: BuildStatus,
) -> Outcome {
    let baseline = &challenge.baseline;
    let exceeds = |now: u32| now > baseline.target_covered.unwrap_or(0);

    let solved = match (challenge.kind, &challenge.target) {
        (ChallengeKind::Build, _) => Some(new_build.is_success()),
        (ChallengeKind::Test, _) => {
            Some(new_build.is_success() && new_model.tests().total > baseline.tests_total)
        }
        (ChallengeKind::ClassCoverage, Target::Class { class_name }) => new_model
            .class(class_name)
            .map(|c| exceeds(c.lines_covered)),
        (
            ChallengeKind::MethodCoverage,
            Target::Method {
                class_name,
                method_name,
                signature,
            },
        ) => new_model
            .class(class_name)
            .and_then(|c| c.method(method_name, signature))
            .map(|m| exceeds(m.covered_lines())),
        (ChallengeKind::LineCoverage, Target::Line(line)) => {
            new_model.line(line).map(|l| l.is_covered())
        }
        (ChallengeKind::BranchCoverage, Target::Line(line)) => {
            new_model.line(line).map(|l| exceeds(l.branch_covered))
        }
        (ChallengeKind::Mutation, Target::Mutant(key)) => new_model
            .mutant(key)
            .map(|m| m.status == MutationStatus::Killed),
        // A target of the wrong shape can never be located.
        _ => None,
    };

    match solved {
        Some(true) => Outcome::Solved,
        Some(false) => Outcome::StillOpen,
        None => Outcome::Expired,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::challenge::{Baseline, ChallengeState};
    use crate::ingest::{
        assemble_model, ClassCov, LineCov, LineRef, MethodCov, Mutant, MutantKey, TestId,
        TestSnapshot,
    };

    fn line_ref(n: u32) -> LineRef {
        LineRef {
            file: "A.java".into(),
            class_name: "A".into(),
            line: n,
        }
    }

    fn key() -> MutantKey {
        MutantKey {
            class_name: "A".into(),
            method_name: "f".into(),
            line: 2,
            mutator: "M".into(),
            index: 0,
        }
    }

    /// Class A with lines 1..=3, given hits and branch coverage of line 2.
    fn model(hits: [u64; 3], branches_covered: u32, mutant: Option<MutationStatus>, tests: u32) -> SourceModel {
        let lines: Vec<LineCov> = (1..=3)
            .map(|n| LineCov {
                line_ref: line_ref(n),
                hits: hits[n as usize - 1],
                branch_total: if n == 2 { 2 } else { 0 },
                branch_covered: if n == 2 { branches_covered } else { 0 },
            })
            .collect();
        let method = MethodCov {
            class_name: "A".into(),
            name: "f".into(),
            signature: "()V".into(),
            first_line: 1,
            last_line: 3,
            lines: lines.clone(),
        };
        let mutants = mutant
            .map(|status| Mutant {
                key: key(),
                status,
                description: "d".into(),
                killing_test: None,
                orphaned: false,
            })
            .into_iter()
            .collect();
        let test_ids = (0..tests)
            .map(|i| TestId {
                classname: "T".into(),
                name: format!("t{i}"),
            })
            .collect();
        let tests = TestSnapshot {
            total: tests,
            test_ids,
            ..Default::default()
        };
        assemble_model(
            vec![ClassCov::new("A".into(), "A.java".into(), vec![method], lines)],
            mutants,
            tests,
        )
        .unwrap()
    }

    fn challenge(kind: ChallengeKind, target: Target, covered: Option<u32>, tests: u32) -> Challenge {
        Challenge {
            id: "c1".into(),
            kind,
            target,
            baseline: Baseline {
                tests_total: tests,
                target_covered: covered,
            },
            points: 1,
            state: ChallengeState::Current,
            created_run: 1,
            resolved_run: None,
            rejection_reason: None,
            description: String::new(),
        }
    }

    const OK: BuildStatus = BuildStatus::Success;

    #[test]
    fn line_coverage() {
        let c = challenge(ChallengeKind::LineCoverage, Target::Line(line_ref(3)), None, 0);
        let before = model([1, 1, 0], 0, None, 1);
        assert_eq!(evaluate(&c, &before, &before, OK), Outcome::StillOpen);
        assert_eq!(evaluate(&c, &before, &model([1, 1, 2], 0, None, 1), OK), Outcome::Solved);
        let gone = challenge(ChallengeKind::LineCoverage, Target::Line(line_ref(9)), None, 0);
        assert_eq!(evaluate(&gone, &before, &before, OK), Outcome::Expired);
    }

    #[test]
    fn class_coverage_needs_strict_improvement() {
        let c = challenge(
            ChallengeKind::ClassCoverage,
            Target::Class { class_name: "A".into() },
            Some(2),
            0,
        );
        let m = model([1, 1, 0], 0, None, 1);
        assert_eq!(evaluate(&c, &m, &m, OK), Outcome::StillOpen);
        assert_eq!(evaluate(&c, &m, &model([1, 1, 1], 0, None, 1), OK), Outcome::Solved);
        assert_eq!(evaluate(&c, &m, &SourceModel::empty(), OK), Outcome::Expired);
    }

    #[test]
    fn method_and_branch() {
        let method = challenge(
            ChallengeKind::MethodCoverage,
            Target::Method {
                class_name: "A".into(),
                method_name: "f".into(),
                signature: "()V".into(),
            },
            Some(1),
            0,
        );
        let m = model([1, 0, 0], 0, None, 1);
        assert_eq!(evaluate(&method, &m, &m, OK), Outcome::StillOpen);
        assert_eq!(evaluate(&method, &m, &model([1, 1, 0], 1, None, 1), OK), Outcome::Solved);

        let branch = challenge(ChallengeKind::BranchCoverage, Target::Line(line_ref(2)), Some(1), 0);
        let m = model([1, 1, 0], 1, None, 1);
        assert_eq!(evaluate(&branch, &m, &m, OK), Outcome::StillOpen);
        assert_eq!(evaluate(&branch, &m, &model([1, 1, 0], 2, None, 1), OK), Outcome::Solved);
    }

    #[test]
    fn mutation() {
        let c = challenge(ChallengeKind::Mutation, Target::Mutant(key()), None, 0);
        let m = model([1, 1, 0], 0, Some(MutationStatus::Survived), 1);
        assert_eq!(evaluate(&c, &m, &m, OK), Outcome::StillOpen);
        let killed = model([1, 1, 0], 0, Some(MutationStatus::Killed), 1);
        assert_eq!(evaluate(&c, &m, &killed, OK), Outcome::Solved);
        let timed_out = model([1, 1, 0], 0, Some(MutationStatus::TimedOut), 1);
        assert_eq!(evaluate(&c, &m, &timed_out, OK), Outcome::StillOpen);
        let absent = model([1, 1, 0], 0, None, 1);
        assert_eq!(evaluate(&c, &m, &absent, OK), Outcome::Expired);
    }

    #[test]
    fn build_and_test_depend_on_build_status() {
        let m = model([1, 1, 0], 0, None, 3);
        let build = challenge(ChallengeKind::Build, Target::None, None, 3);
        assert_eq!(evaluate(&build, &m, &m, BuildStatus::Failure), Outcome::StillOpen);
        assert_eq!(evaluate(&build, &m, &m, OK), Outcome::Solved);

        let test = challenge(ChallengeKind::Test, Target::None, None, 3);
        let more = model([1, 1, 0], 0, None, 4);
        assert_eq!(evaluate(&test, &m, &m, OK), Outcome::StillOpen);
        assert_eq!(evaluate(&test, &m, &more, BuildStatus::Failure), Outcome::StillOpen);
        assert_eq!(evaluate(&test, &m, &more, OK), Outcome::Solved);
    }
}
