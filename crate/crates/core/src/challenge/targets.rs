use std::collections::BTreeSet;

use super::{ChallengeKind, Target};
use crate::ingest::{MutationStatus, SourceModel};

/// Every target a challenge of `kind` could currently be generated for.
///
/// Build challenges are event-driven and never have drawable targets; test
/// challenges have the single target [`Target::None`].
pub fn valid_targets(model: &SourceModel, kind: ChallengeKind) -> BTreeSet<Target> {
    let classes = model.classes().iter();
    match kind {
        ChallengeKind::Build => BTreeSet::new(),
        ChallengeKind::Test => BTreeSet::from([Target::None]),
        ChallengeKind::ClassCoverage => classes
            .filter(|c| c.lines_covered < c.lines_total)
            .map(|c| Target::Class {
                class_name: c.class_name.clone(),
            })
            .collect(),
        ChallengeKind::MethodCoverage => classes
            .flat_map(|c| &c.methods)
            .filter(|m| m.has_uncovered_line())
            .map(|m| Target::Method {
                class_name: m.class_name.clone(),
                method_name: m.name.clone(),
                signature: m.signature.clone(),
            })
            .collect(),
        ChallengeKind::LineCoverage => classes
            .flat_map(|c| &c.lines)
            .filter(|l| !l.is_covered())
            .map(|l| Target::Line(l.line_ref.clone()))
            .collect(),
        ChallengeKind::BranchCoverage => classes
            .flat_map(|c| &c.lines)
            .filter(|l| l.has_branch_gap())
            .map(|l| Target::Line(l.line_ref.clone()))
            .collect(),
        ChallengeKind::Mutation => model
            .mutants()
            .iter()
            .filter(|m| m.status == MutationStatus::Survived)
            .map(|m| Target::Mutant(m.key.clone()))
            .collect(),
    }
}
