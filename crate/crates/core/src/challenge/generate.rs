use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::{
    points_for, select_class, valid_targets, Baseline, BuildStatus, Challenge, ChallengeKind,
    ChallengeState, GenerationConfig, Target,
};
use crate::ingest::SourceModel;
use crate::seed;

/// The run a batch of challenges is generated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunContext {
    pub run_seq: u64,
    pub build_status: BuildStatus,
}

/// Tops the user up to `config.max_current` current challenges.
///
/// `existing` is the user's full challenge history. Current entries count
/// toward the limit; neither current nor rejected `(kind, target)` pairs are
/// handed out again. The history length numbers the new ids and salts the
/// random stream. A failed build yields a build challenge first. The result
/// depends only on the arguments.
pub fn generate(
    model: &SourceModel,
    existing: &[Challenge],
    config: &GenerationConfig,
    run: RunContext,
) -> Vec<Challenge> {
    let current = existing.iter().filter(|c| c.is_current()).count();
    let mut held: BTreeSet<(ChallengeKind, Target)> = existing
        .iter()
        .filter(|c| {
            c.is_current() || (c.state == ChallengeState::Rejected && c.kind != ChallengeKind::Build)
        })
        .map(|c| (c.kind, c.target.clone()))
        .collect();
    let mut open_slots = config.max_current.saturating_sub(current);
    let mut out = Vec::new();
    if open_slots == 0 {
        return out;
    }

    let mut rng = seed::rng(seed::derive(
        config.seed,
        &[
            b"challenges",
            &run.run_seq.to_le_bytes(),
            &(existing.len() as u64).to_le_bytes(),
        ],
    ));
    let mut next_id = existing.len() + 1;
    let mut emit = |kind: ChallengeKind, target: Target, out: &mut Vec<Challenge>| {
        out.push(Challenge {
            id: format!("c{next_id}"),
            kind,
            baseline: baseline_for(model, kind, &target),
            description: describe(model, kind, &target),
            target,
            points: points_for(kind, config),
            state: ChallengeState::Current,
            created_run: run.run_seq,
            resolved_run: None,
            rejection_reason: None,
        });
        next_id += 1;
    };

    if run.build_status == BuildStatus::Failure
        && !held.iter().any(|(k, _)| *k == ChallengeKind::Build)
    {
        held.insert((ChallengeKind::Build, Target::None));
        emit(ChallengeKind::Build, Target::None, &mut out);
        open_slots -= 1;
    }

    let mut pool = config.drawable_kinds();
    let mut targets: BTreeMap<ChallengeKind, BTreeSet<Target>> = BTreeMap::new();
    while open_slots > 0 && !pool.is_empty() {
        let weights: Vec<f64> = pool.iter().map(|(_, w)| *w).collect();
        let dist = WeightedIndex::new(&weights).expect("pool holds positive weights only");
        let pick = dist.sample(&mut rng);
        let kind = pool[pick].0;

        let available = targets
            .entry(kind)
            .or_insert_with(|| valid_targets(model, kind));
        available.retain(|t| !held.contains(&(kind, t.clone())));
        if available.is_empty() {
            pool.remove(pick);
            continue;
        }

        let target = draw_target(model, available, &mut rng);
        available.remove(&target);
        held.insert((kind, target.clone()));
        emit(kind, target, &mut out);
        open_slots -= 1;
    }
    out
}

/// Weighted class draw, then a uniform draw among that class's targets.
fn draw_target<R: Rng>(model: &SourceModel, available: &BTreeSet<Target>, rng: &mut R) -> Target {
    let mut by_class: BTreeMap<&str, Vec<&Target>> = BTreeMap::new();
    for target in available {
        by_class
            .entry(target.class_name().unwrap_or(""))
            .or_default()
            .push(target);
    }
    let classes: Vec<&str> = by_class.keys().copied().collect();
    let class = match classes.as_slice() {
        [only] => *only,
        _ => classes[select_class(model, &classes, rng).expect("at least one class")],
    };
    let candidates = &by_class[class];
    candidates[rng.gen_range(0..candidates.len())].clone()
}

fn baseline_for(model: &SourceModel, kind: ChallengeKind, target: &Target) -> Baseline {
    let target_covered = match (kind, target) {
        (ChallengeKind::ClassCoverage, Target::Class { class_name }) => {
            model.class(class_name).map(|c| c.lines_covered)
        }
        (
            ChallengeKind::MethodCoverage,
            Target::Method {
                class_name,
                method_name,
                signature,
            },
        ) => model
            .class(class_name)
            .and_then(|c| c.method(method_name, signature))
            .map(|m| m.covered_lines()),
        (ChallengeKind::BranchCoverage, Target::Line(line)) => {
            model.line(line).map(|l| l.branch_covered)
        }
        _ => None,
    };
    Baseline {
        tests_total: model.tests().total,
        target_covered,
    }
}

fn describe(model: &SourceModel, kind: ChallengeKind, target: &Target) -> String {
    match (kind, target) {
        (ChallengeKind::Build, _) => "Fix the failing build".to_owned(),
        (ChallengeKind::Test, _) => "Write a new test".to_owned(),
        (_, Target::Class { class_name }) => {
            let (covered, total) = model
                .class(class_name)
                .map_or((0, 0), |c| (c.lines_covered, c.lines_total));
            format!("Cover more lines in {class_name} ({covered}/{total} covered)")
        }
        (_, Target::Method {
            class_name,
            method_name,
            ..
        }) => format!("Improve the coverage of {class_name}.{method_name}"),
        (ChallengeKind::BranchCoverage, Target::Line(line)) => {
            let (covered, total) = model
                .line(line)
                .map_or((0, 0), |l| (l.branch_covered, l.branch_total));
            format!(
                "Cover more branches on line {} of {} ({covered}/{total} covered)",
                line.line, line.file
            )
        }
        (_, Target::Line(line)) => format!("Cover line {} of {}", line.line, line.file),
        (_, Target::Mutant(key)) => {
            let text = model
                .mutant(key)
                .map_or("", |m| m.description.as_str());
            format!(
                "Kill the mutant in {}.{} on line {}: {text}",
                key.class_name, key.method_name, key.line
            )
        }
        (_, Target::None) => kind.to_string(),
    }
}
