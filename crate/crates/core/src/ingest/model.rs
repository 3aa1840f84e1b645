//! The normalized per-run view of a project: coverage, mutants and test inventory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// A single executable source line inside a class.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineRef {
    pub file: String,
    pub class_name: String,
    pub line: u32,
}

impl fmt::Display for LineRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{} ({})", self.file, self.line, self.class_name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineCov {
    #[serde(rename = "ref")]
    pub line_ref: LineRef,
    pub hits: u64,
    pub branch_total: u32,
    pub branch_covered: u32,
}

impl LineCov {
    pub fn is_covered(&self) -> bool {
        self.hits > 0
    }

    /// A covered line with at least one branch outcome never taken.
    pub fn has_branch_gap(&self) -> bool {
        self.is_covered() && self.branch_covered < self.branch_total
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodCov {
    pub class_name: String,
    pub name: String,
    pub signature: String,
    /// Smallest line number in `lines`, 0 when the method has no executable lines.
    pub first_line: u32,
    pub last_line: u32,
    pub lines: Vec<LineCov>,
}

impl MethodCov {
    pub fn covered_lines(&self) -> u32 {
        self.lines.iter().filter(|l| l.is_covered()).count() as u32
    }

    pub fn has_uncovered_line(&self) -> bool {
        self.lines.iter().any(|l| !l.is_covered())
    }
}

/// Coverage of one class. `lines` holds every distinct executable line of the
/// class, whether it was reported under a method or at class level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCov {
    pub class_name: String,
    pub file: String,
    pub methods: Vec<MethodCov>,
    pub lines: Vec<LineCov>,
    pub lines_total: u32,
    pub lines_covered: u32,
    pub branches_total: u32,
    pub branches_covered: u32,
}

impl ClassCov {
    /// Builds a class and computes its aggregates from `lines`.
    pub fn new(class_name: String, file: String, methods: Vec<MethodCov>, mut lines: Vec<LineCov>) -> Self {
        lines.sort_by_key(|l| l.line_ref.line);
        let mut class = ClassCov {
            class_name,
            file,
            methods,
            lines,
            lines_total: 0,
            lines_covered: 0,
            branches_total: 0,
            branches_covered: 0,
        };
        let (lt, lc, bt, bc) = class.recount();
        class.lines_total = lt;
        class.lines_covered = lc;
        class.branches_total = bt;
        class.branches_covered = bc;
        class
    }

    fn recount(&self) -> (u32, u32, u32, u32) {
        let lines_total = self.lines.len() as u32;
        let lines_covered = self.lines.iter().filter(|l| l.is_covered()).count() as u32;
        let branches_total = self.lines.iter().map(|l| l.branch_total).sum();
        let branches_covered = self.lines.iter().map(|l| l.branch_covered).sum();
        (lines_total, lines_covered, branches_total, branches_covered)
    }

    pub fn line(&self, number: u32) -> Option<&LineCov> {
        self.lines
            .binary_search_by_key(&number, |l| l.line_ref.line)
            .ok()
            .map(|i| &self.lines[i])
    }

    pub fn method(&self, name: &str, signature: &str) -> Option<&MethodCov> {
        self.methods
            .iter()
            .find(|m| m.name == name && m.signature == signature)
    }

    /// Fraction of lines covered, `None` for a class without executable lines.
    pub fn line_ratio(&self) -> Option<f64> {
        (self.lines_total > 0).then(|| f64::from(self.lines_covered) / f64::from(self.lines_total))
    }

    pub fn is_fully_line_covered(&self) -> bool {
        self.lines_total > 0 && self.lines_covered == self.lines_total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationStatus {
    Killed,
    Survived,
    NoCoverage,
    TimedOut,
}

impl MutationStatus {
    pub fn from_report(value: &str) -> Option<Self> {
        match value {
            "KILLED" => Some(Self::Killed),
            "SURVIVED" => Some(Self::Survived),
            "NO_COVERAGE" => Some(Self::NoCoverage),
            "TIMED_OUT" => Some(Self::TimedOut),
            _ => None,
        }
    }

    /// Whether the mutant counts toward the mutation score numerator.
    pub fn is_detected(self) -> bool {
        matches!(self, Self::Killed | Self::TimedOut)
    }
}

/// Identity of a mutant across runs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MutantKey {
    pub class_name: String,
    pub method_name: String,
    pub line: u32,
    pub mutator: String,
    pub index: u32,
}

impl fmt::Display for MutantKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}::{}:{} [{}#{}]",
            self.class_name, self.method_name, self.line, self.mutator, self.index
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutant {
    pub key: MutantKey,
    pub status: MutationStatus,
    pub description: String,
    pub killing_test: Option<String>,
    /// Set when the mutated class is absent from the coverage report.
    #[serde(default)]
    pub orphaned: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TestId {
    pub classname: String,
    pub name: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSnapshot {
    pub total: u32,
    pub failures: u32,
    pub errors: u32,
    pub skipped: u32,
    pub test_ids: BTreeSet<TestId>,
}

/// Immutable snapshot of one run. Only [`super::assemble_model`] and
/// deserialization (which re-validates) can build one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct SourceModel {
    classes: Vec<ClassCov>,
    mutants: Vec<Mutant>,
    tests: TestSnapshot,
    class_index: BTreeMap<String, usize>,
    mutant_index: BTreeMap<MutantKey, usize>,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    classes: Vec<ClassCov>,
    mutants: Vec<Mutant>,
    tests: TestSnapshot,
}

impl TryFrom<RawModel> for SourceModel {
    type Error = ModelError;

    fn try_from(raw: RawModel) -> Result<Self, Self::Error> {
        SourceModel::build(raw.classes, raw.mutants, raw.tests)
    }
}

impl From<SourceModel> for RawModel {
    fn from(model: SourceModel) -> Self {
        RawModel {
            classes: model.classes,
            mutants: model.mutants,
            tests: model.tests,
        }
    }
}

impl SourceModel {
    pub(super) fn build(
        classes: Vec<ClassCov>,
        mut mutants: Vec<Mutant>,
        tests: TestSnapshot,
    ) -> Result<Self, ModelError> {
        let mut problems = Vec::new();
        let mut class_index = BTreeMap::new();
        for (i, class) in classes.iter().enumerate() {
            if class.class_name.is_empty() {
                problems.push(format!("class #{i} has an empty name"));
            }
            if class_index.insert(class.class_name.clone(), i).is_some() {
                problems.push(format!("class {} appears more than once", class.class_name));
            }
            check_class(class, &mut problems);
        }

        let mut mutant_index = BTreeMap::new();
        for (i, mutant) in mutants.iter_mut().enumerate() {
            if mutant.key.line == 0 {
                problems.push(format!("mutant {} has line 0", mutant.key));
            }
            if mutant_index.insert(mutant.key.clone(), i).is_some() {
                problems.push(format!("mutant {} appears more than once", mutant.key));
            }
            mutant.orphaned = !class_index.contains_key(&mutant.key.class_name);
        }

        if tests.failures + tests.errors > tests.total {
            problems.push(format!(
                "tests: failures {} + errors {} exceed total {}",
                tests.failures, tests.errors, tests.total
            ));
        }
        if tests.test_ids.len() != tests.total as usize {
            problems.push(format!(
                "tests: {} distinct ids but total {}",
                tests.test_ids.len(),
                tests.total
            ));
        }

        if !problems.is_empty() {
            return Err(ModelError { problems });
        }
        Ok(SourceModel {
            classes,
            mutants,
            tests,
            class_index,
            mutant_index,
        })
    }

    pub fn empty() -> Self {
        Self::build(Vec::new(), Vec::new(), TestSnapshot::default()).expect("empty model is valid")
    }

    pub fn classes(&self) -> &[ClassCov] {
        &self.classes
    }

    pub fn mutants(&self) -> &[Mutant] {
        &self.mutants
    }

    pub fn tests(&self) -> &TestSnapshot {
        &self.tests
    }

    pub fn class(&self, name: &str) -> Option<&ClassCov> {
        self.class_index.get(name).map(|&i| &self.classes[i])
    }

    pub fn mutant(&self, key: &MutantKey) -> Option<&Mutant> {
        self.mutant_index.get(key).map(|&i| &self.mutants[i])
    }

    pub fn line(&self, line_ref: &LineRef) -> Option<&LineCov> {
        self.class(&line_ref.class_name)?.line(line_ref.line)
    }

    pub fn lines_total(&self) -> u32 {
        self.classes.iter().map(|c| c.lines_total).sum()
    }

    pub fn lines_covered(&self) -> u32 {
        self.classes.iter().map(|c| c.lines_covered).sum()
    }

    pub fn branches_total(&self) -> u32 {
        self.classes.iter().map(|c| c.branches_total).sum()
    }

    pub fn branches_covered(&self) -> u32 {
        self.classes.iter().map(|c| c.branches_covered).sum()
    }

    pub fn orphaned_mutants(&self) -> impl Iterator<Item = &Mutant> {
        self.mutants.iter().filter(|m| m.orphaned)
    }
}

fn check_class(class: &ClassCov, problems: &mut Vec<String>) {
    let name = &class.class_name;
    if class.file.is_empty() {
        problems.push(format!("class {name} has an empty file name"));
    }
    let (lt, lc, bt, bc) = class.recount();
    if (lt, lc, bt, bc)
        != (
            class.lines_total,
            class.lines_covered,
            class.branches_total,
            class.branches_covered,
        )
    {
        problems.push(format!(
            "class {name}: stored aggregates {}/{} lines, {}/{} branches disagree with line data {lc}/{lt}, {bc}/{bt}",
            class.lines_covered, class.lines_total, class.branches_covered, class.branches_total
        ));
    }
    let mut seen = BTreeSet::new();
    for line in &class.lines {
        check_line(name, line, problems);
        if !seen.insert(line.line_ref.line) {
            problems.push(format!("class {name}: line {} listed twice", line.line_ref.line));
        }
    }
    for method in &class.methods {
        if method.first_line > method.last_line {
            problems.push(format!(
                "method {name}.{}: first line {} after last line {}",
                method.name, method.first_line, method.last_line
            ));
        }
        for line in &method.lines {
            let n = line.line_ref.line;
            if n < method.first_line || n > method.last_line {
                problems.push(format!(
                    "method {name}.{}: line {n} outside {}..={}",
                    method.name, method.first_line, method.last_line
                ));
            }
            if !seen.contains(&n) {
                problems.push(format!(
                    "method {name}.{}: line {n} missing from class line list",
                    method.name
                ));
            }
        }
    }
}

fn check_line(class_name: &str, line: &LineCov, problems: &mut Vec<String>) {
    let r = &line.line_ref;
    if r.line == 0 {
        problems.push(format!("class {class_name}: line number 0"));
    }
    if r.class_name != class_name {
        problems.push(format!(
            "class {class_name}: line {} refers to class {}",
            r.line, r.class_name
        ));
    }
    if line.branch_covered > line.branch_total {
        problems.push(format!(
            "class {class_name}: line {} has {} of {} branches covered",
            r.line, line.branch_covered, line.branch_total
        ));
    }
}
