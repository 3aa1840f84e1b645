use std::collections::BTreeMap;

use super::{
    children, parse_document, parse_number, IngestError, IngestWarning, TestId, TestSnapshot,
};

/// Parsed test inventory plus any counter mismatches noticed on the way.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestResults {
    pub snapshot: TestSnapshot,
    pub warnings: Vec<IngestWarning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Verdict {
    Passed,
    Skipped,
    Failed,
    Errored,
}

/// Merges xunit-style `testsuite` documents into one snapshot.
///
/// Tests are identified by `(classname, name)`. A test reported more than once
/// is counted once, with its most severe verdict. Declared suite counters are
/// only cross-checked; totals always come from the testcases themselves.
pub fn parse_test_results<T: AsRef<[u8]>>(documents: &[T]) -> Result<TestResults, IngestError> {
    let mut verdicts: BTreeMap<TestId, Verdict> = BTreeMap::new();
    let mut warnings = Vec::new();

    for document in documents {
        let doc = parse_document(document.as_ref())?;
        let root = doc.root_element();
        let suites: Vec<_> = match root.tag_name().name() {
            "testsuite" | "testsuites" => root
                .descendants()
                .filter(|n| n.is_element() && n.tag_name().name() == "testsuite")
                .collect(),
            other => {
                return Err(IngestError::UnexpectedRoot {
                    expected: "testsuite",
                    found: other.to_owned(),
                })
            }
        };
        for suite in suites {
            parse_suite(suite, &mut verdicts, &mut warnings)?;
        }
    }

    let count = |v: Verdict| verdicts.values().filter(|&&x| x == v).count() as u32;
    let snapshot = TestSnapshot {
        total: verdicts.len() as u32,
        failures: count(Verdict::Failed),
        errors: count(Verdict::Errored),
        skipped: count(Verdict::Skipped),
        test_ids: verdicts.into_keys().collect(),
    };
    Ok(TestResults { snapshot, warnings })
}

fn parse_suite(
    suite: roxmltree::Node<'_, '_>,
    verdicts: &mut BTreeMap<TestId, Verdict>,
    warnings: &mut Vec<IngestWarning>,
) -> Result<(), IngestError> {
    let suite_name = suite.attribute("name").unwrap_or("");
    let mut counts = [0u64; 4];
    let mut local = 0u64;
    for case in children(suite, "testcase") {
        let name = case
            .attribute("name")
            .ok_or_else(|| IngestError::missing("testcase", "name"))?;
        let classname = match case.attribute("classname") {
            Some(c) => c,
            None if !suite_name.is_empty() => suite_name,
            None => return Err(IngestError::missing("testcase", "classname")),
        };
        let verdict = case
            .children()
            .filter(|c| c.is_element())
            .filter_map(|c| match c.tag_name().name() {
                "error" => Some(Verdict::Errored),
                "failure" => Some(Verdict::Failed),
                "skipped" => Some(Verdict::Skipped),
                _ => None,
            })
            .max()
            .unwrap_or(Verdict::Passed);
        local += 1;
        match verdict {
            Verdict::Failed => counts[1] += 1,
            Verdict::Errored => counts[2] += 1,
            Verdict::Skipped => counts[3] += 1,
            Verdict::Passed => {}
        }
        let entry = verdicts
            .entry(TestId {
                classname: classname.to_owned(),
                name: name.to_owned(),
            })
            .or_insert(verdict);
        *entry = (*entry).max(verdict);
    }
    counts[0] = local;

    for (counter, actual) in ["tests", "failures", "errors", "skipped"].into_iter().zip(counts) {
        if let Some(raw) = suite.attribute(counter) {
            let declared: u64 = parse_number("testsuite", counter, raw)?;
            if declared != actual {
                warnings.push(IngestWarning::CounterMismatch {
                    suite: suite_name.to_owned(),
                    counter: counter.to_owned(),
                    declared,
                    actual,
                });
            }
        }
    }
    Ok(())
}
