//! Parsing of the three CI artifacts (coverage, mutation and test-result XML)
//! into a [`SourceModel`].
//!
//! All parsers are pure functions over byte slices.

mod coverage;
mod junit;
mod model;
mod mutation;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coverage::parse_coverage;
pub use junit::{parse_test_results, TestResults};
pub use model::{
    ClassCov, LineCov, LineRef, MethodCov, Mutant, MutantKey, MutationStatus, SourceModel, TestId,
    TestSnapshot,
};
pub use mutation::parse_mutations;

/// 1-based row/column inside an XML document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextPosition {
    pub row: u32,
    pub col: u32,
}

impl fmt::Display for TextPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.row, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SchemaProblem {
    Missing,
    Invalid { value: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid model: {}", problems.join("; "))]
pub struct ModelError {
    pub problems: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("malformed XML at {position}: {message}")]
    Parse {
        position: TextPosition,
        message: String,
    },
    #[error("unexpected root element <{found}>, expected <{expected}>")]
    UnexpectedRoot {
        expected: &'static str,
        found: String,
    },
    #[error("<{element}> {}", describe_problem(attribute, problem))]
    Schema {
        element: String,
        attribute: String,
        problem: SchemaProblem,
    },
    #[error("duplicate mutant {0}")]
    DuplicateMutant(MutantKey),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn describe_problem(attribute: &str, problem: &SchemaProblem) -> String {
    match problem {
        SchemaProblem::Missing => format!("is missing required `{attribute}`"),
        SchemaProblem::Invalid { value } => format!("has invalid `{attribute}` value {value:?}"),
    }
}

impl IngestError {
    pub(crate) fn missing(element: &str, attribute: &str) -> Self {
        IngestError::Schema {
            element: element.to_owned(),
            attribute: attribute.to_owned(),
            problem: SchemaProblem::Missing,
        }
    }

    pub(crate) fn invalid(element: &str, attribute: &str, value: &str) -> Self {
        IngestError::Schema {
            element: element.to_owned(),
            attribute: attribute.to_owned(),
            problem: SchemaProblem::Invalid {
                value: value.to_owned(),
            },
        }
    }
}

/// Non-fatal observation made while parsing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum IngestWarning {
    /// A `testsuite` counter disagrees with the testcases it contains; the
    /// testcase-derived count was used.
    CounterMismatch {
        suite: String,
        counter: String,
        declared: u64,
        actual: u64,
    },
}

impl fmt::Display for IngestWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IngestWarning::CounterMismatch {
                suite,
                counter,
                declared,
                actual,
            } => write!(
                f,
                "testsuite {suite:?} declares {counter}={declared} but contains {actual}"
            ),
        }
    }
}

/// Validates the parser outputs of one run and freezes them into a model.
/// Mutants whose class has no coverage entry are kept and flagged orphaned.
pub fn assemble_model(
    classes: Vec<ClassCov>,
    mutants: Vec<Mutant>,
    tests: TestSnapshot,
) -> Result<SourceModel, ModelError> {
    SourceModel::build(classes, mutants, tests)
}

/// Parses all three artifacts of a run and assembles the model.
pub fn parse_run<T: AsRef<[u8]>>(
    coverage: &[u8],
    mutations: &[u8],
    tests: &[T],
) -> Result<(SourceModel, Vec<IngestWarning>), IngestError> {
    let classes = parse_coverage(coverage)?;
    let mutants = parse_mutations(mutations)?;
    let TestResults { snapshot, warnings } = parse_test_results(tests)?;
    Ok((assemble_model(classes, mutants, snapshot)?, warnings))
}

pub(crate) fn parse_document(bytes: &[u8]) -> Result<roxmltree::Document<'_>, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let valid = &bytes[..e.valid_up_to()];
        let row = valid.iter().filter(|&&b| b == b'\n').count() as u32 + 1;
        let line_start = valid.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        IngestError::Parse {
            position: TextPosition {
                row,
                col: (valid.len() - line_start) as u32 + 1,
            },
            message: "invalid UTF-8".to_owned(),
        }
    })?;
    let options = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    };
    roxmltree::Document::parse_with_options(text, options).map_err(|e| {
        let pos = e.pos();
        IngestError::Parse {
            position: TextPosition {
                row: pos.row,
                col: pos.col,
            },
            message: e.to_string(),
        }
    })
}

pub(crate) fn expect_root<'a, 'i>(
    doc: &'a roxmltree::Document<'i>,
    expected: &'static str,
) -> Result<roxmltree::Node<'a, 'i>, IngestError> {
    let root = doc.root_element();
    if root.tag_name().name() != expected {
        return Err(IngestError::UnexpectedRoot {
            expected,
            found: root.tag_name().name().to_owned(),
        });
    }
    Ok(root)
}

pub(crate) fn children<'a, 'i: 'a>(
    node: roxmltree::Node<'a, 'i>,
    name: &'static str,
) -> impl Iterator<Item = roxmltree::Node<'a, 'i>> {
    node.children()
        .filter(move |c| c.is_element() && c.tag_name().name() == name)
}

pub(crate) fn required_attr<'a>(
    node: roxmltree::Node<'a, '_>,
    name: &str,
) -> Result<&'a str, IngestError> {
    node.attribute(name)
        .ok_or_else(|| IngestError::missing(node.tag_name().name(), name))
}

pub(crate) fn parse_number<N: std::str::FromStr>(
    element: &str,
    attribute: &str,
    value: &str,
) -> Result<N, IngestError> {
    value
        .trim()
        .parse()
        .map_err(|_| IngestError::invalid(element, attribute, value))
}
