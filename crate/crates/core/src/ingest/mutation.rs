use std::collections::BTreeSet;

use super::{
    children, expect_root, parse_document, parse_number, required_attr, IngestError, Mutant,
    MutantKey, MutationStatus,
};

/// Parses a PIT-style `mutations` report. One [`Mutant`] per `mutation`
/// element, in document order.
pub fn parse_mutations(document: &[u8]) -> Result<Vec<Mutant>, IngestError> {
    let doc = parse_document(document)?;
    let root = expect_root(&doc, "mutations")?;

    let mut seen = BTreeSet::new();
    let mut mutants = Vec::new();
    for node in children(root, "mutation") {
        let mutant = parse_mutation(node)?;
        if !seen.insert(mutant.key.clone()) {
            return Err(IngestError::DuplicateMutant(mutant.key));
        }
        mutants.push(mutant);
    }
    Ok(mutants)
}

fn parse_mutation(node: roxmltree::Node<'_, '_>) -> Result<Mutant, IngestError> {
    let status_raw = required_attr(node, "status")?;
    let status = MutationStatus::from_report(status_raw)
        .ok_or_else(|| IngestError::invalid("mutation", "status", status_raw))?;

    let line_raw = child_text(node, "lineNumber")?;
    let line: u32 = parse_number("mutation", "lineNumber", line_raw)?;
    if line == 0 {
        return Err(IngestError::invalid("mutation", "lineNumber", line_raw));
    }
    // Newer reports wrap the index in <indexes>; take the first one either way.
    let index_raw = node
        .descendants()
        .find(|n| n.is_element() && n.tag_name().name() == "index")
        .map(|n| n.text().unwrap_or("").trim())
        .ok_or_else(|| IngestError::missing("mutation", "index"))?;
    let index: u32 = parse_number("mutation", "index", index_raw)?;

    let key = MutantKey {
        class_name: non_empty(node, "mutatedClass")?.to_owned(),
        method_name: non_empty(node, "mutatedMethod")?.to_owned(),
        line,
        mutator: non_empty(node, "mutator")?.to_owned(),
        index,
    };
    let description = child_text(node, "description")?.to_owned();
    let killing_test = children(node, "killingTest")
        .next()
        .and_then(|n| n.text())
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_owned);

    Ok(Mutant {
        key,
        status,
        description,
        killing_test,
        orphaned: false,
    })
}

fn child_text<'a>(node: roxmltree::Node<'a, '_>, name: &'static str) -> Result<&'a str, IngestError> {
    children(node, name)
        .next()
        .map(|c| c.text().unwrap_or("").trim())
        .ok_or_else(|| IngestError::missing("mutation", name))
}

fn non_empty<'a>(node: roxmltree::Node<'a, '_>, name: &'static str) -> Result<&'a str, IngestError> {
    let text = child_text(node, name)?;
    if text.is_empty() {
        return Err(IngestError::invalid("mutation", name, text));
    }
    Ok(text)
}
