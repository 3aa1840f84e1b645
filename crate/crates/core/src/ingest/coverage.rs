use std::collections::BTreeMap;

use super::{
    children, expect_root, parse_document, parse_number, required_attr, ClassCov, IngestError,
    LineCov, LineRef, MethodCov,
};

/// Parses a Cobertura-style coverage report into one [`ClassCov`] per `class`
/// element.
///
/// Lines may be listed under `class/methods/method/lines`, directly under
/// `class/lines`, or both; the class line list is their union keyed by line
/// number, first occurrence wins.
pub fn parse_coverage(document: &[u8]) -> Result<Vec<ClassCov>, IngestError> {
    let doc = parse_document(document)?;
    let root = expect_root(&doc, "coverage")?;

    let mut classes = Vec::new();
    for package in children(root, "packages").flat_map(|p| children(p, "package")) {
        for class in children(package, "classes").flat_map(|c| children(c, "class")) {
            classes.push(parse_class(class)?);
        }
    }
    Ok(classes)
}

fn parse_class(node: roxmltree::Node<'_, '_>) -> Result<ClassCov, IngestError> {
    let class_name = required_attr(node, "name")?;
    let file = required_attr(node, "filename")?;
    if class_name.is_empty() {
        return Err(IngestError::invalid("class", "name", class_name));
    }
    if file.is_empty() {
        return Err(IngestError::invalid("class", "filename", file));
    }

    let mut all_lines: BTreeMap<u32, LineCov> = BTreeMap::new();
    let mut methods = Vec::new();
    for method in children(node, "methods").flat_map(|m| children(m, "method")) {
        let name = required_attr(method, "name")?;
        let signature = required_attr(method, "signature")?;
        let mut lines: Vec<LineCov> = Vec::new();
        for line in children(method, "lines").flat_map(|l| children(l, "line")) {
            let line = parse_line(line, class_name, file)?;
            if lines.iter().any(|l| l.line_ref.line == line.line_ref.line) {
                continue;
            }
            all_lines
                .entry(line.line_ref.line)
                .or_insert_with(|| line.clone());
            lines.push(line);
        }
        lines.sort_by_key(|l| l.line_ref.line);
        let first_line = lines.first().map_or(0, |l| l.line_ref.line);
        let last_line = lines.last().map_or(0, |l| l.line_ref.line);
        methods.push(MethodCov {
            class_name: class_name.to_owned(),
            name: name.to_owned(),
            signature: signature.to_owned(),
            first_line,
            last_line,
            lines,
        });
    }
    for line in children(node, "lines").flat_map(|l| children(l, "line")) {
        let line = parse_line(line, class_name, file)?;
        all_lines.entry(line.line_ref.line).or_insert(line);
    }

    Ok(ClassCov::new(
        class_name.to_owned(),
        file.to_owned(),
        methods,
        all_lines.into_values().collect(),
    ))
}

fn parse_line(node: roxmltree::Node<'_, '_>, class_name: &str, file: &str) -> Result<LineCov, IngestError> {
    let number_raw = required_attr(node, "number")?;
    let number: u32 = parse_number("line", "number", number_raw)?;
    if number == 0 {
        return Err(IngestError::invalid("line", "number", number_raw));
    }
    let hits: u64 = parse_number("line", "hits", required_attr(node, "hits")?)?;

    let is_branch = match node.attribute("branch") {
        None | Some("false") => false,
        Some("true") => true,
        Some(other) => return Err(IngestError::invalid("line", "branch", other)),
    };
    let (branch_covered, branch_total) = if is_branch {
        let raw = required_attr(node, "condition-coverage")?;
        parse_condition_coverage(raw)
            .ok_or_else(|| IngestError::invalid("line", "condition-coverage", raw))?
    } else {
        (0, 0)
    };

    Ok(LineCov {
        line_ref: LineRef {
            file: file.to_owned(),
            class_name: class_name.to_owned(),
            line: number,
        },
        hits,
        branch_total,
        branch_covered,
    })
}

/// Parses `INT "%" SP "(" INT "/" INT ")"` into `(covered, total)`.
fn parse_condition_coverage(raw: &str) -> Option<(u32, u32)> {
    let (percent, rest) = raw.split_once("% (")?;
    if percent.is_empty() || !percent.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let (covered, total) = rest.strip_suffix(')')?.split_once('/')?;
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !digits(covered) || !digits(total) {
        return None;
    }
    let covered: u32 = covered.parse().ok()?;
    let total: u32 = total.parse().ok()?;
    (covered <= total).then_some((covered, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SchemaProblem;

    fn wrap(class_body: &str) -> String {
        format!(
            r#"<?xml version="1.0"?>
<!DOCTYPE coverage SYSTEM "http://cobertura.sourceforge.net/xml/coverage-04.dtd">
<coverage line-rate="0.5" branch-rate="0.5" version="1.9">
  <packages>
    <package name="org.example">
      <classes>
        <class name="org.example.Greeter" filename="org/example/Greeter.java">
{class_body}
        </class>
      </classes>
    </package>
  </packages>
</coverage>"#
        )
    }

    #[test]
    fn condition_coverage_grammar() {
        assert_eq!(parse_condition_coverage("50% (1/2)"), Some((1, 2)));
        assert_eq!(parse_condition_coverage("100% (4/4)"), Some((4, 4)));
        assert_eq!(parse_condition_coverage("0% (0/2)"), Some((0, 2)));
        assert_eq!(parse_condition_coverage("50% (1/2"), None);
        assert_eq!(parse_condition_coverage("50%(1/2)"), None);
        assert_eq!(parse_condition_coverage("half (1/2)"), None);
        assert_eq!(parse_condition_coverage("50% (3/2)"), None);
        assert_eq!(parse_condition_coverage("50% (-1/2)"), None);
        assert_eq!(parse_condition_coverage(""), None);
    }

    #[test]
    fn method_and_class_lines_are_merged() {
        let doc = wrap(
            r#"<methods>
  <method name="greet" signature="(Ljava/lang/String;)V">
    <lines>
      <line number="3" hits="1" branch="false"/>
      <line number="4" hits="0" branch="true" condition-coverage="50% (1/2)"/>
    </lines>
  </method>
</methods>
<lines>
  <line number="3" hits="1" branch="false"/>
  <line number="4" hits="0" branch="true" condition-coverage="50% (1/2)"/>
  <line number="9" hits="2"/>
</lines>"#,
        );
        let classes = parse_coverage(doc.as_bytes()).unwrap();
        assert_eq!(classes.len(), 1);
        let class = &classes[0];
        assert_eq!(class.lines_total, 3);
        assert_eq!(class.lines_covered, 2);
        assert_eq!(class.branches_total, 2);
        assert_eq!(class.branches_covered, 1);
        let method = &class.methods[0];
        assert_eq!((method.first_line, method.last_line), (3, 4));
        assert_eq!(method.covered_lines(), 1);
    }

    #[test]
    fn branch_false_ignores_condition_coverage() {
        let doc = wrap(
            r#"<lines><line number="2" hits="1" branch="false" condition-coverage="50% (1/2)"/></lines>"#,
        );
        let classes = parse_coverage(doc.as_bytes()).unwrap();
        assert_eq!(classes[0].lines[0].branch_total, 0);
        assert_eq!(classes[0].lines[0].branch_covered, 0);
    }

    #[test]
    fn branch_line_without_condition_coverage_is_schema_error() {
        let doc = wrap(r#"<lines><line number="2" hits="1" branch="true"/></lines>"#);
        let err = parse_coverage(doc.as_bytes()).unwrap_err();
        assert_eq!(err, IngestError::missing("line", "condition-coverage"));
    }

    #[test]
    fn bad_condition_coverage_is_schema_error() {
        let doc = wrap(
            r#"<lines><line number="2" hits="1" branch="true" condition-coverage="about half"/></lines>"#,
        );
        match parse_coverage(doc.as_bytes()).unwrap_err() {
            IngestError::Schema {
                element,
                attribute,
                problem: SchemaProblem::Invalid { value },
            } => {
                assert_eq!(element, "line");
                assert_eq!(attribute, "condition-coverage");
                assert_eq!(value, "about half");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn line_zero_and_negative_hits_rejected() {
        let doc = wrap(r#"<lines><line number="0" hits="1"/></lines>"#);
        assert!(matches!(
            parse_coverage(doc.as_bytes()),
            Err(IngestError::Schema { .. })
        ));
        let doc = wrap(r#"<lines><line number="3" hits="-1"/></lines>"#);
        assert_eq!(
            parse_coverage(doc.as_bytes()).unwrap_err(),
            IngestError::invalid("line", "hits", "-1")
        );
    }

    #[test]
    fn missing_filename() {
        let doc = r#"<coverage><packages><package name="p"><classes>
            <class name="p.A"><lines/></class></classes></package></packages></coverage>"#;
        assert_eq!(
            parse_coverage(doc.as_bytes()).unwrap_err(),
            IngestError::missing("class", "filename")
        );
    }

    #[test]
    fn malformed_xml_reports_position() {
        let doc = "<coverage>\n  <packages>\n</coverage>";
        match parse_coverage(doc.as_bytes()).unwrap_err() {
            IngestError::Parse { position, .. } => assert_eq!(position.row, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_utf8_is_parse_error() {
        let mut doc = b"<coverage>\n<packages>".to_vec();
        doc.push(0xff);
        match parse_coverage(&doc).unwrap_err() {
            IngestError::Parse { position, message } => {
                assert_eq!(position, super::super::TextPosition { row: 2, col: 11 });
                assert_eq!(message, "invalid UTF-8");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_root() {
        let err = parse_coverage(b"<report/>").unwrap_err();
        assert!(matches!(err, IngestError::UnexpectedRoot { expected: "coverage", .. }));
    }

    #[test]
    fn empty_packages() {
        assert!(parse_coverage(b"<coverage><packages/></coverage>")
            .unwrap()
            .is_empty());
    }
}
