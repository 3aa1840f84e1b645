#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, TimeZone, Utc};
use gapquest_core::challenge::{BuildStatus, ChallengeKind, Target};
use gapquest_core::ingest::{LineRef, MutantKey};
use gapquest_core::orchestrator::{ProjectConfig, ProjectState, RunInput};
use rand::Rng;

/// Seed under which the replay fixture's first run hands out a line, a
/// mutation and an unrelated class challenge.
pub const REPLAY_SEED: u64 = 4;
pub const REPLAY_USER: &str = "alice";
pub const REPLAY_COMMITS: [&str; 3] = ["a1b2c3d", "b2c3d4e", "c3d4e5f"];

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn read(path: impl AsRef<Path>) -> Vec<u8> {
    let path = fixtures().join(path);
    fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn received_at(run: u64) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 1, 9, 0, 0).unwrap() + Duration::hours(run as i64)
}

/// The artifacts of replay run `n` (1-based).
pub fn replay_input(n: u64) -> RunInput {
    let dir = format!("replay/run-{n}");
    RunInput {
        commit: REPLAY_COMMITS[n as usize - 1].to_owned(),
        build_status: BuildStatus::Success,
        received_at: received_at(n),
        coverage: read(format!("{dir}/coverage.xml")),
        mutations: read(format!("{dir}/mutations.xml")),
        tests: vec![read(format!("{dir}/TEST-results.xml"))],
        expected_run_seq: Some(n),
    }
}

pub fn replay_config() -> ProjectConfig {
    let mut config = ProjectConfig::default();
    config.generation.seed = REPLAY_SEED;
    config
}

pub fn replay_project() -> ProjectState {
    let mut project = ProjectState::new("commons-cli", replay_config()).unwrap();
    project
        .add_user(REPLAY_USER, "Alice", 7, Some("red".into()))
        .unwrap();
    project
}

// Random models rendered as report XML, with a brute-force target oracle.

#[derive(Debug, Clone)]
pub struct RawLine {
    pub number: u32,
    pub hits: u64,
    /// (covered, total) for branch lines.
    pub branch: Option<(u32, u32)>,
}

#[derive(Debug, Clone)]
pub struct RawMethod {
    pub name: String,
    pub signature: String,
    pub lines: Vec<RawLine>,
}

#[derive(Debug, Clone)]
pub struct RawClass {
    pub name: String,
    pub file: String,
    pub methods: Vec<RawMethod>,
    /// Lines outside any method.
    pub loose: Vec<RawLine>,
}

#[derive(Debug, Clone)]
pub struct RawMutant {
    pub class: String,
    pub method: String,
    pub line: u32,
    pub index: u32,
    pub status: &'static str,
}

#[derive(Debug, Clone)]
pub struct RawModel {
    pub classes: Vec<RawClass>,
    pub mutants: Vec<RawMutant>,
    pub tests: u32,
}

fn raw_line<R: Rng>(rng: &mut R, number: u32) -> RawLine {
    let hits = if rng.gen_bool(0.4) { 0 } else { rng.gen_range(1..5) };
    let branch = rng.gen_bool(0.3).then(|| {
        let total = 2 * rng.gen_range(1..3);
        let covered = if hits == 0 { 0 } else { rng.gen_range(0..=total) };
        (covered, total)
    });
    RawLine {
        number,
        hits,
        branch,
    }
}

/// At most 10 classes, 50 lines and 20 mutants.
pub fn random_model<R: Rng>(rng: &mut R) -> RawModel {
    let mut budget = rng.gen_range(0..=50u32);
    let mut classes = Vec::new();
    for c in 0..rng.gen_range(0..=10) {
        let mut next_line = 1;
        let mut methods = Vec::new();
        for m in 0..rng.gen_range(0..=3) {
            let n = rng.gen_range(0..=4).min(budget);
            budget -= n;
            let lines = (0..n).map(|i| raw_line(rng, next_line + i)).collect();
            next_line += n + 1;
            methods.push(RawMethod {
                name: format!("m{m}"),
                signature: if rng.gen_bool(0.5) { "()V".into() } else { "(I)I".into() },
                lines,
            });
        }
        let n = rng.gen_range(0..=2).min(budget);
        budget -= n;
        let loose = (0..n).map(|i| raw_line(rng, next_line + i)).collect();
        classes.push(RawClass {
            name: format!("pkg.C{c}"),
            file: format!("pkg/C{c}.java"),
            methods,
            loose,
        });
    }

    let mut mutants = Vec::new();
    let sites: Vec<(String, String, u32)> = classes
        .iter()
        .flat_map(|c| {
            c.methods.iter().flat_map(move |m| {
                m.lines
                    .iter()
                    .map(move |l| (c.name.clone(), m.name.clone(), l.number))
            })
        })
        .collect();
    if !sites.is_empty() {
        for index in 0..rng.gen_range(0..=20) {
            let (class, method, line) = sites[rng.gen_range(0..sites.len())].clone();
            let status = ["KILLED", "SURVIVED", "NO_COVERAGE", "TIMED_OUT"][rng.gen_range(0..4)];
            mutants.push(RawMutant {
                class,
                method,
                line,
                index,
                status,
            });
        }
    }
    RawModel {
        classes,
        mutants,
        tests: rng.gen_range(0..30),
    }
}

fn render_line(out: &mut String, l: &RawLine) {
    match l.branch {
        None => writeln!(out, r#"<line number="{}" hits="{}" branch="false"/>"#, l.number, l.hits),
        Some((c, t)) => writeln!(
            out,
            r#"<line number="{}" hits="{}" branch="true" condition-coverage="{}% ({c}/{t})"/>"#,
            l.number,
            l.hits,
            100 * c / t
        ),
    }
    .unwrap();
}

impl RawModel {
    pub fn coverage_xml(&self) -> String {
        let mut out = String::from("<coverage><packages><package name=\"pkg\"><classes>\n");
        for c in &self.classes {
            writeln!(out, r#"<class name="{}" filename="{}"><methods>"#, c.name, c.file).unwrap();
            for m in &c.methods {
                writeln!(out, r#"<method name="{}" signature="{}"><lines>"#, m.name, m.signature).unwrap();
                for l in &m.lines {
                    render_line(&mut out, l);
                }
                out.push_str("</lines></method>\n");
            }
            out.push_str("</methods><lines>\n");
            for l in c.methods.iter().flat_map(|m| &m.lines).chain(&c.loose) {
                render_line(&mut out, l);
            }
            out.push_str("</lines></class>\n");
        }
        out.push_str("</classes></package></packages></coverage>\n");
        out
    }

    pub fn mutations_xml(&self) -> String {
        let mut out = String::from("<mutations>\n");
        for m in &self.mutants {
            writeln!(
                out,
                "<mutation status='{}'><mutatedClass>{}</mutatedClass><mutatedMethod>{}</mutatedMethod>\
                 <lineNumber>{}</lineNumber><mutator>M</mutator><index>{}</index>\
                 <description>d{}</description></mutation>",
                m.status, m.class, m.method, m.line, m.index, m.index
            )
            .unwrap();
        }
        out.push_str("</mutations>\n");
        out
    }

    pub fn tests_xml(&self) -> String {
        let mut out = format!("<testsuite name=\"S\" tests=\"{}\">\n", self.tests);
        for i in 0..self.tests {
            writeln!(out, r#"<testcase classname="pkg.T" name="t{i}"/>"#).unwrap();
        }
        out.push_str("</testsuite>\n");
        out
    }

    fn all_lines(&self) -> impl Iterator<Item = (&RawClass, &RawLine)> {
        self.classes.iter().flat_map(|c| {
            c.methods
                .iter()
                .flat_map(|m| &m.lines)
                .chain(&c.loose)
                .map(move |l| (c, l))
        })
    }

    /// Every valid target of `kind`, enumerated from the raw data.
    pub fn oracle(&self, kind: ChallengeKind) -> BTreeSet<Target> {
        let line_ref = |c: &RawClass, l: &RawLine| LineRef {
            file: c.file.clone(),
            class_name: c.name.clone(),
            line: l.number,
        };
        let mut out = BTreeSet::new();
        match kind {
            ChallengeKind::Build => {}
            ChallengeKind::Test => {
                out.insert(Target::None);
            }
            ChallengeKind::ClassCoverage => {
                for (c, l) in self.all_lines() {
                    if l.hits == 0 {
                        out.insert(Target::Class {
                            class_name: c.name.clone(),
                        });
                    }
                }
            }
            ChallengeKind::MethodCoverage => {
                for c in &self.classes {
                    for m in &c.methods {
                        if m.lines.iter().any(|l| l.hits == 0) {
                            out.insert(Target::Method {
                                class_name: c.name.clone(),
                                method_name: m.name.clone(),
                                signature: m.signature.clone(),
                            });
                        }
                    }
                }
            }
            ChallengeKind::LineCoverage => {
                for (c, l) in self.all_lines() {
                    if l.hits == 0 {
                        out.insert(Target::Line(line_ref(c, l)));
                    }
                }
            }
            ChallengeKind::BranchCoverage => {
                for (c, l) in self.all_lines() {
                    if matches!(l.branch, Some((covered, total)) if covered < total) {
                        out.insert(Target::Line(line_ref(c, l)));
                    }
                }
            }
            ChallengeKind::Mutation => {
                for m in self.mutants.iter().filter(|m| m.status == "SURVIVED") {
                    out.insert(Target::Mutant(MutantKey {
                        class_name: m.class.clone(),
                        method_name: m.method.clone(),
                        line: m.line,
                        mutator: "M".into(),
                        index: m.index,
                    }));
                }
            }
        }
        out
    }
}
