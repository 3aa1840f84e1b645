//! On-disk layout of one state directory:
//!
//! ```text
//! <root>/<project>/project.json
//! <root>/<project>/users/<user>.json
//! <root>/<project>/events/<user>.log   one JSON event per line
//! ```
//!
//! JSON documents are replaced atomically (temp file, fsync, rename). For a
//! write, new events are appended to the log before the user document is
//! replaced, so after a crash the log can only run ahead of the document; the
//! surplus lines are dropped on load.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{validate_id, Event, ProjectConfig, ProjectState, RunRecord, UserRecord};
use crate::ingest::SourceModel;
use crate::progression::UserState;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: unsupported schema version {found}, expected {SCHEMA_VERSION}")]
    SchemaVersion { path: PathBuf, found: u32 },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("project {0} not found")]
    NotFound(String),
    #[error("project {0} already exists")]
    AlreadyExists(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Serialize, Deserialize)]
struct ProjectDoc {
    schema_version: u32,
    project_id: String,
    config: ProjectConfig,
}

#[derive(Serialize, Deserialize)]
struct UserDoc {
    schema_version: u32,
    state: UserState,
    runs: Vec<RunRecord>,
    prev_model: Option<SourceModel>,
    pending_rejections: u32,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn project_dir(&self, project_id: &str) -> PathBuf {
        self.root.join(project_id)
    }

    pub fn exists(&self, project_id: &str) -> bool {
        self.project_dir(project_id).join("project.json").is_file()
    }

    /// Project ids with a project document, sorted.
    pub fn list_projects(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(io_err(&self.root))? {
            let entry = entry.map_err(io_err(&self.root))?;
            let Some(name) = entry.file_name().to_str().map(str::to_owned) else {
                continue;
            };
            if validate_id("project", &name).is_ok() && self.exists(&name) {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn create(&self, state: &ProjectState) -> Result<(), StoreError> {
        if self.exists(&state.project_id) {
            return Err(StoreError::AlreadyExists(state.project_id.clone()));
        }
        let dir = self.project_dir(&state.project_id);
        for sub in ["users", "events"] {
            let path = dir.join(sub);
            fs::create_dir_all(&path).map_err(io_err(&path))?;
        }
        for record in state.users.values() {
            self.write_user(&dir, record, 0)?;
        }
        self.write_project(state)
    }

    fn write_project(&self, state: &ProjectState) -> Result<(), StoreError> {
        let doc = ProjectDoc {
            schema_version: SCHEMA_VERSION,
            project_id: state.project_id.clone(),
            config: state.config.clone(),
        };
        write_json(&self.project_dir(&state.project_id).join("project.json"), &doc)
    }

    /// Persists everything that differs between two snapshots of a project.
    pub fn commit(&self, old: &ProjectState, new: &ProjectState) -> Result<(), StoreError> {
        let dir = self.project_dir(&new.project_id);
        if old.config != new.config {
            self.write_project(new)?;
        }
        for (id, record) in &new.users {
            let before = old.users.get(id);
            if before == Some(record) {
                continue;
            }
            let persisted = before.map_or(0, |r| r.state.event_seq);
            self.write_user(&dir, record, persisted)?;
        }
        Ok(())
    }

    fn write_user(&self, dir: &Path, record: &UserRecord, persisted_seq: u64) -> Result<(), StoreError> {
        let id = &record.state.user_id;
        let log = dir.join("events").join(format!("{id}.log"));
        let fresh: Vec<&Event> = record.events.iter().filter(|e| e.seq > persisted_seq).collect();
        if !fresh.is_empty() || !log.exists() {
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&log)
                .map_err(io_err(&log))?;
            let mut buf = Vec::new();
            for event in fresh {
                serde_json::to_writer(&mut buf, event).map_err(|source| StoreError::Json {
                    path: log.clone(),
                    source,
                })?;
                buf.push(b'\n');
            }
            file.write_all(&buf).map_err(io_err(&log))?;
            file.sync_all().map_err(io_err(&log))?;
        }
        let doc = UserDoc {
            schema_version: SCHEMA_VERSION,
            state: record.state.clone(),
            runs: record.runs.clone(),
            prev_model: record.prev_model.clone(),
            pending_rejections: record.pending_rejections,
        };
        write_json(&dir.join("users").join(format!("{id}.json")), &doc)
    }

    /// Loads a project, dropping event lines written by an interrupted
    /// commit, and checks that every stored score can be recomputed.
    pub fn load(&self, project_id: &str) -> Result<ProjectState, StoreError> {
        validate_id("project", project_id).map_err(|_| StoreError::NotFound(project_id.to_owned()))?;
        if !self.exists(project_id) {
            return Err(StoreError::NotFound(project_id.to_owned()));
        }
        let dir = self.project_dir(project_id);
        let project_path = dir.join("project.json");
        let doc: ProjectDoc = read_json(&project_path)?;
        check_version(&project_path, doc.schema_version)?;
        if doc.project_id != project_id {
            return Err(StoreError::Corrupt {
                path: project_path,
                message: format!("document belongs to project {}", doc.project_id),
            });
        }

        let mut users = BTreeMap::new();
        let users_dir = dir.join("users");
        let mut paths: Vec<PathBuf> = fs::read_dir(&users_dir)
            .map_err(io_err(&users_dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let user: UserDoc = read_json(&path)?;
            check_version(&path, user.schema_version)?;
            let id = user.state.user_id.clone();
            if path.file_stem().and_then(|s| s.to_str()) != Some(id.as_str()) {
                return Err(StoreError::Corrupt {
                    path,
                    message: format!("document belongs to user {id}"),
                });
            }
            let log = dir.join("events").join(format!("{id}.log"));
            let events = read_log(&log, user.state.event_seq)?;
            users.insert(
                id,
                UserRecord {
                    state: user.state,
                    runs: user.runs,
                    prev_model: user.prev_model,
                    pending_rejections: user.pending_rejections,
                    events,
                },
            );
        }

        let state = ProjectState {
            project_id: doc.project_id,
            config: doc.config,
            users,
        };
        state
            .verify()
            .map_err(|message| StoreError::Corrupt { path: dir, message })?;
        Ok(state)
    }
}

fn check_version(path: &Path, found: u32) -> Result<(), StoreError> {
    if found == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(StoreError::SchemaVersion {
            path: path.to_owned(),
            found,
        })
    }
}

/// Reads events `1..=event_seq`. Later lines, including a torn last line, are
/// cut off the file.
fn read_log(path: &Path, event_seq: u64) -> Result<Vec<Event>, StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound && event_seq == 0 => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut events = Vec::new();
    let mut keep_bytes = 0u64;
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    while (events.len() as u64) < event_seq {
        line.clear();
        let n = reader.read_line(&mut line).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        let event: Event = serde_json::from_str(line.trim_end()).map_err(|source| StoreError::Json {
            path: path.to_owned(),
            source,
        })?;
        events.push(event);
        keep_bytes += n as u64;
    }
    if (events.len() as u64) < event_seq {
        return Err(StoreError::Corrupt {
            path: path.to_owned(),
            message: format!("log holds {} events, user document expects {event_seq}", events.len()),
        });
    }
    let len = fs::metadata(path).map_err(io_err(path))?.len();
    if len > keep_bytes {
        let file = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
        file.set_len(keep_bytes).map_err(io_err(path))?;
        file.sync_all().map_err(io_err(path))?;
    }
    Ok(events)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|source| StoreError::Json {
        path: path.to_owned(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| StoreError::Json {
        path: path.to_owned(),
        source,
    })?;
    bytes.push(b'\n');
    let tmp = path.with_extension("json.tmp");
    {
        let mut file = File::create(&tmp).map_err(io_err(&tmp))?;
        file.write_all(&bytes).map_err(io_err(&tmp))?;
        file.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}
