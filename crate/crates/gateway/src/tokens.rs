//! Per-project API tokens, stored next to the project documents in
//! `tokens.json`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use subtle::ConstantTimeEq;
use thiserror::Error;

pub const MIN_TOKEN_LEN: usize = 16;
const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiToken {
    pub user_id: String,
    pub token: String,
}

#[derive(Debug, Error)]
pub enum TokenError {
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
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct TokenDoc {
    schema_version: u32,
    tokens: Vec<ApiToken>,
}

#[derive(Debug, Clone, Default)]
pub struct TokenFile {
    tokens: Vec<ApiToken>,
}

pub fn path(project_dir: &Path) -> PathBuf {
    project_dir.join("tokens.json")
}

/// 32 hex characters from the OS-seeded generator.
pub fn new_token() -> String {
    let mut bytes = [0u8; 16];
    rand::thread_rng().fill_bytes(&mut bytes);
    hex::encode(bytes)
}

impl TokenFile {
    /// A missing file is an empty token set.
    pub fn load(project_dir: &Path) -> Result<Self, TokenError> {
        let path = path(project_dir);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(TokenFile::default()),
            Err(source) => return Err(TokenError::Io { path, source }),
        };
        let doc: TokenDoc = serde_json::from_slice(&bytes).map_err(|source| TokenError::Json {
            path: path.clone(),
            source,
        })?;
        let invalid = |message: String| TokenError::Invalid {
            path: path.clone(),
            message,
        };
        if doc.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!("unsupported schema version {}", doc.schema_version)));
        }
        for (i, t) in doc.tokens.iter().enumerate() {
            if t.token.len() < MIN_TOKEN_LEN {
                return Err(invalid(format!("token of {} is shorter than {MIN_TOKEN_LEN}", t.user_id)));
            }
            if doc.tokens[..i].iter().any(|o| o.token == t.token) {
                return Err(invalid(format!("token of {} is not unique", t.user_id)));
            }
        }
        Ok(TokenFile { tokens: doc.tokens })
    }

    pub fn save(&self, project_dir: &Path) -> Result<(), TokenError> {
        let path = path(project_dir);
        let doc = TokenDoc {
            schema_version: SCHEMA_VERSION,
            tokens: self.tokens.clone(),
        };
        let mut bytes = serde_json::to_vec_pretty(&doc).expect("tokens serialize");
        bytes.push(b'\n');
        let tmp = path.with_extension("json.tmp");
        let io_err = |source| TokenError::Io {
            path: path.clone(),
            source,
        };
        let mut file = fs::File::create(&tmp).map_err(io_err)?;
        file.write_all(&bytes).map_err(io_err)?;
        file.sync_all().map_err(io_err)?;
        fs::rename(&tmp, &path).map_err(io_err)
    }

    /// Issues a fresh token for `user_id`, replacing any previous one.
    pub fn issue(&mut self, user_id: &str) -> String {
        let mut token = new_token();
        while self.tokens.iter().any(|t| t.token == token) {
            token = new_token();
        }
        self.tokens.retain(|t| t.user_id != user_id);
        self.tokens.push(ApiToken {
            user_id: user_id.to_owned(),
            token: token.clone(),
        });
        token
    }

    /// The user owning `presented`. Every stored token is compared, each in
    /// constant time.
    pub fn authenticate(&self, presented: &str) -> Option<&str> {
        let mut found = None;
        for t in &self.tokens {
            if bool::from(t.token.as_bytes().ct_eq(presented.as_bytes())) {
                found = Some(t.user_id.as_str());
            }
        }
        found
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn issue_save_load_authenticate() {
        let dir = tempfile::tempdir().unwrap();
        let mut file = TokenFile::load(dir.path()).unwrap();
        let a = file.issue("alice");
        let b = file.issue("bob");
        assert!(a.len() >= MIN_TOKEN_LEN);
        assert_ne!(a, b);
        file.save(dir.path()).unwrap();

        let loaded = TokenFile::load(dir.path()).unwrap();
        assert_eq!(loaded.authenticate(&a), Some("alice"));
        assert_eq!(loaded.authenticate(&b), Some("bob"));
        assert_eq!(loaded.authenticate("nope"), None);
        assert_eq!(loaded.authenticate(""), None);
    }

    #[test]
    fn short_tokens_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            path(dir.path()),
            r#"{"schema_version":1,"tokens":[{"user_id":"a","token":"short"}]}"#,
        )
        .unwrap();
        assert!(matches!(TokenFile::load(dir.path()), Err(TokenError::Invalid { .. })));
    }
}
