use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::MtError;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub src: String,
    pub tgt: String,
    pub text: String,
}

impl CacheKey {
    pub fn new(src: &str, tgt: &str, text: &str) -> Self {
        Self {
            src: src.into(),
            tgt: tgt.into(),
            text: text.into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Line {
    src: String,
    tgt: String,
    text: String,
    translation: String,
}

/// Exact-match cache keyed on (source tag, target tag, text). A file-backed
/// cache appends one JSON line per new entry.
pub struct TranslationCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<CacheKey, String>>,
    file: Mutex<Option<File>>,
}

impl TranslationCache {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            entries: RwLock::new(HashMap::new()),
            file: Mutex::new(None),
        }
    }

    /// Load `path` if it exists and append new entries to it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, MtError> {
        let path = path.as_ref().to_path_buf();
        let err = |reason: String| MtError::Cache {
            path: path.display().to_string(),
            reason,
        };
        let mut entries = HashMap::new();
        if path.exists() {
            let f = File::open(&path).map_err(|e| err(e.to_string()))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| err(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let l: Line =
                    serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
                entries.insert(CacheKey::new(&l.src, &l.tgt, &l.text), l.translation);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| err(e.to_string()))?;
        Ok(Self {
            path: Some(path),
            entries: RwLock::new(entries),
            file: Mutex::new(Some(file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, src: &str, tgt: &str, text: &str) -> Option<String> {
        self.entries
            .read()
            .expect("cache lock")
            .get(&CacheKey::new(src, tgt, text))
            .cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(
        &self,
        src: &str,
        tgt: &str,
        text: &str,
        translation: &str,
    ) -> Result<(), MtError> {
        self.insert_all(src, tgt, [(text.to_string(), translation.to_string())])
    }

    pub fn insert_all(
        &self,
        src: &str,
        tgt: &str,
        pairs: impl IntoIterator<Item = (String, String)>,
    ) -> Result<(), MtError> {
        let mut file = self.file.lock().expect("cache file lock");
        let mut entries = self.entries.write().expect("cache lock");
        let mut buf = String::new();
        for (text, translation) in pairs {
            let key = CacheKey::new(src, tgt, &text);
            if entries.get(&key) == Some(&translation) {
                continue;
            }
            if file.is_some() {
                let line = Line {
                    src: src.into(),
                    tgt: tgt.into(),
                    text,
                    translation: translation.clone(),
                };
                buf += &serde_json::to_string(&line).expect("cache line serializes");
                buf.push('\n');
            }
            entries.insert(key, translation);
        }
        if let (Some(f), false) = (file.as_mut(), buf.is_empty()) {
            f.write_all(buf.as_bytes())
                .and_then(|_| f.flush())
                .map_err(|e| MtError::Cache {
                    path: self
                        .path
                        .as_ref()
                        .map(|p| p.display().to_string())
                        .unwrap_or_default(),
                    reason: e.to_string(),
                })?;
        }
        Ok(())
    }
}
