//! Line-oriented `key = value` files used for configs and scenarios.
//!
//! `#` starts a comment; blank lines are ignored. Keys are unique.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KvFile {
    path: PathBuf,
    entries: BTreeMap<String, (String, u64)>,
    used: RefCell<BTreeSet<String>>,
}

impl KvFile {
    pub fn parse(text: &str, path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = (i + 1) as u64;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(Error::Parse {
                    path,
                    line,
                    message: format!("expected `key = value`, got `{content}`"),
                });
            };
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse {
                    path,
                    line,
                    message: "empty key".into(),
                });
            }
            if entries.insert(key.clone(), (v.trim().to_string(), line)).is_some() {
                return Err(Error::Parse {
                    path,
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self {
            path,
            entries,
            used: RefCell::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Set `key` unless the file already has it. Returns whether it was inserted.
    pub fn insert_default(&mut self, key: &str, value: &str) -> bool {
        if self.entries.contains_key(key) {
            return false;
        }
        self.entries.insert(key.to_string(), (value.to_string(), 0));
        true
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        let (v, _) = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(v)
    }

    /// Parse `key` if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let Some((v, line)) = self.entries.get(key) else {
            return Ok(None);
        };
        self.used.borrow_mut().insert(key.to_string());
        v.parse::<T>().map(Some).map_err(|e| Error::Parse {
            path: self.path.clone(),
            line: *line,
            message: format!("bad value for `{key}`: {e}"),
        })
    }

    /// Overwrite `slot` if `key` is present.
    pub fn set<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<()>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = self.get(key)? {
            *slot = v;
        }
        Ok(())
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some((v, line)) = self.entries.get(key) else {
            return Ok(None);
        };
        self.used.borrow_mut().insert(key.to_string());
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>().map_err(|e| Error::Parse {
                    path: self.path.clone(),
                    line: *line,
                    message: format!("bad list item `{s}` for `{key}`: {e}"),
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Keys that no accessor has looked at.
    pub fn unused(&self) -> Vec<String> {
        let used = self.used.borrow();
        self.entries.keys().filter(|k| !used.contains(*k)).cloned().collect()
    }

    pub fn reject_unused(&self) -> Result<()> {
        let unused = self.unused();
        if let Some(k) = unused.first() {
            let line = self.entries[k].1;
            return Err(Error::Parse {
                path: self.path.clone(),
                line,
                message: format!("unknown key `{k}`"),
            });
        }
        Ok(())
    }
}
