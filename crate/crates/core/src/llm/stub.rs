//! Fixture-backed provider. A fixture is a file holding the raw reply text,
//! named `<purpose>_<seq>.json` with `seq` counting from 1 per purpose.
//! Requests carrying a scope look first in `<scope>/`, then in each shorter
//! suffix of the scope path (`t01/v1` -> `v1`), then at the top level, so
//! scenarios can share replies across tasks and variants and override only
//! where they differ.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{ChatRequest, LlmError, LlmProvider, Purpose};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallRecord {
    pub scope: Option<String>,
    pub purpose: Purpose,
    pub seq: usize,
    /// Fixture key that answered the call.
    pub fixture: String,
}

enum Source {
    Dir(PathBuf),
    Memory(BTreeMap<String, String>),
}

pub struct StubProvider {
    source: Source,
    counters: Mutex<HashMap<(Option<String>, Purpose), usize>>,
    log: Mutex<Vec<CallRecord>>,
}

impl StubProvider {
    pub fn from_dir(dir: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(LlmError::Config(format!(
                "fixture directory {} does not exist",
                dir.display()
            )));
        }
        Ok(Self::with_source(Source::Dir(dir)))
    }

    /// Fixtures given as `(key, reply)` where key is `purpose_seq` or
    /// `scope/purpose_seq` (the `.json` suffix is optional).
    pub fn from_memory<K: Into<String>, V: Into<String>>(
        fixtures: impl IntoIterator<Item = (K, V)>,
    ) -> Self {
        let map = fixtures
            .into_iter()
            .map(|(k, v)| {
                let k: String = k.into();
                let k = k.strip_suffix(".json").map(str::to_string).unwrap_or(k);
                (k, v.into())
            })
            .collect();
        Self::with_source(Source::Memory(map))
    }

    fn with_source(source: Source) -> Self {
        StubProvider {
            source,
            counters: Mutex::new(HashMap::new()),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Every call answered so far, in completion order.
    pub fn calls(&self) -> Vec<CallRecord> {
        self.log.lock().expect("stub log poisoned").clone()
    }

    pub fn call_count(&self) -> usize {
        self.log.lock().expect("stub log poisoned").len()
    }

    fn lookup(&self, key: &str) -> Result<Option<String>, LlmError> {
        match &self.source {
            Source::Memory(map) => Ok(map.get(key).cloned()),
            Source::Dir(dir) => read_fixture(dir, key),
        }
    }
}

fn read_fixture(dir: &Path, key: &str) -> Result<Option<String>, LlmError> {
    let path = dir.join(format!("{key}.json"));
    match std::fs::read_to_string(&path) {
        Ok(text) => Ok(Some(text)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(LlmError::Io(format!("{}: {e}", path.display()))),
    }
}

impl LlmProvider for StubProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        request.check()?;
        let seq = {
            let mut counters = self.counters.lock().expect("stub counters poisoned");
            let c = counters
                .entry((request.scope.clone(), request.purpose))
                .or_insert(0);
            *c += 1;
            *c
        };
        let name = format!("{}_{seq}", request.purpose);
        let mut keys = Vec::new();
        if let Some(scope) = &request.scope {
            let parts: Vec<&str> = scope.split('/').filter(|p| !p.is_empty()).collect();
            for i in 0..parts.len() {
                keys.push(format!("{}/{name}", parts[i..].join("/")));
            }
        }
        keys.push(name);
        for key in keys {
            if let Some(reply) = self.lookup(&key)? {
                log::debug!("stub answered {key}");
                self.log.lock().expect("stub log poisoned").push(CallRecord {
                    scope: request.scope.clone(),
                    purpose: request.purpose,
                    seq,
                    fixture: key,
                });
                return Ok(reply);
            }
        }
        Err(LlmError::MissingFixture {
            purpose: request.purpose,
            seq,
            scope: request.scope.clone(),
        })
    }
}
