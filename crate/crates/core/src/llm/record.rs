//! Wraps a live provider and writes every reply to a fixture directory in
//! the layout the stub provider reads, so a recorded run replays offline.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Mutex;

use super::{ChatRequest, LlmError, LlmProvider, Purpose};

pub struct RecordingProvider<P> {
    inner: P,
    dir: PathBuf,
    counters: Mutex<HashMap<(Option<String>, Purpose), usize>>,
}

impl<P: LlmProvider> RecordingProvider<P> {
    pub fn new(inner: P, dir: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| LlmError::Io(format!("{}: {e}", dir.display())))?;
        Ok(RecordingProvider {
            inner,
            dir,
            counters: Mutex::new(HashMap::new()),
        })
    }
}

impl<P: LlmProvider> LlmProvider for RecordingProvider<P> {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let seq = {
            let mut counters = self.counters.lock().expect("recorder counters poisoned");
            let c = counters
                .entry((request.scope.clone(), request.purpose))
                .or_insert(0);
            *c += 1;
            *c
        };
        let reply = self.inner.complete(request)?;
        let mut dir = self.dir.clone();
        if let Some(scope) = &request.scope {
            dir.push(scope);
        }
        std::fs::create_dir_all(&dir).map_err(|e| LlmError::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join(format!("{}_{seq}.json", request.purpose));
        std::fs::write(&path, &reply).map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))?;
        Ok(reply)
    }
}
