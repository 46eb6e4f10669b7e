use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::divergence::DivergenceConfig;
use crate::error::{Error, Result};
use crate::geometry::GeometryConfig;
use crate::slicing::{CoordinateMode, Selection};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub coordinate_mode: CoordinateMode,
    pub divergence: DivergenceConfig,
    pub geometry: GeometryConfig,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        self.divergence.validate()?;
        self.geometry.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredSelection {
    pub id: String,
    pub selection: Selection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub config: SessionConfig,
    pub selections: Vec<StoredSelection>,
    next_selection: u64,
}

impl Session {
    pub fn selection(&self, id: &str) -> Option<&Selection> {
        self.selections
            .iter()
            .find(|s| s.id == id)
            .map(|s| &s.selection)
    }

    pub fn add_selection(&mut self, selection: Selection) -> String {
        self.next_selection += 1;
        let id = format!("sel{}", self.next_selection);
        self.selections.push(StoredSelection {
            id: id.clone(),
            selection,
        });
        id
    }
}

#[derive(Default, Serialize, Deserialize)]
struct Snapshot {
    next_session: u64,
    sessions: Vec<Session>,
}

/// In-memory sessions. Each session has its own lock so mutations are
/// serialized per session while other sessions proceed.
pub struct SessionStore {
    inner: RwLock<StoreInner>,
    snapshot: Option<PathBuf>,
}

#[derive(Default)]
struct StoreInner {
    next_session: u64,
    sessions: BTreeMap<String, Arc<Mutex<Session>>>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self {
            inner: RwLock::new(StoreInner::default()),
            snapshot: None,
        }
    }

    /// Restore from `path` when it exists; later mutations rewrite it.
    /// Selections referencing instances at or beyond `instances` are rejected.
    pub fn with_snapshot(path: &Path, instances: usize) -> Result<Self> {
        let mut inner = StoreInner::default();
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let snap: Snapshot = serde_json::from_str(&text)?;
            for s in snap.sessions {
                s.config.validate()?;
                for sel in &s.selections {
                    if let Some(i) = sel.selection.members.iter().find(|i| i.0 >= instances) {
                        return Err(Error::InstanceOutOfRange {
                            id: i.0 as u64,
                            len: instances,
                        });
                    }
                }
                inner.sessions.insert(s.id.clone(), Arc::new(Mutex::new(s)));
            }
            inner.next_session = snap.next_session;
        }
        Ok(Self {
            inner: RwLock::new(inner),
            snapshot: Some(path.to_owned()),
        })
    }

    pub fn create(&self, config: SessionConfig) -> Result<Arc<Mutex<Session>>> {
        config.validate()?;
        let session = {
            let mut inner = self.inner.write();
            inner.next_session += 1;
            let id = format!("s{}", inner.next_session);
            let session = Arc::new(Mutex::new(Session {
                id: id.clone(),
                config,
                selections: Vec::new(),
                next_selection: 0,
            }));
            inner.sessions.insert(id, Arc::clone(&session));
            session
        };
        self.persist()?;
        Ok(session)
    }

    pub fn get(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        self.inner.read().sessions.get(id).cloned()
    }

    /// Write the snapshot file, if configured, via a temporary sibling.
    pub fn persist(&self) -> Result<()> {
        let Some(path) = &self.snapshot else {
            return Ok(());
        };
        let snap = {
            let inner = self.inner.read();
            Snapshot {
                next_session: inner.next_session,
                sessions: inner.sessions.values().map(|s| s.lock().clone()).collect(),
            }
        };
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec_pretty(&snap)?).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}
