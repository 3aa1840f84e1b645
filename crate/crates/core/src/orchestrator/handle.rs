use std::sync::{Arc, Mutex, PoisonError, RwLock};

use super::{EngineError, ProjectState, Store, StoreError};

/// Shared access to one project.
///
/// Writes are serialized: each one works on a copy of the latest snapshot,
/// persists the difference and only then publishes the copy. Readers never
/// block on a write in progress and never see a state that is not on disk.
#[derive(Debug)]
pub struct ProjectHandle {
    store: Store,
    writer: Mutex<()>,
    current: RwLock<Arc<ProjectState>>,
}

impl ProjectHandle {
    pub fn create(store: Store, state: ProjectState) -> Result<Self, StoreError> {
        store.create(&state)?;
        Ok(Self::wrap(store, state))
    }

    pub fn open(store: Store, project_id: &str) -> Result<Self, StoreError> {
        let state = store.load(project_id)?;
        Ok(Self::wrap(store, state))
    }

    fn wrap(store: Store, state: ProjectState) -> Self {
        ProjectHandle {
            store,
            writer: Mutex::new(()),
            current: RwLock::new(Arc::new(state)),
        }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn snapshot(&self) -> Arc<ProjectState> {
        self.current
            .read()
            .unwrap_or_else(PoisonError::into_inner)
            .clone()
    }

    /// Applies `op` to a copy of the project. The copy is persisted and
    /// published when `op` succeeds, and also when it fails with an ingest
    /// error, because a rejected run is still part of the run history.
    pub fn update<T>(
        &self,
        op: impl FnOnce(&mut ProjectState) -> Result<T, EngineError>,
    ) -> Result<T, EngineError> {
        let _guard = self.writer.lock().unwrap_or_else(PoisonError::into_inner);
        let old = self.snapshot();
        let mut next = (*old).clone();
        let result = op(&mut next);
        if matches!(result, Ok(_) | Err(EngineError::Ingest { .. })) {
            self.store.commit(&old, &next)?;
            *self.current.write().unwrap_or_else(PoisonError::into_inner) = Arc::new(next);
        }
        result
    }
}
