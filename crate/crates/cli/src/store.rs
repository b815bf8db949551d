//! Session persistence in a single-file embedded key-value store.

use std::path::Path;

use anyhow::Context;
use recourse_core::elicit::Session;
use recourse_core::eval::GeneratorKind;
use redb::{Database, ReadableTableMetadata, TableDefinition};
use serde::{Deserialize, Serialize};

use crate::api::SessionView;

const SESSIONS: TableDefinition<&str, &[u8]> = TableDefinition::new("sessions");

pub const RECORD_VERSION: u32 = 1;

/// A stored answer, kept so a resubmitted `(round, index)` gets the same reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredResponse {
    pub round: usize,
    pub index: usize,
    pub view: SessionView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub schema_version: u32,
    pub id: String,
    pub dataset: String,
    pub generator: GeneratorKind,
    pub created_at: u64,
    pub updated_at: u64,
    pub session: Session,
    pub responses: Vec<StoredResponse>,
}

pub struct SessionStore {
    db: Database,
}

impl SessionStore {
    pub fn open(path: &Path) -> anyhow::Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let db = Database::create(path).with_context(|| format!("opening session store {}", path.display()))?;
        let tx = db.begin_write()?;
        tx.open_table(SESSIONS)?;
        tx.commit()?;
        Ok(Self { db })
    }

    pub fn get(&self, id: &str) -> anyhow::Result<Option<SessionRecord>> {
        let tx = self.db.begin_read()?;
        let table = tx.open_table(SESSIONS)?;
        let Some(bytes) = table.get(id)? else {
            return Ok(None);
        };
        let record: SessionRecord = serde_json::from_slice(bytes.value())?;
        if record.schema_version != RECORD_VERSION {
            anyhow::bail!("session {id} has unsupported record version {}", record.schema_version);
        }
        Ok(Some(record))
    }

    pub fn put(&self, record: &SessionRecord) -> anyhow::Result<()> {
        let bytes = serde_json::to_vec(record)?;
        let tx = self.db.begin_write()?;
        {
            let mut table = tx.open_table(SESSIONS)?;
            table.insert(record.id.as_str(), bytes.as_slice())?;
        }
        tx.commit()?;
        Ok(())
    }

    pub fn contains(&self, id: &str) -> anyhow::Result<bool> {
        let tx = self.db.begin_read()?;
        let table = tx.open_table(SESSIONS)?;
        Ok(table.get(id)?.is_some())
    }

    pub fn len(&self) -> anyhow::Result<u64> {
        let tx = self.db.begin_read()?;
        let table = tx.open_table(SESSIONS)?;
        Ok(table.len()?)
    }

    pub fn is_empty(&self) -> anyhow::Result<bool> {
        Ok(self.len()? == 0)
    }
}
