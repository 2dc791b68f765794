use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write as _};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::memory::{Table, Write};
use super::{Batch, Document, DocumentStore, Keyspace, StoreError};

#[derive(Debug, Serialize, Deserialize)]
struct LogRecord {
    rev: u64,
    writes: Vec<LogWrite>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LogWrite {
    ks: Keyspace,
    key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    body: Option<Value>,
}

impl From<&Write> for LogWrite {
    fn from(w: &Write) -> Self {
        match w {
            Write::Put {
                keyspace,
                key,
                body,
            } => LogWrite {
                ks: *keyspace,
                key: key.clone(),
                body: Some(body.clone()),
            },
            Write::Delete { keyspace, key } => LogWrite {
                ks: *keyspace,
                key: key.clone(),
                body: None,
            },
        }
    }
}

impl From<LogWrite> for Write {
    fn from(w: LogWrite) -> Self {
        match w.body {
            Some(body) => Write::Put {
                keyspace: w.ks,
                key: w.key,
                body,
            },
            None => Write::Delete {
                keyspace: w.ks,
                key: w.key,
            },
        }
    }
}

/// Single-node durable store: an in-memory table backed by an append-only
/// JSON-lines log. Each batch is one line, so a torn write at the tail
/// loses at most the batch being written and never half of one.
#[derive(Debug)]
pub struct FileStore {
    path: PathBuf,
    table: RwLock<Table>,
    log: Mutex<File>,
    fsync: bool,
}

impl FileStore {
    pub const LOG_NAME: &'static str = "store.log";

    /// Opens (or creates) the store in `dir`.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::open_with(dir, true)
    }

    pub fn open_with(dir: impl AsRef<Path>, fsync: bool) -> Result<Self, StoreError> {
        fs::create_dir_all(dir.as_ref())?;
        let path = dir.as_ref().join(Self::LOG_NAME);
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&path)?;
        let (table, good_len) = replay(&mut file)?;
        if good_len < file.metadata()?.len() {
            tracing::warn!(path = %path.display(), good_len, "truncating torn tail of store log");
            file.set_len(good_len)?;
        }
        file.seek(SeekFrom::End(0))?;
        Ok(Self {
            path,
            table: RwLock::new(table),
            log: Mutex::new(file),
            fsync,
        })
    }

    pub fn log_path(&self) -> &Path {
        &self.path
    }

    /// Rewrites the log so it holds only live documents.
    pub fn compact(&self) -> Result<(), StoreError> {
        let table = self.table.write().expect("store lock poisoned");
        let mut log = self.log.lock().expect("log lock poisoned");
        let tmp = self.path.with_extension("log.compact");
        {
            let mut out = File::create(&tmp)?;
            for (ks, key, doc) in table.iter() {
                let record = LogRecord {
                    rev: doc.revision,
                    writes: vec![LogWrite {
                        ks,
                        key: key.clone(),
                        body: Some(doc.body.as_ref().clone()),
                    }],
                };
                serde_json::to_writer(&mut out, &record)?;
                out.write_all(b"\n")?;
            }
            // Preserve the revision high-water mark even if the newest write was a delete.
            let marker = LogRecord {
                rev: table.revision(),
                writes: Vec::new(),
            };
            serde_json::to_writer(&mut out, &marker)?;
            out.write_all(b"\n")?;
            out.sync_all()?;
        }
        fs::rename(&tmp, &self.path)?;
        let mut file = OpenOptions::new().read(true).append(true).open(&self.path)?;
        file.seek(SeekFrom::End(0))?;
        *log = file;
        Ok(())
    }
}

fn replay(file: &mut File) -> Result<(Table, u64), StoreError> {
    file.seek(SeekFrom::Start(0))?;
    let mut reader = BufReader::new(&*file);
    let mut table = Table::default();
    let mut good_len = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        if !line.ends_with('\n') {
            // torn final write
            break;
        }
        let record: LogRecord = match serde_json::from_str(line.trim_end()) {
            Ok(r) => r,
            Err(e) => {
                let mut rest = String::new();
                reader.read_line(&mut rest)?;
                if rest.is_empty() {
                    break;
                }
                return Err(StoreError::Corrupt(format!(
                    "unreadable record at byte {good_len}: {e}"
                )));
            }
        };
        table.commit(record.rev, record.writes.into_iter().map(Write::from).collect());
        good_len += n as u64;
    }
    Ok((table, good_len))
}

impl DocumentStore for FileStore {
    fn get(&self, keyspace: Keyspace, key: &str) -> Result<Option<Document>, StoreError> {
        let table = self.table.read().expect("store lock poisoned");
        Ok(table.get(keyspace, key).cloned())
    }

    fn scan(&self, keyspace: Keyspace, prefix: &str) -> Result<Vec<(String, Document)>, StoreError> {
        let table = self.table.read().expect("store lock poisoned");
        Ok(table.scan(keyspace, prefix))
    }

    fn revision(&self) -> Result<u64, StoreError> {
        Ok(self.table.read().expect("store lock poisoned").revision())
    }

    fn apply(&self, batch: Batch) -> Result<u64, StoreError> {
        let mut table = self.table.write().expect("store lock poisoned");
        let writes = table.prepare(batch)?;
        let revision = table.revision() + 1;
        let record = LogRecord {
            rev: revision,
            writes: writes.iter().map(LogWrite::from).collect(),
        };
        let mut line = serde_json::to_vec(&record)?;
        line.push(b'\n');
        {
            let mut log = self.log.lock().expect("log lock poisoned");
            log.write_all(&line)?;
            if self.fsync {
                log.sync_data()?;
            }
        }
        table.commit(revision, writes);
        Ok(revision)
    }
}
