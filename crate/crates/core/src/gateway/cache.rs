use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::GatewayError;

pub fn content_hash(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

#[derive(Serialize, Deserialize)]
struct Entry<T> {
    capability: String,
    model: String,
    output: T,
}

/// Content-addressed response cache: in memory, plus one JSON file per entry
/// when a directory is configured.
pub struct Cache {
    dir: Option<PathBuf>,
    mem: Mutex<HashMap<String, Vec<u8>>>,
}

impl Cache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self {
            dir,
            mem: Mutex::new(HashMap::new()),
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        let cached = self.mem.lock().unwrap().get(key).cloned();
        let bytes = match cached {
            Some(b) => b,
            None => {
                let bytes = std::fs::read(self.path(key)?).ok()?;
                self.mem
                    .lock()
                    .unwrap()
                    .insert(key.to_string(), bytes.clone());
                bytes
            }
        };
        match serde_json::from_slice::<Entry<T>>(&bytes) {
            Ok(e) => Some(e.output),
            Err(err) => {
                tracing::warn!(key, %err, "ignoring unreadable cache entry");
                None
            }
        }
    }

    pub fn put<T: Serialize>(
        &self,
        key: &str,
        capability: &str,
        model: &str,
        output: &T,
    ) -> Result<(), GatewayError> {
        let bytes = serde_json::to_vec(&Entry {
            capability: capability.to_string(),
            model: model.to_string(),
            output,
        })
        .map_err(|e| GatewayError::Cache(e.to_string()))?;
        if let (Some(dir), Some(path)) = (&self.dir, self.path(key)) {
            std::fs::create_dir_all(dir).map_err(|e| GatewayError::Cache(e.to_string()))?;
            // write-then-rename keeps concurrent writers from exposing partial files
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .map_err(|e| GatewayError::Cache(e.to_string()))?;
            tmp.write_all(&bytes)
                .map_err(|e| GatewayError::Cache(e.to_string()))?;
            tmp.persist(&path)
                .map_err(|e| GatewayError::Cache(e.to_string()))?;
        }
        self.mem.lock().unwrap().insert(key.to_string(), bytes);
        Ok(())
    }
}
