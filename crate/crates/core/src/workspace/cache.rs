//! Content-addressed, write-once artifact cache.
//!
//! Layout: `<root>/<stage>/<key>.json` (or `.bin`), where the key is the
//! SHA-256 of the stage name and a canonical JSON rendering of the inputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache entry {0} already holds different bytes")]
    IntegrityError(String),
    #[error("cache i/o at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cache entry {0} does not decode: {1}")]
    Corrupt(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Search,
    Fetch,
    Datasets,
    Digest,
    Refine,
    Judge,
    Board,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Search => "search",
            Stage::Fetch => "fetch",
            Stage::Datasets => "datasets",
            Stage::Digest => "digest",
            Stage::Refine => "refine",
            Stage::Judge => "judge",
            Stage::Board => "board",
            Stage::Report => "report",
        }
    }
}

/// Hex SHA-256 naming a cache entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub stage: Stage,
    pub hash: String,
}

impl CacheKey {
    /// A pure function of `stage` and the JSON form of `inputs`.
    pub fn of(stage: Stage, inputs: &impl Serialize) -> CacheKey {
        let json = serde_json::to_vec(inputs).expect("cache inputs serialize");
        let mut h = Sha256::new();
        h.update(stage.name().as_bytes());
        h.update([0]);
        h.update(&json);
        CacheKey {
            stage,
            hash: hex::encode(h.finalize()),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Cache {
        Cache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, key: &CacheKey, ext: &str) -> PathBuf {
        self.root.join(key.stage.name()).join(format!("{}.{ext}", key.hash))
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CacheError + '_ {
        move |source| CacheError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn read(&self, key: &CacheKey, ext: &str) -> Result<Option<Vec<u8>>, CacheError> {
        let path = self.path(key, ext);
        match fs::read(&path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Self::io(&path)(e)),
        }
    }

    /// Writes once. Storing identical bytes again is fine; different bytes
    /// under an existing key are an integrity error and leave the entry as is.
    fn write(&self, key: &CacheKey, ext: &str, bytes: &[u8]) -> Result<(), CacheError> {
        let path = self.path(key, ext);
        if let Some(existing) = self.read(key, ext)? {
            return if existing == bytes {
                Ok(())
            } else {
                Err(CacheError::IntegrityError(format!("{}/{}", key.stage.name(), key.hash)))
            };
        }
        let dir = path.parent().expect("entry has a stage directory");
        fs::create_dir_all(dir).map_err(Self::io(dir))?;
        let tmp = dir.join(format!(
            ".{}.{}.{}.tmp",
            key.hash,
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let result = (|| {
            let mut f = fs::File::create(&tmp).map_err(Self::io(&tmp))?;
            f.write_all(bytes).map_err(Self::io(&tmp))?;
            f.sync_all().map_err(Self::io(&tmp))?;
            // hard_link refuses to replace, so a concurrent writer cannot be clobbered
            match fs::hard_link(&tmp, &path) {
                Ok(()) => Ok(()),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    let existing = fs::read(&path).map_err(Self::io(&path))?;
                    if existing == bytes {
                        Ok(())
                    } else {
                        Err(CacheError::IntegrityError(format!("{}/{}", key.stage.name(), key.hash)))
                    }
                }
                Err(e) => Err(Self::io(&path)(e)),
            }
        })();
        let _ = fs::remove_file(&tmp);
        result
    }

    pub fn get_bytes(&self, key: &CacheKey) -> Result<Option<Vec<u8>>, CacheError> {
        self.read(key, "bin")
    }

    pub fn put_bytes(&self, key: &CacheKey, bytes: &[u8]) -> Result<(), CacheError> {
        self.write(key, "bin", bytes)
    }

    pub fn get_json<T: DeserializeOwned>(&self, key: &CacheKey) -> Result<Option<T>, CacheError> {
        match self.read(key, "json")? {
            None => Ok(None),
            Some(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| CacheError::Corrupt(format!("{}/{}", key.stage.name(), key.hash), e.to_string())),
        }
    }

    pub fn put_json<T: Serialize>(&self, key: &CacheKey, value: &T) -> Result<(), CacheError> {
        let bytes = serde_json::to_vec_pretty(value).expect("cache payload serializes");
        self.write(key, "json", &bytes)
    }
}
