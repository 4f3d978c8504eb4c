use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Everything that determines a completion. Hashing this gives the cache
/// address.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CacheKey<'a> {
    pub model: &'a str,
    pub system: &'a str,
    pub prompt: &'a str,
    pub temperature: f64,
    pub top_p: Option<f64>,
    pub repeat: u32,
    pub attempt: u32,
}

impl CacheKey<'_> {
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("cache key serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub raw: String,
    /// Seconds since the Unix epoch when the entry was written.
    pub timestamp: u64,
}

/// Content-addressed response store: one JSON file per request hash.
#[derive(Debug)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, String>>,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ResponseCache {
    /// `None` keeps responses in memory only.
    pub fn new(dir: Option<&Path>) -> std::io::Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d)?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
            memory: Mutex::new(HashMap::new()),
            locks: Mutex::new(HashMap::new()),
        })
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir
            .as_ref()
            .map(|d| d.join(&key[..2]).join(format!("{key}.json")))
    }

    /// Lock serializing work on one key, so concurrent identical requests
    /// issue a single outbound call.
    pub fn key_lock(&self, key: &str) -> Arc<Mutex<()>> {
        self.locks
            .lock()
            .expect("cache lock")
            .entry(key.to_owned())
            .or_default()
            .clone()
    }

    pub fn get(&self, key: &str) -> Option<String> {
        if let Some(raw) = self.memory.lock().expect("cache lock").get(key) {
            return Some(raw.clone());
        }
        let path = self.path(key)?;
        let text = fs::read_to_string(path).ok()?;
        let entry: CacheEntry = serde_json::from_str(&text).ok()?;
        if entry.key != key {
            return None;
        }
        self.memory
            .lock()
            .expect("cache lock")
            .insert(key.to_owned(), entry.raw.clone());
        Some(entry.raw)
    }

    pub fn put(&self, key: &str, raw: &str) -> std::io::Result<()> {
        self.memory
            .lock()
            .expect("cache lock")
            .insert(key.to_owned(), raw.to_owned());
        let Some(path) = self.path(key) else {
            return Ok(());
        };
        let parent = path.parent().expect("cache path has a parent");
        fs::create_dir_all(parent)?;
        let entry = CacheEntry {
            key: key.to_owned(),
            raw: raw.to_owned(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        // Write-then-rename so readers never see a partial entry.
        let tmp = parent.join(format!(".{key}.{}.tmp", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(serde_json::to_string(&entry)?.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(tmp, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(prompt: &str, repeat: u32) -> String {
        CacheKey {
            model: "m",
            system: "s",
            prompt,
            temperature: 1.0,
            top_p: None,
            repeat,
            attempt: 0,
        }
        .digest()
    }

    #[test]
    fn key_covers_every_field() {
        assert_eq!(key("p", 0), key("p", 0));
        assert_ne!(key("p", 0), key("p", 1));
        assert_ne!(key("p", 0), key("q", 0));
    }

    #[test]
    fn persists_across_instances() {
        let dir = tempfile::tempdir().unwrap();
        let k = key("hello", 0);
        {
            let cache = ResponseCache::new(Some(dir.path())).unwrap();
            assert_eq!(cache.get(&k), None);
            cache.put(&k, "Final Answer: A").unwrap();
        }
        let cache = ResponseCache::new(Some(dir.path())).unwrap();
        assert_eq!(cache.get(&k).as_deref(), Some("Final Answer: A"));
    }
}
