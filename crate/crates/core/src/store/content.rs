use std::fs::{self, File};
use std::io::{ErrorKind, Read};
use std::path::{Path, PathBuf};

use super::atomic_write;
use crate::error::Error;
use crate::model::ContentKey;

/// Content-addressed blobs under `content/<first two hex>/<digest>`.
#[derive(Debug)]
pub struct ContentStore {
    root: PathBuf,
}

impl ContentStore {
    pub fn open(root: PathBuf) -> Result<Self, Error> {
        fs::create_dir_all(&root).map_err(|e| Error::storage(format!("create {}", root.display()), e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, key: &ContentKey) -> PathBuf {
        self.root.join(&key.as_str()[..2]).join(key.as_str())
    }

    /// Stores bytes once; an existing blob is never rewritten.
    pub fn put(&self, bytes: &[u8]) -> Result<ContentKey, Error> {
        let key = ContentKey::of(bytes);
        let path = self.path_of(&key);
        if !path.exists() {
            atomic_write(&path, bytes)?;
        }
        Ok(key)
    }

    pub fn contains(&self, key: &ContentKey) -> bool {
        self.path_of(key).is_file()
    }

    pub fn open_blob(&self, key: &ContentKey) -> Result<File, Error> {
        File::open(self.path_of(key)).map_err(|e| match e.kind() {
            ErrorKind::NotFound => Error::ContentNotFound(key.to_string()),
            _ => Error::storage(format!("open blob {key}"), e),
        })
    }

    pub fn get(&self, key: &ContentKey) -> Result<Vec<u8>, Error> {
        let mut buf = Vec::new();
        self.open_blob(key)?
            .read_to_end(&mut buf)
            .map_err(|e| Error::storage(format!("read blob {key}"), e))?;
        Ok(buf)
    }

    /// Every well-named blob on disk.
    pub fn keys(&self) -> Result<Vec<ContentKey>, Error> {
        let mut out = Vec::new();
        let shards = match fs::read_dir(&self.root) {
            Ok(rd) => rd,
            Err(e) => return Err(Error::storage("scan content", e)),
        };
        for shard in shards {
            let shard = shard.map_err(|e| Error::storage("scan content", e))?;
            if !shard.path().is_dir() {
                continue;
            }
            for blob in fs::read_dir(shard.path()).map_err(|e| Error::storage("scan content", e))? {
                let blob = blob.map_err(|e| Error::storage("scan content", e))?;
                if let Some(key) = blob.file_name().to_str().and_then(|n| ContentKey::new(n).ok()) {
                    out.push(key);
                }
            }
        }
        out.sort();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_has_known_digest() {
        let dir = tempfile::tempdir().unwrap();
        let store = ContentStore::open(dir.path().join("content")).unwrap();
        let key = store.put(b"").unwrap();
        assert_eq!(key.as_str(), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        assert_eq!(store.get(&key).unwrap(), b"");
    }

    #[test]
    fn dedups_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let store = ContentStore::open(dir.path().join("content")).unwrap();
        let a = store.put(b"hello").unwrap();
        let b = store.put(b"hello").unwrap();
        assert_eq!(a, b);
        let entries = walk_files(store.root());
        assert_eq!(entries, 1, "one blob on disk");
        assert_eq!(store.keys().unwrap(), vec![a]);
    }

    #[test]
    fn unknown_key_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let store = ContentStore::open(dir.path().join("content")).unwrap();
        let err = store.get(&ContentKey::of(b"never stored")).unwrap_err();
        assert!(matches!(err, Error::ContentNotFound(_)));
    }

    fn walk_files(p: &Path) -> usize {
        fs::read_dir(p)
            .unwrap()
            .map(|e| {
                let path = e.unwrap().path();
                if path.is_dir() {
                    walk_files(&path)
                } else {
                    1
                }
            })
            .sum()
    }
}
