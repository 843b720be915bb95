//! Durable storage: canonical METS files, content-addressed blobs, PID
//! counters, and an in-memory index over the object files.
//!
//! ```text
//! <root>/objects/<namespace>/<serial>.mets.xml
//! <root>/content/<first two hex digits>/<sha-256 hex>
//! <root>/registry/<namespace>.counter
//! ```

mod content;
mod fetch;
mod registry;

#[cfg(any(test, feature = "failpoints"))]
pub mod failpoints;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{ErrorKind, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, SystemTime};

use parking_lot::{ArcMutexGuard, Mutex, RawMutex, RwLock};
use serde::Serialize;

pub use content::ContentStore;
pub use fetch::{FetchResponse, Fetcher, HttpFetcher};
pub use registry::PidRegistry;

use crate::error::Error;
use crate::metsio::{decode_object, encode_object};
use crate::model::{select_version, ContentKey, ContentLocation, DigitalObject, ObjectKind, Pid, Timestamp};
use crate::servicedesc::Verb;

pub const OBJECT_EXTENSION: &str = ".mets.xml";

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes `bytes` to a sibling temp file, syncs it, then renames over `path`.
pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let dir = path.parent().expect("store paths always have a parent");
    fs::create_dir_all(dir).map_err(|e| Error::storage(format!("create {}", dir.display()), e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = dir.join(format!(
        ".{name}.tmp-{}-{}",
        std::process::id(),
        TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    let write = || -> std::io::Result<()> {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()
    };
    if let Err(e) = write() {
        let _ = fs::remove_file(&tmp);
        return Err(Error::storage(format!("write {}", tmp.display()), e));
    }
    #[cfg(any(test, feature = "failpoints"))]
    if failpoints::hit(failpoints::BEFORE_RENAME, path) {
        // Simulated crash: the temp file stays behind, the target is untouched.
        return Err(Error::storage(
            format!("rename {}", path.display()),
            std::io::Error::other("failpoint before_rename"),
        ));
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::storage(format!("rename {}", path.display()), e)
    })
}

fn is_temp_name(name: &str) -> bool {
    name.starts_with('.') && name.contains(".tmp-")
}

#[derive(Debug, Clone)]
pub struct StoreConfig {
    pub root: PathBuf,
    pub fetch_timeout: Duration,
    pub max_fetch_bytes: u64,
    /// Parsed objects kept in memory; zero disables the cache.
    pub cache_capacity: usize,
}

impl StoreConfig {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            fetch_timeout: HttpFetcher::DEFAULT_TIMEOUT,
            max_fetch_bytes: HttpFetcher::DEFAULT_MAX_BYTES,
            cache_capacity: 65_536,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexEntry {
    pub pid: Pid,
    pub kind: ObjectKind,
    pub label: String,
    pub modified: Timestamp,
    pub path: PathBuf,
    /// bdef and bmech PIDs named by any disseminator version.
    pub references: BTreeSet<Pid>,
}

impl IndexEntry {
    fn of(object: &DigitalObject, path: PathBuf) -> Self {
        Self {
            pid: object.pid.clone(),
            kind: object.kind,
            label: object.label.clone(),
            modified: object.modified,
            path,
            references: object.referenced_pids().cloned().collect(),
        }
    }
}

pub type Index = BTreeMap<Pid, IndexEntry>;

#[derive(Debug, Clone, PartialEq, Eq)]
struct FileStamp {
    mtime: SystemTime,
    len: u64,
}

impl FileStamp {
    fn of(meta: &fs::Metadata) -> Self {
        Self {
            mtime: meta.modified().unwrap_or(SystemTime::UNIX_EPOCH),
            len: meta.len(),
        }
    }
}

/// Bytes of a resolved datastream version.
pub struct ResolvedContent {
    pub mime_type: String,
    pub version_id: String,
    pub length: Option<u64>,
    pub body: Box<dyn Read + Send>,
}

impl ResolvedContent {
    pub fn into_bytes(mut self) -> Result<Vec<u8>, Error> {
        let mut buf = Vec::new();
        self.body.read_to_end(&mut buf).map_err(|e| match e.kind() {
            ErrorKind::TimedOut => Error::ExternalFetch {
                status: None,
                timeout: true,
                detail: String::new(),
            },
            _ => Error::storage("read datastream", e),
        })?;
        Ok(buf)
    }
}

impl std::fmt::Debug for ResolvedContent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResolvedContent")
            .field("mime_type", &self.mime_type)
            .field("version_id", &self.version_id)
            .field("length", &self.length)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Default, Clone, Serialize)]
pub struct FsckReport {
    /// Blobs no datastream version points at.
    pub orphan_blobs: Vec<String>,
    /// Internal locations whose blob is absent.
    pub missing_blobs: Vec<String>,
    /// Blobs whose bytes no longer hash to their name.
    pub corrupt_blobs: Vec<String>,
    /// Object files that fail to decode or sit at the wrong path.
    pub unreadable_objects: Vec<String>,
    /// Differences between the live index and a fresh scan.
    pub index_mismatches: Vec<String>,
    /// Temp files left by interrupted writes.
    pub stray_temp_files: Vec<String>,
}

impl FsckReport {
    pub fn issue_count(&self) -> usize {
        self.orphan_blobs.len()
            + self.missing_blobs.len()
            + self.corrupt_blobs.len()
            + self.unreadable_objects.len()
            + self.index_mismatches.len()
            + self.stray_temp_files.len()
    }
}

/// Guard serializing writes to one PID.
pub type PidGuard = ArcMutexGuard<RawMutex, ()>;

pub struct Store {
    root: PathBuf,
    objects_dir: PathBuf,
    content: ContentStore,
    registry: PidRegistry,
    index: RwLock<Index>,
    cache: RwLock<HashMap<Pid, (FileStamp, Arc<DigitalObject>)>>,
    cache_capacity: usize,
    locks: Mutex<HashMap<Pid, Arc<Mutex<()>>>>,
    fetcher: Arc<dyn Fetcher>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("root", &self.root).finish_non_exhaustive()
    }
}

impl Store {
    pub fn open(config: &StoreConfig) -> Result<Self, Error> {
        let fetcher = Arc::new(HttpFetcher::new(config.fetch_timeout, config.max_fetch_bytes));
        Self::open_with_fetcher(config, fetcher)
    }

    pub fn open_with_fetcher(config: &StoreConfig, fetcher: Arc<dyn Fetcher>) -> Result<Self, Error> {
        let root = config.root.clone();
        let objects_dir = root.join("objects");
        fs::create_dir_all(&objects_dir).map_err(|e| Error::storage(format!("create {}", objects_dir.display()), e))?;
        let store = Self {
            content: ContentStore::open(root.join("content"))?,
            registry: PidRegistry::open(root.join("registry"))?,
            root,
            objects_dir,
            index: RwLock::new(Index::new()),
            cache: RwLock::new(HashMap::new()),
            cache_capacity: config.cache_capacity,
            locks: Mutex::new(HashMap::new()),
            fetcher,
        };
        let (index, problems) = store.scan()?;
        for p in problems {
            log::warn!("skipping object file: {p}");
        }
        *store.index.write() = index;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn content(&self) -> &ContentStore {
        &self.content
    }

    pub fn registry(&self) -> &PidRegistry {
        &self.registry
    }

    pub fn fetcher(&self) -> &dyn Fetcher {
        self.fetcher.as_ref()
    }

    pub fn object_path(&self, pid: &Pid) -> PathBuf {
        self.objects_dir
            .join(pid.namespace())
            .join(format!("{}{OBJECT_EXTENSION}", pid.serial()))
    }

    /// Takes the write lock for `pid`. Callers doing read-modify-write on an
    /// object hold this across the whole sequence.
    pub fn lock(&self, pid: &Pid) -> PidGuard {
        let m = Arc::clone(self.locks.lock().entry(pid.clone()).or_default());
        m.lock_arc()
    }

    /// Builds an index from the files on disk, plus descriptions of any
    /// files that could not be indexed.
    pub fn scan(&self) -> Result<(Index, Vec<String>), Error> {
        let mut index = Index::new();
        let mut problems = Vec::new();
        let ns_dirs = fs::read_dir(&self.objects_dir).map_err(|e| Error::storage("scan objects", e))?;
        for ns_dir in ns_dirs {
            let ns_dir = ns_dir.map_err(|e| Error::storage("scan objects", e))?;
            if !ns_dir.path().is_dir() {
                continue;
            }
            let ns = ns_dir.file_name().to_string_lossy().into_owned();
            for file in fs::read_dir(ns_dir.path()).map_err(|e| Error::storage("scan objects", e))? {
                let file = file.map_err(|e| Error::storage("scan objects", e))?;
                let name = file.file_name().to_string_lossy().into_owned();
                let Some(serial) = name.strip_suffix(OBJECT_EXTENSION) else {
                    continue;
                };
                let path = file.path();
                let expected = serial.parse().ok().and_then(|s| Pid::new(&ns, s).ok());
                let decoded = fs::read(&path)
                    .map_err(|e| Error::storage(format!("read {}", path.display()), e))
                    .and_then(|bytes| decode_object(&bytes));
                match (decoded, expected) {
                    (Ok(obj), Some(pid)) if obj.pid == pid => {
                        index.insert(pid, IndexEntry::of(&obj, path));
                    }
                    (Ok(obj), _) => problems.push(format!("{}: holds {}", path.display(), obj.pid)),
                    (Err(e), _) => problems.push(format!("{}: {e}", path.display())),
                }
            }
        }
        Ok((index, problems))
    }

    pub fn index_snapshot(&self) -> Index {
        self.index.read().clone()
    }

    pub fn contains(&self, pid: &Pid) -> bool {
        self.index.read().contains_key(pid)
    }

    pub fn kind_of(&self, pid: &Pid) -> Option<ObjectKind> {
        self.index.read().get(pid).map(|e| e.kind)
    }

    pub fn object_count(&self) -> usize {
        self.index.read().len()
    }

    /// Objects other than `pid` whose disseminators reference it.
    pub fn dependents_of(&self, pid: &Pid) -> Vec<Pid> {
        self.index
            .read()
            .values()
            .filter(|e| &e.pid != pid && e.references.contains(pid))
            .map(|e| e.pid.clone())
            .collect()
    }

    /// Sorted by PID; `label` matches as a case-sensitive substring.
    pub fn list_objects(&self, kind: Option<ObjectKind>, label: Option<&str>) -> Vec<IndexEntry> {
        self.index
            .read()
            .values()
            .filter(|e| kind.is_none_or(|k| e.kind == k))
            .filter(|e| label.is_none_or(|l| e.label.contains(l)))
            .cloned()
            .collect()
    }

    pub fn get_object(&self, pid: &Pid) -> Result<Arc<DigitalObject>, Error> {
        let path = self.object_path(pid);
        let meta = match fs::metadata(&path) {
            Ok(m) => m,
            Err(e) if e.kind() == ErrorKind::NotFound => return Err(Error::ObjectNotFound(pid.clone())),
            Err(e) => return Err(Error::storage(format!("stat {}", path.display()), e)),
        };
        let stamp = FileStamp::of(&meta);
        if let Some((cached_stamp, obj)) = self.cache.read().get(pid) {
            if *cached_stamp == stamp {
                return Ok(Arc::clone(obj));
            }
        }
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == ErrorKind::NotFound => return Err(Error::ObjectNotFound(pid.clone())),
            Err(e) => return Err(Error::storage(format!("read {}", path.display()), e)),
        };
        let obj = decode_object(&bytes)?;
        if &obj.pid != pid {
            return Err(Error::storage(
                format!("read {}", path.display()),
                std::io::Error::new(ErrorKind::InvalidData, format!("file holds {}", obj.pid)),
            ));
        }
        let obj = Arc::new(obj);
        self.remember(pid, stamp, &obj);
        Ok(obj)
    }

    fn remember(&self, pid: &Pid, stamp: FileStamp, obj: &Arc<DigitalObject>) {
        if self.cache_capacity == 0 {
            return;
        }
        let mut cache = self.cache.write();
        if cache.len() >= self.cache_capacity && !cache.contains_key(pid) {
            cache.clear();
        }
        cache.insert(pid.clone(), (stamp, Arc::clone(obj)));
    }

    /// Writes the canonical encoding of `object` and updates the index.
    /// Concurrent writers to the same PID must hold [`Store::lock`].
    pub fn put_object(&self, object: &DigitalObject) -> Result<(), Error> {
        let problems = object.invariant_violations();
        if !problems.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "object {} violates model invariants: {}",
                object.pid,
                problems.join("; ")
            )));
        }
        let path = self.object_path(&object.pid);
        let bytes = encode_object(object);
        // Index and cache move only once the new file is in place.
        let mut index = self.index.write();
        atomic_write(&path, &bytes)?;
        index.insert(object.pid.clone(), IndexEntry::of(object, path.clone()));
        drop(index);
        if let Ok(meta) = fs::metadata(&path) {
            self.remember(&object.pid, FileStamp::of(&meta), &Arc::new(object.clone()));
        }
        Ok(())
    }

    pub fn delete_object(&self, pid: &Pid) -> Result<(), Error> {
        let path = self.object_path(pid);
        let mut index = self.index.write();
        match fs::remove_file(&path) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::NotFound => return Err(Error::ObjectNotFound(pid.clone())),
            Err(e) => return Err(Error::storage(format!("remove {}", path.display()), e)),
        }
        index.remove(pid);
        drop(index);
        self.cache.write().remove(pid);
        Ok(())
    }

    pub fn put_content(&self, bytes: &[u8]) -> Result<ContentKey, Error> {
        self.content.put(bytes)
    }

    pub fn get_content(&self, key: &ContentKey) -> Result<Vec<u8>, Error> {
        self.content.get(key)
    }

    pub fn mint_pid(&self, namespace: &str) -> Result<Pid, Error> {
        self.registry.mint(namespace, |p| self.object_path(p).exists())
    }

    /// Opens the bytes of the datastream version visible at `as_of`.
    pub fn resolve_datastream(
        &self,
        object: &DigitalObject,
        dsid: &str,
        as_of: Option<Timestamp>,
    ) -> Result<ResolvedContent, Error> {
        let ds = object.datastream(dsid).ok_or_else(|| Error::ComponentNotFound {
            pid: object.pid.clone(),
            id: dsid.to_owned(),
        })?;
        let version = select_version(&ds.versions, as_of)?;
        match &version.location {
            ContentLocation::Internal(key) => {
                let file = self.content.open_blob(key)?;
                let length = file.metadata().ok().map(|m| m.len());
                Ok(ResolvedContent {
                    mime_type: version.mime_type.clone(),
                    version_id: version.version_id.clone(),
                    length,
                    body: Box::new(file),
                })
            }
            ContentLocation::External(url) => {
                let resp = self.fetcher.fetch(Verb::Get, url)?;
                Ok(ResolvedContent {
                    mime_type: version.mime_type.clone(),
                    version_id: version.version_id.clone(),
                    length: None,
                    body: resp.body,
                })
            }
        }
    }

    /// Consistency report over blobs, object files and the index.
    pub fn fsck(&self) -> Result<FsckReport, Error> {
        let mut report = FsckReport::default();
        let (fresh, problems) = self.scan()?;
        report.unreadable_objects = problems;

        let live = self.index_snapshot();
        for (pid, entry) in &live {
            match fresh.get(pid) {
                None => report.index_mismatches.push(format!("{pid}: indexed but not on disk")),
                Some(f) if f != entry => report.index_mismatches.push(format!("{pid}: index entry is stale")),
                Some(_) => {}
            }
        }
        for pid in fresh.keys().filter(|p| !live.contains_key(*p)) {
            report.index_mismatches.push(format!("{pid}: on disk but not indexed"));
        }

        let mut referenced = BTreeSet::new();
        for pid in fresh.keys() {
            let Ok(obj) = self.get_object(pid) else { continue };
            for ds in obj.datastreams.values() {
                for v in &ds.versions {
                    if let ContentLocation::Internal(key) = &v.location {
                        if !self.content.contains(key) {
                            report.missing_blobs.push(format!("{pid} {}: {key}", v.version_id));
                        }
                        referenced.insert(key.clone());
                    }
                }
            }
        }
        for key in self.content.keys()? {
            match self.content.get(&key) {
                Ok(bytes) if ContentKey::of(&bytes) != key => report.corrupt_blobs.push(key.to_string()),
                Ok(_) => {}
                Err(e) => report.corrupt_blobs.push(format!("{key}: {e}")),
            }
            if !referenced.contains(&key) {
                report.orphan_blobs.push(key.to_string());
            }
        }
        report.stray_temp_files = self.stray_temp_files()?;
        Ok(report)
    }

    fn stray_temp_files(&self) -> Result<Vec<String>, Error> {
        let mut out = Vec::new();
        let mut stack = vec![self.root.clone()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir).map_err(|e| Error::storage("scan for temp files", e))? {
                let entry = entry.map_err(|e| Error::storage("scan for temp files", e))?;
                let path = entry.path();
                if path.is_dir() {
                    stack.push(path);
                } else if is_temp_name(&entry.file_name().to_string_lossy()) {
                    out.push(path.display().to_string());
                }
            }
        }
        out.sort();
        Ok(out)
    }
}
