use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::RwLock;

use crate::error::Error;
use crate::model::{
    select_version, Clock, ContentKey, ContentLocation, DigitalObject, Pid, SystemClock, Timestamp, METHODMAP_DSID,
    SERVICEBINDINGS_DSID,
};
use crate::servicedesc::{parse_bindings, parse_method_map, MethodMap, ServiceBindings};
use crate::store::{Fetcher, Store, StoreConfig};

#[derive(Debug, Clone)]
pub struct RepositoryConfig {
    pub store: StoreConfig,
    /// Absolute base URL under which `/get/{pid}/{dsid}` is reachable by
    /// mechanism services.
    pub base_url: String,
    /// Namespace for PIDs minted at ingest.
    pub default_namespace: String,
}

impl RepositoryConfig {
    pub fn new(root: impl Into<std::path::PathBuf>, base_url: impl Into<String>) -> Self {
        Self {
            store: StoreConfig::new(root),
            base_url: base_url.into(),
            default_namespace: "demo".to_owned(),
        }
    }
}

/// Parsed descriptors keyed by the content digest of the descriptor bytes.
/// Stored versions never change, so entries never go stale.
#[derive(Debug, Default)]
struct DescriptorCache {
    method_maps: RwLock<HashMap<ContentKey, Arc<MethodMap>>>,
    bindings: RwLock<HashMap<ContentKey, Arc<ServiceBindings>>>,
}

/// The repository: storage plus the access and management operations,
/// which live in [`crate::access`] and [`crate::management`].
pub struct Repository {
    pub(crate) store: Store,
    pub(crate) clock: Arc<dyn Clock>,
    pub(crate) base_url: String,
    pub(crate) default_namespace: String,
    descriptors: DescriptorCache,
    /// Purges and surrogate edits take this exclusively so reference checks
    /// cannot interleave with them; other commits share it.
    pub(crate) reference_lock: RwLock<()>,
}

impl std::fmt::Debug for Repository {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Repository")
            .field("store", &self.store)
            .field("base_url", &self.base_url)
            .finish_non_exhaustive()
    }
}

impl Repository {
    pub fn open(config: &RepositoryConfig) -> Result<Self, Error> {
        Self::with_parts(config, Store::open(&config.store)?, Arc::new(SystemClock))
    }

    pub fn open_with(config: &RepositoryConfig, fetcher: Arc<dyn Fetcher>, clock: Arc<dyn Clock>) -> Result<Self, Error> {
        Self::with_parts(config, Store::open_with_fetcher(&config.store, fetcher)?, clock)
    }

    fn with_parts(config: &RepositoryConfig, store: Store, clock: Arc<dyn Clock>) -> Result<Self, Error> {
        crate::model::validate_namespace(&config.default_namespace)?;
        if !crate::model::is_absolute_http_url(&config.base_url) {
            return Err(Error::InvalidArgument(format!(
                "base URL {:?} is not an absolute http(s) URL",
                config.base_url
            )));
        }
        Ok(Self {
            store,
            clock,
            base_url: config.base_url.trim_end_matches('/').to_owned(),
            default_namespace: config.default_namespace.clone(),
            descriptors: DescriptorCache::default(),
            reference_lock: RwLock::new(()),
        })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub fn get_object(&self, pid: &Pid) -> Result<Arc<DigitalObject>, Error> {
        self.store.get_object(pid)
    }

    fn descriptor_bytes(&self, object: &DigitalObject, dsid: &str, as_of: Option<Timestamp>) -> Result<(Option<ContentKey>, Vec<u8>), Error> {
        let ds = object.datastream(dsid).ok_or_else(|| Error::ComponentNotFound {
            pid: object.pid.clone(),
            id: dsid.to_owned(),
        })?;
        let version = select_version(&ds.versions, as_of)?;
        let key = match &version.location {
            ContentLocation::Internal(k) => Some(k.clone()),
            ContentLocation::External(_) => None,
        };
        let bytes = self.store.resolve_datastream(object, dsid, as_of)?.into_bytes()?;
        Ok((key, bytes))
    }

    /// The bdef's method map as of `as_of` (newest when `None`).
    pub fn method_map(&self, bdef: &DigitalObject, as_of: Option<Timestamp>) -> Result<Arc<MethodMap>, Error> {
        if let Some(key) = internal_key(bdef, METHODMAP_DSID, as_of) {
            if let Some(m) = self.descriptors.method_maps.read().get(&key) {
                return Ok(Arc::clone(m));
            }
        }
        let (key, bytes) = self.descriptor_bytes(bdef, METHODMAP_DSID, as_of)?;
        let parsed = Arc::new(parse_method_map(&bytes)?);
        if let Some(key) = key {
            self.descriptors.method_maps.write().insert(key, Arc::clone(&parsed));
        }
        Ok(parsed)
    }

    /// The bmech's service bindings as of `as_of` (newest when `None`).
    pub fn service_bindings(&self, bmech: &DigitalObject, as_of: Option<Timestamp>) -> Result<Arc<ServiceBindings>, Error> {
        if let Some(key) = internal_key(bmech, SERVICEBINDINGS_DSID, as_of) {
            if let Some(b) = self.descriptors.bindings.read().get(&key) {
                return Ok(Arc::clone(b));
            }
        }
        let (key, bytes) = self.descriptor_bytes(bmech, SERVICEBINDINGS_DSID, as_of)?;
        let parsed = Arc::new(parse_bindings(&bytes)?);
        if let Some(key) = key {
            self.descriptors.bindings.write().insert(key, Arc::clone(&parsed));
        }
        Ok(parsed)
    }
}

fn internal_key(object: &DigitalObject, dsid: &str, as_of: Option<Timestamp>) -> Option<ContentKey> {
    let ds = object.datastream(dsid)?;
    match &select_version(&ds.versions, as_of).ok()?.location {
        ContentLocation::Internal(k) => Some(k.clone()),
        ContentLocation::External(_) => None,
    }
}
