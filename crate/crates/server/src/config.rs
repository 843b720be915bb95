//! Server configuration: a TOML file, then `DOREPO_*` environment overrides.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use dorepo_core::store::HttpFetcher;
use dorepo_core::{RepositoryConfig, StoreConfig};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration file {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("environment variable {name}: {message}")]
    Env { name: &'static str, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub listen: SocketAddr,
    pub data_root: PathBuf,
    /// Absolute URL under which this server is reachable by mechanism
    /// services; binding-key URLs are built from it.
    pub base_url: String,
    /// Bearer token guarding `/manage`. Management is disabled when unset.
    pub management_token: Option<String>,
    pub fetch_timeout_secs: u64,
    pub max_fetch_bytes: u64,
    pub default_namespace: String,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_root: PathBuf::from("dorepo-data"),
            base_url: "http://127.0.0.1:8080".to_owned(),
            management_token: None,
            fetch_timeout_secs: HttpFetcher::DEFAULT_TIMEOUT.as_secs(),
            max_fetch_bytes: HttpFetcher::DEFAULT_MAX_BYTES,
            default_namespace: "demo".to_owned(),
        }
    }
}

pub const ENV_LISTEN: &str = "DOREPO_LISTEN";
pub const ENV_DATA_ROOT: &str = "DOREPO_DATA_ROOT";
pub const ENV_BASE_URL: &str = "DOREPO_BASE_URL";
pub const ENV_TOKEN: &str = "DOREPO_MANAGEMENT_TOKEN";
pub const ENV_FETCH_TIMEOUT: &str = "DOREPO_FETCH_TIMEOUT_SECS";
pub const ENV_MAX_FETCH_BYTES: &str = "DOREPO_MAX_FETCH_BYTES";
pub const ENV_NAMESPACE: &str = "DOREPO_DEFAULT_NAMESPACE";

fn parsed<T: std::str::FromStr>(name: &'static str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Env {
        name,
        message: e.to_string(),
    })
}

impl ServerConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })
    }

    /// Applies overrides from a variable lookup (normally `std::env::var`).
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = var(ENV_LISTEN) {
            self.listen = parsed(ENV_LISTEN, &v)?;
        }
        if let Some(v) = var(ENV_DATA_ROOT) {
            self.data_root = PathBuf::from(v);
        }
        if let Some(v) = var(ENV_BASE_URL) {
            self.base_url = v;
        }
        if let Some(v) = var(ENV_TOKEN) {
            self.management_token = Some(v);
        }
        if let Some(v) = var(ENV_FETCH_TIMEOUT) {
            self.fetch_timeout_secs = parsed(ENV_FETCH_TIMEOUT, &v)?;
        }
        if let Some(v) = var(ENV_MAX_FETCH_BYTES) {
            self.max_fetch_bytes = parsed(ENV_MAX_FETCH_BYTES, &v)?;
        }
        if let Some(v) = var(ENV_NAMESPACE) {
            self.default_namespace = v;
        }
        Ok(())
    }

    /// File (if given) then process environment, validated.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match file {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        config.apply_env(|name| std::env::var(name).ok())?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !dorepo_core::model::is_absolute_http_url(&self.base_url) {
            return Err(ConfigError::Invalid(format!(
                "base_url {:?} must be an absolute http(s) URL",
                self.base_url
            )));
        }
        if self.management_token.as_deref().is_some_and(|t| t.trim().is_empty()) {
            return Err(ConfigError::Invalid("management_token must not be empty".into()));
        }
        if self.fetch_timeout_secs == 0 {
            return Err(ConfigError::Invalid("fetch_timeout_secs must be positive".into()));
        }
        dorepo_core::model::validate_namespace(&self.default_namespace)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn repository_config(&self) -> RepositoryConfig {
        let mut store = StoreConfig::new(&self.data_root);
        store.fetch_timeout = Duration::from_secs(self.fetch_timeout_secs);
        store.max_fetch_bytes = self.max_fetch_bytes;
        RepositoryConfig {
            store,
            base_url: self.base_url.clone(),
            default_namespace: self.default_namespace.clone(),
        }
    }
}
