use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ledger::{OrderingMode, Topology};
use crate::workflows::NetworkConfig;

pub const CONFIG_ENV: &str = "FSCF_CONFIG";
pub const DEFAULT_CONFIG_PATH: &str = "fscf.toml";

/// Gateway and network settings, read from TOML.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub listen: String,
    pub block_size: usize,
    pub timeout_ms: u64,
    pub ordering: OrderingMode,
    pub data_dir: Option<PathBuf>,
    pub ca_seed: String,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        let net = NetworkConfig::default();
        GatewayConfig {
            listen: "127.0.0.1:8080".into(),
            block_size: net.block_size,
            timeout_ms: net.timeout_ms,
            ordering: net.ordering,
            data_dir: Some(PathBuf::from("fscf-data")),
            ca_seed: String::from_utf8(net.ca_seed).expect("ASCII"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
}

impl GatewayConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })
    }

    /// Loads `path`; a missing file yields the defaults.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::from_toml(&text, path),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(source) => Err(ConfigError::Io { path: path.to_path_buf(), source }),
        }
    }

    /// Resolves the config path: an explicit path first, then
    /// `$FSCF_CONFIG`, then `fscf.toml`.
    pub fn resolve_path(explicit: Option<&Path>) -> PathBuf {
        explicit
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_CONFIG_PATH))
    }

    pub fn network(&self) -> NetworkConfig {
        NetworkConfig {
            block_size: self.block_size,
            timeout_ms: self.timeout_ms,
            ordering: self.ordering,
            topology: Topology::default(),
            data_dir: self.data_dir.clone(),
            ca_seed: self.ca_seed.as_bytes().to_vec(),
        }
    }
}
