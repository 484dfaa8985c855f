use std::net::SocketAddr;
use std::path::PathBuf;

use agriprice_core::engine::EngineConfig;

use crate::error::{ServiceError, ServiceResult};

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_TOKEN_TTL_SECS: i64 = 24 * 60 * 60;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Holds the SQLite file and the `artifacts/` directory.
    pub data_dir: PathBuf,
    pub bind: SocketAddr,
    pub token_ttl_secs: i64,
    /// Settings for training jobs triggered by forecast requests.
    pub engine: EngineConfig,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            bind: DEFAULT_BIND.parse().expect("valid default address"),
            token_ttl_secs: DEFAULT_TOKEN_TTL_SECS,
            engine: EngineConfig::default(),
        }
    }

    /// Reads `AGRIPRICE_DATA_DIR`, `AGRIPRICE_BIND` and
    /// `AGRIPRICE_TOKEN_TTL_SECS`, falling back to defaults.
    pub fn from_env() -> ServiceResult<Self> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> ServiceResult<Self> {
        let mut cfg = Self::new(get("AGRIPRICE_DATA_DIR").unwrap_or_else(|| "data".into()));
        if let Some(bind) = get("AGRIPRICE_BIND") {
            cfg.bind = bind
                .parse()
                .map_err(|_| ServiceError::Config(format!("AGRIPRICE_BIND '{bind}' is not a socket address")))?;
        }
        if let Some(ttl) = get("AGRIPRICE_TOKEN_TTL_SECS") {
            cfg.token_ttl_secs = match ttl.parse::<i64>() {
                Ok(v) if v > 0 => v,
                _ => {
                    return Err(ServiceError::Config(format!(
                        "AGRIPRICE_TOKEN_TTL_SECS '{ttl}' is not a positive integer"
                    )))
                }
            };
        }
        Ok(cfg)
    }

    pub fn database_path(&self) -> PathBuf {
        self.data_dir.join("agriprice.db")
    }

    pub fn artifact_dir(&self) -> PathBuf {
        self.data_dir.join("artifacts")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_and_rejects_garbage() {
        let cfg = ServiceConfig::from_lookup(|k| match k {
            "AGRIPRICE_BIND" => Some("0.0.0.0:9000".into()),
            "AGRIPRICE_TOKEN_TTL_SECS" => Some("60".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.bind.port(), 9000);
        assert_eq!(cfg.token_ttl_secs, 60);
        assert_eq!(cfg.data_dir, PathBuf::from("data"));

        let bad = ServiceConfig::from_lookup(|k| (k == "AGRIPRICE_TOKEN_TTL_SECS").then(|| "-5".into()));
        assert!(matches!(bad, Err(ServiceError::Config(_))));
    }
}
