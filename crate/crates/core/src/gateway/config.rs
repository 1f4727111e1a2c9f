use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::GatewayError;

/// Connection settings for one capability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    /// Falls back to the capability default when unset.
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the credential.
    pub credential_env: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub parallelism: usize,
    pub cache_dir: Option<PathBuf>,
    pub mock: bool,
    /// Base delay for exponential backoff.
    pub retry_base_ms: u64,
    pub mock_seed: u64,
    /// Fixed score returned by the mock toxicity provider.
    pub mock_constant: Option<f64>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            credential_env: None,
            model: None,
            timeout_secs: 60.0,
            max_retries: 4,
            parallelism: 4,
            cache_dir: None,
            mock: false,
            retry_base_ms: 500,
            mock_seed: 0,
            mock_constant: None,
        }
    }
}

impl ProviderConfig {
    pub fn mock() -> Self {
        Self {
            mock: true,
            retry_base_ms: 0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.timeout_secs > 0.0) {
            return Err(GatewayError::Config("timeout_secs must be positive".into()));
        }
        if self.parallelism < 1 {
            return Err(GatewayError::Config("parallelism must be at least 1".into()));
        }
        if let Some(c) = self.mock_constant {
            if !(0.0..=1.0).contains(&c) {
                return Err(GatewayError::Config(format!(
                    "mock_constant {c} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn credential(&self) -> Result<Option<String>, GatewayError> {
        match &self.credential_env {
            None => Ok(None),
            Some(var) => std::env::var(var).map(Some).map_err(|_| {
                GatewayError::Config(format!("credential variable {var} is not set"))
            }),
        }
    }
}

/// Provider settings for all four capabilities.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub chat: ProviderConfig,
    pub embed: ProviderConfig,
    pub nli: ProviderConfig,
    pub toxicity: ProviderConfig,
}

impl GatewayConfig {
    pub fn all_mock() -> Self {
        Self {
            chat: ProviderConfig::mock(),
            embed: ProviderConfig::mock(),
            nli: ProviderConfig::mock(),
            toxicity: ProviderConfig::mock(),
        }
    }
}
