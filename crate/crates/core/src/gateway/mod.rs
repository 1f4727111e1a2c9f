//! Clients for the four external model capabilities: chat completion, text
//! embedding, NLI classification and toxicity scoring.
//!
//! Every capability goes through [`Client`], which owns caching, retries and
//! the in-flight limit. A capability only contributes a [`Codec`] that turns
//! its input into a request body and parses the provider's reply.

mod cache;
pub mod codecs;
mod config;
pub mod mock;
pub mod transport;

use std::marker::PhantomData;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use rand::Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

pub use cache::content_hash;
pub use codecs::{AuthStyle, Chat, Embed, Nli, NliInput, NliLabel, NliVerdict, Toxicity};
pub use config::{GatewayConfig, ProviderConfig};
pub use transport::{HttpRequest, HttpResponse, HttpTransport, NetworkError, Transport};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("authentication failed (HTTP {status})")]
    Auth { status: u16 },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("provider returned HTTP {status}: {excerpt}")]
    Http { status: u16, excerpt: String },
    #[error("provider returned an empty completion")]
    Refusal,
    #[error("could not parse provider response ({reason}): {excerpt}")]
    Parse { reason: String, excerpt: String },
    #[error("provider response failed validation: {0}")]
    Validation(String),
    #[error("cache error: {0}")]
    Cache(String),
}

/// Request/response encoding for one capability.
pub trait Codec: Send + Sync + 'static {
    type Input: ?Sized;
    type Output: Serialize + DeserializeOwned + Clone + Send;
    const NAME: &'static str;
    const DEFAULT_ENDPOINT: &'static str;
    const DEFAULT_MODEL: &'static str;
    const AUTH: AuthStyle;

    fn check_input(input: &Self::Input) -> Result<(), GatewayError>;
    fn request_body(model: &str, input: &Self::Input) -> Value;
    fn parse_response(body: &str) -> Result<Self::Output, GatewayError>;
    fn mock_transport(cfg: &ProviderConfig) -> Arc<dyn Transport>;
}

fn body_hash<C: Codec>(model: &str, body: &Value) -> String {
    let bytes = serde_json::to_vec(body).expect("request bodies serialize");
    content_hash(&[C::NAME.as_bytes(), model.as_bytes(), &bytes])
}

/// Cache key of the request `C` would send for `input` under `model`.
pub fn request_hash<C: Codec>(model: &str, input: &C::Input) -> String {
    body_hash::<C>(model, &C::request_body(model, input))
}

/// Counting semaphore bounding requests in flight.
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion<T> {
    pub value: T,
    /// Content hash of (capability, model, request body).
    pub hash: String,
    pub cached: bool,
}

struct Inner {
    config: ProviderConfig,
    url: String,
    bearer: Option<String>,
    model: String,
    transport: Arc<dyn Transport>,
    cache: cache::Cache,
    limiter: Limiter,
    network_calls: AtomicUsize,
}

/// Cached, retrying, parallelism-bounded client for capability `C`.
/// Cheap to clone; clones share cache, limiter and counters.
pub struct Client<C: Codec> {
    inner: Arc<Inner>,
    _codec: PhantomData<fn() -> C>,
}

impl<C: Codec> Clone for Client<C> {
    fn clone(&self) -> Self {
        Self {
            inner: Arc::clone(&self.inner),
            _codec: PhantomData,
        }
    }
}

pub type ChatClient = Client<Chat>;
pub type EmbedClient = Client<Embed>;
pub type NliClient = Client<Nli>;
pub type ToxicityClient = Client<Toxicity>;

impl<C: Codec> Client<C> {
    /// Builds a client from config: the mock transport when `mock` is set,
    /// HTTP otherwise.
    pub fn from_config(config: &ProviderConfig) -> Result<Self, GatewayError> {
        let transport: Arc<dyn Transport> = if config.mock {
            C::mock_transport(config)
        } else {
            Arc::new(HttpTransport::new().map_err(|e| GatewayError::Config(e.0))?)
        };
        Self::with_transport(config, transport)
    }

    pub fn with_transport(
        config: &ProviderConfig,
        transport: Arc<dyn Transport>,
    ) -> Result<Self, GatewayError> {
        config.validate()?;
        let credential = if config.mock { None } else { config.credential()? };
        let endpoint = config
            .endpoint
            .clone()
            .unwrap_or_else(|| C::DEFAULT_ENDPOINT.to_string());
        let (url, bearer) = match (C::AUTH, credential) {
            (AuthStyle::QueryKey, Some(key)) => {
                let sep = if endpoint.contains('?') { '&' } else { '?' };
                (format!("{endpoint}{sep}key={key}"), None)
            }
            (_, cred) => (endpoint, cred),
        };
        let cache_dir = config.cache_dir.as_ref().map(|d| d.join(C::NAME));
        Ok(Self {
            inner: Arc::new(Inner {
                config: config.clone(),
                url,
                bearer,
                model: config
                    .model
                    .clone()
                    .unwrap_or_else(|| C::DEFAULT_MODEL.to_string()),
                transport,
                cache: cache::Cache::new(cache_dir),
                limiter: Limiter::new(config.parallelism),
                network_calls: AtomicUsize::new(0),
            }),
            _codec: PhantomData,
        })
    }

    pub fn model(&self) -> &str {
        &self.inner.model
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.inner.config
    }

    /// Requests that reached the transport, retries included.
    pub fn network_calls(&self) -> usize {
        self.inner.network_calls.load(Ordering::SeqCst)
    }

    pub fn request_hash(&self, input: &C::Input) -> String {
        request_hash::<C>(&self.inner.model, input)
    }

    fn key_for(&self, body: &Value) -> String {
        body_hash::<C>(&self.inner.model, body)
    }

    pub fn call(&self, input: &C::Input) -> Result<C::Output, GatewayError> {
        self.call_with_meta(input).map(|c| c.value)
    }

    pub fn call_with_meta(&self, input: &C::Input) -> Result<Completion<C::Output>, GatewayError> {
        C::check_input(input)?;
        let body = C::request_body(&self.inner.model, input);
        let hash = self.key_for(&body);
        if let Some(value) = self.inner.cache.get::<C::Output>(&hash) {
            return Ok(Completion {
                value,
                hash,
                cached: true,
            });
        }
        let value = self.fetch(body)?;
        self.inner
            .cache
            .put(&hash, C::NAME, &self.inner.model, &value)?;
        Ok(Completion {
            value,
            hash,
            cached: false,
        })
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let base = self.inner.config.retry_base_ms;
        if base == 0 {
            return Duration::ZERO;
        }
        let exp = base.saturating_mul(1u64 << attempt.min(16));
        let jitter = rand::thread_rng().gen_range(0..=base);
        Duration::from_millis(exp.saturating_add(jitter))
    }

    fn fetch(&self, body: Value) -> Result<C::Output, GatewayError> {
        let request = HttpRequest {
            url: self.inner.url.clone(),
            bearer: self.inner.bearer.clone(),
            body,
            timeout: Duration::from_secs_f64(self.inner.config.timeout_secs),
        };
        let attempts = self.inner.config.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff(attempt - 1));
            }
            let result = {
                let _permit = self.inner.limiter.acquire();
                self.inner.network_calls.fetch_add(1, Ordering::SeqCst);
                self.inner.transport.post_json(&request)
            };
            match result {
                Err(e) => last = e.to_string(),
                Ok(resp) => match resp.status {
                    200..=299 => return C::parse_response(&resp.body),
                    401 | 403 => return Err(GatewayError::Auth { status: resp.status }),
                    429 | 500..=599 => {
                        last = format!("HTTP {}: {}", resp.status, codecs::excerpt(&resp.body))
                    }
                    status => {
                        return Err(GatewayError::Http {
                            status,
                            excerpt: codecs::excerpt(&resp.body),
                        })
                    }
                },
            }
            tracing::debug!(capability = C::NAME, attempt, %last, "retryable failure");
        }
        Err(GatewayError::RetriesExhausted { attempts, last })
    }
}

impl ChatClient {
    pub fn chat(&self, bundle: &crate::strategies::PromptBundle) -> Result<String, GatewayError> {
        self.call(bundle)
    }
}

impl EmbedClient {
    pub fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        self.call(text)
    }
}

impl NliClient {
    pub fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, GatewayError> {
        self.call(&NliInput {
            premise: premise.to_string(),
            hypothesis: hypothesis.to_string(),
        })
    }
}

impl ToxicityClient {
    pub fn toxicity(&self, text: &str) -> Result<f64, GatewayError> {
        self.call(text)
    }
}

/// All four clients, built from one [`GatewayConfig`].
#[derive(Clone)]
pub struct Gateway {
    pub chat: ChatClient,
    pub embed: EmbedClient,
    pub nli: NliClient,
    pub toxicity: ToxicityClient,
}

impl Gateway {
    pub fn from_config(config: &GatewayConfig) -> Result<Self, GatewayError> {
        Ok(Self {
            chat: Client::from_config(&config.chat)?,
            embed: Client::from_config(&config.embed)?,
            nli: Client::from_config(&config.nli)?,
            toxicity: Client::from_config(&config.toxicity)?,
        })
    }
}
