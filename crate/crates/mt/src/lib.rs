//! Translation of expanded sentences: a provider trait with mock, cache-only
//! and HTTP implementations, fronted by a persistent cache.

mod cache;
mod http;
mod mock;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};

use thiserror::Error;

pub use cache::{CacheKey, TranslationCache};
pub use http::{HttpConfig, HttpProvider, RequestStyle};
pub use mock::{
    mock_translate, mock_translate_traced, AgreementSplit, MockProvider, MockRuleSet, ReorderRule,
};

#[derive(Debug, Error)]
pub enum MtError {
    #[error("translation provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("no cached translation for {text:?} ({src} -> {tgt})")]
    CacheMiss {
        src: String,
        tgt: String,
        text: String,
    },
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("invalid translation request: {0}")]
    InvalidRequest(String),
    #[error("translation cache {path}: {reason}")]
    Cache { path: String, reason: String },
    #[error("invalid mock rules: {0}")]
    Rules(String),
}

/// Language tags like `en`, `hi`, `zh-Hans`, `pt-BR`.
pub fn is_valid_tag(tag: &str) -> bool {
    let mut parts = tag.split('-');
    let primary = parts.next().unwrap_or("");
    (2..=3).contains(&primary.len())
        && primary.chars().all(|c| c.is_ascii_alphabetic())
        && parts.all(|p| (2..=8).contains(&p.len()) && p.chars().all(|c| c.is_ascii_alphanumeric()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationRequest {
    pub texts: Vec<String>,
    pub source_lang: String,
    pub target_lang: String,
}

impl TranslationRequest {
    pub fn new(
        texts: impl IntoIterator<Item = impl Into<String>>,
        source_lang: impl Into<String>,
        target_lang: impl Into<String>,
    ) -> Result<Self, MtError> {
        let req = Self {
            texts: texts.into_iter().map(Into::into).collect(),
            source_lang: source_lang.into(),
            target_lang: target_lang.into(),
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), MtError> {
        if self.texts.is_empty() {
            return Err(MtError::InvalidRequest("no texts".into()));
        }
        for tag in [&self.source_lang, &self.target_lang] {
            if !is_valid_tag(tag) {
                return Err(MtError::InvalidRequest(format!(
                    "malformed language tag {tag:?}"
                )));
            }
        }
        Ok(())
    }
}

/// A backend that translates one batch; output aligned with input.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    fn translate_batch(
        &self,
        texts: &[String],
        src: &str,
        tgt: &str,
    ) -> Result<Vec<String>, MtError>;

    fn max_batch(&self) -> usize {
        100
    }

    /// Batches that may be outstanding at once.
    fn concurrency(&self) -> usize {
        1
    }
}

/// Cache-first translation. Without a provider, misses are errors.
pub struct Translator {
    cache: TranslationCache,
    provider: Option<Box<dyn Provider>>,
    in_flight: Mutex<Vec<CacheKey>>,
    released: Condvar,
    provider_calls: AtomicUsize,
}

impl Translator {
    pub fn new(cache: TranslationCache, provider: Box<dyn Provider>) -> Self {
        Self::build(cache, Some(provider))
    }

    pub fn cache_only(cache: TranslationCache) -> Self {
        Self::build(cache, None)
    }

    fn build(cache: TranslationCache, provider: Option<Box<dyn Provider>>) -> Self {
        Self {
            cache,
            provider,
            in_flight: Mutex::new(Vec::new()),
            released: Condvar::new(),
            provider_calls: AtomicUsize::new(0),
        }
    }

    pub fn cache(&self) -> &TranslationCache {
        &self.cache
    }

    /// Batches sent to the provider so far.
    pub fn provider_calls(&self) -> usize {
        self.provider_calls.load(Ordering::SeqCst)
    }

    pub fn translate(&self, req: &TranslationRequest) -> Result<Vec<String>, MtError> {
        req.validate()?;
        let (src, tgt) = (req.source_lang.as_str(), req.target_lang.as_str());
        loop {
            let mut missing: Vec<&String> = Vec::new();
            for t in &req.texts {
                if self.cache.get(src, tgt, t).is_none() && !missing.contains(&t) {
                    missing.push(t);
                }
            }
            if missing.is_empty() {
                return Ok(req
                    .texts
                    .iter()
                    .map(|t| self.cache.get(src, tgt, t).expect("cached"))
                    .collect());
            }
            let Some(provider) = &self.provider else {
                return Err(MtError::CacheMiss {
                    src: src.into(),
                    tgt: tgt.into(),
                    text: missing[0].clone(),
                });
            };
            let keys: Vec<CacheKey> = missing.iter().map(|t| CacheKey::new(src, tgt, t)).collect();
            let (mine, waiting) = {
                let mut inflight = self.in_flight.lock().expect("in-flight lock");
                let (waiting, mine): (Vec<_>, Vec<_>) =
                    keys.into_iter().partition(|k| inflight.contains(k));
                inflight.extend(mine.iter().cloned());
                (mine, waiting)
            };
            let result = if mine.is_empty() {
                Ok(())
            } else {
                let texts: Vec<String> = mine.iter().map(|k| k.text.clone()).collect();
                let r = self.call_provider(provider.as_ref(), &texts, src, tgt);
                let mut inflight = self.in_flight.lock().expect("in-flight lock");
                inflight.retain(|k| !mine.contains(k));
                self.released.notify_all();
                r
            };
            result?;
            if !waiting.is_empty() {
                let mut inflight = self.in_flight.lock().expect("in-flight lock");
                while waiting.iter().any(|k| inflight.contains(k)) {
                    inflight = self.released.wait(inflight).expect("in-flight lock");
                }
            }
        }
    }

    /// Send `texts` in batches, at most `provider.concurrency()` at a time.
    /// Any failed batch fails the whole call; successful batches are cached.
    fn call_provider(
        &self,
        provider: &dyn Provider,
        texts: &[String],
        src: &str,
        tgt: &str,
    ) -> Result<(), MtError> {
        let batches: Vec<&[String]> = texts.chunks(provider.max_batch().max(1)).collect();
        let next = AtomicUsize::new(0);
        let results: Mutex<HashMap<usize, Result<Vec<String>, MtError>>> =
            Mutex::new(HashMap::new());
        let workers = provider.concurrency().clamp(1, batches.len());
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(batch) = batches.get(i) else { break };
                    self.provider_calls.fetch_add(1, Ordering::SeqCst);
                    let r = provider.translate_batch(batch, src, tgt).and_then(|out| {
                        if out.len() == batch.len() {
                            Ok(out)
                        } else {
                            Err(MtError::ProviderUnavailable(format!(
                                "{} returned {} translations for {} texts",
                                provider.name(),
                                out.len(),
                                batch.len()
                            )))
                        }
                    });
                    let failed = r.is_err();
                    results.lock().expect("results lock").insert(i, r);
                    if failed {
                        break;
                    }
                });
            }
        });
        let mut results = results.into_inner().expect("results lock");
        let mut entries = Vec::with_capacity(texts.len());
        let mut first_err = None;
        for (i, batch) in batches.iter().enumerate() {
            match results.remove(&i) {
                Some(Ok(out)) => entries.extend(batch.iter().cloned().zip(out)),
                Some(Err(e)) => {
                    first_err.get_or_insert(e);
                }
                None => {}
            }
        }
        self.cache.insert_all(src, tgt, entries)?;
        match first_err {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}
