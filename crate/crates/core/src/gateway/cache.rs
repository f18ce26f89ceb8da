use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use super::{GatewayError, Generator, GeneratorQuery, GeneratorReply};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    image: [u8; 32],
    source_id: String,
    prompt: String,
    view_index: u32,
}

/// A generator handle with an optional reply cache and a call counter.
///
/// Cache keys are `(image content hash, source id, prompt, view index)`
/// within one backend identity. The id and index keep the cache transparent
/// for backends whose replies depend on them, and keep two byte-identical
/// crops from sharing a reply. Errors are never cached.
pub struct Gateway {
    backend: Arc<dyn Generator>,
    identity: String,
    cache: Option<RwLock<HashMap<CacheKey, GeneratorReply>>>,
    calls: AtomicU64,
}

impl Gateway {
    pub fn new(backend: Arc<dyn Generator>, cache: bool) -> Self {
        Self {
            identity: backend.identity(),
            backend,
            cache: cache.then(|| RwLock::new(HashMap::new())),
            calls: AtomicU64::new(0),
        }
    }

    pub fn identity(&self) -> &str {
        &self.identity
    }

    pub fn caching(&self) -> bool {
        self.cache.is_some()
    }

    /// Number of queries that reached the backend.
    pub fn backend_calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    /// Same backend, fresh cache and counter.
    pub fn fork(&self, cache: bool) -> Self {
        Self::new(Arc::clone(&self.backend), cache)
    }

    pub fn query(&self, q: &GeneratorQuery<'_>) -> Result<GeneratorReply, GatewayError> {
        let Some(cache) = &self.cache else {
            self.calls.fetch_add(1, Ordering::SeqCst);
            return self.backend.generate(q);
        };
        let key = CacheKey {
            image: q.image.content_hash(),
            source_id: q.image.source_id().to_string(),
            prompt: q.prompt.to_string(),
            view_index: q.view_index,
        };
        if let Some(hit) = cache.read().expect("cache lock poisoned").get(&key) {
            return Ok(hit.clone());
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        let reply = self.backend.generate(q)?;
        cache
            .write()
            .expect("cache lock poisoned")
            .insert(key, reply.clone());
        Ok(reply)
    }
}
