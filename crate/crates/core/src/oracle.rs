//! Cached, call-counting wrapper around an objective function.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::linalg::Vector;

type Objective = dyn Fn(&Vector) -> f64 + Send + Sync;

struct Inner {
    f: Arc<Objective>,
    cache: Option<Mutex<HashMap<Vec<u64>, f64>>>,
    calls: AtomicUsize,
}

/// Objective oracle. Clones share the cache and the counter.
#[derive(Clone)]
pub struct Oracle {
    inner: Arc<Inner>,
}

impl fmt::Debug for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Oracle")
            .field("cached", &self.inner.cache.is_some())
            .field("calls", &self.calls())
            .finish()
    }
}

fn key(x: &Vector) -> Vec<u64> {
    // + 0.0 folds -0.0 onto 0.0
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

impl Oracle {
    /// Caching oracle.
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&Vector) -> f64 + Send + Sync + 'static,
    {
        Self::build(Arc::new(f), true)
    }

    /// Oracle that evaluates on every call.
    pub fn uncached<F>(f: F) -> Self
    where
        F: Fn(&Vector) -> f64 + Send + Sync + 'static,
    {
        Self::build(Arc::new(f), false)
    }

    fn build(f: Arc<Objective>, cached: bool) -> Self {
        Oracle {
            inner: Arc::new(Inner {
                f,
                cache: cached.then(|| Mutex::new(HashMap::new())),
                calls: AtomicUsize::new(0),
            }),
        }
    }

    /// Fresh oracle over the same function with an empty cache and counter.
    pub fn fresh(&self) -> Self {
        Self::build(self.inner.f.clone(), self.inner.cache.is_some())
    }

    pub fn eval(&self, x: &Vector) -> Result<f64> {
        if let Some(cache) = &self.inner.cache {
            let k = key(x);
            if let Some(&v) = cache.lock().expect("cache poisoned").get(&k) {
                return Ok(v);
            }
            let v = self.call(x)?;
            cache.lock().expect("cache poisoned").entry(k).or_insert(v);
            Ok(v)
        } else {
            self.call(x)
        }
    }

    fn call(&self, x: &Vector) -> Result<f64> {
        self.inner.calls.fetch_add(1, Ordering::Relaxed);
        let v = (self.inner.f)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation {
                point: x.iter().copied().collect(),
                value: v,
            })
        }
    }

    /// `f(x0 + offset)`.
    pub fn eval_offset(&self, x0: &Vector, offset: &Vector) -> Result<f64> {
        self.eval(&(x0 + offset))
    }

    /// Number of underlying function evaluations (cache misses).
    pub fn calls(&self) -> usize {
        self.inner.calls.load(Ordering::Relaxed)
    }

    pub fn reset_calls(&self) {
        self.inner.calls.store(0, Ordering::Relaxed);
    }
}
