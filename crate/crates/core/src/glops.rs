//! Grünwald-Letnikov weights, the short-memory window and fractional
//! differentiation of sampled signals.
//!
//! The GL derivative of order α at `t_m` is
//! `h^-α Σ_{j=0}^{N} b_j y_{m-j}` with `b_j = (-1)^j C(α, j)`, generated by
//! `b_0 = 1, b_j = (1 - (1+α)/j) b_{j-1}`. The window is
//! `N = min(m, ⌊L/h⌋)`; samples before the series origin are zero.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fode::TimeSeries;
use crate::specfun::gamma;

/// Binomial weights `b_0 .. b_{n-1}` of one derivative order.
#[derive(Debug, Clone, PartialEq)]
pub struct GlCoeffs {
    pub order: f64,
    pub values: Vec<f64>,
}

impl GlCoeffs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Generates `count` GL weights of order `order` by the recurrence.
pub fn gl_coeffs(order: f64, count: usize) -> GlCoeffs {
    GlCoeffs {
        order,
        values: gl_values(order, count),
    }
}

fn gl_values(order: f64, count: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(count);
    if count == 0 {
        return v;
    }
    v.push(1.0);
    let is_int = order == order.floor();
    for j in 1..count {
        if is_int && j as f64 > order {
            // exact zeros past an integer order
            v.push(0.0);
            continue;
        }
        let prev = v[j - 1];
        v.push((1.0 - (1.0 + order) / j as f64) * prev);
    }
    v
}

/// How much history the GL sums see.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MemoryPolicy {
    #[default]
    Full,
    /// Memory length `L` in seconds.
    FixedLength { seconds: f64 },
    /// `L` chosen from the admissible normalized error `delta0`.
    ErrorBound { delta0: f64 },
}

impl MemoryPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MemoryPolicy::Full => Ok(()),
            MemoryPolicy::FixedLength { seconds } if seconds > 0.0 && seconds.is_finite() => Ok(()),
            MemoryPolicy::FixedLength { seconds } => Err(Error::InvalidGrid(format!(
                "memory length must be positive, got {seconds}"
            ))),
            MemoryPolicy::ErrorBound { delta0 } if delta0 > 0.0 && delta0 <= 1.0 => Ok(()),
            MemoryPolicy::ErrorBound { delta0 } => Err(Error::InvalidGrid(format!(
                "delta0 must lie in (0, 1], got {delta0}"
            ))),
        }
    }

    /// Memory length in seconds for a derivative of `order`; `None` means
    /// unbounded.
    pub fn length(&self, order: f64) -> Result<Option<f64>> {
        match *self {
            MemoryPolicy::Full => Ok(None),
            MemoryPolicy::FixedLength { seconds } => Ok(Some(seconds)),
            MemoryPolicy::ErrorBound { delta0 } => {
                // integer orders have finite stencils; nothing to truncate
                if order == order.floor() {
                    Ok(None)
                } else {
                    memory_length(delta0, order).map(Some)
                }
            }
        }
    }

    /// Window cap `⌊L/h⌋` in samples, `usize::MAX` when unbounded.
    pub fn window(&self, order: f64, h: f64) -> Result<usize> {
        Ok(match self.length(order)? {
            None => usize::MAX,
            Some(l) => {
                let n = (l / h).floor();
                if n >= usize::MAX as f64 {
                    usize::MAX
                } else {
                    n as usize
                }
            }
        })
    }
}

/// Minimal memory length `L = 1 / (δ0² Γ(α)²)` for normalized error `delta0`.
pub fn memory_length(delta0: f64, order: f64) -> Result<f64> {
    if !(delta0 > 0.0 && delta0 <= 1.0) {
        return Err(Error::Domain(format!("delta0 must lie in (0, 1], got {delta0}")));
    }
    if !(order > 0.0) {
        return Err(Error::Domain(format!("order must be positive, got {order}")));
    }
    let g = gamma(order)?;
    Ok(1.0 / (delta0 * delta0 * g * g))
}

/// Thread-safe cache of GL weights keyed by order. Entries only grow, and a
/// given (order, count) always yields the same values, so racing inserts
/// are harmless.
#[derive(Debug, Default)]
pub struct CoeffCache {
    map: RwLock<HashMap<u64, Arc<Vec<f64>>>>,
}

impl CoeffCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn global() -> &'static CoeffCache {
        static CACHE: OnceLock<CoeffCache> = OnceLock::new();
        CACHE.get_or_init(CoeffCache::new)
    }

    /// At least `count` weights of `order` (the returned vector may be longer).
    pub fn get(&self, order: f64, count: usize) -> Arc<Vec<f64>> {
        let key = order.to_bits();
        if let Some(v) = self.map.read().get(&key) {
            if v.len() >= count {
                return Arc::clone(v);
            }
        }
        let fresh = Arc::new(gl_values(order, count));
        let mut map = self.map.write();
        match map.get(&key) {
            Some(v) if v.len() >= count => Arc::clone(v),
            _ => {
                map.insert(key, Arc::clone(&fresh));
                fresh
            }
        }
    }

    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.read().is_empty()
    }
}

/// GL derivative of `order` of a sampled signal, on the same grid.
pub fn frac_diff(y: &TimeSeries, order: f64, policy: &MemoryPolicy) -> Result<TimeSeries> {
    if y.is_empty() {
        return Err(Error::EmptySeries);
    }
    if !(order >= 0.0) || !order.is_finite() {
        return Err(Error::Domain(format!("order must be >= 0, got {order}")));
    }
    policy.validate()?;
    let n = y.len();
    let cap = policy.window(order, y.h)?;
    let b = CoeffCache::global().get(order, n);
    let scale = y.h.powf(-order);
    let s = &y.samples;
    let out = (0..n)
        .map(|m| {
            let window = m.min(cap);
            let acc: f64 = (0..=window).map(|j| b[j] * s[m - j]).sum();
            scale * acc
        })
        .collect();
    Ok(TimeSeries {
        h: y.h,
        t0: y.t0,
        samples: out,
    })
}
