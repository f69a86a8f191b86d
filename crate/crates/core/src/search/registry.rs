use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::pq::{encode, Codebook, PQCode};

use super::{build_lookup_table, sdc_squared_unchecked, LookupTable};

/// A query bound to a codebook, ready to score database codes.
pub trait PreparedQuery: Sync {
    /// Distance from the query to `code`; `code` must be valid for the codebook.
    fn distance(&self, code: &[u16]) -> f64;
}

/// A way of measuring distance between a raw query and PQ codes.
pub trait DistanceStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn prepare<'a>(&self, query: &[f64], cb: &'a Codebook) -> Result<Box<dyn PreparedQuery + 'a>>;
}

/// Asymmetric: the query stays raw and is scored through a lookup table.
#[derive(Debug, Clone, Copy, Default)]
pub struct Adc;

impl PreparedQuery for LookupTable {
    fn distance(&self, code: &[u16]) -> f64 {
        self.squared_unchecked(code).sqrt()
    }
}

impl DistanceStrategy for Adc {
    fn name(&self) -> &'static str {
        "adc"
    }

    fn description(&self) -> &'static str {
        "asymmetric: raw query against encoded rows via per-query lookup tables"
    }

    fn prepare<'a>(&self, query: &[f64], cb: &'a Codebook) -> Result<Box<dyn PreparedQuery + 'a>> {
        Ok(Box::new(build_lookup_table(query, cb)?))
    }
}

/// Symmetric: the query is encoded first and scored through inter-centroid tables.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sdc;

struct EncodedQuery<'a> {
    code: PQCode,
    cb: &'a Codebook,
}

impl PreparedQuery for EncodedQuery<'_> {
    fn distance(&self, code: &[u16]) -> f64 {
        sdc_squared_unchecked(self.code.entries(), code, self.cb).sqrt()
    }
}

impl DistanceStrategy for Sdc {
    fn name(&self) -> &'static str {
        "sdc"
    }

    fn description(&self) -> &'static str {
        "symmetric: query encoded, distances between centroids from cached tables"
    }

    fn prepare<'a>(&self, query: &[f64], cb: &'a Codebook) -> Result<Box<dyn PreparedQuery + 'a>> {
        let code = encode(query, cb)?;
        // build the cache up front so the parallel scan doesn't contend on it
        cb.sdc_tables();
        Ok(Box::new(EncodedQuery { code, cb }))
    }
}

/// Distance strategies by name.
#[derive(Clone)]
pub struct StrategyRegistry {
    entries: BTreeMap<&'static str, Arc<dyn DistanceStrategy>>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    /// Adds or replaces the strategy registered under its name.
    pub fn register(&mut self, strategy: Arc<dyn DistanceStrategy>) -> Option<Arc<dyn DistanceStrategy>> {
        self.entries.insert(strategy.name(), strategy)
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn DistanceStrategy>> {
        self.entries.get(name).cloned().ok_or_else(|| Error::UnknownStrategy {
            name: name.to_string(),
            known: self.names().into_iter().map(String::from).collect(),
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn DistanceStrategy>> {
        self.entries.values()
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Adc));
        r.register(Arc::new(Sdc));
        r
    }
}

impl std::fmt::Debug for StrategyRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}
