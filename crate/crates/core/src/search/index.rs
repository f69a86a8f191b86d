use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::pq::{class_id, encode, CodeMatrix, Codebook};

/// Posting lists of row ids keyed by class id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InvertedIndex {
    lists: BTreeMap<u64, Vec<usize>>,
    total: usize,
}

impl InvertedIndex {
    /// Row ids with class `id`, ascending; empty when the class is unused.
    pub fn get(&self, id: u64) -> &[usize] {
        self.lists.get(&id).map_or(&[], Vec::as_slice)
    }

    pub fn num_classes_used(&self) -> usize {
        self.lists.len()
    }

    pub fn total_rows(&self) -> usize {
        self.total
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &[usize])> + '_ {
        self.lists.iter().map(|(&k, v)| (k, v.as_slice()))
    }
}

pub fn build_inverted_index(codes: &CodeMatrix, cb: &Codebook) -> Result<InvertedIndex> {
    codes.check_compatible(cb)?;
    let k = cb.centroids_per_subspace();
    let mut lists: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (row, code) in codes.iter_rows().enumerate() {
        lists.entry(class_id(code, k)?).or_default().push(row);
    }
    Ok(InvertedIndex { lists, total: codes.len() })
}

/// Rows sharing the class of `y`'s code (its analogs).
pub fn analog_lookup<'a>(y: &[f64], idx: &'a InvertedIndex, cb: &Codebook) -> Result<&'a [usize]> {
    if y.len() != cb.dim() {
        return Err(Error::DimensionMismatch { expected: cb.dim(), actual: y.len() });
    }
    let code = encode(y, cb)?;
    Ok(idx.get(class_id(code.entries(), cb.centroids_per_subspace())?))
}
