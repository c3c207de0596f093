use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use gradcode_core::codec::solve_decode_row;
use gradcode_core::{DecodeRow, GradientCode, Result, SurvivorSet};

/// Decoding rows of one code, shared between threads.
///
/// Lookups take a read lock. A miss decodes without holding any lock and
/// then inserts; if two threads race on the same survivor set the first
/// insert wins, which is harmless because both rows are equal.
#[derive(Debug)]
pub struct SharedDecodeCache {
    code: Arc<GradientCode>,
    tol: f64,
    rows: RwLock<BTreeMap<SurvivorSet, Arc<DecodeRow>>>,
}

impl SharedDecodeCache {
    pub fn new(code: Arc<GradientCode>, tol: f64) -> Self {
        Self {
            code,
            tol,
            rows: RwLock::new(BTreeMap::new()),
        }
    }

    pub fn code(&self) -> &GradientCode {
        &self.code
    }

    pub fn len(&self) -> usize {
        self.rows.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_or_decode(&self, survivors: &SurvivorSet) -> Result<Arc<DecodeRow>> {
        if let Some(row) = self.rows.read().expect("cache lock").get(survivors) {
            return Ok(Arc::clone(row));
        }
        let row = Arc::new(solve_decode_row(&self.code, survivors, self.tol)?);
        let mut rows = self.rows.write().expect("cache lock");
        Ok(Arc::clone(rows.entry(survivors.clone()).or_insert(row)))
    }
}
