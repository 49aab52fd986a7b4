//! Footprints, overlap tests, cache-line counting and statement
//! dependencies.

mod access;
mod bounds;
mod dag;
mod footprint;

use thiserror::Error;

pub use access::{access_sets, AccessSets, BufferAccess};
pub use bounds::{leaf_access_bounds, tightened_bounds, LeafBounds};
pub use dag::{build_dependency_dag, DepKind, DependencyDag, Edge};
pub use footprint::{count_cache_lines, footprint, footprint_at, footprint_exact, regions_overlap, FootDim, Footprint};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("footprints of `{0}` and `{1}` are over different buffers")]
    DifferentBuffers(String, String),
    #[error("cache line size must be at least 1 and capacity at least one line (line={line}, capacity={capacity})")]
    InvalidCacheModel { line: u64, capacity: u64 },
}

/// Line size and capacity, both in elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheModel {
    line: u64,
    capacity: u64,
}

impl CacheModel {
    pub fn new(line: u64, capacity: u64) -> Result<Self, AnalysisError> {
        if line == 0 || capacity < line {
            return Err(AnalysisError::InvalidCacheModel { line, capacity });
        }
        Ok(CacheModel { line, capacity })
    }

    pub fn line(&self) -> u64 {
        self.line
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }
}
