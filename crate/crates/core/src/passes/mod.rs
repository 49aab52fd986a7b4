//! Semantics-preserving rewrites of the IR and the pipeline that runs them.

mod autotile;
mod boundary;
mod cost;
mod fuse;
mod localize;
mod partition;
mod pipeline;
mod scalarize;
mod schedule;
mod stencil;
mod tile;
mod transpose;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::validate::Diagnostic;

pub use autotile::{autotile, default_search, AutotileOptions, AutotileReport};
pub use boundary::separate_boundary;
pub use cost::{tile_cost, Exclusion, TileCostReport};
pub use fuse::{fuse, Refusal};
pub use localize::localize;
pub use partition::partition;
pub use pipeline::{apply_pipeline, apply_pipeline_with, Pass, PassConfig, PassReport, Registry};
pub use scalarize::scalarize;
pub use schedule::{schedule, schedule_order, ScheduleOutcome};
pub use stencil::{stencil_match, StencilSpec};
pub(crate) use stencil::{parse_sizes as stencil_sizes, Sizes as StencilSizes};
pub use tile::tile_rewrite;
pub use transpose::transpose_layout;

#[derive(Debug, Error)]
pub enum PassError {
    #[error("InvalidTile: tile {tile} for index `{index}` (range {range})")]
    InvalidTile { index: String, tile: u64, range: u64 },
    #[error("InvalidTile: `{0}` is not a ranged index of the block")]
    UnknownIndex(String),
    #[error("NotTileable: {0}")]
    NotTileable(String),
    #[error("NotPartitionable: {0}")]
    NotPartitionable(String),
    #[error("NoInteriorRegion: the constraints leave no interior")]
    NoInteriorRegion,
    #[error("ExternalBufferImmutable: `{0}` is not a block-local buffer")]
    ExternalBufferImmutable(String),
    #[error("UnknownBuffer: `{0}`")]
    UnknownBuffer(String),
    #[error("InvalidPermutation: {0}")]
    InvalidPermutation(String),
    #[error("InvalidTileShape: {0}")]
    InvalidTileShape(String),
    #[error("UnknownPass: `{0}`")]
    UnknownPass(String),
    #[error("InvalidParameter: pass `{pass}`: {message}")]
    InvalidParameter { pass: String, message: String },
    #[error("PassFailed: pass `{pass}` produced invalid IR ({} diagnostics)", diagnostics.len())]
    PassFailed { pass: String, diagnostics: Vec<Diagnostic> },
}

/// Tile size per ranged index. Indexes left out are untiled (tile = range).
///
/// Contiguous tiling maps an original index to `tile * outer + inner`;
/// interleaved tiling maps it to `outer + quotient * inner`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TileShape {
    pub tiles: BTreeMap<String, u64>,
    pub interleaved: bool,
}

impl TileShape {
    pub fn new<S: Into<String>>(tiles: impl IntoIterator<Item = (S, u64)>) -> Self {
        TileShape {
            tiles: tiles.into_iter().map(|(n, t)| (n.into(), t)).collect(),
            interleaved: false,
        }
    }

    pub fn interleaved(mut self) -> Self {
        self.interleaved = true;
        self
    }

    pub fn tile_of(&self, index: &str, range: u64) -> u64 {
        self.tiles.get(index).copied().unwrap_or(range)
    }

    pub fn names(&self, index: &str) -> bool {
        self.tiles.contains_key(index)
    }
}

/// `x:3,y:4` (or `x=3,y=4`).
impl FromStr for TileShape {
    type Err = PassError;

    fn from_str(s: &str) -> Result<Self, PassError> {
        let mut tiles = BTreeMap::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (n, t) = part
                .split_once([':', '='])
                .ok_or_else(|| PassError::InvalidTileShape(format!("expected name:size, got `{part}`")))?;
            let t: u64 = t
                .trim()
                .parse()
                .map_err(|_| PassError::InvalidTileShape(format!("bad tile size in `{part}`")))?;
            tiles.insert(n.trim().to_string(), t);
        }
        Ok(TileShape {
            tiles,
            interleaved: false,
        })
    }
}

impl fmt::Display for TileShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.tiles.iter().map(|(n, t)| format!("{n}:{t}")).collect();
        f.write_str(&parts.join(","))
    }
}

/// A name not in `taken`, built by appending `o` to `base`.
pub(crate) fn fresh_name(base: &str, taken: &impl Fn(&str) -> bool) -> String {
    let mut name = format!("{base}o");
    while taken(&name) {
        name.push('o');
    }
    name
}
