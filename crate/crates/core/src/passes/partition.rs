use std::collections::BTreeMap;

use super::{tile_rewrite, PassError, TileShape};
use crate::analysis::{footprint_at, regions_overlap};
use crate::ir::{Affine, Block, Direction, Index, IndexKind, Location};

/// Splits `index` of `b` into `n` contiguous parts, one per bank of `unit`.
/// The outer index selects the bank; every outer refinement is placed in
/// `unit` at that bank.
pub fn partition(b: &Block, index: &str, n: u64, unit: &str) -> Result<Block, PassError> {
    let range = b
        .index(index)
        .and_then(Index::get_range)
        .ok_or_else(|| PassError::UnknownIndex(index.to_string()))?;
    if n == 0 {
        return Err(PassError::NotPartitionable("zero banks".into()));
    }
    let tile = range.div_ceil(n.min(range).max(1));
    let mut outer = tile_rewrite(b, &TileShape::new([(index, tile)]))?;
    let banks = outer.index(index).and_then(Index::get_range).unwrap_or(1);

    let mut pins = Vec::new();
    for bank in 0..banks as i64 {
        let mut pin = outer.clone();
        for i in &mut pin.indexes {
            if i.name == index {
                i.kind = IndexKind::Alias(Affine::constant(bank));
            }
        }
        pins.push(pin);
    }
    let env = BTreeMap::new();
    for r in outer.refinements.iter().filter(|r| r.dir.writes()) {
        let fps = pins
            .iter()
            .map(|p| footprint_at(r, p, &env))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| PassError::UnknownIndex(e.0))?;
        for a in 0..fps.len() {
            for c in a + 1..fps.len() {
                if regions_overlap(&fps[a], &fps[c]).unwrap_or(true) {
                    return Err(PassError::NotPartitionable(format!(
                        "banks {a} and {c} both write `{}` along `{index}`",
                        r.buffer
                    )));
                }
            }
        }
    }
    for r in &mut outer.refinements {
        if r.dir == Direction::Temp {
            continue;
        }
        let address = r.location.as_ref().map_or(0, |l| l.address);
        r.location = Some(Location {
            unit: unit.to_string(),
            bank: Affine::var(index),
            address,
        });
    }
    Ok(outer)
}
