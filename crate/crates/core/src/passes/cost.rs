use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;

use super::{tile_rewrite, PassError, TileShape};
use crate::analysis::{count_cache_lines, CacheModel, Footprint};
use crate::interp::{count_points, enumerate_points};
use crate::ir::{Block, Direction};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Exclusion {
    MemCap { need: u64, cap: u64 },
}

impl fmt::Display for Exclusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exclusion::MemCap { need, cap } => write!(f, "MemCap({need}>{cap})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileCostReport {
    pub tiles: TileShape,
    /// Distinct cache lines per tile and refinement, summed over all tiles.
    pub lines_total: u64,
    /// Constraint-satisfying iteration points of the original block.
    pub useful_ops: u64,
    /// `lines_total / useful_ops`; `None` when excluded or there is no work.
    pub cost: Option<Ratio<u64>>,
    /// Elements of the tiled refinements of one tile.
    pub tile_elements: u64,
    pub excluded: Option<Exclusion>,
}

impl fmt::Display for TileCostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tiles={} tile_elements={} lines_total={} useful_ops={} cost=",
            self.tiles, self.tile_elements, self.lines_total, self.useful_ops
        )?;
        match self.cost {
            Some(c) => write!(f, "{c}")?,
            None => f.write_str("none")?,
        }
        f.write_str(" excluded=")?;
        match &self.excluded {
            Some(e) => write!(f, "{e}")?,
            None => f.write_str("none")?,
        }
        f.write_str(" weights=per_tile")
    }
}

/// Evaluates one tiling of `b`. Only refinements whose offsets use an index
/// named in `ts` count toward `tile_elements`; untiled operands such as
/// convolution weights are left out. Cache lines are counted relative to
/// the parent windows, which are taken to start on a line boundary; alias
/// indexes of `b` are taken as 0.
pub fn tile_cost(b: &Block, ts: &TileShape, cm: &CacheModel, mem_cap: u64) -> Result<TileCostReport, PassError> {
    let outer = tile_rewrite(b, ts)?;
    let counted: Vec<&str> = b
        .refinements
        .iter()
        .filter(|r| r.dir != Direction::Temp && r.dims.iter().any(|d| d.offset.names().any(|n| ts.names(n))))
        .map(|r| r.buffer.as_str())
        .collect();
    let tile_elements: u64 = outer
        .refinements
        .iter()
        .filter(|r| counted.contains(&r.buffer.as_str()))
        .map(|r| r.elements())
        .sum();

    let mut env = BTreeMap::new();
    for (_, e) in b.aliases() {
        for n in e.names() {
            env.insert(n.to_string(), 0);
        }
    }
    let mut lines_total = 0u64;
    let windows: Vec<(Footprint, Vec<i64>)> = outer
        .refinements
        .iter()
        .map(|r| (Footprint::window(r), r.strides()))
        .collect();
    for pt in enumerate_points(&outer, &env).map_err(|e| PassError::UnknownIndex(e.0))? {
        for (r, (fp, strides)) in outer.refinements.iter().zip(&windows) {
            let mut base = 0;
            for d in &r.dims {
                base += d.stride * d.offset.eval(&pt).map_err(|e| PassError::UnknownIndex(e.0))?;
            }
            lines_total += count_cache_lines(fp, strides, cm, base);
        }
    }
    let useful_ops = count_points(b, &env).map_err(|e| PassError::UnknownIndex(e.0))?;
    let excluded = (tile_elements > mem_cap).then_some(Exclusion::MemCap {
        need: tile_elements,
        cap: mem_cap,
    });
    let cost = (excluded.is_none() && useful_ops > 0).then(|| Ratio::new(lines_total, useful_ops));
    Ok(TileCostReport {
        tiles: ts.clone(),
        lines_total,
        useful_ops,
        cost,
        tile_elements,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_program;

    fn conv() -> Block {
        parse_program(include_str!("../../fixtures/fig6a_fixed.stripe"))
            .unwrap()
            .root
            .children()
            .next()
            .unwrap()
            .clone()
    }

    #[test]
    fn memory_cap_numbers() {
        let cm = CacheModel::new(8, 512).unwrap();
        let r = tile_cost(&conv(), &TileShape::new([("x", 3), ("y", 4)]), &cm, 512).unwrap();
        assert_eq!(r.tile_elements, 5 * 6 * 8 + 3 * 4 * 16);
        assert!(r.excluded.is_none() && r.cost.is_some());
        let r = tile_cost(&conv(), &TileShape::new([("x", 12), ("y", 16)]), &cm, 512).unwrap();
        assert_eq!(r.tile_elements, 12 * 16 * 8 + 12 * 16 * 16);
        assert!(r.cost.is_none());
        assert_eq!(
            r.excluded,
            Some(Exclusion::MemCap {
                need: 4608,
                cap: 512
            })
        );
    }

    #[test]
    fn single_tile_counts_whole_tensors() {
        let cm = CacheModel::new(8, 512).unwrap();
        let r = tile_cost(&conv(), &TileShape::new([("x", 12), ("y", 16)]), &cm, u64::MAX).unwrap();
        // one tile: I 1536 elements, F 1152, O 3072, all dense and aligned
        assert_eq!(r.lines_total, (1536 + 1152 + 3072) / 8);
        assert_eq!(r.useful_ops, 34 * 46 * 128);
    }
}
