use std::collections::BTreeSet;

use super::{tile_cost, tile_rewrite, PassError, TileCostReport, TileShape};
use crate::analysis::CacheModel;
use crate::ir::{Block, Direction};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AutotileOptions {
    pub mem_cap: u64,
    /// Restrict tiles to powers of two no larger than the range.
    pub power_of_two: bool,
    /// Restrict tiles to divisors of the range (ignored with `power_of_two`).
    pub divisors_only: bool,
    /// Indexes to search over; `None` means [`default_search`].
    pub search: Option<Vec<String>>,
    /// Skip the search and use this shape.
    pub pinned: Option<TileShape>,
}

impl Default for AutotileOptions {
    fn default() -> Self {
        AutotileOptions {
            mem_cap: 512,
            power_of_two: false,
            divisors_only: true,
            search: None,
            pinned: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AutotileReport {
    pub candidates: usize,
    pub excluded: usize,
    pub chosen: Option<TileCostReport>,
    pub warning: Option<String>,
}

/// Ranged indexes (range > 1) used by the offsets of written refinements,
/// in declaration order.
pub fn default_search(b: &Block) -> Vec<String> {
    let used: BTreeSet<&str> = b
        .refinements
        .iter()
        .filter(|r| matches!(r.dir, Direction::Out | Direction::InOut))
        .flat_map(|r| r.dims.iter().flat_map(|d| d.offset.names()))
        .collect();
    b.ranged()
        .filter(|(n, r)| *r > 1 && used.contains(n))
        .map(|(n, _)| n.to_string())
        .collect()
}

fn choices(range: u64, opts: &AutotileOptions) -> Vec<u64> {
    if opts.power_of_two {
        std::iter::successors(Some(1u64), |t| Some(t * 2)).take_while(|&t| t <= range).collect()
    } else if opts.divisors_only {
        (1..=range).filter(|t| range.is_multiple_of(*t)).collect()
    } else {
        (1..=range).collect()
    }
}

/// Every candidate shape of the search space, in lexicographic order of the
/// tile vector over the searched indexes.
pub(crate) fn candidates(b: &Block, opts: &AutotileOptions) -> Result<Vec<TileShape>, PassError> {
    let names = opts.search.clone().unwrap_or_else(|| default_search(b));
    let mut axes = Vec::new();
    for n in &names {
        let range = b
            .index(n)
            .and_then(|i| i.get_range())
            .ok_or_else(|| PassError::UnknownIndex(n.clone()))?;
        axes.push((n.clone(), choices(range, opts)));
    }
    let mut out = vec![TileShape::default()];
    for (n, ts) in axes {
        out = out
            .into_iter()
            .flat_map(|shape| {
                let n = n.clone();
                ts.iter().map(move |&t| {
                    let mut s = shape.clone();
                    s.tiles.insert(n.clone(), t);
                    s
                })
            })
            .collect();
    }
    Ok(out)
}

/// Picks the cheapest non-excluded tiling of `b` and applies it. Ties go to
/// the first candidate in lexicographic order. When every candidate is
/// excluded `b` is returned unchanged with a warning.
pub fn autotile(b: &Block, cm: &CacheModel, opts: &AutotileOptions) -> Result<(Block, AutotileReport), PassError> {
    if let Some(ts) = &opts.pinned {
        let report = tile_cost(b, ts, cm, opts.mem_cap)?;
        let excluded = usize::from(report.excluded.is_some());
        return Ok((
            tile_rewrite(b, ts)?,
            AutotileReport {
                candidates: 1,
                excluded,
                chosen: Some(report),
                warning: None,
            },
        ));
    }
    let cands = candidates(b, opts)?;
    let mut best: Option<TileCostReport> = None;
    let mut excluded = 0;
    for ts in &cands {
        let r = tile_cost(b, ts, cm, opts.mem_cap)?;
        let Some(cost) = r.cost else {
            excluded += usize::from(r.excluded.is_some());
            continue;
        };
        if best.as_ref().and_then(|b| b.cost).is_none_or(|c| cost < c) {
            best = Some(r);
        }
    }
    let report = AutotileReport {
        candidates: cands.len(),
        excluded,
        chosen: best.clone(),
        warning: best.is_none().then(|| "every candidate tiling was excluded".to_string()),
    };
    match best {
        Some(r) => Ok((tile_rewrite(b, &r.tiles)?, report)),
        None => Ok((b.clone(), report)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_program;

    fn copy(n: u64) -> Block {
        parse_program(&format!(
            "block [] ( in A[0] i32({n}):(1)  out B[0]:assign i32({n}):(1) ) {{
                block [x:{n}] ( in A[x] i32(1):(1)  out B[x]:assign i32(1):(1) ) {{ $a = load(A)  B = store($a) }}
            }}"
        ))
        .unwrap()
        .root
        .children()
        .next()
        .unwrap()
        .clone()
    }

    #[test]
    fn copy_never_takes_the_whole_range() {
        let cm = CacheModel::new(8, 64).unwrap();
        let opts = AutotileOptions {
            mem_cap: 8,
            power_of_two: true,
            ..Default::default()
        };
        let (out, rep) = autotile(&copy(16), &cm, &opts).unwrap();
        let t = rep.chosen.unwrap().tiles.tiles["x"];
        assert!(t == 4 || t == 8, "{t}");
        assert_eq!(rep.candidates, 5);
        assert_eq!(out.ranged().next().unwrap().1, 16 / t);
    }

    #[test]
    fn all_excluded_returns_block_unchanged() {
        let cm = CacheModel::new(8, 64).unwrap();
        let opts = AutotileOptions {
            mem_cap: 1,
            ..Default::default()
        };
        let (out, rep) = autotile(&copy(16), &cm, &opts).unwrap();
        assert_eq!(out, copy(16));
        assert!(rep.warning.is_some() && rep.chosen.is_none());
    }

    #[test]
    fn fitting_block_keeps_one_tile() {
        let cm = CacheModel::new(8, 64).unwrap();
        let opts = AutotileOptions {
            mem_cap: 1 << 20,
            ..Default::default()
        };
        // 12 elements span two lines; any split touches more
        let (out, _) = autotile(&copy(12), &cm, &opts).unwrap();
        assert!(out.ranged().all(|(_, r)| r == 1));
    }

    #[test]
    fn search_space_orders() {
        let b = copy(16);
        let opts = AutotileOptions::default();
        let c: Vec<u64> = candidates(&b, &opts).unwrap().iter().map(|s| s.tiles["x"]).collect();
        assert_eq!(c, vec![1, 2, 4, 8, 16]);
        let opts = AutotileOptions {
            divisors_only: false,
            ..Default::default()
        };
        assert_eq!(candidates(&b, &opts).unwrap().len(), 16);
    }
}
