use std::collections::{BTreeMap, BTreeSet};

use super::{fresh_name, PassError, TileShape};
use crate::analysis::tightened_bounds;
use crate::ir::{Affine, Block, Constraint, Dim, Direction, Index, IndexKind, Refinement, Statement};

struct Split {
    name: String,
    tile: u64,
    quotient: u64,
    outer_coeff: i64,
    inner_coeff: i64,
    /// Alias in the inner block holding the outer part of the original value.
    alias: Option<String>,
}

/// Splits every ranged index of `b` into an outer and an inner part. The
/// result is the outer block; its only statement is the inner block, which
/// iterates one tile and carries `b`'s constraints, statements and tags.
pub fn tile_rewrite(b: &Block, ts: &TileShape) -> Result<Block, PassError> {
    for (n, &t) in &ts.tiles {
        let range = b.index(n).and_then(Index::get_range).ok_or_else(|| PassError::UnknownIndex(n.clone()))?;
        if t == 0 || t > range {
            return Err(PassError::InvalidTile {
                index: n.clone(),
                tile: t,
                range,
            });
        }
    }
    let splits_any = b.ranged().any(|(n, r)| ts.tile_of(n, r) < r);
    if splits_any && b.statements.iter().any(|s| matches!(s, Statement::Special { .. })) {
        return Err(PassError::NotTileable("the block applies a special to its whole window".into()));
    }

    let mut needs_full: BTreeSet<&str> = BTreeSet::new();
    for c in &b.constraints {
        needs_full.extend(c.expr.names());
    }
    for child in b.children() {
        for (_, e) in child.aliases() {
            needs_full.extend(e.names());
        }
    }
    let taken = |n: &str| b.index(n).is_some();
    let mut fresh_taken: BTreeSet<String> = BTreeSet::new();
    let mut splits = Vec::new();
    for (name, range) in b.ranged() {
        let tile = ts.tile_of(name, range);
        let quotient = range.div_ceil(tile);
        let (outer_coeff, inner_coeff) = if ts.interleaved {
            (1, quotient as i64)
        } else {
            (tile as i64, 1)
        };
        let uneven = range % tile != 0;
        let alias = (quotient > 1 && (uneven || needs_full.contains(name))).then(|| {
            let n = fresh_name(name, &|c: &str| taken(c) || fresh_taken.contains(c));
            fresh_taken.insert(n.clone());
            n
        });
        splits.push(Split {
            name: name.to_string(),
            tile,
            quotient,
            outer_coeff,
            inner_coeff,
            alias,
        });
    }

    // Original index value as seen from the inner block.
    let mut full: BTreeMap<String, Affine> = BTreeMap::new();
    for s in &splits {
        let inner = Affine::term(&s.name, s.inner_coeff);
        full.insert(
            s.name.clone(),
            match &s.alias {
                Some(a) => Affine::var(a) + inner,
                None => inner,
            },
        );
    }

    let mut inner = Block {
        indexes: splits.iter().map(|s| Index::range(&s.name, s.tile)).collect(),
        constraints: b.constraints.iter().map(|c| Constraint::new(c.expr.substitute(&full))).collect(),
        refinements: Vec::new(),
        statements: b.statements.clone(),
        tags: b.tags.clone(),
        count_hint: None,
    };
    for (a, _) in b.aliases() {
        if needs_full.contains(a) {
            inner.indexes.push(Index::alias(a, Affine::var(a)));
        }
    }
    for s in &splits {
        if let Some(a) = &s.alias {
            inner.indexes.push(Index::alias(a, Affine::term(&s.name, s.outer_coeff)));
            if s.tile * s.quotient != range_of(b, &s.name) {
                let over = Affine::constant(range_of(b, &s.name) as i64 - 1) - full[&s.name].clone();
                inner.constraints.push(Constraint::new(over));
            }
        }
    }
    for st in &mut inner.statements {
        if let Statement::Block(child) = st {
            for i in &mut child.indexes {
                if let IndexKind::Alias(e) = &mut i.kind {
                    *e = e.substitute(&full);
                }
            }
        }
    }

    let by_name: BTreeMap<&str, &Split> = splits.iter().map(|s| (s.name.as_str(), s)).collect();
    let constraints: Vec<Affine> = b.constraints.iter().map(|c| c.expr.clone()).collect();
    let orig_box = b.index_box();
    let mut outer_refs = Vec::new();
    for r in &b.refinements {
        if r.dir == Direction::Temp {
            inner.refinements.push(r.clone());
            continue;
        }
        let mut outer_dims = Vec::with_capacity(r.dims.len());
        let mut inner_dims = Vec::with_capacity(r.dims.len());
        for d in &r.dims {
            let mut outer_part = Affine::zero();
            let mut inner_part = Affine::zero();
            let (mut lo, mut hi) = (0i64, 0i64);
            for (n, c) in d.offset.terms() {
                match by_name.get(n) {
                    Some(s) => {
                        if s.quotient > 1 {
                            outer_part.add_term(n, c * s.outer_coeff);
                        }
                        let k = c * s.inner_coeff;
                        inner_part.add_term(n, k);
                        let ext = k * (s.tile as i64 - 1);
                        lo += ext.min(0);
                        hi += ext.max(0);
                    }
                    None => outer_part.add_term(n, c),
                }
            }
            let k = d.offset.get_constant();
            let mut start = k + lo;
            let mut end = k + hi + d.size as i64 - 1;
            if outer_part.is_constant() {
                if let Ok((nlo, nhi)) = tightened_bounds(&d.offset, &constraints, |n| orig_box.get(n).copied()) {
                    let (cs, ce) = (start.max(nlo), end.min(nhi + d.size as i64 - 1));
                    if cs <= ce {
                        start = cs;
                        end = ce;
                    }
                }
            }
            outer_dims.push(Dim::new(outer_part + start, (end - start + 1) as u64, d.stride));
            inner_dims.push(Dim::new(inner_part + (k - start), d.size, d.stride));
        }
        outer_refs.push(Refinement {
            dims: outer_dims,
            location: None,
            ..r.clone()
        });
        inner.refinements.push(Refinement {
            dims: inner_dims,
            ..r.clone()
        });
    }

    let mut outer_indexes: Vec<Index> = splits.iter().map(|s| Index::range(&s.name, s.quotient)).collect();
    outer_indexes.extend(b.indexes.iter().filter(|i| i.is_alias()).cloned());
    Ok(Block {
        indexes: outer_indexes,
        constraints: Vec::new(),
        refinements: outer_refs,
        statements: vec![Statement::Block(Box::new(inner))],
        tags: Default::default(),
        count_hint: b.count_hint,
    })
}

fn range_of(b: &Block, name: &str) -> u64 {
    b.index(name).and_then(Index::get_range).unwrap_or(0)
}
