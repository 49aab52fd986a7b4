use std::collections::{BTreeMap, BTreeSet};

use crate::interp::enumerate_points;
use crate::ir::{Block, Direction, Statement, UnboundIndex};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BufferAccess {
    pub reads: BTreeSet<Vec<i64>>,
    pub writes: BTreeSet<Vec<i64>>,
}

/// Elements touched by executing a block, keyed by buffer.
pub type AccessSets = BTreeMap<String, BufferAccess>;

/// Every element read or written by the leaf statements of `b` when run
/// under `parent_env`, in the coordinates of the parent windows `b`'s
/// refinements are carved from. Buffers declared `temp` inside `b` are not
/// reported.
pub fn access_sets(b: &Block, parent_env: &BTreeMap<String, i64>) -> Result<AccessSets, UnboundIndex> {
    let origins: BTreeMap<String, (String, Vec<i64>)> = b
        .refinements
        .iter()
        .filter(|r| r.dir != Direction::Temp)
        .map(|r| (r.buffer.clone(), (r.buffer.clone(), vec![0; r.dims.len()])))
        .collect();
    let mut out = AccessSets::new();
    visit(b, parent_env, &origins, &mut out)?;
    Ok(out)
}

fn window(sizes: &[u64], origin: &[i64], mut f: impl FnMut(Vec<i64>)) {
    if sizes.contains(&0) {
        return;
    }
    let mut local = vec![0i64; sizes.len()];
    loop {
        f(origin.iter().zip(&local).map(|(o, l)| o + l).collect());
        let mut d = sizes.len();
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            local[d] += 1;
            if (local[d] as u64) < sizes[d] {
                break;
            }
            local[d] = 0;
        }
    }
}

fn visit(
    b: &Block,
    parent_env: &BTreeMap<String, i64>,
    origins: &BTreeMap<String, (String, Vec<i64>)>,
    out: &mut AccessSets,
) -> Result<(), UnboundIndex> {
    for p in enumerate_points(b, parent_env)? {
        let mut here = BTreeMap::new();
        let mut sizes = BTreeMap::new();
        for r in &b.refinements {
            if r.dir == Direction::Temp {
                continue;
            }
            let Some((top, o)) = origins.get(&r.buffer) else { continue };
            let mut coord = o.clone();
            for (c, d) in coord.iter_mut().zip(&r.dims) {
                *c += d.offset.eval(&p)?;
            }
            here.insert(r.buffer.clone(), (top.clone(), coord));
            sizes.insert(r.buffer.as_str(), r.sizes());
        }
        for s in &b.statements {
            match s {
                Statement::Load { buffer, .. } => {
                    if let Some((top, c)) = here.get(buffer) {
                        out.entry(top.clone()).or_default().reads.insert(c.clone());
                    }
                }
                Statement::Store { buffer, .. } => {
                    if let Some((top, c)) = here.get(buffer) {
                        out.entry(top.clone()).or_default().writes.insert(c.clone());
                    }
                }
                Statement::Special { args, .. } => {
                    for (k, a) in args.iter().enumerate() {
                        let Some((top, c)) = here.get(a) else { continue };
                        let acc = out.entry(top.clone()).or_default();
                        let set = if k == 0 { &mut acc.writes } else { &mut acc.reads };
                        window(&sizes[a.as_str()], c, |e| {
                            set.insert(e);
                        });
                    }
                }
                Statement::Block(c) => visit(c, &p, &here, out)?,
                Statement::Intrinsic { .. } => {}
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_program;

    #[test]
    fn tiles_write_their_own_outputs() {
        let p = parse_program(include_str!("../../fixtures/fig6b.stripe")).unwrap();
        let mid = p.root.children().next().unwrap().clone();
        let mut pin = mid.clone();
        pin.indexes[0] = crate::ir::Index::range("x", 1);
        pin.indexes[1] = crate::ir::Index::range("y", 1);
        let sets = access_sets(&pin, &BTreeMap::new()).unwrap();
        let o = &sets["O"];
        assert_eq!(o.writes.len(), 3 * 4 * 16);
        assert!(o.reads.is_empty());
        let i = &sets["I"];
        assert_eq!(i.reads.len(), 4 * 5 * 8);
        assert!(i.reads.iter().all(|c| c[0] >= 0 && c[0] < 4 && c[1] >= 0 && c[1] < 5));
    }
}
