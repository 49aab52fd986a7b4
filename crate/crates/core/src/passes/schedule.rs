use std::collections::{BTreeMap, BTreeSet};

use crate::analysis::build_dependency_dag;
use crate::hwconfig::HardwareConfig;
use crate::ir::{Affine, Block, Location, Statement};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleOutcome {
    pub block: Block,
    /// Original positions of the statements, in their new order.
    pub order: Vec<usize>,
    /// `(buffer, address)` for each placed slot.
    pub placed: Vec<(String, u64)>,
    pub warnings: Vec<String>,
}

/// Topological order of `b`'s statements. Among ready statements the
/// earliest one consuming the previously emitted statement goes first,
/// otherwise the earliest one.
pub fn schedule_order(b: &Block) -> Vec<usize> {
    let dag = build_dependency_dag(b);
    let n = b.statements.len();
    let mut preds: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for e in &dag.edges {
        preds[e.to].insert(e.from);
    }
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let ready: Vec<usize> = (0..n).filter(|&k| !done[k] && preds[k].iter().all(|&p| done[p])).collect();
        let next = order
            .last()
            .and_then(|&last| ready.iter().copied().find(|&k| dag.has_edge(last, k)))
            .unwrap_or(ready[0]);
        done[next] = true;
        order.push(next);
    }
    order
}

fn reorder(b: &Block) -> (Block, Vec<usize>) {
    let order = schedule_order(b);
    let mut out = b.clone();
    out.statements = order.iter().map(|&k| b.statements[k].clone()).collect();
    for st in &mut out.statements {
        if let Statement::Block(c) = st {
            **c = reorder(c).0;
        }
    }
    (out, order)
}

/// Reorders statements at every level, then places the refinements of
/// `b`'s child blocks that have no location in memory `mem` (default: the
/// smallest memory of `hw`). Children refining the same buffer share one
/// slot, live from the first such child to the last. Slots are placed first
/// fit; a slot that does not fit is left unplaced with a warning.
pub fn schedule(b: &Block, hw: &HardwareConfig, mem: Option<&str>) -> ScheduleOutcome {
    let (mut block, order) = reorder(b);
    let mut warnings = Vec::new();
    let mut placed = Vec::new();
    let Some((unit, m)) = hw.mem(mem) else {
        warnings.push("no memory unit to place into".to_string());
        return ScheduleOutcome {
            block,
            order,
            placed,
            warnings,
        };
    };

    // buffer -> (first, last, elements), in order of first use
    let mut slots: Vec<(String, usize, usize, u64)> = Vec::new();
    let mut pos: BTreeMap<String, usize> = BTreeMap::new();
    for (k, st) in block.statements.iter().enumerate() {
        let Statement::Block(c) = st else { continue };
        for r in c.refinements.iter().filter(|r| r.location.is_none()) {
            match pos.get(&r.buffer) {
                Some(&s) => {
                    slots[s].2 = k;
                    slots[s].3 = slots[s].3.max(r.elements());
                }
                None => {
                    pos.insert(r.buffer.clone(), slots.len());
                    slots.push((r.buffer.clone(), k, k, r.elements()));
                }
            }
        }
    }
    let mut taken: Vec<(usize, usize, u64, u64)> = Vec::new();
    let mut address: BTreeMap<String, u64> = BTreeMap::new();
    for (buf, first, last, size) in &slots {
        let mut busy: Vec<(u64, u64)> = taken
            .iter()
            .filter(|(f, l, _, _)| f <= last && first <= l)
            .map(|&(_, _, a, s)| (a, a + s))
            .collect();
        busy.sort_unstable();
        let mut at = 0u64;
        for (a, e) in busy {
            if at + size <= a {
                break;
            }
            at = at.max(e);
        }
        if at + size > m.capacity {
            warnings.push(format!("no room for `{buf}` ({size} elements) in `{unit}` (capacity {})", m.capacity));
            continue;
        }
        taken.push((*first, *last, at, *size));
        address.insert(buf.clone(), at);
        placed.push((buf.clone(), at));
    }
    for st in &mut block.statements {
        let Statement::Block(c) = st else { continue };
        for r in c.refinements.iter_mut().filter(|r| r.location.is_none()) {
            if let Some(&a) = address.get(&r.buffer) {
                r.location = Some(Location {
                    unit: unit.to_string(),
                    bank: Affine::zero(),
                    address: a,
                });
            }
        }
    }
    ScheduleOutcome {
        block,
        order,
        placed,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hwconfig::load_config;
    use crate::text::parse_program;

    #[test]
    fn consumer_moves_next_to_producer() {
        let b = parse_program(
            "block [] ( in A[0] i32(4):(1)  temp T[0] i32(4):(1)  out R[0]:assign i32(4):(1)  out S[0]:assign i32(4):(1) ) {
                block [x:4] ( in A[x] i32(1):(1)  out T[x]:assign i32(1):(1) ) { $a = load(A)  T = store($a) }
                block [x:4] ( in A[x] i32(1):(1)  out S[x]:assign i32(1):(1) ) { $a = load(A)  S = store($a) }
                block [x:4] ( in T[x] i32(1):(1)  out R[x]:assign i32(1):(1) ) { $t = load(T)  R = store($t) }
            }",
        )
        .unwrap()
        .root;
        assert_eq!(schedule_order(&b), vec![0, 2, 1]);
    }

    #[test]
    fn first_fit_addresses() {
        let p = parse_program(include_str!("../../fixtures/fig6b.stripe")).unwrap();
        let hw = load_config("mem SRAM cap=512 line=8").unwrap().hardware;
        let out = schedule(&p.root, &hw, None);
        assert_eq!(out.placed, vec![("I".to_string(), 0), ("O".to_string(), 240)]);
        assert_eq!(out.warnings.len(), 1);
        let again = schedule(&out.block, &hw, None);
        assert_eq!(again.block, out.block);
    }
}
