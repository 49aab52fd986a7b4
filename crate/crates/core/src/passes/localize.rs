use std::collections::{BTreeMap, BTreeSet};

use crate::analysis::access_sets;
use crate::interp::enumerate_points;
use crate::ir::{dense_strides, Affine, Block, Dim, Direction, IndexKind, Refinement, Statement};

/// Moves every block-local buffer of `b` that only one child block uses into
/// that child, shrunk to the child's window, when no element is shared
/// between the child's iterations. Applied recursively.
pub fn localize(b: &Block) -> Block {
    let mut out = b.clone();
    let temps: Vec<String> = out
        .refinements
        .iter()
        .filter(|r| r.dir == Direction::Temp)
        .map(|r| r.buffer.clone())
        .collect();
    for name in temps {
        let users: Vec<usize> = (0..out.statements.len())
            .filter(|&k| out.statements[k].mentions_buffer(&name))
            .collect();
        let [k] = users[..] else { continue };
        let Some(child) = out.statements[k].as_block() else { continue };
        let Some(cr) = child.refinement(&name) else { continue };
        if cr.dir == Direction::Temp || !private_per_iteration(child, &name) {
            continue;
        }
        let decl = out.refinement(&name).expect("listed above").clone();
        let sizes = cr.sizes();
        let strides = dense_strides(&sizes);
        let Some(child) = out.statements[k].as_block_mut() else { continue };
        let local = Refinement {
            dir: Direction::Temp,
            buffer: name.clone(),
            agg: None,
            dtype: decl.dtype,
            dims: sizes.iter().zip(&strides).map(|(&s, &st)| Dim::new(Affine::zero(), s, st)).collect(),
            location: None,
        };
        *child.refinement_mut(&name).expect("checked") = local;
        for st in &mut child.statements {
            if let Statement::Block(c) = st {
                restride(c, &name, &strides);
            }
        }
        out.refinements.retain(|r| r.buffer != name);
    }
    for st in &mut out.statements {
        if let Statement::Block(c) = st {
            **c = localize(c);
        }
    }
    out
}

fn restride(b: &mut Block, name: &str, strides: &[i64]) {
    let Some(r) = b.refinement_mut(name) else { return };
    if r.dir == Direction::Temp {
        return;
    }
    for (d, s) in r.dims.iter_mut().zip(strides) {
        d.stride = *s;
    }
    for st in &mut b.statements {
        if let Statement::Block(c) = st {
            restride(c, name, strides);
        }
    }
}

/// Every iteration of `c` reads only elements of `name` it wrote itself, and
/// no element is touched by two iterations.
fn private_per_iteration(c: &Block, name: &str) -> bool {
    if c.indexes.iter().any(|i| i.is_alias()) {
        return false;
    }
    let Ok(points) = enumerate_points(c, &BTreeMap::new()) else { return false };
    let mut owner: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
    for (k, p) in points.iter().enumerate() {
        let mut pin = c.clone();
        for i in &mut pin.indexes {
            if let Some(v) = p.get(&i.name) {
                i.kind = IndexKind::Alias(Affine::constant(*v));
            }
        }
        let Ok(sets) = access_sets(&pin, &BTreeMap::new()) else { return false };
        let Some(acc) = sets.get(name) else { continue };
        if !acc.reads.is_subset(&acc.writes) {
            return false;
        }
        let touched: BTreeSet<&Vec<i64>> = acc.reads.iter().chain(&acc.writes).collect();
        for e in touched {
            if *owner.entry(e.clone()).or_insert(k) != k {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_program;

    #[test]
    fn moves_pointwise_intermediate_inside() {
        let b = parse_program(
            "block [] ( in A[0] i32(8):(1)  out R[0]:assign i32(8):(1)  temp T[0] i32(8):(1) ) {
                block [x:8] ( in A[x] i32(1):(1)  out R[x]:assign i32(1):(1)  inout T[x]:assign i32(1):(1) ) {
                    block [] ( in A[0] i32(1):(1)  out T[0]:assign i32(1):(1) ) { $a = load(A)  T = store($a) }
                    block [] ( in T[0] i32(1):(1)  out R[0]:assign i32(1):(1) ) { $t = load(T)  R = store($t) }
                }
            }",
        )
        .unwrap()
        .root;
        let out = localize(&b);
        assert!(out.refinement("T").is_none());
        let c = out.children().next().unwrap();
        let t = c.refinement("T").unwrap();
        assert_eq!((t.dir, t.sizes()), (Direction::Temp, vec![1]));
        assert_eq!(localize(&out), out);
    }

    #[test]
    fn shared_buffer_stays() {
        let b = parse_program(
            "block [] ( in A[0] i32(8):(1)  out R[0]:assign i32(8):(1)  temp T[0] i32(8):(1) ) {
                block [x:8] ( in A[x] i32(1):(1)  out T[x]:assign i32(1):(1) ) { $a = load(A)  T = store($a) }
                block [x:8] ( in T[x] i32(1):(1)  out R[x]:assign i32(1):(1) ) { $t = load(T)  R = store($t) }
            }",
        )
        .unwrap()
        .root;
        assert_eq!(localize(&b), b);
    }
}
