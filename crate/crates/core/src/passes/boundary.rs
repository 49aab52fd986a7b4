use std::collections::BTreeMap;

use super::PassError;
use crate::ir::{Affine, Block, Constraint, IndexKind, Statement};

/// Inclusive sub-range per ranged index.
type Bounds = BTreeMap<String, (i64, i64)>;

fn min_over(e: &Affine, box_: &Bounds) -> i64 {
    e.bounds_with(|n| box_.get(n).copied()).map_or(i64::MIN, |(lo, _)| lo)
}

/// Shrinks the box until every constraint holds on all of it. A violated
/// constraint is fixed by tightening its index with the largest current
/// range (first declared on ties).
fn interior(b: &Block) -> Option<Bounds> {
    let mut box_ = b.index_box();
    let order: Vec<&str> = b.ranged().map(|(n, _)| n).collect();
    for _ in 0..=b.constraints.len() * order.len().max(1) {
        let mut changed = false;
        for c in &b.constraints {
            let e = &c.expr;
            if min_over(e, &box_) >= 0 {
                continue;
            }
            let pick = order
                .iter()
                .filter(|n| e.coeff(n) != 0)
                .max_by_key(|n| {
                    let (lo, hi) = box_[**n];
                    (hi - lo, std::cmp::Reverse(order.iter().position(|m| m == *n)))
                })
                .copied()?;
            let a = e.coeff(pick);
            let mut rest = e.clone();
            rest.add_term(pick, -a);
            let m = min_over(&rest, &box_);
            let (lo, hi) = box_[pick];
            // need a * v + m >= 0
            let nb = if a > 0 { (lo.max((-m).div_euclid(a) + i64::from((-m).rem_euclid(a) != 0)), hi) } else { (lo, hi.min(m.div_euclid(-a))) };
            if nb.0 > nb.1 {
                return None;
            }
            box_.insert(pick.to_string(), nb);
            changed = true;
        }
        if !changed {
            return Some(box_);
        }
    }
    b.constraints.iter().all(|c| min_over(&c.expr, &box_) >= 0).then_some(box_)
}

/// `b` restricted to `sub`: each index keeps its name and iterates from 0,
/// with uses rewritten to `name + start`.
fn restrict(b: &Block, sub: &Bounds, keep_constraints: bool) -> Block {
    let shift: BTreeMap<String, Affine> = sub
        .iter()
        .map(|(n, (lo, _))| (n.clone(), Affine::var(n) + *lo))
        .collect();
    let mut out = b.clone();
    for i in &mut out.indexes {
        if let (IndexKind::Range(r), Some((lo, hi))) = (&mut i.kind, sub.get(&i.name)) {
            *r = (hi - lo + 1) as u64;
        }
    }
    out.constraints = if keep_constraints {
        b.constraints.iter().map(|c| Constraint::new(c.expr.substitute(&shift))).collect()
    } else {
        Vec::new()
    };
    for r in &mut out.refinements {
        for d in &mut r.dims {
            d.offset = d.offset.substitute(&shift);
        }
        if let Some(l) = &mut r.location {
            l.bank = l.bank.substitute(&shift);
        }
    }
    for st in &mut out.statements {
        if let Statement::Block(c) = st {
            for i in &mut c.indexes {
                if let IndexKind::Alias(e) = &mut i.kind {
                    *e = e.substitute(&shift);
                }
            }
        }
    }
    out
}

/// Replaces `b` by a constraint-free interior block followed by boundary
/// blocks that keep the constraints. Together they cover exactly the points
/// of `b`, each once. A block without constraints comes back alone.
pub fn separate_boundary(b: &Block) -> Result<Vec<Block>, PassError> {
    if b.constraints.is_empty() {
        return Ok(vec![b.clone()]);
    }
    let full = b.index_box();
    let inner = interior(b).ok_or(PassError::NoInteriorRegion)?;
    let mut out = vec![restrict(b, &inner, false)];
    // Slabs: along each index in turn, the parts below and above the
    // interior, with earlier indexes already clipped to the interior.
    let mut cur = full.clone();
    for (name, _) in b.ranged() {
        let (lo, hi) = inner[name];
        let (flo, fhi) = full[name];
        for part in [(flo, lo - 1), (hi + 1, fhi)] {
            if part.0 > part.1 {
                continue;
            }
            let mut slab = cur.clone();
            slab.insert(name.to_string(), part);
            out.push(restrict(b, &slab, true));
        }
        cur.insert(name.to_string(), (lo, hi));
    }
    Ok(out)
}
