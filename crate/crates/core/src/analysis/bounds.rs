//! Interval bounds of affine expressions tightened by block constraints, and
//! the coordinates actually touched through a refinement chain.

use std::collections::BTreeMap;

use crate::ir::{Affine, Block, IndexKind, Statement, UnboundIndex};

/// Inclusive bounds of `e` over the box given by `range`, restricted to the
/// points where every constraint (`c >= 0`) holds.
///
/// Each constraint `L + k >= 0` gives `e >= min(e - L) - k` and
/// `e <= max(e + L) + k`; the result is the tightest of these and the plain
/// box bounds. An empty result (`lo > hi`) means no point satisfies the
/// constraints.
pub fn tightened_bounds(
    e: &Affine,
    constraints: &[Affine],
    range: impl Fn(&str) -> Option<(i64, i64)>,
) -> Result<(i64, i64), UnboundIndex> {
    let (mut lo, mut hi) = e.bounds_with(&range)?;
    for c in constraints {
        if !c.names().any(|n| e.uses(n)) {
            continue;
        }
        let k = c.get_constant();
        let l = c.linear();
        let (a, _) = (e.clone() - l.clone()).bounds_with(&range)?;
        let (_, b) = (e.clone() + l).bounds_with(&range)?;
        lo = lo.max(a - k);
        hi = hi.min(b + k);
    }
    let linear: Vec<Affine> = constraints.iter().filter(|c| !c.is_constant()).cloned().collect();
    if !linear.is_empty() {
        hi = hi.min(combined_upper(e, &linear, &range)?);
        lo = lo.max(-combined_upper(&(-e.clone()), &linear, &range)?);
    }
    Ok((lo, hi))
}

/// Upper bound of `e` from nonnegative combinations of constraints:
/// `q*e <= max(q*e + sum p_c*L_c) + sum p_c*k_c` for any `p_c >= 0`. Each
/// step scales one constraint to cancel one term, kept only if it helps.
fn combined_upper(
    e: &Affine,
    constraints: &[Affine],
    range: &impl Fn(&str) -> Option<(i64, i64)>,
) -> Result<i64, UnboundIndex> {
    let bound = |f: &Affine, q: i64| -> Result<i64, UnboundIndex> {
        let (_, hi) = f.bounds_with(range)?;
        Ok(hi.div_euclid(q))
    };
    let (mut f, mut q) = (e.clone(), 1i64);
    let mut best = bound(&f, q)?;
    for _ in 0..3 {
        let mut improved = false;
        for c in constraints {
            for (n, a) in c.terms() {
                let b = f.coeff(n);
                if b == 0 || (a > 0) == (b > 0) {
                    continue;
                }
                let (sa, sb) = (a.abs(), b.abs());
                let g = gcd(sa, sb);
                let (mf, mc) = (sa / g, sb / g);
                let (Some(nq), Some(_)) = (q.checked_mul(mf), f.get_constant().checked_mul(mf)) else { continue };
                let cand = f.clone() * mf + c.clone() * mc;
                let v = bound(&cand, nq)?;
                if v < best {
                    best = v;
                    f = cand;
                    q = nq;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(best)
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Hull of every coordinate touched by leaf accesses (loads, stores and
/// specials, at any depth) made through the refinement of `buffer` in `b`,
/// in the frame of the window that refinement is carved from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafBounds {
    pub dims: Vec<(i64, i64)>,
    pub accesses: usize,
}

struct Chain {
    prefix: Vec<Affine>,
    constraints: Vec<Affine>,
    ranges: BTreeMap<String, (i64, i64)>,
}

fn tag(depth: usize, name: &str) -> String {
    format!("{depth}#{name}")
}

/// Returns `None` when nothing is accessed through the refinement.
/// `alias_bounds` gives the range of each alias index of `b`.
pub fn leaf_access_bounds(
    b: &Block,
    buffer: &str,
    alias_bounds: &dyn Fn(&str) -> Option<(i64, i64)>,
) -> Result<Option<LeafBounds>, UnboundIndex> {
    let Some(r) = b.refinement(buffer) else { return Ok(None) };
    let mut ranges = BTreeMap::new();
    let mut names = BTreeMap::new();
    for i in &b.indexes {
        let t = tag(0, &i.name);
        let bound = match &i.kind {
            IndexKind::Range(n) => (0, *n as i64 - 1),
            IndexKind::Alias(_) => alias_bounds(&i.name).ok_or_else(|| UnboundIndex(i.name.clone()))?,
        };
        ranges.insert(t.clone(), bound);
        names.insert(i.name.clone(), Affine::var(t));
    }
    let chain = Chain {
        prefix: r.dims.iter().map(|d| d.offset.substitute(&names)).collect(),
        constraints: b.constraints.iter().map(|c| c.expr.substitute(&names)).collect(),
        ranges,
    };
    let mut out: Option<LeafBounds> = None;
    visit(b, buffer, &chain, &names, 0, &mut out)?;
    Ok(out)
}

fn record(chain: &Chain, extents: &[i64], out: &mut Option<LeafBounds>) -> Result<(), UnboundIndex> {
    let mut dims = Vec::with_capacity(chain.prefix.len());
    for (e, ext) in chain.prefix.iter().zip(extents) {
        let (lo, hi) = tightened_bounds(e, &chain.constraints, |n| chain.ranges.get(n).copied())?;
        dims.push((lo, hi + ext));
    }
    if dims.iter().any(|(lo, hi)| lo > hi) {
        return Ok(());
    }
    match out {
        None => *out = Some(LeafBounds { dims, accesses: 1 }),
        Some(lb) => {
            for (acc, (lo, hi)) in lb.dims.iter_mut().zip(dims) {
                acc.0 = acc.0.min(lo);
                acc.1 = acc.1.max(hi);
            }
            lb.accesses += 1;
        }
    }
    Ok(())
}

fn visit(
    b: &Block,
    buffer: &str,
    chain: &Chain,
    renames: &BTreeMap<String, Affine>,
    depth: usize,
    out: &mut Option<LeafBounds>,
) -> Result<(), UnboundIndex> {
    let r = b.refinement(buffer).expect("caller checked");
    let rank = r.dims.len();
    for s in &b.statements {
        match s {
            Statement::Load { buffer: n, .. } | Statement::Store { buffer: n, .. } if n == buffer => {
                record(chain, &vec![0; rank], out)?;
            }
            Statement::Special { args, .. } if args.iter().any(|a| a == buffer) => {
                let ext: Vec<i64> = r.dims.iter().map(|d| d.size as i64 - 1).collect();
                record(chain, &ext, out)?;
            }
            Statement::Block(c) => {
                let Some(cr) = c.refinement(buffer) else { continue };
                if cr.dir == crate::ir::Direction::Temp {
                    continue;
                }
                let d = depth + 1;
                let mut ranges = chain.ranges.clone();
                let mut names = BTreeMap::new();
                for i in &c.indexes {
                    match &i.kind {
                        IndexKind::Range(n) => {
                            ranges.insert(tag(d, &i.name), (0, *n as i64 - 1));
                            names.insert(i.name.clone(), Affine::var(tag(d, &i.name)));
                        }
                        IndexKind::Alias(e) => {
                            names.insert(i.name.clone(), e.substitute(renames));
                        }
                    }
                }
                let mut constraints = chain.constraints.clone();
                constraints.extend(c.constraints.iter().map(|k| k.expr.substitute(&names)));
                let prefix = chain
                    .prefix
                    .iter()
                    .zip(&cr.dims)
                    .map(|(p, dim)| p.clone() + dim.offset.substitute(&names))
                    .collect();
                let next = Chain {
                    prefix,
                    constraints,
                    ranges,
                };
                visit(c, buffer, &next, &names, d, out)?;
            }
            _ => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_program;

    #[test]
    fn scaled_constraints_combine() {
        // 12X + 3I + 4x + i with x + 3X <= 7 and i + 3I <= 3, X, I in [0, 2], x, i in [0, 2]
        let v = |n: &str, k: i64| Affine::term(n, k);
        let e = v("X", 12) + v("I", 3) + v("x", 4) + v("i", 1);
        let cs = [Affine::constant(7) - v("x", 1) - v("X", 3), Affine::constant(3) - v("i", 1) - v("I", 3)];
        let (lo, hi) = tightened_bounds(&e, &cs, |_| Some((0, 2))).unwrap();
        assert_eq!((lo, hi), (0, 31));
    }

    #[test]
    fn halo_constraints_tighten_input_rows() {
        let x = Affine::var("x") + Affine::var("i") - 1;
        let cs = [x.clone(), Affine::constant(12) - Affine::var("x") - Affine::var("i")];
        let range = |n: &str| match n {
            "x" => Some((0, 11)),
            "i" => Some((0, 2)),
            _ => None,
        };
        assert_eq!(x.bounds_with(range).unwrap(), (-1, 12));
        assert_eq!(tightened_bounds(&x, &cs, range).unwrap(), (0, 11));
    }

    #[test]
    fn fig6b_leaf_accesses_stay_inside() {
        let p = parse_program(include_str!("../../fixtures/fig6b.stripe")).unwrap();
        let mid = p.root.children().next().unwrap();
        let lb = leaf_access_bounds(mid, "I", &|_| None).unwrap().unwrap();
        assert_eq!(lb.dims, vec![(0, 11), (0, 15), (0, 7)]);
        let lb = leaf_access_bounds(mid, "O", &|_| None).unwrap().unwrap();
        assert_eq!(lb.dims, vec![(0, 11), (0, 15), (0, 15)]);
    }
}
