use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::analysis::{access_sets, build_dependency_dag, AccessSets};
use crate::ir::{Affine, Block, Dim, Direction, Index, IndexKind, Refinement, Statement};

/// Why two blocks were not fused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Refusal {
    NotBlocks,
    NoSharedIndexes,
    Unsupported(String),
    InterveningDependency { statement: usize },
    /// The consumer reads, at some shared point, data the producer writes
    /// at another point.
    FootprintNotCovered { buffer: String },
    /// The second block writes data the first block touches at another
    /// shared point.
    CrossIterationDependency { buffer: String },
}

impl fmt::Display for Refusal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Refusal::NotBlocks => f.write_str("NotBlocks"),
            Refusal::NoSharedIndexes => f.write_str("NoSharedIndexes"),
            Refusal::Unsupported(s) => write!(f, "Unsupported({s})"),
            Refusal::InterveningDependency { statement } => write!(f, "InterveningDependency({statement})"),
            Refusal::FootprintNotCovered { buffer } => write!(f, "FootprintNotCovered({buffer})"),
            Refusal::CrossIterationDependency { buffer } => write!(f, "CrossIterationDependency({buffer})"),
        }
    }
}

/// Merges child blocks `i < j` of `parent` into one block over their shared
/// outer indexes, running what remains of each in serial per shared point.
///
/// Indexes are paired by equal range in declaration order, ignoring
/// indexes of range 1, until the first mismatch.
pub fn fuse(parent: &Block, i: usize, j: usize) -> Result<Block, Refusal> {
    if i >= j || j >= parent.statements.len() {
        return Err(Refusal::NotBlocks);
    }
    let (Some(a), Some(b)) = (parent.statements[i].as_block(), parent.statements[j].as_block()) else {
        return Err(Refusal::NotBlocks);
    };
    let dag = build_dependency_dag(parent);
    if let Some(k) = (i + 1..j).find(|&k| dag.has_edge(k, j)) {
        return Err(Refusal::InterveningDependency { statement: k });
    }
    if a.indexes.iter().chain(&b.indexes).any(Index::is_alias) {
        return Err(Refusal::Unsupported("alias indexes".into()));
    }
    let pairs: Vec<(String, String, u64)> = a
        .ranged()
        .filter(|(_, r)| *r > 1)
        .zip(b.ranged().filter(|(_, r)| *r > 1))
        .take_while(|((_, ra), (_, rb))| ra == rb)
        .map(|((na, r), (nb, _))| (na.to_string(), nb.to_string(), r))
        .collect();
    if pairs.is_empty() {
        return Err(Refusal::NoSharedIndexes);
    }
    check_legal(a, b, &pairs)?;

    let a_shared: BTreeMap<&str, &str> = pairs.iter().map(|(x, _, _)| (x.as_str(), x.as_str())).collect();
    let b_shared: BTreeMap<&str, &str> = pairs.iter().map(|(x, y, _)| (y.as_str(), x.as_str())).collect();
    let mut ra = residual(a, &a_shared);
    let mut rb = residual(b, &b_shared);

    let mut buffers: Vec<&str> = Vec::new();
    for r in a.refinements.iter().chain(&b.refinements) {
        if r.dir != Direction::Temp && !buffers.contains(&r.buffer.as_str()) {
            buffers.push(&r.buffer);
        }
    }
    let mut refinements = Vec::new();
    for name in buffers {
        let ar = a.refinement(name).filter(|r| r.dir != Direction::Temp);
        let br = b.refinement(name).filter(|r| r.dir != Direction::Temp);
        let mut parts = Vec::new();
        if let Some(r) = ar {
            parts.push(split(r, a, &a_shared));
        }
        if let Some(r) = br {
            parts.push(split(r, b, &b_shared));
        }
        let first = ar.or(br).expect("buffer came from a or b");
        let rank = first.dims.len();
        let mut dims = Vec::with_capacity(rank);
        // Shift of the residual offsets for hull dims; `None` keeps the
        // whole parent window and the original offsets.
        let mut shifts: Vec<Option<i64>> = Vec::with_capacity(rank);
        for d in 0..rank {
            let shared = &parts[0][d].0;
            if parts.iter().all(|p| &p[d].0 == shared) {
                let lo = parts.iter().map(|p| p[d].1).min().unwrap();
                let hi = parts.iter().map(|p| p[d].2).max().unwrap();
                dims.push(Dim::new(shared.clone() + lo, (hi - lo + 1) as u64, first.dims[d].stride));
                shifts.push(Some(lo));
            } else {
                let size = parent.refinement(name).map_or(first.dims[d].size, |p| p.dims[d].size);
                dims.push(Dim::new(Affine::zero(), size, first.dims[d].stride));
                shifts.push(None);
            }
        }
        let reads = ar.iter().chain(br.iter()).any(|r| r.dir.reads());
        let writer = ar.filter(|r| r.dir.writes()).or(br.filter(|r| r.dir.writes()));
        let dir = match (reads, writer.is_some()) {
            (true, true) => Direction::InOut,
            (false, true) => Direction::Out,
            _ => Direction::In,
        };
        for (res, orig, shared) in [(&mut ra, ar, &a_shared), (&mut rb, br, &b_shared)] {
            let Some(orig) = orig else { continue };
            let rr = res.refinement_mut(name).expect("residual keeps refinements");
            for ((dim, od), shift) in rr.dims.iter_mut().zip(&orig.dims).zip(&shifts) {
                if let Some(lo) = shift {
                    let own = Affine::from_terms(
                        od.offset.terms().filter(|(n, _)| !shared.contains_key(n)),
                        od.offset.get_constant(),
                    );
                    dim.offset = own - *lo;
                }
            }
        }
        refinements.push(Refinement {
            dir,
            buffer: name.to_string(),
            agg: writer.and_then(|r| r.agg),
            dtype: first.dtype,
            dims,
            location: None,
        });
    }

    let fused = Block {
        indexes: pairs.iter().map(|(n, _, r)| Index::range(n, *r)).collect(),
        constraints: Vec::new(),
        refinements,
        statements: vec![Statement::Block(Box::new(ra)), Statement::Block(Box::new(rb))],
        tags: Default::default(),
        count_hint: None,
    };
    let mut out = parent.clone();
    out.statements.remove(j);
    out.statements[i] = Statement::Block(Box::new(fused));
    Ok(out)
}

/// Per dimension: the part of the offset over shared indexes (renamed to
/// the fused names) and the inclusive coordinate range of the rest.
fn split(r: &Refinement, b: &Block, shared: &BTreeMap<&str, &str>) -> Vec<(Affine, i64, i64)> {
    let ranges = b.index_box();
    r.dims
        .iter()
        .map(|d| {
            let mut s = Affine::zero();
            let mut own = Affine::constant(d.offset.get_constant());
            for (n, c) in d.offset.terms() {
                match shared.get(n) {
                    Some(f) => s.add_term(*f, c),
                    None => own.add_term(n, c),
                }
            }
            let (lo, hi) = own.bounds_with(|n| ranges.get(n).copied()).expect("ranged indexes only");
            (s, lo, hi + d.size as i64 - 1)
        })
        .collect()
}

/// `b` with its shared indexes turned into aliases of the fused block's.
fn residual(b: &Block, shared: &BTreeMap<&str, &str>) -> Block {
    let mut out = b.clone();
    out.indexes = b
        .indexes
        .iter()
        .filter(|i| !shared.contains_key(i.name.as_str()))
        .cloned()
        .collect();
    for i in &b.indexes {
        if let Some(f) = shared.get(i.name.as_str()) {
            out.indexes.push(Index::alias(&i.name, Affine::var(*f)));
        }
    }
    out.count_hint = None;
    out
}

fn pinned(b: &Block, values: &BTreeMap<&str, i64>) -> Block {
    let mut out = b.clone();
    for i in &mut out.indexes {
        if let Some(v) = values.get(i.name.as_str()) {
            i.kind = IndexKind::Alias(Affine::constant(*v));
        }
    }
    out
}

type Touch = BTreeMap<(String, Vec<i64>), BTreeSet<usize>>;

fn record(sets: &AccessSets, p: usize, reads: &mut Touch, writes: &mut Touch) {
    for (buf, acc) in sets {
        for e in &acc.reads {
            reads.entry((buf.clone(), e.clone())).or_default().insert(p);
        }
        for e in &acc.writes {
            writes.entry((buf.clone(), e.clone())).or_default().insert(p);
        }
    }
}

fn check_legal(a: &Block, b: &Block, pairs: &[(String, String, u64)]) -> Result<(), Refusal> {
    let env = BTreeMap::new();
    let mut points: Vec<Vec<i64>> = vec![Vec::new()];
    for (_, _, r) in pairs {
        points = points
            .into_iter()
            .flat_map(|p| {
                (0..*r as i64).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    let (mut a_reads, mut a_writes) = (Touch::new(), Touch::new());
    let mut b_sets = Vec::with_capacity(points.len());
    for (k, p) in points.iter().enumerate() {
        let av: BTreeMap<&str, i64> = pairs.iter().zip(p).map(|((x, _, _), v)| (x.as_str(), *v)).collect();
        let bv: BTreeMap<&str, i64> = pairs.iter().zip(p).map(|((_, y, _), v)| (y.as_str(), *v)).collect();
        let sa = access_sets(&pinned(a, &av), &env).map_err(|e| Refusal::Unsupported(e.to_string()))?;
        record(&sa, k, &mut a_reads, &mut a_writes);
        b_sets.push(access_sets(&pinned(b, &bv), &env).map_err(|e| Refusal::Unsupported(e.to_string()))?);
    }
    for (k, sb) in b_sets.iter().enumerate() {
        for (buf, acc) in sb {
            for e in &acc.reads {
                if let Some(ws) = a_writes.get(&(buf.clone(), e.clone())) {
                    if ws.len() != 1 || !ws.contains(&k) {
                        return Err(Refusal::FootprintNotCovered { buffer: buf.clone() });
                    }
                }
            }
            for e in &acc.writes {
                let key = (buf.clone(), e.clone());
                let others = |t: &Touch| t.get(&key).is_some_and(|s| s.iter().any(|&q| q != k));
                if others(&a_reads) || others(&a_writes) {
                    return Err(Refusal::CrossIterationDependency { buffer: buf.clone() });
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::execute;
    use crate::ir::{DType, Program};
    use crate::kernels::{conv_relu, random_inputs};
    use crate::passes::{localize, tile_rewrite, TileShape};
    use crate::text::parse_program;
    use crate::validate::validate_static;

    fn tiled_conv_relu() -> Program {
        let mut p = conv_relu(12, 16, 8, 16, DType::I32);
        let ts = TileShape::new([("x", 3), ("y", 4)]);
        for st in &mut p.root.statements {
            let b = st.as_block_mut().unwrap();
            *b = tile_rewrite(b, &ts).unwrap();
        }
        p
    }

    #[test]
    fn conv_and_relu_fuse() {
        let p = tiled_conv_relu();
        let root = fuse(&p.root, 0, 1).unwrap();
        assert_eq!(root.statements.len(), 1);
        let f = root.children().next().unwrap();
        assert_eq!(f.ranged().filter(|(_, r)| *r > 1).collect::<Vec<_>>(), vec![("x", 4), ("y", 4)]);
        let q = Program { root, buffers: p.buffers.clone() };
        assert!(validate_static(&q).is_empty());
        let s = random_inputs(&p, 7, -20, 20);
        assert_eq!(execute(&p, s.clone()).unwrap().get("R"), execute(&q, s).unwrap().get("R"));

        let l = localize(&q.root);
        let t = l.children().next().unwrap().refinement("T").unwrap();
        assert_eq!((t.dir, t.elements()), (Direction::Temp, 3 * 4 * 16));
        let ql = Program { root: l, buffers: q.buffers.clone() };
        assert!(validate_static(&ql).is_empty());
        let s = random_inputs(&p, 8, -20, 20);
        assert_eq!(execute(&p, s.clone()).unwrap().get("R"), execute(&ql, s).unwrap().get("R"));
    }

    #[test]
    fn halo_consumer_is_refused() {
        let p = parse_program(
            "block [] ( in A[0] i32(9):(1)  temp T[0] i32(9):(1)  out R[0]:assign i32(8):(1) ) {
                block [x:8] ( in A[x] i32(1):(1)  out T[x]:assign i32(1):(1) ) { $a = load(A)  T = store($a) }
                block [x:8] ( in T[x] i32(2):(1)  out R[x]:assign i32(1):(1) ) {
                    block [] ( in T[1] i32(1):(1)  out R[0]:assign i32(1):(1) ) { $t = load(T)  R = store($t) }
                }
            }",
        )
        .unwrap();
        assert!(matches!(fuse(&p.root, 0, 1), Err(Refusal::FootprintNotCovered { .. })));
    }

    #[test]
    fn independent_blocks_fuse() {
        let p = parse_program(
            "block [] ( in A[0] i32(6):(1)  out B[0]:assign i32(6):(1)  out C[0]:assign i32(6):(1) ) {
                block [x:6] ( in A[x] i32(1):(1)  out B[x]:assign i32(1):(1) ) { $a = load(A)  B = store($a) }
                block [x:6] ( in A[x] i32(1):(1)  out C[x]:assign i32(1):(1) ) { $a = load(A)  $b = add($a, $a)  C = store($b) }
            }",
        )
        .unwrap();
        let root = fuse(&p.root, 0, 1).unwrap();
        let q = Program { root, buffers: p.buffers.clone() };
        assert!(validate_static(&q).is_empty());
        let s = random_inputs(&p, 1, -9, 9);
        assert_eq!(execute(&p, s.clone()).unwrap(), execute(&q, s).unwrap());
    }

    #[test]
    fn statements_are_refused() {
        let p = parse_program("block [] ( out A[0]:assign i32(1):(1) ) { $c = constant(1)  A = store($c) }").unwrap();
        assert!(matches!(fuse(&p.root, 0, 1), Err(Refusal::NotBlocks)));
    }
}
