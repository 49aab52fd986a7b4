//! Reference interpreter.
//!
//! Iteration points of a block run serially in lexicographic order (or a
//! chosen permutation). Each point gets fresh scalar temps and fresh `temp`
//! buffers. A `store` combines the incoming value with the current element
//! through the refinement's aggregation, wrapping at the buffer dtype.

mod exec;
mod io;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::ir::{AggOp, Block, DType, Direction, IndexKind, Program, UnboundIndex};

pub use io::{read_store, write_store, StoreIoError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("out-of-bounds access to `{buffer}`: element {address} of {len}")]
    OutOfBoundsAccess { buffer: String, address: i64, len: u64 },
    #[error("buffer `{0}` is missing from the store")]
    MissingBuffer(String),
    #[error("buffer `{buffer}` has {found} elements, expected {expected}")]
    BufferSizeMismatch { buffer: String, expected: u64, found: u64 },
    #[error("unbound index `{0}`")]
    UnboundIndex(String),
    #[error("buffer `{0}` is not declared by the block")]
    UnknownBuffer(String),
    #[error("refinement of `{0}` has a different rank than its parent")]
    RankMismatch(String),
    #[error("temp `${0}` used before definition")]
    UndefinedTemp(String),
    #[error("{0}")]
    InvalidSpecial(String),
}

impl From<UnboundIndex> for ExecError {
    fn from(e: UnboundIndex) -> Self {
        ExecError::UnboundIndex(e.0)
    }
}

/// A dense integer tensor. Values are kept wrapped to `dtype`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor {
    pub dtype: DType,
    pub data: Vec<i32>,
}

impl Tensor {
    pub fn zeros(dtype: DType, len: usize) -> Self {
        Tensor {
            dtype,
            data: vec![0; len],
        }
    }

    pub fn filled(dtype: DType, len: usize, value: i32) -> Self {
        Tensor {
            dtype,
            data: vec![dtype.wrap(value as i64); len],
        }
    }

    /// Wraps every value to `dtype`.
    pub fn from_values(dtype: DType, values: impl IntoIterator<Item = i64>) -> Self {
        Tensor {
            dtype,
            data: values.into_iter().map(|v| dtype.wrap(v)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BufferStore {
    tensors: BTreeMap<String, Tensor>,
}

impl BufferStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Zero-filled tensors for every root buffer of `p`.
    pub fn zeros_for(p: &Program) -> Self {
        let mut s = BufferStore::new();
        for (name, decl) in &p.buffers {
            s.insert(name.clone(), Tensor::zeros(decl.dtype, decl.elements as usize));
        }
        s
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn take(&mut self, name: &str) -> Option<Tensor> {
        self.tensors.remove(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> + '_ {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Fills each root output with the identity of the aggregation its
    /// writers use (0 for add, 1 for mul, dtype min for max, dtype max for
    /// min). Outputs written only by `assign` are zeroed.
    pub fn init_outputs(&mut self, p: &Program) {
        for r in p.outputs() {
            let Some(decl) = p.buffers.get(&r.buffer) else { continue };
            let v = output_aggregation(&p.root, &r.buffer)
                .unwrap_or(AggOp::Assign)
                .identity(decl.dtype);
            self.insert(r.buffer.clone(), Tensor::filled(decl.dtype, decl.elements as usize, v));
        }
    }
}

/// The first non-assign aggregation on a refinement of `buffer`, searching
/// from `b` down.
pub fn output_aggregation(b: &Block, buffer: &str) -> Option<AggOp> {
    let mut found = None;
    b.walk(&mut |blk| {
        if found.is_none() {
            found = blk
                .refinements
                .iter()
                .filter(|r| r.buffer == buffer && r.dir != Direction::Temp)
                .find_map(|r| r.agg.filter(|a| *a != AggOp::Assign));
        }
    });
    found
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IterOrder {
    #[default]
    Lexicographic,
    Reversed,
    /// Every block instance runs its points in a permutation drawn from a
    /// generator seeded once per execution.
    Shuffled(u64),
}

pub fn apply_aggregation(op: AggOp, current: i32, incoming: i32, dtype: DType) -> i32 {
    let v = match op {
        AggOp::Assign => incoming as i64,
        AggOp::Add => current as i64 + incoming as i64,
        AggOp::Mul => current as i64 * incoming as i64,
        AggOp::Max => current.max(incoming) as i64,
        AggOp::Min => current.min(incoming) as i64,
    };
    dtype.wrap(v)
}

pub fn execute(p: &Program, store: BufferStore) -> Result<BufferStore, ExecError> {
    execute_ordered(p, store, IterOrder::Lexicographic)
}

pub fn execute_ordered(p: &Program, mut store: BufferStore, order: IterOrder) -> Result<BufferStore, ExecError> {
    let (compiled, names) = exec::compile(p, &store)?;
    let mut engine = exec::Engine::new(&mut store, names, order, false);
    let r = engine.run(&compiled);
    engine.finish(&mut store);
    r.map(|_| store)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConflictKind {
    /// An element written in one iteration and read in another.
    WriteRead,
    /// An `assign` element written by more than one iteration.
    Assign,
}

impl fmt::Display for ConflictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConflictKind::WriteRead => "WriteReadConflict",
            ConflictKind::Assign => "AssignConflict",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Conflict {
    pub kind: ConflictKind,
    /// Statement-index path of the block whose iterations conflict.
    pub block: Vec<usize>,
    pub buffer: String,
    /// Flat element index into the buffer.
    pub element: i64,
    /// Number of distinct iterations that wrote the element.
    pub writers: u32,
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path: Vec<String> = self.block.iter().map(|i| i.to_string()).collect();
        write!(
            f,
            "{} block=[{}] buffer={} element={} writers={}",
            self.kind,
            path.join(","),
            self.buffer,
            self.element,
            self.writers
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConflictReport {
    pub conflicts: Vec<Conflict>,
}

impl ConflictReport {
    pub fn is_empty(&self) -> bool {
        self.conflicts.is_empty()
    }

    pub fn of_kind(&self, kind: ConflictKind) -> impl Iterator<Item = &Conflict> + '_ {
        self.conflicts.iter().filter(move |c| c.kind == kind)
    }
}

/// Runs `p` with access instrumentation and reports every violation of the
/// parallel-block rules observed on these inputs. The store is consumed;
/// outputs are discarded.
pub fn trace_conflicts(p: &Program, mut store: BufferStore) -> Result<ConflictReport, ExecError> {
    let (compiled, names) = exec::compile(p, &store)?;
    let mut engine = exec::Engine::new(&mut store, names, IterOrder::Lexicographic, true);
    engine.run(&compiled)?;
    Ok(engine.report(&compiled.paths))
}

/// One iteration point: every ranged index plus the block's aliases.
pub type IterationPoint = BTreeMap<String, i64>;

/// Points of `b` in lexicographic order over its ranged indexes, skipping
/// those that violate a constraint. Aliases are evaluated in `parent_env`.
pub fn enumerate_points(b: &Block, parent_env: &BTreeMap<String, i64>) -> Result<Vec<IterationPoint>, UnboundIndex> {
    let mut base = IterationPoint::new();
    for i in &b.indexes {
        if let IndexKind::Alias(e) = &i.kind {
            base.insert(i.name.clone(), e.eval(parent_env)?);
        }
    }
    let ranged: Vec<(&str, u64)> = b.ranged().collect();
    let mut out = Vec::new();
    if ranged.iter().any(|&(_, r)| r == 0) {
        return Ok(out);
    }
    let mut cur = vec![0i64; ranged.len()];
    loop {
        let mut pt = base.clone();
        for (&(n, _), v) in ranged.iter().zip(&cur) {
            pt.insert(n.to_string(), *v);
        }
        let mut keep = true;
        for c in &b.constraints {
            if c.expr.eval(&pt)? < 0 {
                keep = false;
                break;
            }
        }
        if keep {
            out.push(pt);
        }
        let mut d = ranged.len();
        loop {
            if d == 0 {
                return Ok(out);
            }
            d -= 1;
            cur[d] += 1;
            if (cur[d] as u64) < ranged[d].1 {
                break;
            }
            cur[d] = 0;
        }
    }
}

/// Number of constraint-satisfying points of `b` under `parent_env`,
/// without materializing them. Indexes no constraint mentions contribute
/// their range as a factor.
pub fn count_points(b: &Block, parent_env: &BTreeMap<String, i64>) -> Result<u64, UnboundIndex> {
    let mut env = parent_env.clone();
    for i in &b.indexes {
        if let IndexKind::Alias(e) = &i.kind {
            let v = e.eval(parent_env)?;
            env.insert(i.name.clone(), v);
        }
    }
    let ranged: Vec<(&str, u64)> = b.ranged().collect();
    if ranged.iter().any(|&(_, r)| r == 0) {
        return Ok(0);
    }
    let used: Vec<(&str, u64)> = ranged
        .iter()
        .copied()
        .filter(|(n, _)| b.constraints.iter().any(|c| c.expr.uses(n)))
        .collect();
    let free: u64 = ranged
        .iter()
        .filter(|(n, _)| !used.iter().any(|(u, _)| u == n))
        .map(|&(_, r)| r)
        .product();
    // each constraint as (constant, coefficient per used index)
    let mut rows = Vec::with_capacity(b.constraints.len());
    for c in &b.constraints {
        let coeffs: Vec<i64> = used.iter().map(|(n, _)| c.expr.coeff(n)).collect();
        let mut rest = c.expr.clone();
        for (n, _) in &used {
            rest.add_term(*n, -c.expr.coeff(n));
        }
        rows.push((rest.eval(&env)?, coeffs));
    }
    let mut cur = vec![0i64; used.len()];
    let mut n = 0u64;
    loop {
        if rows
            .iter()
            .all(|(k, cs)| k + cs.iter().zip(&cur).map(|(a, v)| a * v).sum::<i64>() >= 0)
        {
            n += 1;
        }
        let mut d = used.len();
        loop {
            if d == 0 {
                return Ok(n * free);
            }
            d -= 1;
            cur[d] += 1;
            if (cur[d] as u64) < used[d].1 {
                break;
            }
            cur[d] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_program;

    const FIG6A: &str = include_str!("../../fixtures/fig6a_fixed.stripe");
    const FIG6B: &str = include_str!("../../fixtures/fig6b.stripe");

    fn env(pairs: &[(&str, i64)]) -> BTreeMap<String, i64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    /// The fig6 fixtures with every dtype widened to i32.
    fn i32_variant(src: &str) -> Program {
        parse_program(&src.replace("i8(", "i32(")).unwrap()
    }

    #[test]
    fn aggregation_table() {
        assert_eq!(apply_aggregation(AggOp::Add, 5, 7, DType::I32), 12);
        assert_eq!(apply_aggregation(AggOp::Max, -3, -9, DType::I32), -3);
        assert_eq!(apply_aggregation(AggOp::Assign, 5, 7, DType::I32), 7);
        assert_eq!(apply_aggregation(AggOp::Min, 5, 7, DType::I32), 5);
        assert_eq!(apply_aggregation(AggOp::Mul, 5, 7, DType::I32), 35);
        assert_eq!(apply_aggregation(AggOp::Add, 127, 1, DType::I8), -128);
        assert_eq!(apply_aggregation(AggOp::Mul, 300, 300, DType::I16), (90000i64 as i16) as i32);
        assert_eq!(apply_aggregation(AggOp::Add, i32::MAX, 1, DType::I32), i32::MIN);
    }

    #[test]
    fn full_box_order() {
        let p = parse_program("block [] ( ) { block [x:2, y:2] ( ) { } }").unwrap();
        let pts = enumerate_points(p.root.children().next().unwrap(), &BTreeMap::new()).unwrap();
        let xy: Vec<(i64, i64)> = pts.iter().map(|p| (p["x"], p["y"])).collect();
        assert_eq!(xy, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn fig6a_point_count_matches_brute_force() {
        let p = parse_program(FIG6A).unwrap();
        let inner = p.root.children().next().unwrap();
        let mut expect = 0u64;
        for x in 0..12i64 {
            for y in 0..16i64 {
                for i in 0..3i64 {
                    for j in 0..3i64 {
                        let inside = x + i > 0 && 12 - x - i >= 0 && y + j > 0 && 16 - y - j >= 0;
                        expect += inside as u64 * 8 * 16;
                    }
                }
            }
        }
        assert_eq!(expect, 34 * 46 * 128);
        assert_eq!(count_points(inner, &BTreeMap::new()).unwrap(), expect);
        assert_eq!(enumerate_points(inner, &BTreeMap::new()).unwrap().len() as u64, expect);
    }

    #[test]
    fn fig6b_inner_points_at_origin() {
        let p = parse_program(FIG6B).unwrap();
        let mid = p.root.children().next().unwrap();
        let inner = mid.children().next().unwrap();
        let pts = enumerate_points(inner, &env(&[("x", 0), ("y", 0)])).unwrap();
        assert!(!pts.is_empty());
        assert!(pts.iter().all(|p| p["x"] + p["i"] >= 1 && p["xo"] == 0));
        assert!(pts.iter().any(|p| p["x"] == 0 && p["i"] == 1));
    }

    #[test]
    fn empty_iteration_space_leaves_store() {
        let p = parse_program(
            "block [] ( out O[0]:assign i32(4):(1) ) {
                block [x:4] ( -1 >= 0  out O[x]:assign i32(1):(1) ) { $c = constant(9)  O = store($c) }
            }",
        )
        .unwrap();
        let mut s = BufferStore::new();
        s.insert("O", Tensor::from_values(DType::I32, [1, 2, 3, 4]));
        let out = execute(&p, s.clone()).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn ones_convolution() {
        let p = i32_variant(FIG6A);
        let mut s = BufferStore::zeros_for(&p);
        s.insert("I", Tensor::filled(DType::I32, 12 * 16 * 8, 1));
        s.insert("F", Tensor::filled(DType::I32, 3 * 3 * 16 * 8, 1));
        let out = execute(&p, s).unwrap();
        let o = &out.get("O").unwrap().data;
        for x in 0..12 {
            for y in 0..16 {
                let rows = (0..3).filter(|i| (0..12).contains(&(x + i - 1))).count() as i32;
                let cols = (0..3).filter(|j| (0..16).contains(&(y + j - 1))).count() as i32;
                for k in 0..16 {
                    assert_eq!(o[(x * 256 + y * 16 + k) as usize], rows * cols * 8);
                }
            }
        }
        assert_eq!(o[(5 * 256 + 7 * 16) as usize], 72);
    }

    #[test]
    fn tiled_fig6b_matches_untiled() {
        use rand::{Rng, SeedableRng};
        let a = i32_variant(FIG6A);
        let b = i32_variant(FIG6B);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut s = BufferStore::zeros_for(&a);
        s.insert("I", Tensor::from_values(DType::I32, (0..1536).map(|_| rng.gen_range(-50..50))));
        s.insert("F", Tensor::from_values(DType::I32, (0..1152).map(|_| rng.gen_range(-50..50))));
        assert_eq!(execute(&a, s.clone()).unwrap(), execute(&b, s).unwrap());
    }

    #[test]
    fn missing_and_short_buffers() {
        let p = parse_program(FIG6A).unwrap();
        let err = execute(&p, BufferStore::new()).unwrap_err();
        assert!(matches!(err, ExecError::MissingBuffer(_)));
        let mut s = BufferStore::zeros_for(&p);
        s.insert("I", Tensor::zeros(DType::I8, 10));
        assert!(matches!(execute(&p, s).unwrap_err(), ExecError::BufferSizeMismatch { .. }));
    }

    #[test]
    fn out_of_bounds_is_reported() {
        let p = parse_program(
            "block [] ( in A[0] i32(4):(1)  out O[0]:assign i32(4):(1) ) {
                block [x:4] ( in A[x + 1] i32(1):(1)  out O[x]:assign i32(1):(1) ) { $a = load(A)  O = store($a) }
            }",
        )
        .unwrap();
        let s = BufferStore::zeros_for(&p);
        assert!(matches!(execute(&p, s).unwrap_err(), ExecError::OutOfBoundsAccess { address: 4, .. }));
    }

    #[test]
    fn gather_and_scatter() {
        let p = parse_program(
            "block [] ( in T[0, 0] i32(4, 2):(2, 1)  in IDX[0] i32(3):(1)  out G[0, 0]:assign i32(3, 2):(2, 1)
                        out S[0, 0]:add i32(4, 2):(2, 1) ) {
                special gather(G, T, IDX)
                block [] ( in G[0, 0] i32(3, 2):(2, 1)  in IDX[0] i32(3):(1)  out S[0, 0]:add i32(4, 2):(2, 1) ) {
                    special scatter(S, G, IDX)
                }
            }",
        )
        .unwrap();
        let mut s = BufferStore::zeros_for(&p);
        s.insert("T", Tensor::from_values(DType::I32, 10..18));
        s.insert("IDX", Tensor::from_values(DType::I32, [3, 0, 3]));
        let out = execute(&p, s).unwrap();
        assert_eq!(out.get("G").unwrap().data, vec![16, 17, 10, 11, 16, 17]);
        assert_eq!(out.get("S").unwrap().data, vec![10, 11, 0, 0, 0, 0, 32, 34]);
    }

    #[test]
    fn bad_gather_index() {
        let p = parse_program(
            "block [] ( in T[0] i32(4):(1)  in IDX[0] i32(2):(1)  out G[0]:assign i32(2):(1) ) {
                special gather(G, T, IDX)
            }",
        )
        .unwrap();
        let mut s = BufferStore::zeros_for(&p);
        s.insert("IDX", Tensor::from_values(DType::I32, [0, 4]));
        assert!(matches!(execute(&p, s).unwrap_err(), ExecError::OutOfBoundsAccess { .. }));
    }

    #[test]
    fn temps_are_fresh_per_iteration() {
        let p = parse_program(
            "block [] ( out O[0]:assign i32(3):(1) ) {
                block [x:3] ( temp T[0] i32(1):(1)  out O[x]:assign i32(1):(1) ) {
                    block [] ( out T[0]:add i32(1):(1) ) { $c = constant(5)  T = store($c) }
                    $t = load(T)
                    O = store($t)
                }
            }",
        )
        .unwrap();
        let out = execute(&p, BufferStore::zeros_for(&p)).unwrap();
        assert_eq!(out.get("O").unwrap().data, vec![5, 5, 5]);
    }

    #[test]
    fn narrow_store_wraps_and_loads_sign_extend() {
        let p = parse_program(
            "block [] ( out O[0]:assign i8(1):(1)  out P[0]:assign i16(1):(1) ) {
                block [] ( out O[0]:assign i8(1):(1) ) { $c = constant(200)  O = store($c) }
                block [] ( in O[0] i8(1):(1)  out P[0]:assign i16(1):(1) ) { $v = load(O)  $w = sub($v, 1)  P = store($w) }
            }",
        )
        .unwrap();
        let out = execute(&p, BufferStore::zeros_for(&p)).unwrap();
        assert_eq!(out.get("O").unwrap().data, vec![-56]);
        assert_eq!(out.get("P").unwrap().data, vec![-57]);
    }

    #[test]
    fn orders_agree_on_reductions() {
        let p = i32_variant(FIG6A);
        let mut s = BufferStore::zeros_for(&p);
        s.insert("I", Tensor::from_values(DType::I32, (0..1536).map(|v| v % 7 - 3)));
        s.insert("F", Tensor::from_values(DType::I32, (0..1152).map(|v| v % 5 - 2)));
        let lex = execute(&p, s.clone()).unwrap();
        assert_eq!(execute_ordered(&p, s.clone(), IterOrder::Reversed).unwrap(), lex);
        assert_eq!(execute_ordered(&p, s, IterOrder::Shuffled(3)).unwrap(), lex);
    }

    #[test]
    fn output_identity_init() {
        let p = parse_program(
            "block [] ( out A[0]:max i16(2):(1)  out B[0]:mul i32(2):(1)  out C[0]:assign i8(2):(1) ) { }",
        )
        .unwrap();
        let mut s = BufferStore::new();
        s.init_outputs(&p);
        assert_eq!(s.get("A").unwrap().data, vec![i16::MIN as i32; 2]);
        assert_eq!(s.get("B").unwrap().data, vec![1, 1]);
        assert_eq!(s.get("C").unwrap().data, vec![0, 0]);
    }

    #[test]
    fn assign_conflicts_on_fig6a() {
        let p = i32_variant(&FIG6A.replace("O[x, y, k]:add", "O[x, y, k]:assign"));
        let mut s = BufferStore::zeros_for(&p);
        s.insert("I", Tensor::filled(DType::I32, 1536, 1));
        let r = trace_conflicts(&p, s).unwrap();
        let assigns: Vec<_> = r.of_kind(ConflictKind::Assign).collect();
        assert_eq!(assigns.len(), 12 * 16 * 16);
        assert!(assigns.iter().any(|c| c.writers == 72));
        assert_eq!(r.of_kind(ConflictKind::WriteRead).count(), 0);
    }

    #[test]
    fn add_reduction_has_no_conflicts() {
        let p = i32_variant(FIG6A);
        let r = trace_conflicts(&p, BufferStore::zeros_for(&p)).unwrap();
        assert!(r.is_empty(), "{:?}", r.conflicts.first());
    }

    #[test]
    fn single_iteration_assign_is_legal() {
        let p = parse_program(
            "block [] ( out O[0]:assign i32(1):(1) ) {
                block [x:1] ( out O[0]:assign i32(1):(1) ) { $c = constant(1)  O = store($c) }
            }",
        )
        .unwrap();
        assert!(trace_conflicts(&p, BufferStore::zeros_for(&p)).unwrap().is_empty());
    }

    #[test]
    fn cross_iteration_write_read() {
        let p = parse_program(
            "block [] ( inout A[0]:add i32(5):(1) ) {
                block [x:4] ( inout A[x]:add i32(2):(1) ) {
                    block [] ( in A[0] i32(1):(1) ) { $a = load(A) }
                    block [] ( out A[1]:add i32(1):(1) ) { $c = constant(1)  A = store($c) }
                }
            }",
        )
        .unwrap();
        let r = trace_conflicts(&p, BufferStore::zeros_for(&p)).unwrap();
        let wr: Vec<_> = r.of_kind(ConflictKind::WriteRead).collect();
        assert_eq!(wr.len(), 3);
        assert!(wr.iter().all(|c| c.block == vec![0] && c.buffer == "A"));
    }

    #[test]
    fn temp_reuse_across_iterations_is_not_a_conflict() {
        let p = parse_program(
            "block [] ( out O[0]:assign i32(4):(1) ) {
                block [x:4] ( temp T[0] i32(1):(1)  out O[x]:assign i32(1):(1) ) {
                    block [] ( out T[0]:assign i32(1):(1) ) { $c = constant(2)  T = store($c) }
                    block [] ( in T[0] i32(1):(1)  out O[0]:assign i32(1):(1) ) { $t = load(T)  O = store($t) }
                }
            }",
        )
        .unwrap();
        assert!(trace_conflicts(&p, BufferStore::zeros_for(&p)).unwrap().is_empty());
    }
}
