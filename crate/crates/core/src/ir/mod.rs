//! The IR data model: blocks, indexes, constraints, refinements and
//! statements.
//!
//! A [`Block`] is a parallel polyhedral block. Its iteration space is the box
//! spanned by its ranged indexes intersected with its affine constraints
//! (`expr >= 0`). Buffers reach a block only through its [`Refinement`]s,
//! which carve an affine-offset window out of the same-named buffer in the
//! parent block. Parent indexes are visible only through alias indexes.

mod affine;
mod equal;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

pub use affine::{Affine, UnboundIndex};
pub use equal::{canonicalize, strip_tags, structural_equal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DType {
    I8,
    I16,
    I32,
}

impl DType {
    pub fn bits(self) -> u32 {
        match self {
            DType::I8 => 8,
            DType::I16 => 16,
            DType::I32 => 32,
        }
    }

    pub fn bytes(self) -> usize {
        self.bits() as usize / 8
    }

    /// Two's-complement wrap of `v` into this type's range.
    pub fn wrap(self, v: i64) -> i32 {
        match self {
            DType::I8 => v as i8 as i32,
            DType::I16 => v as i16 as i32,
            DType::I32 => v as i32,
        }
    }

    pub fn min_value(self) -> i32 {
        match self {
            DType::I8 => i8::MIN as i32,
            DType::I16 => i16::MIN as i32,
            DType::I32 => i32::MIN,
        }
    }

    pub fn max_value(self) -> i32 {
        match self {
            DType::I8 => i8::MAX as i32,
            DType::I16 => i16::MAX as i32,
            DType::I32 => i32::MAX,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DType::I8 => "i8",
            DType::I16 => "i16",
            DType::I32 => "i32",
        }
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "i8" => Ok(DType::I8),
            "i16" => Ok(DType::I16),
            "i32" => Ok(DType::I32),
            _ => Err(format!("unknown dtype `{s}`")),
        }
    }
}

/// How a buffer element combines with values written by several iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AggOp {
    Assign,
    Add,
    Max,
    Min,
    Mul,
}

impl AggOp {
    pub const ALL: [AggOp; 5] = [AggOp::Assign, AggOp::Add, AggOp::Max, AggOp::Min, AggOp::Mul];

    pub fn name(self) -> &'static str {
        match self {
            AggOp::Assign => "assign",
            AggOp::Add => "add",
            AggOp::Max => "max",
            AggOp::Min => "min",
            AggOp::Mul => "mul",
        }
    }

    /// The value an output should start from so that the first aggregated
    /// write is stored unchanged.
    pub fn identity(self, dtype: DType) -> i32 {
        match self {
            AggOp::Assign | AggOp::Add => 0,
            AggOp::Mul => 1,
            AggOp::Max => dtype.min_value(),
            AggOp::Min => dtype.max_value(),
        }
    }
}

impl fmt::Display for AggOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AggOp {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AggOp::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown aggregation `{s}`"))
    }
}

/// Refinement direction. `Temp` declares block-local storage that is freshly
/// zeroed for every iteration of the declaring block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    In,
    Out,
    InOut,
    Temp,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::In => "in",
            Direction::Out => "out",
            Direction::InOut => "inout",
            Direction::Temp => "temp",
        }
    }

    pub fn reads(self) -> bool {
        matches!(self, Direction::In | Direction::InOut | Direction::Temp)
    }

    pub fn writes(self) -> bool {
        matches!(self, Direction::Out | Direction::InOut | Direction::Temp)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IndexKind {
    Range(u64),
    /// Bound to an affine expression over the parent block's indexes.
    Alias(Affine),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Index {
    pub name: String,
    pub kind: IndexKind,
}

impl Index {
    pub fn range(name: impl Into<String>, range: u64) -> Self {
        Index {
            name: name.into(),
            kind: IndexKind::Range(range),
        }
    }

    pub fn alias(name: impl Into<String>, expr: Affine) -> Self {
        Index {
            name: name.into(),
            kind: IndexKind::Alias(expr),
        }
    }

    pub fn get_range(&self) -> Option<u64> {
        match self.kind {
            IndexKind::Range(r) => Some(r),
            IndexKind::Alias(_) => None,
        }
    }

    pub fn is_alias(&self) -> bool {
        matches!(self.kind, IndexKind::Alias(_))
    }
}

/// `expr >= 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub expr: Affine,
}

impl Constraint {
    pub fn new(expr: Affine) -> Self {
        Constraint { expr }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dim {
    pub offset: Affine,
    pub size: u64,
    pub stride: i64,
}

impl Dim {
    pub fn new(offset: Affine, size: u64, stride: i64) -> Self {
        Dim { offset, size, stride }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Location {
    pub unit: String,
    pub bank: Affine,
    pub address: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Refinement {
    pub dir: Direction,
    pub buffer: String,
    pub agg: Option<AggOp>,
    pub dtype: DType,
    pub dims: Vec<Dim>,
    pub location: Option<Location>,
}

impl Refinement {
    pub fn new(dir: Direction, buffer: impl Into<String>, dtype: DType, dims: Vec<Dim>) -> Self {
        Refinement {
            dir,
            buffer: buffer.into(),
            agg: None,
            dtype,
            dims,
            location: None,
        }
    }

    pub fn with_agg(mut self, agg: AggOp) -> Self {
        self.agg = Some(agg);
        self
    }

    pub fn sizes(&self) -> Vec<u64> {
        self.dims.iter().map(|d| d.size).collect()
    }

    pub fn strides(&self) -> Vec<i64> {
        self.dims.iter().map(|d| d.stride).collect()
    }

    pub fn offsets(&self) -> Vec<Affine> {
        self.dims.iter().map(|d| d.offset.clone()).collect()
    }

    pub fn elements(&self) -> u64 {
        self.dims.iter().map(|d| d.size).product()
    }

    /// Lowest and highest element address relative to the window origin.
    pub fn address_span(&self) -> (i64, i64) {
        let mut lo = 0;
        let mut hi = 0;
        for d in &self.dims {
            let far = (d.size as i64 - 1) * d.stride;
            lo += far.min(0);
            hi += far.max(0);
        }
        (lo, hi)
    }

    pub fn uses_index(&self, name: &str) -> bool {
        self.dims.iter().any(|d| d.offset.uses(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IntrinsicOp {
    Add,
    Sub,
    Mul,
    Neg,
    Max,
    Min,
    CmpEq,
    CmpNe,
    CmpLt,
    CmpLe,
    CmpGt,
    CmpGe,
    Select,
    Constant,
}

impl IntrinsicOp {
    pub const ALL: [IntrinsicOp; 14] = [
        IntrinsicOp::Add,
        IntrinsicOp::Sub,
        IntrinsicOp::Mul,
        IntrinsicOp::Neg,
        IntrinsicOp::Max,
        IntrinsicOp::Min,
        IntrinsicOp::CmpEq,
        IntrinsicOp::CmpNe,
        IntrinsicOp::CmpLt,
        IntrinsicOp::CmpLe,
        IntrinsicOp::CmpGt,
        IntrinsicOp::CmpGe,
        IntrinsicOp::Select,
        IntrinsicOp::Constant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IntrinsicOp::Add => "add",
            IntrinsicOp::Sub => "sub",
            IntrinsicOp::Mul => "mul",
            IntrinsicOp::Neg => "neg",
            IntrinsicOp::Max => "max",
            IntrinsicOp::Min => "min",
            IntrinsicOp::CmpEq => "cmp_eq",
            IntrinsicOp::CmpNe => "cmp_ne",
            IntrinsicOp::CmpLt => "cmp_lt",
            IntrinsicOp::CmpLe => "cmp_le",
            IntrinsicOp::CmpGt => "cmp_gt",
            IntrinsicOp::CmpGe => "cmp_ge",
            IntrinsicOp::Select => "select",
            IntrinsicOp::Constant => "constant",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            IntrinsicOp::Neg | IntrinsicOp::Constant => 1,
            IntrinsicOp::Select => 3,
            _ => 2,
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.name() == s)
    }
}

impl fmt::Display for IntrinsicOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Tensor-level operations that are opaque to rewrites. The first argument
/// is the written refinement, the rest are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpecialOp {
    /// `out[i, rest..] = src[idx[i], rest..]`
    Gather,
    /// `out[idx[i], rest..] <- src[i, rest..]` combined with `out`'s aggregation.
    Scatter,
}

impl SpecialOp {
    pub fn name(self) -> &'static str {
        match self {
            SpecialOp::Gather => "gather",
            SpecialOp::Scatter => "scatter",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "gather" => Some(SpecialOp::Gather),
            "scatter" => Some(SpecialOp::Scatter),
            _ => None,
        }
    }
}

impl fmt::Display for SpecialOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Temp(String),
    Const(i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Statement {
    Block(Box<Block>),
    /// `$into = load(buffer)`: reads element 0 of a single-element refinement.
    Load { into: String, buffer: String },
    /// `buffer = store($from)`
    Store { buffer: String, from: String },
    Intrinsic {
        into: String,
        op: IntrinsicOp,
        args: Vec<Operand>,
    },
    Special { op: SpecialOp, args: Vec<String> },
}

impl Statement {
    pub fn as_block(&self) -> Option<&Block> {
        match self {
            Statement::Block(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_block_mut(&mut self) -> Option<&mut Block> {
        match self {
            Statement::Block(b) => Some(b),
            _ => None,
        }
    }

    /// Buffers this statement reads and writes directly, at this block's
    /// level. Child blocks report their refinements.
    pub fn buffer_uses(&self) -> (Vec<&str>, Vec<&str>) {
        match self {
            Statement::Block(b) => {
                let mut reads = Vec::new();
                let mut writes = Vec::new();
                for r in &b.refinements {
                    if r.dir == Direction::Temp {
                        continue;
                    }
                    if r.dir.reads() {
                        reads.push(r.buffer.as_str());
                    }
                    if r.dir.writes() {
                        writes.push(r.buffer.as_str());
                    }
                }
                (reads, writes)
            }
            Statement::Load { buffer, .. } => (vec![buffer.as_str()], vec![]),
            Statement::Store { buffer, .. } => (vec![], vec![buffer.as_str()]),
            Statement::Intrinsic { .. } => (vec![], vec![]),
            Statement::Special { args, .. } => {
                let writes = args.first().map(|a| vec![a.as_str()]).unwrap_or_default();
                let reads = args.iter().skip(1).map(String::as_str).collect();
                (reads, writes)
            }
        }
    }

    /// Scalar temps (defined, used).
    pub fn temp_uses(&self) -> (Option<&str>, Vec<&str>) {
        match self {
            Statement::Load { into, .. } => (Some(into), vec![]),
            Statement::Store { from, .. } => (None, vec![from]),
            Statement::Intrinsic { into, args, .. } => (
                Some(into),
                args.iter()
                    .filter_map(|a| match a {
                        Operand::Temp(t) => Some(t.as_str()),
                        Operand::Const(_) => None,
                    })
                    .collect(),
            ),
            Statement::Block(_) | Statement::Special { .. } => (None, vec![]),
        }
    }

    /// Whether the statement names `buffer` anywhere, including inside a
    /// child block's subtree.
    pub fn mentions_buffer(&self, buffer: &str) -> bool {
        match self {
            Statement::Block(b) => b.refinements.iter().any(|r| r.buffer == buffer && r.dir != Direction::Temp),
            _ => {
                let (r, w) = self.buffer_uses();
                r.contains(&buffer) || w.contains(&buffer)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Block {
    pub indexes: Vec<Index>,
    pub constraints: Vec<Constraint>,
    pub refinements: Vec<Refinement>,
    pub statements: Vec<Statement>,
    pub tags: BTreeSet<String>,
    /// The optional `:N` annotation after the index list. Carried through
    /// printing but has no semantics.
    pub count_hint: Option<u64>,
}

impl Block {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn index(&self, name: &str) -> Option<&Index> {
        self.indexes.iter().find(|i| i.name == name)
    }

    pub fn ranged(&self) -> impl Iterator<Item = (&str, u64)> + '_ {
        self.indexes.iter().filter_map(|i| i.get_range().map(|r| (i.name.as_str(), r)))
    }

    pub fn aliases(&self) -> impl Iterator<Item = (&str, &Affine)> + '_ {
        self.indexes.iter().filter_map(|i| match &i.kind {
            IndexKind::Alias(e) => Some((i.name.as_str(), e)),
            IndexKind::Range(_) => None,
        })
    }

    pub fn refinement(&self, buffer: &str) -> Option<&Refinement> {
        self.refinements.iter().find(|r| r.buffer == buffer)
    }

    pub fn refinement_mut(&mut self, buffer: &str) -> Option<&mut Refinement> {
        self.refinements.iter_mut().find(|r| r.buffer == buffer)
    }

    /// Number of points in the index box, ignoring constraints.
    pub fn box_volume(&self) -> u64 {
        self.ranged().map(|(_, r)| r).product()
    }

    pub fn has_child_blocks(&self) -> bool {
        self.statements.iter().any(|s| matches!(s, Statement::Block(_)))
    }

    pub fn children(&self) -> impl Iterator<Item = &Block> + '_ {
        self.statements.iter().filter_map(Statement::as_block)
    }

    /// Inclusive bounds of each ranged index.
    pub fn index_box(&self) -> BTreeMap<String, (i64, i64)> {
        self.ranged().map(|(n, r)| (n.to_string(), (0, r as i64 - 1))).collect()
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tags.insert(tag.into());
        self
    }

    /// Visits this block and every descendant, parents first.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Block)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    pub fn walk_mut(&mut self, f: &mut impl FnMut(&mut Block)) {
        f(self);
        for s in &mut self.statements {
            if let Statement::Block(b) = s {
                b.walk_mut(f);
            }
        }
    }

    /// The block at a path of statement indexes below this one.
    pub fn at_path(&self, path: &[usize]) -> Option<&Block> {
        match path.split_first() {
            None => Some(self),
            Some((i, rest)) => self.statements.get(*i)?.as_block()?.at_path(rest),
        }
    }

    pub fn at_path_mut(&mut self, path: &[usize]) -> Option<&mut Block> {
        match path.split_first() {
            None => Some(self),
            Some((i, rest)) => self.statements.get_mut(*i)?.as_block_mut()?.at_path_mut(rest),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferDecl {
    pub dtype: DType,
    pub elements: u64,
}

/// A root block plus the table of externally supplied buffers it binds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub root: Block,
    pub buffers: BTreeMap<String, BufferDecl>,
}

impl Default for Program {
    fn default() -> Self {
        Program::new(Block {
            count_hint: Some(1),
            ..Block::default()
        })
    }
}

impl Program {
    pub fn new(root: Block) -> Self {
        let buffers = root
            .refinements
            .iter()
            .filter(|r| r.dir != Direction::Temp)
            .map(|r| {
                let base: i64 = r
                    .dims
                    .iter()
                    .map(|d| d.stride * d.offset.eval_with(|_| Some(0)).unwrap_or(0))
                    .sum();
                let (_, hi) = r.address_span();
                let elements = (base + hi + 1).max(0) as u64;
                (
                    r.buffer.clone(),
                    BufferDecl {
                        dtype: r.dtype,
                        elements,
                    },
                )
            })
            .collect();
        Program { root, buffers }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Paths (statement indexes from the root) of every block, parents first.
    pub fn block_paths(&self) -> Vec<Vec<usize>> {
        fn rec(b: &Block, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            out.push(path.clone());
            for (i, s) in b.statements.iter().enumerate() {
                if let Statement::Block(c) = s {
                    path.push(i);
                    rec(c, path, out);
                    path.pop();
                }
            }
        }
        let mut out = Vec::new();
        rec(&self.root, &mut Vec::new(), &mut out);
        out
    }

    /// Root `out`/`inout` buffers.
    pub fn outputs(&self) -> Vec<&Refinement> {
        self.root
            .refinements
            .iter()
            .filter(|r| matches!(r.dir, Direction::Out | Direction::InOut))
            .collect()
    }
}

/// Dense row-major strides for the given sizes.
pub fn dense_strides(sizes: &[u64]) -> Vec<i64> {
    let mut strides = vec![0i64; sizes.len()];
    let mut acc = 1i64;
    for (i, s) in sizes.iter().enumerate().rev() {
        strides[i] = acc;
        acc *= *s as i64;
    }
    strides
}
