//! Compiled form of a program and the serial executor behind
//! [`super::execute`] and the conflict checker.

use std::collections::HashMap;
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{apply_aggregation, BufferStore, Conflict, ConflictKind, ConflictReport, ExecError, IterOrder, Tensor};
use crate::ir::{Affine, AggOp, Block, DType, Direction, IndexKind, IntrinsicOp, Operand, Program, SpecialOp, Statement};

/// Affine expression over environment slots.
#[derive(Debug, Clone)]
struct Lin {
    terms: Vec<(usize, i64)>,
    constant: i64,
}

impl Lin {
    fn compile(e: &Affine, slots: &HashMap<String, usize>) -> Result<Lin, ExecError> {
        let mut terms = Vec::new();
        for (n, c) in e.terms() {
            let s = *slots.get(n).ok_or_else(|| ExecError::UnboundIndex(n.to_string()))?;
            terms.push((s, c));
        }
        Ok(Lin {
            terms,
            constant: e.get_constant(),
        })
    }

    #[inline]
    fn eval(&self, env: &[i64]) -> i64 {
        let mut acc = self.constant;
        for &(s, c) in &self.terms {
            acc += c * env[s];
        }
        acc
    }
}

#[derive(Debug, Clone, Copy)]
enum Source {
    /// Root binding of an externally supplied buffer.
    External(usize),
    /// Index into the parent block's refinement list.
    Parent(usize),
    Temp,
}

#[derive(Debug)]
struct CRef {
    name: String,
    source: Source,
    offsets: Vec<Lin>,
    /// Strides used to turn this refinement's offsets into an address delta.
    offset_strides: Vec<i64>,
    sizes: Vec<u64>,
    strides: Vec<i64>,
    agg: Option<AggOp>,
    dtype: DType,
}

#[derive(Debug)]
enum COperand {
    Temp(usize),
    Const(i32),
}

#[derive(Debug)]
enum CStmt {
    Load { r: usize, t: usize },
    Store { t: usize, r: usize },
    Op { op: IntrinsicOp, args: Vec<COperand>, out: usize },
    Block(Box<CBlock>),
    Special { op: SpecialOp, refs: Vec<usize> },
}

#[derive(Debug)]
pub(super) struct CBlock {
    id: usize,
    ranges: Vec<u64>,
    aliases: Vec<Lin>,
    constraints: Vec<Lin>,
    refs: Vec<CRef>,
    stmts: Vec<CStmt>,
    n_temps: usize,
}

pub(super) struct Compiled {
    root: CBlock,
    /// Statement-index path of every block, by id.
    pub(super) paths: Vec<Vec<usize>>,
}

pub(super) fn compile(p: &Program, store: &BufferStore) -> Result<(Compiled, Vec<String>), ExecError> {
    let mut names = Vec::new();
    let mut externals = HashMap::new();
    for r in &p.root.refinements {
        if r.dir == Direction::Temp {
            continue;
        }
        let t = store.get(&r.buffer).ok_or_else(|| ExecError::MissingBuffer(r.buffer.clone()))?;
        let need = p.buffers.get(&r.buffer).map(|d| d.elements).unwrap_or(0);
        if (t.data.len() as u64) < need {
            return Err(ExecError::BufferSizeMismatch {
                buffer: r.buffer.clone(),
                expected: need,
                found: t.data.len() as u64,
            });
        }
        if !externals.contains_key(&r.buffer) {
            externals.insert(r.buffer.clone(), names.len());
            names.push(r.buffer.clone());
        }
    }
    let mut paths = Vec::new();
    let root = compile_block(&p.root, None, &HashMap::new(), &externals, &mut paths, &mut Vec::new())?;
    Ok((Compiled { root, paths }, names))
}

fn compile_block(
    b: &Block,
    parent: Option<&Block>,
    parent_slots: &HashMap<String, usize>,
    externals: &HashMap<String, usize>,
    paths: &mut Vec<Vec<usize>>,
    path: &mut Vec<usize>,
) -> Result<CBlock, ExecError> {
    let id = paths.len();
    paths.push(path.clone());
    let mut slots = HashMap::new();
    let mut ranges = Vec::new();
    for (n, r) in b.ranged() {
        slots.insert(n.to_string(), ranges.len());
        ranges.push(r);
    }
    let mut aliases = Vec::new();
    for i in &b.indexes {
        if let IndexKind::Alias(e) = &i.kind {
            slots.insert(i.name.clone(), ranges.len() + aliases.len());
            aliases.push(Lin::compile(e, parent_slots)?);
        }
    }
    let constraints = b
        .constraints
        .iter()
        .map(|c| Lin::compile(&c.expr, &slots))
        .collect::<Result<_, _>>()?;
    let mut refs = Vec::new();
    let mut ref_slots = HashMap::new();
    for r in &b.refinements {
        let (source, offset_strides) = match (r.dir, parent) {
            (Direction::Temp, _) => (Source::Temp, r.strides()),
            (_, None) => (
                Source::External(
                    *externals
                        .get(&r.buffer)
                        .ok_or_else(|| ExecError::MissingBuffer(r.buffer.clone()))?,
                ),
                r.strides(),
            ),
            (_, Some(pb)) => {
                let k = pb
                    .refinements
                    .iter()
                    .position(|pr| pr.buffer == r.buffer)
                    .ok_or_else(|| ExecError::UnknownBuffer(r.buffer.clone()))?;
                (Source::Parent(k), pb.refinements[k].strides())
            }
        };
        if offset_strides.len() != r.dims.len() {
            return Err(ExecError::RankMismatch(r.buffer.clone()));
        }
        ref_slots.insert(r.buffer.clone(), refs.len());
        refs.push(CRef {
            name: r.buffer.clone(),
            source,
            offsets: r.dims.iter().map(|d| Lin::compile(&d.offset, &slots)).collect::<Result<_, _>>()?,
            offset_strides,
            sizes: r.sizes(),
            strides: r.strides(),
            agg: r.agg,
            dtype: r.dtype,
        });
    }
    let buffer = |n: &str| ref_slots.get(n).copied().ok_or_else(|| ExecError::UnknownBuffer(n.to_string()));
    let mut temps: HashMap<String, usize> = HashMap::new();
    let mut n_temps = 0;
    let mut define = |n: &str, temps: &mut HashMap<String, usize>| -> usize {
        *temps.entry(n.to_string()).or_insert_with(|| {
            n_temps += 1;
            n_temps - 1
        })
    };
    let use_temp = |n: &str, temps: &HashMap<String, usize>| {
        temps.get(n).copied().ok_or_else(|| ExecError::UndefinedTemp(n.to_string()))
    };
    let mut stmts = Vec::new();
    for (k, s) in b.statements.iter().enumerate() {
        stmts.push(match s {
            Statement::Block(c) => {
                path.push(k);
                let cb = compile_block(c, Some(b), &slots, externals, paths, path);
                path.pop();
                CStmt::Block(Box::new(cb?))
            }
            Statement::Load { into, buffer: name } => {
                let r = buffer(name)?;
                CStmt::Load {
                    r,
                    t: define(into, &mut temps),
                }
            }
            Statement::Store { buffer: name, from } => CStmt::Store {
                t: use_temp(from, &temps)?,
                r: buffer(name)?,
            },
            Statement::Intrinsic { into, op, args } => {
                let args = args
                    .iter()
                    .map(|a| match a {
                        Operand::Temp(t) => use_temp(t, &temps).map(COperand::Temp),
                        Operand::Const(c) => Ok(COperand::Const(*c as i32)),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if args.len() != op.arity() {
                    return Err(ExecError::InvalidSpecial(format!("`{op}` expects {} operands", op.arity())));
                }
                CStmt::Op {
                    op: *op,
                    args,
                    out: define(into, &mut temps),
                }
            }
            Statement::Special { op, args } => {
                let refs_idx = args.iter().map(|a| buffer(a)).collect::<Result<Vec<_>, _>>()?;
                check_special(*op, &refs_idx.iter().map(|&i| &refs[i]).collect::<Vec<_>>())?;
                CStmt::Special { op: *op, refs: refs_idx }
            }
        });
    }
    Ok(CBlock {
        id,
        ranges,
        aliases,
        constraints,
        refs,
        stmts,
        n_temps,
    })
}

fn check_special(op: SpecialOp, refs: &[&CRef]) -> Result<(), ExecError> {
    if refs.len() != 3 {
        return Err(ExecError::InvalidSpecial(format!("{op} takes (out, src, idx)")));
    }
    let (out, src, idx) = (refs[0], refs[1], refs[2]);
    if idx.sizes.len() != 1 || out.sizes.len() != src.sizes.len() || out.sizes.is_empty() {
        return Err(ExecError::InvalidSpecial(format!(
            "{op}: idx must be rank 1 and out/src must share rank"
        )));
    }
    let lead = match op {
        SpecialOp::Gather => out.sizes[0],
        SpecialOp::Scatter => src.sizes[0],
    };
    if idx.sizes[0] != lead || out.sizes[1..] != src.sizes[1..] {
        return Err(ExecError::InvalidSpecial(format!("{op}: shape mismatch")));
    }
    Ok(())
}

#[derive(Clone)]
struct View {
    buf: usize,
    base: i64,
    /// Aggregation of this buffer's refinement at each nesting level, from
    /// the level where the buffer became visible. Only kept when tracing.
    lineage: Option<Rc<Lineage>>,
}

struct Lineage {
    origin: usize,
    aggs: Vec<Option<AggOp>>,
}

#[derive(Default, Clone, Copy)]
struct Rec {
    first_writer: Option<u64>,
    last_writer: u64,
    writers: u32,
    multi_writer: bool,
    first_reader: Option<u64>,
    multi_reader: bool,
    assign: bool,
    buf_name: u32,
    block: u32,
}

#[derive(Default)]
struct Trace {
    records: HashMap<(u64, usize, i64), Rec>,
    /// Per nesting level: (instance id, point id, block id).
    stack: Vec<(u64, u64, usize)>,
    next_instance: u64,
    next_point: u64,
    names: Vec<String>,
}

impl Trace {
    fn name_id(&mut self, n: &str) -> u32 {
        match self.names.iter().position(|x| x == n) {
            Some(i) => i as u32,
            None => {
                self.names.push(n.to_string());
                (self.names.len() - 1) as u32
            }
        }
    }
}

pub(super) struct Engine {
    pub(super) tensors: Vec<Tensor>,
    names: Vec<String>,
    order: IterOrder,
    rng: ChaCha8Rng,
    trace: Option<Trace>,
}

impl Engine {
    pub(super) fn new(store: &mut BufferStore, names: Vec<String>, order: IterOrder, traced: bool) -> Engine {
        let tensors = names.iter().map(|n| store.take(n).expect("checked at compile")).collect();
        let seed = match order {
            IterOrder::Shuffled(s) => s,
            _ => 0,
        };
        Engine {
            tensors,
            names,
            order,
            rng: ChaCha8Rng::seed_from_u64(seed),
            trace: traced.then(Trace::default),
        }
    }

    pub(super) fn finish(self, store: &mut BufferStore) {
        for (n, t) in self.names.into_iter().zip(self.tensors) {
            store.insert(n, t);
        }
    }

    pub(super) fn run(&mut self, c: &Compiled) -> Result<(), ExecError> {
        self.run_block(&c.root, &[], &[], 0)
    }

    fn points(&mut self, ranges: &[u64]) -> Vec<Vec<i64>> {
        let mut pts = Vec::new();
        if ranges.contains(&0) {
            return pts;
        }
        let mut cur = vec![0i64; ranges.len()];
        loop {
            pts.push(cur.clone());
            let mut d = ranges.len();
            loop {
                if d == 0 {
                    match self.order {
                        IterOrder::Lexicographic => {}
                        IterOrder::Reversed => pts.reverse(),
                        IterOrder::Shuffled(_) => pts.shuffle(&mut self.rng),
                    }
                    return pts;
                }
                d -= 1;
                cur[d] += 1;
                if (cur[d] as u64) < ranges[d] {
                    break;
                }
                cur[d] = 0;
            }
        }
    }

    fn run_block(&mut self, cb: &CBlock, parent_env: &[i64], parent_views: &[View], depth: usize) -> Result<(), ExecError> {
        let nr = cb.ranges.len();
        let mut env = vec![0i64; nr + cb.aliases.len()];
        for (k, a) in cb.aliases.iter().enumerate() {
            env[nr + k] = a.eval(parent_env);
        }
        if let Some(t) = &mut self.trace {
            let inst = t.next_instance;
            t.next_instance += 1;
            t.stack.push((inst, 0, cb.id));
        }
        let result = if self.order == IterOrder::Lexicographic {
            self.run_lex(cb, &mut env, parent_views, depth)
        } else {
            let pts = self.points(&cb.ranges);
            let mut r = Ok(());
            for p in pts {
                env[..nr].copy_from_slice(&p);
                r = self.run_point(cb, &env, parent_views, depth);
                if r.is_err() {
                    break;
                }
            }
            r
        };
        if let Some(t) = &mut self.trace {
            t.stack.pop();
        }
        result
    }

    fn run_lex(&mut self, cb: &CBlock, env: &mut [i64], parent_views: &[View], depth: usize) -> Result<(), ExecError> {
        let nr = cb.ranges.len();
        if cb.ranges.contains(&0) {
            return Ok(());
        }
        loop {
            self.run_point(cb, env, parent_views, depth)?;
            let mut d = nr;
            loop {
                if d == 0 {
                    return Ok(());
                }
                d -= 1;
                env[d] += 1;
                if (env[d] as u64) < cb.ranges[d] {
                    break;
                }
                env[d] = 0;
            }
        }
    }

    fn run_point(&mut self, cb: &CBlock, env: &[i64], parent_views: &[View], depth: usize) -> Result<(), ExecError> {
        if cb.constraints.iter().any(|c| c.eval(env) < 0) {
            return Ok(());
        }
        if let Some(t) = &mut self.trace {
            let p = t.next_point;
            t.next_point += 1;
            t.stack.last_mut().expect("pushed").1 = p;
        }
        let locals_mark = self.tensors.len();
        let mut views = Vec::with_capacity(cb.refs.len());
        for r in &cb.refs {
            let delta: i64 = r
                .offsets
                .iter()
                .zip(&r.offset_strides)
                .map(|(o, s)| o.eval(env) * s)
                .sum();
            let view = match r.source {
                Source::External(buf) => View {
                    buf,
                    base: delta,
                    lineage: self.trace.as_ref().map(|_| {
                        Rc::new(Lineage {
                            origin: depth,
                            aggs: vec![r.agg],
                        })
                    }),
                },
                Source::Parent(k) => {
                    let pv = &parent_views[k];
                    View {
                        buf: pv.buf,
                        base: pv.base + delta,
                        lineage: pv.lineage.as_ref().map(|l| {
                            let mut aggs = l.aggs.clone();
                            aggs.push(r.agg);
                            Rc::new(Lineage { origin: l.origin, aggs })
                        }),
                    }
                }
                Source::Temp => {
                    let mut lo = 0i64;
                    let mut hi = 0i64;
                    for (s, st) in r.sizes.iter().zip(&r.strides) {
                        let far = (*s as i64 - 1) * st;
                        lo += far.min(0);
                        hi += far.max(0);
                    }
                    self.tensors.push(Tensor::zeros(r.dtype, (hi - lo + 1) as usize));
                    if let Some(t) = &mut self.trace {
                        t.name_id(&r.name);
                    }
                    View {
                        buf: self.tensors.len() - 1,
                        base: delta - lo,
                        lineage: self.trace.as_ref().map(|_| {
                            Rc::new(Lineage {
                                origin: depth + 1,
                                aggs: vec![r.agg],
                            })
                        }),
                    }
                }
            };
            views.push(view);
        }
        let mut temps = vec![0i32; cb.n_temps];
        let result = self.run_stmts(cb, env, &views, &mut temps, depth);
        self.tensors.truncate(locals_mark);
        result
    }

    fn run_stmts(
        &mut self,
        cb: &CBlock,
        env: &[i64],
        views: &[View],
        temps: &mut [i32],
        depth: usize,
    ) -> Result<(), ExecError> {
        for s in &cb.stmts {
            match s {
                CStmt::Load { r, t } => {
                    temps[*t] = self.read(&cb.refs[*r], &views[*r], views[*r].base, depth)?;
                }
                CStmt::Store { t, r } => {
                    self.write(&cb.refs[*r], &views[*r], views[*r].base, temps[*t], depth)?;
                }
                CStmt::Op { op, args, out } => {
                    let v = |k: usize| match args[k] {
                        COperand::Temp(t) => temps[t],
                        COperand::Const(c) => c,
                    };
                    temps[*out] = match op {
                        IntrinsicOp::Add => v(0).wrapping_add(v(1)),
                        IntrinsicOp::Sub => v(0).wrapping_sub(v(1)),
                        IntrinsicOp::Mul => v(0).wrapping_mul(v(1)),
                        IntrinsicOp::Neg => v(0).wrapping_neg(),
                        IntrinsicOp::Max => v(0).max(v(1)),
                        IntrinsicOp::Min => v(0).min(v(1)),
                        IntrinsicOp::CmpEq => (v(0) == v(1)) as i32,
                        IntrinsicOp::CmpNe => (v(0) != v(1)) as i32,
                        IntrinsicOp::CmpLt => (v(0) < v(1)) as i32,
                        IntrinsicOp::CmpLe => (v(0) <= v(1)) as i32,
                        IntrinsicOp::CmpGt => (v(0) > v(1)) as i32,
                        IntrinsicOp::CmpGe => (v(0) >= v(1)) as i32,
                        IntrinsicOp::Select => {
                            if v(0) != 0 {
                                v(1)
                            } else {
                                v(2)
                            }
                        }
                        IntrinsicOp::Constant => v(0),
                    };
                }
                CStmt::Block(child) => self.run_block(child, env, views, depth + 1)?,
                CStmt::Special { op, refs } => self.special(cb, *op, refs, views, depth)?,
            }
        }
        Ok(())
    }

    fn address(r: &CRef, base: i64, coord: &[i64]) -> i64 {
        base + coord.iter().zip(&r.strides).map(|(c, s)| c * s).sum::<i64>()
    }

    fn special(&mut self, cb: &CBlock, op: SpecialOp, refs: &[usize], views: &[View], depth: usize) -> Result<(), ExecError> {
        let (out, src, idx) = (&cb.refs[refs[0]], &cb.refs[refs[1]], &cb.refs[refs[2]]);
        let (vo, vs, vi) = (&views[refs[0]], &views[refs[1]], &views[refs[2]]);
        let walk = match op {
            SpecialOp::Gather => &out.sizes,
            SpecialOp::Scatter => &src.sizes,
        };
        let mut coord = vec![0i64; walk.len()];
        if walk.contains(&0) {
            return Ok(());
        }
        loop {
            let lead = self.read(idx, vi, Self::address(idx, vi.base, &coord[..1]), depth)? as i64;
            let mut other = coord.clone();
            other[0] = lead;
            let (bound, src_c, dst_c) = match op {
                SpecialOp::Gather => (src.sizes[0], &other, &coord),
                SpecialOp::Scatter => (out.sizes[0], &coord, &other),
            };
            if lead < 0 || lead as u64 >= bound {
                return Err(ExecError::OutOfBoundsAccess {
                    buffer: idx.name.clone(),
                    address: lead,
                    len: bound,
                });
            }
            let v = self.read(src, vs, Self::address(src, vs.base, src_c), depth)?;
            self.write(out, vo, Self::address(out, vo.base, dst_c), v, depth)?;
            let mut d = walk.len();
            loop {
                if d == 0 {
                    return Ok(());
                }
                d -= 1;
                coord[d] += 1;
                if (coord[d] as u64) < walk[d] {
                    break;
                }
                coord[d] = 0;
            }
        }
    }

    fn check(&self, r: &CRef, v: &View, addr: i64) -> Result<usize, ExecError> {
        let len = self.tensors[v.buf].data.len();
        if addr < 0 || addr as usize >= len {
            return Err(ExecError::OutOfBoundsAccess {
                buffer: r.name.clone(),
                address: addr,
                len: len as u64,
            });
        }
        Ok(addr as usize)
    }

    fn read(&mut self, r: &CRef, v: &View, addr: i64, depth: usize) -> Result<i32, ExecError> {
        let a = self.check(r, v, addr)?;
        self.record(r, v, addr, false, depth);
        Ok(self.tensors[v.buf].data[a])
    }

    fn write(&mut self, r: &CRef, v: &View, addr: i64, value: i32, depth: usize) -> Result<(), ExecError> {
        let a = self.check(r, v, addr)?;
        self.record(r, v, addr, true, depth);
        let t = &mut self.tensors[v.buf];
        let agg = r.agg.unwrap_or(AggOp::Assign);
        t.data[a] = apply_aggregation(agg, t.data[a], value, t.dtype);
        Ok(())
    }

    fn record(&mut self, r: &CRef, v: &View, addr: i64, is_write: bool, depth: usize) {
        let Some(trace) = &mut self.trace else { return };
        let Some(lin) = &v.lineage else { return };
        let name = trace.name_id(&r.name);
        for level in lin.origin..=depth {
            let (inst, point, block) = trace.stack[level];
            let agg = lin.aggs.get(level - lin.origin).copied().flatten();
            let rec = trace.records.entry((inst, v.buf, addr)).or_default();
            rec.buf_name = name;
            rec.block = block as u32;
            if is_write {
                match rec.first_writer {
                    None => {
                        rec.first_writer = Some(point);
                        rec.writers = 1;
                    }
                    Some(w) => {
                        if w != point {
                            rec.multi_writer = true;
                        }
                        if rec.last_writer != point {
                            rec.writers += 1;
                        }
                    }
                }
                rec.last_writer = point;
                if agg == Some(AggOp::Assign) {
                    rec.assign = true;
                }
            } else {
                match rec.first_reader {
                    None => rec.first_reader = Some(point),
                    Some(p) if p != point => rec.multi_reader = true,
                    _ => {}
                }
            }
        }
    }

    pub(super) fn report(&self, paths: &[Vec<usize>]) -> ConflictReport {
        let mut conflicts = Vec::new();
        let Some(trace) = &self.trace else {
            return ConflictReport { conflicts };
        };
        for (&(_, _, addr), rec) in &trace.records {
            let name = &trace.names[rec.buf_name as usize];
            let block = paths[rec.block as usize].clone();
            if let (Some(w), Some(r)) = (rec.first_writer, rec.first_reader) {
                if rec.multi_writer || rec.multi_reader || w != r {
                    conflicts.push(Conflict {
                        kind: ConflictKind::WriteRead,
                        block: block.clone(),
                        buffer: name.clone(),
                        element: addr,
                        writers: rec.writers,
                    });
                }
            }
            if rec.assign && rec.writers > 1 {
                conflicts.push(Conflict {
                    kind: ConflictKind::Assign,
                    block,
                    buffer: name.clone(),
                    element: addr,
                    writers: rec.writers,
                });
            }
        }
        conflicts.sort();
        ConflictReport { conflicts }
    }
}
