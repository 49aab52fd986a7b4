//! Static legality checks and the dynamic parallel-semantics check.
//!
//! Static checks cover scoping, explicit passing of parent indexes, window
//! containment, aggregation presence and statement well-formedness.
//! Cross-iteration conflicts are found dynamically by
//! [`check_parallel_semantics`], which runs the interpreter instrumented.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::analysis::leaf_access_bounds;
use crate::interp::{trace_conflicts, BufferStore, ConflictReport, ExecError};
use crate::ir::{Affine, Block, Direction, IndexKind, Operand, Program, Refinement, Statement};
use crate::text::{NodeItem, NodePath, SourceSpan, SpanMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Code {
    UnboundIndex,
    /// A parent index used without an alias binding.
    UnboundParentIndex,
    DuplicateIndex,
    IndexOrder,
    EmptyRange,
    DuplicateRefinement,
    UnknownBuffer,
    MissingAggregation,
    RankMismatch,
    StrideMismatch,
    DtypeMismatch,
    EmptyDimension,
    RefinementOutOfBounds,
    NonConstantRootOffset,
    DirectionMismatch,
    UndefinedTemp,
    NonScalarAccess,
    ArityMismatch,
    InvalidSpecial,
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: Code,
    pub message: String,
    pub path: NodePath,
    pub span: Option<SourceSpan>,
}

impl Diagnostic {
    /// `severity CODE file:line:col message`
    pub fn render(&self, file: &str) -> String {
        let at = match self.span {
            Some(s) => format!("{file}:{s}"),
            None => format!("{file}:{}", self.path),
        };
        format!("{} {} {} {}", self.severity, self.code, at, self.message)
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.severity, self.code, self.path, self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

pub fn validate_static(p: &Program) -> Vec<Diagnostic> {
    let mut v = Validator { diags: Vec::new() };
    v.block(&p.root, None, &BTreeSet::new(), &mut Vec::new());
    v.diags
}

/// As [`validate_static`], attaching source positions from a parse.
pub fn validate_static_with_spans(p: &Program, spans: &SpanMap) -> Vec<Diagnostic> {
    let mut diags = validate_static(p);
    for d in &mut diags {
        d.span = spans.nearest(&d.path);
    }
    diags
}

/// Executes `p` instrumented and reports cross-iteration write/read
/// conflicts and multiply-written `assign` elements.
pub fn check_parallel_semantics(p: &Program, inputs: BufferStore) -> Result<ConflictReport, ExecError> {
    trace_conflicts(p, inputs)
}

struct Validator {
    diags: Vec<Diagnostic>,
}

type Bounds = BTreeMap<String, (i64, i64)>;

impl Validator {
    fn error(&mut self, code: Code, path: &[usize], item: NodeItem, message: String) {
        self.diags.push(Diagnostic {
            severity: Severity::Error,
            code,
            message,
            path: NodePath::new(path, item),
            span: None,
        });
    }

    /// Reports names in `e` that are not indexes of this block. Inside a
    /// nested block an unknown name can only legally come from an enclosing
    /// block, so it is reported as a missing alias binding.
    fn scope(&mut self, e: &Affine, own: &Bounds, ancestors: &BTreeSet<String>, path: &[usize], item: NodeItem, what: &str) {
        for n in e.names() {
            if own.contains_key(n) {
                continue;
            }
            if ancestors.contains(n) {
                self.error(
                    Code::UnboundParentIndex,
                    path,
                    item,
                    format!("parent index `{n}` used in {what} without an alias binding"),
                );
            } else if !path.is_empty() {
                self.error(
                    Code::UnboundParentIndex,
                    path,
                    item,
                    format!("`{n}` in {what} is neither declared here nor passed in as an alias"),
                );
            } else {
                self.error(Code::UnboundIndex, path, item, format!("undeclared index `{n}` in {what}"));
            }
        }
    }

    fn block(
        &mut self,
        b: &Block,
        parent: Option<(&Block, &Bounds)>,
        ancestors: &BTreeSet<String>,
        path: &mut Vec<usize>,
    ) {
        let parent_bounds = parent.map(|(_, pb)| pb);
        let mut own: Bounds = BTreeMap::new();
        let mut seen_alias = false;
        for (k, i) in b.indexes.iter().enumerate() {
            if own.contains_key(&i.name) {
                self.error(Code::DuplicateIndex, path, NodeItem::Index(k), format!("index `{}` declared twice", i.name));
                continue;
            }
            match &i.kind {
                IndexKind::Range(n) => {
                    if seen_alias {
                        self.error(
                            Code::IndexOrder,
                            path,
                            NodeItem::Index(k),
                            format!("ranged index `{}` follows an alias index", i.name),
                        );
                    }
                    if *n == 0 {
                        self.error(Code::EmptyRange, path, NodeItem::Index(k), format!("index `{}` has range 0", i.name));
                    }
                    own.insert(i.name.clone(), (0, *n as i64 - 1));
                }
                IndexKind::Alias(e) => {
                    seen_alias = true;
                    let pb = parent_bounds.cloned().unwrap_or_default();
                    let mut ok = true;
                    for n in e.names() {
                        if !pb.contains_key(n) {
                            ok = false;
                            self.error(
                                Code::UnboundIndex,
                                path,
                                NodeItem::Index(k),
                                format!("alias `{}` refers to `{n}`, which is not an index of the parent block", i.name),
                            );
                        }
                    }
                    let bound = if ok {
                        e.bounds_with(|n| pb.get(n).copied()).unwrap_or((0, 0))
                    } else {
                        (0, 0)
                    };
                    own.insert(i.name.clone(), bound);
                }
            }
        }
        for (k, c) in b.constraints.iter().enumerate() {
            self.scope(&c.expr, &own, ancestors, path, NodeItem::Constraint(k), "constraint");
        }
        let mut buffers = BTreeSet::new();
        for (k, r) in b.refinements.iter().enumerate() {
            let item = NodeItem::Refinement(k);
            if !buffers.insert(r.buffer.as_str()) {
                self.error(
                    Code::DuplicateRefinement,
                    path,
                    item,
                    format!("buffer `{}` refined twice in one block", r.buffer),
                );
                continue;
            }
            self.refinement(b, r, k, parent, &own, ancestors, path);
        }
        let mut child_ancestors = ancestors.clone();
        child_ancestors.extend(own.keys().cloned());
        let mut temps: BTreeSet<&str> = BTreeSet::new();
        for (k, s) in b.statements.iter().enumerate() {
            let item = NodeItem::Statement(k);
            match s {
                Statement::Block(c) => {
                    path.push(k);
                    self.block(c, Some((b, &own)), &child_ancestors, path);
                    path.pop();
                    continue;
                }
                Statement::Load { buffer, .. } | Statement::Store { buffer, .. } => {
                    let load = matches!(s, Statement::Load { .. });
                    match b.refinement(buffer) {
                        None => self.error(Code::UnknownBuffer, path, item, format!("undeclared buffer `{buffer}`")),
                        Some(r) => {
                            if r.elements() != 1 {
                                self.error(
                                    Code::NonScalarAccess,
                                    path,
                                    item,
                                    format!("`{buffer}` has {} elements; load/store need a single-element window", r.elements()),
                                );
                            }
                            if load && !r.dir.reads() {
                                self.error(Code::DirectionMismatch, path, item, format!("load from write-only `{buffer}`"));
                            }
                            if !load && !r.dir.writes() {
                                self.error(Code::DirectionMismatch, path, item, format!("store to read-only `{buffer}`"));
                            }
                        }
                    }
                }
                Statement::Intrinsic { op, args, .. } => {
                    if args.len() != op.arity() {
                        self.error(
                            Code::ArityMismatch,
                            path,
                            item,
                            format!("`{op}` takes {} operands, got {}", op.arity(), args.len()),
                        );
                    }
                    if let Some(t) = args.iter().find_map(|a| match a {
                        Operand::Temp(t) if !temps.contains(t.as_str()) => Some(t),
                        _ => None,
                    }) {
                        self.error(Code::UndefinedTemp, path, item, format!("temp `${t}` used before definition"));
                    }
                }
                Statement::Special { op, args } => self.special(b, *op, args, path, item),
            }
            if let Statement::Store { from, .. } = s {
                if !temps.contains(from.as_str()) {
                    self.error(Code::UndefinedTemp, path, item, format!("temp `${from}` used before definition"));
                }
            }
            if let Some(d) = s.temp_uses().0 {
                temps.insert(d);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn refinement(
        &mut self,
        b: &Block,
        r: &Refinement,
        k: usize,
        parent: Option<(&Block, &Bounds)>,
        own: &Bounds,
        ancestors: &BTreeSet<String>,
        path: &[usize],
    ) {
        let item = NodeItem::Refinement(k);
        let what = format!("refinement `{}`", r.buffer);
        for d in &r.dims {
            self.scope(&d.offset, own, ancestors, path, item, &what);
            if d.size == 0 {
                self.error(Code::EmptyDimension, path, item, format!("{what} has a zero-sized dimension"));
            }
        }
        if let Some(l) = &r.location {
            self.scope(&l.bank, own, ancestors, path, item, "bank expression");
        }
        if matches!(r.dir, Direction::Out | Direction::InOut) && r.agg.is_none() {
            self.error(Code::MissingAggregation, path, item, format!("{what} writes without an aggregation"));
        }
        let Some((pb, _)) = parent else {
            if r.dims.iter().any(|d| !d.offset.is_constant()) {
                self.error(Code::NonConstantRootOffset, path, item, format!("root {what} has a non-constant offset"));
            }
            return;
        };
        if r.dir == Direction::Temp {
            return;
        }
        let Some(pr) = pb.refinement(&r.buffer) else {
            self.error(
                Code::UnknownBuffer,
                path,
                item,
                format!("buffer `{}` is not declared in the parent block", r.buffer),
            );
            return;
        };
        if pr.dims.len() != r.dims.len() {
            self.error(
                Code::RankMismatch,
                path,
                item,
                format!("{what} has rank {}, parent has {}", r.dims.len(), pr.dims.len()),
            );
            return;
        }
        if pr.strides() != r.strides() {
            self.error(Code::StrideMismatch, path, item, format!("{what} strides differ from the parent's"));
        }
        if pr.dtype != r.dtype {
            self.error(Code::DtypeMismatch, path, item, format!("{what} is {} but the parent is {}", r.dtype, pr.dtype));
        }
        if (r.dir.reads() && !pr.dir.reads()) || (r.dir.writes() && !pr.dir.writes()) {
            self.error(
                Code::DirectionMismatch,
                path,
                item,
                format!("{what} is `{}` but the parent passes it as `{}`", r.dir, pr.dir),
            );
        }
        if r.dims.iter().any(|d| d.size == 0) || r.dims.iter().any(|d| d.offset.names().any(|n| !own.contains_key(n))) {
            return;
        }
        // Box containment, falling back to the tight-window rule.
        let mut overhang = Vec::new();
        for (d, (cd, pd)) in r.dims.iter().zip(&pr.dims).enumerate() {
            let (lo, hi) = cd.offset.bounds_with(|n| own.get(n).copied()).expect("scoped");
            if lo < 0 || hi + cd.size as i64 > pd.size as i64 {
                overhang.push((d, lo, hi + cd.size as i64 - 1));
            }
        }
        if overhang.is_empty() {
            return;
        }
        let needed = needed_span(b, r, own);
        let tight = needed.as_ref().is_some_and(|need| {
            overhang
                .iter()
                .all(|&(d, _, _)| need[d].0 >= 0 && need[d].1 == r.dims[d].size as i64 - 1)
        });
        let leaves_inside = tight
            && match leaf_access_bounds(b, &r.buffer, &|n| own.get(n).copied()) {
                Ok(Some(lb)) => lb
                    .dims
                    .iter()
                    .zip(&pr.dims)
                    .all(|(&(lo, hi), pd)| lo >= 0 && hi < pd.size as i64),
                // Nothing accessed, or a scoping error reported elsewhere.
                Ok(None) | Err(_) => true,
            };
        if !leaves_inside {
            let (d, lo, hi) = overhang[0];
            self.error(
                Code::RefinementOutOfBounds,
                path,
                item,
                format!(
                    "{what} reaches [{lo}, {hi}] in dimension {d}, outside the parent extent [0, {})",
                    pr.dims[d].size
                ),
            );
        }
    }

    fn special(&mut self, b: &Block, op: crate::ir::SpecialOp, args: &[String], path: &[usize], item: NodeItem) {
        if args.len() != 3 {
            self.error(Code::ArityMismatch, path, item, format!("`{op}` takes (out, src, idx)"));
            return;
        }
        let mut refs = Vec::new();
        for (k, a) in args.iter().enumerate() {
            match b.refinement(a) {
                None => {
                    self.error(Code::UnknownBuffer, path, item, format!("undeclared buffer `{a}`"));
                    return;
                }
                Some(r) => {
                    if k == 0 && !r.dir.writes() {
                        self.error(Code::DirectionMismatch, path, item, format!("`{op}` writes read-only `{a}`"));
                    }
                    if k > 0 && !r.dir.reads() {
                        self.error(Code::DirectionMismatch, path, item, format!("`{op}` reads write-only `{a}`"));
                    }
                    refs.push(r);
                }
            }
        }
        let (out, src, idx) = (refs[0].sizes(), refs[1].sizes(), refs[2].sizes());
        let lead = match op {
            crate::ir::SpecialOp::Gather => out.first(),
            crate::ir::SpecialOp::Scatter => src.first(),
        };
        if idx.len() != 1 || out.len() != src.len() || out.is_empty() || Some(&idx[0]) != lead || out[1..] != src[1..] {
            self.error(
                Code::InvalidSpecial,
                path,
                item,
                format!("`{op}` needs a rank-1 index matching the leading dimension and equal trailing shapes"),
            );
        }
    }
}

/// Hull of coordinates of `r`'s window used directly by `b`'s statements
/// and by its children's refinements, per dimension.
fn needed_span(b: &Block, r: &Refinement, own: &Bounds) -> Option<Vec<(i64, i64)>> {
    let mut acc: Option<Vec<(i64, i64)>> = None;
    let mut add = |span: Vec<(i64, i64)>| match &mut acc {
        None => acc = Some(span),
        Some(a) => {
            for (x, y) in a.iter_mut().zip(span) {
                x.0 = x.0.min(y.0);
                x.1 = x.1.max(y.1);
            }
        }
    };
    for s in &b.statements {
        match s {
            Statement::Load { buffer, .. } | Statement::Store { buffer, .. } if *buffer == r.buffer => {
                add(vec![(0, 0); r.dims.len()]);
            }
            Statement::Special { args, .. } if args.contains(&r.buffer) => {
                add(r.dims.iter().map(|d| (0, d.size as i64 - 1)).collect());
            }
            Statement::Block(c) => {
                let Some(cr) = c.refinement(&r.buffer) else { continue };
                if cr.dir == Direction::Temp || cr.dims.len() != r.dims.len() {
                    continue;
                }
                let mut cb: Bounds = BTreeMap::new();
                for i in &c.indexes {
                    let bound = match &i.kind {
                        IndexKind::Range(n) => (0, *n as i64 - 1),
                        IndexKind::Alias(e) => e.bounds_with(|n| own.get(n).copied()).ok()?,
                    };
                    cb.insert(i.name.clone(), bound);
                }
                let mut span = Vec::new();
                for d in &cr.dims {
                    let (lo, hi) = d.offset.bounds_with(|n| cb.get(n).copied()).ok()?;
                    span.push((lo, hi + d.size as i64 - 1));
                }
                add(span);
            }
            _ => {}
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{ConflictKind, Tensor};
    use crate::ir::DType;
    use crate::text::{parse_program, parse_syntax};

    const FIG6A: &str = include_str!("../../fixtures/fig6a_fixed.stripe");
    const FIG6B: &str = include_str!("../../fixtures/fig6b.stripe");

    fn codes(src: &str) -> Vec<Code> {
        let (p, _) = parse_syntax(src).unwrap();
        validate_static(&p).into_iter().map(|d| d.code).collect()
    }

    #[test]
    fn fixtures_are_clean() {
        assert_eq!(codes(FIG6A), vec![]);
        assert_eq!(codes(FIG6B), vec![]);
        assert_eq!(codes(include_str!("../../fixtures/fig6a.stripe")), vec![]);
    }

    #[test]
    fn deleted_alias_is_unbound_parent_index() {
        let src = FIG6B.replace("xo=3*x, ", "");
        let (p, spans) = parse_syntax(&src).unwrap();
        let diags = validate_static_with_spans(&p, &spans);
        assert!(!diags.is_empty());
        assert!(diags.iter().all(|d| d.code == Code::UnboundParentIndex));
        let first = &diags[0];
        assert_eq!(first.path, NodePath::new(&[0, 0], NodeItem::Constraint(0)));
        let span = first.span.unwrap();
        assert_eq!(&src[span.start..span.end], "-1 + xo + x + i >= 0");
        assert!(first.render("fig6b.stripe").starts_with(&format!(
            "error UnboundParentIndex fig6b.stripe:{}:{} ",
            span.line, span.column
        )));
    }

    #[test]
    fn widened_tile_window_is_out_of_bounds() {
        let src = FIG6B.replace("i8(5, 6, 8)", "i8(50, 6, 8)");
        assert_eq!(codes(&src), vec![Code::RefinementOutOfBounds]);
    }

    #[test]
    fn overhang_without_constraints_is_out_of_bounds() {
        let src = FIG6B.replace("\t\t\t-1 + xo + x + i >= 0\n", "");
        assert_eq!(codes(&src), vec![Code::RefinementOutOfBounds]);
    }

    #[test]
    fn structural_errors() {
        let cases = [
            ("block [] ( out O[0] i32(1):(1) ) { }", Code::MissingAggregation),
            ("block [x:2] ( in A[x] i32(1):(1) ) { }", Code::NonConstantRootOffset),
            (
                "block [] ( in A[0] i32(4):(1) ) { block [x:4] ( in A[x] i32(1):(2) ) { } }",
                Code::StrideMismatch,
            ),
            (
                "block [] ( in A[0] i32(4):(1) ) { block [x:4] ( in A[x] i8(1):(1) ) { } }",
                Code::DtypeMismatch,
            ),
            (
                "block [] ( in A[0] i32(4):(1) ) { block [x:4] ( in A[x, 0] i32(1, 1):(1, 1) ) { } }",
                Code::RankMismatch,
            ),
            (
                "block [] ( in A[0] i32(4):(1) ) { block [x:4] ( out A[x]:add i32(1):(1) ) { } }",
                Code::DirectionMismatch,
            ),
            ("block [] ( in A[0] i32(4):(1) ) { block [x:4] ( in B[x] i32(1):(1) ) { } }", Code::UnknownBuffer),
            ("block [] ( in A[0] i32(4):(1) ) { $a = load(A) }", Code::NonScalarAccess),
            ("block [] ( out A[0]:add i32(1):(1) ) { A = store($q) }", Code::UndefinedTemp),
            ("block [x:2, x:3] ( ) { }", Code::DuplicateIndex),
            ("block [] ( in A[0] i32(4):(1) ) { block [x:5] ( in A[x] i32(1):(1) ) { } }", Code::RefinementOutOfBounds),
            ("block [] ( ) { block [x:2] ( ) { block [y:2] ( x - y >= 0 ) { } } }", Code::UnboundParentIndex),
            ("block [] ( ) { block [x:2] ( z >= 0 ) { } }", Code::UnboundParentIndex),
            ("block [x:2] ( z >= 0 ) { }", Code::UnboundIndex),
            ("block [] ( ) { block [x:2, y=q] ( ) { } }", Code::UnboundIndex),
        ];
        for (src, code) in cases {
            assert_eq!(codes(src), vec![code], "{src}");
        }
    }

    #[test]
    fn special_shapes() {
        let ok = "block [] ( in T[0, 0] i32(4, 2):(2, 1)  in IDX[0] i32(3):(1)  out G[0, 0]:assign i32(3, 2):(2, 1) ) {
            special gather(G, T, IDX) }";
        assert_eq!(codes(ok), vec![]);
        let bad = ok.replace("IDX[0] i32(3)", "IDX[0] i32(2)");
        assert_eq!(codes(&bad), vec![Code::InvalidSpecial]);
    }

    fn conv_inputs(p: &Program) -> BufferStore {
        let mut s = BufferStore::zeros_for(p);
        s.insert("I", Tensor::from_values(DType::I32, (0..1536).map(|v| v % 5)));
        s.insert("F", Tensor::from_values(DType::I32, (0..1152).map(|v| v % 3)));
        s
    }

    #[test]
    fn dynamic_checks_on_fig6() {
        let p = parse_program(&FIG6A.replace("i8(", "i32(")).unwrap();
        assert!(check_parallel_semantics(&p, conv_inputs(&p)).unwrap().is_empty());
        let q = parse_program(&FIG6A.replace("i8(", "i32(").replace("O[x, y, k]:add", "O[x, y, k]:assign")).unwrap();
        let r = check_parallel_semantics(&q, conv_inputs(&q)).unwrap();
        let assigns: Vec<_> = r.of_kind(ConflictKind::Assign).collect();
        assert_eq!(assigns.len(), 12 * 16 * 16);
        let interior = assigns.iter().find(|c| c.element == 5 * 256 + 7 * 16 + 3).unwrap();
        assert_eq!(interior.writers, 72);
    }
}
