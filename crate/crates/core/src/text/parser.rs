use std::collections::BTreeSet;

use super::lexer::{tokenize, Tok, Token};
use super::span::{NodeItem, NodePath, SourceSpan, SpanMap};
use super::ParseError;
use crate::ir::{
    Affine, AggOp, Block, Constraint, DType, Dim, Direction, Index, IndexKind, IntrinsicOp, Location, Operand,
    Program, Refinement, SpecialOp, Statement,
};

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    spans: SpanMap,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> SourceSpan {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError::Syntax {
            span: self.span(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok) -> PResult<SourceSpan> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            self.err(format!("expected {}, found {}", tok.describe(), self.peek().describe()))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            t => self.err(format!("expected a name, found {}", t.describe())),
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<SourceSpan> {
        match self.peek() {
            Tok::Ident(s) if s == kw => Ok(self.bump().span),
            t => self.err(format!("expected `{kw}`, found {}", t.describe())),
        }
    }

    fn int(&mut self) -> PResult<i64> {
        let neg = self.eat(&Tok::Minus);
        match *self.peek() {
            Tok::Int(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            ref t => self.err(format!("expected an integer, found {}", t.describe())),
        }
    }

    fn positive(&mut self, what: &str) -> PResult<u64> {
        let span = self.span();
        let v = self.int()?;
        if v < 1 {
            return Err(ParseError::Syntax {
                span,
                message: format!("{what} must be at least 1, found {v}"),
            });
        }
        Ok(v as u64)
    }

    fn affine(&mut self) -> PResult<Affine> {
        let mut acc = Affine::zero();
        let mut sign = if self.eat(&Tok::Minus) { -1 } else { 1 };
        loop {
            acc += self.term()? * sign;
            sign = match self.peek() {
                Tok::Plus => 1,
                Tok::Minus => -1,
                _ => return Ok(acc),
            };
            self.bump();
        }
    }

    fn term(&mut self) -> PResult<Affine> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                if self.eat(&Tok::Star) {
                    let name = self.ident()?;
                    Ok(Affine::term(name, v))
                } else {
                    Ok(Affine::constant(v))
                }
            }
            Tok::Ident(name) => {
                self.bump();
                if self.eat(&Tok::Star) {
                    let v = self.int()?;
                    Ok(Affine::term(name, v))
                } else {
                    Ok(Affine::var(name))
                }
            }
            t => self.err(format!("expected an affine term, found {}", t.describe())),
        }
    }

    fn list<T>(&mut self, close: Tok, mut item: impl FnMut(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        let mut out = Vec::new();
        if self.eat(&close) {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat(&Tok::Comma) {
                continue;
            }
            self.expect(close.clone())?;
            return Ok(out);
        }
    }

    fn block(&mut self, path: &mut Vec<usize>) -> PResult<Block> {
        let start = self.keyword("block")?;
        let mut b = Block::new();
        self.expect(Tok::LBracket)?;
        let mut idx = 0;
        b.indexes = self.list(Tok::RBracket, |p| {
            let s = p.span();
            let name = p.ident()?;
            let kind = if p.eat(&Tok::Colon) {
                IndexKind::Range(p.positive("index range")?)
            } else if p.eat(&Tok::Eq) {
                IndexKind::Alias(p.affine()?)
            } else {
                return p.err(format!("expected `:` or `=` after index `{name}`"));
            };
            p.spans
                .insert(NodePath::new(path, NodeItem::Index(idx)), s.join(p.prev_span()));
            idx += 1;
            Ok(Index { name, kind })
        })?;
        if self.eat(&Tok::Colon) {
            b.count_hint = Some(self.int()? as u64);
        }
        self.expect(Tok::LParen)?;
        while !self.eat(&Tok::RParen) {
            let s = self.span();
            match self.peek().clone() {
                Tok::Tag(t) => {
                    self.bump();
                    b.tags.insert(t);
                }
                Tok::Ident(kw)
                    if matches!(kw.as_str(), "in" | "out" | "inout" | "temp")
                        && matches!(self.peek_at(1), Tok::Ident(_)) =>
                {
                    let r = self.refinement()?;
                    self.spans.insert(
                        NodePath::new(path, NodeItem::Refinement(b.refinements.len())),
                        s.join(self.prev_span()),
                    );
                    b.refinements.push(r);
                }
                Tok::Eof => return self.err("unterminated block header"),
                _ => {
                    let lhs = self.affine()?;
                    self.expect(Tok::Ge)?;
                    let rhs = self.int()?;
                    self.spans.insert(
                        NodePath::new(path, NodeItem::Constraint(b.constraints.len())),
                        s.join(self.prev_span()),
                    );
                    b.constraints.push(Constraint::new(lhs - rhs));
                }
            }
        }
        self.expect(Tok::LBrace)?;
        while !self.eat(&Tok::RBrace) {
            if let (Tok::Int(_), Tok::Colon) = (self.peek(), self.peek_at(1)) {
                self.bump();
                self.bump();
            }
            let s = self.span();
            let i = b.statements.len();
            path.push(i);
            let stmt = self.statement(path);
            path.pop();
            b.statements.push(stmt?);
            self.spans
                .insert(NodePath::new(path, NodeItem::Statement(i)), s.join(self.prev_span()));
        }
        self.spans.insert(NodePath::block(path), start.join(self.prev_span()));
        Ok(b)
    }

    fn refinement(&mut self) -> PResult<Refinement> {
        let dir = match self.ident()?.as_str() {
            "in" => Direction::In,
            "out" => Direction::Out,
            "inout" => Direction::InOut,
            _ => Direction::Temp,
        };
        let buffer = self.ident()?;
        self.expect(Tok::LBracket)?;
        let offsets = self.list(Tok::RBracket, |p| p.affine())?;
        let agg = if self.eat(&Tok::Colon) {
            let s = self.span();
            let name = self.ident()?;
            Some(name.parse::<AggOp>().map_err(|message| ParseError::Syntax { span: s, message })?)
        } else {
            None
        };
        let s = self.span();
        let dtype = self
            .ident()?
            .parse::<DType>()
            .map_err(|message| ParseError::Syntax { span: s, message })?;
        self.expect(Tok::LParen)?;
        let sizes = self.list(Tok::RParen, |p| p.positive("refinement size"))?;
        self.expect(Tok::Colon)?;
        self.expect(Tok::LParen)?;
        let strides = self.list(Tok::RParen, |p| p.int())?;
        if offsets.len() != sizes.len() || sizes.len() != strides.len() {
            return Err(ParseError::Syntax {
                span: s,
                message: format!(
                    "refinement `{buffer}` has {} offsets, {} sizes and {} strides",
                    offsets.len(),
                    sizes.len(),
                    strides.len()
                ),
            });
        }
        let location = if self.eat(&Tok::At) {
            let unit = self.ident()?;
            self.expect(Tok::LBracket)?;
            let bank = self.affine()?;
            self.expect(Tok::RBracket)?;
            self.expect(Tok::Colon)?;
            let address = self.int()?;
            if address < 0 {
                return self.err("location address must be non-negative");
            }
            Some(Location {
                unit,
                bank,
                address: address as u64,
            })
        } else {
            None
        };
        let dims = offsets
            .into_iter()
            .zip(sizes)
            .zip(strides)
            .map(|((o, s), st)| Dim::new(o, s, st))
            .collect();
        Ok(Refinement {
            dir,
            buffer,
            agg,
            dtype,
            dims,
            location,
        })
    }

    fn statement(&mut self, path: &mut Vec<usize>) -> PResult<Statement> {
        match self.peek().clone() {
            Tok::Ident(kw) if kw == "block" => Ok(Statement::Block(Box::new(self.block(path)?))),
            Tok::Ident(kw) if kw == "special" && matches!(self.peek_at(1), Tok::Ident(_)) => {
                self.bump();
                let s = self.span();
                let name = self.ident()?;
                let op = SpecialOp::from_name(&name).ok_or(ParseError::Syntax {
                    span: s,
                    message: format!("unknown special `{name}`"),
                })?;
                self.expect(Tok::LParen)?;
                let args = self.list(Tok::RParen, |p| p.ident())?;
                Ok(Statement::Special { op, args })
            }
            Tok::Ident(buffer) => {
                self.bump();
                self.expect(Tok::Eq)?;
                self.keyword("store")?;
                self.expect(Tok::LParen)?;
                let from = match self.bump().tok {
                    Tok::Temp(t) => t,
                    t => {
                        return Err(ParseError::Syntax {
                            span: self.prev_span(),
                            message: format!("store expects a `$temp`, found {}", t.describe()),
                        })
                    }
                };
                self.expect(Tok::RParen)?;
                Ok(Statement::Store { buffer, from })
            }
            Tok::Temp(into) => {
                self.bump();
                self.expect(Tok::Eq)?;
                let s = self.span();
                let name = self.ident()?;
                self.expect(Tok::LParen)?;
                if name == "load" {
                    let buffer = self.ident()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Statement::Load { into, buffer });
                }
                let op = IntrinsicOp::from_name(&name).ok_or(ParseError::Syntax {
                    span: s,
                    message: format!("unknown intrinsic `{name}`"),
                })?;
                let args = self.list(Tok::RParen, |p| match p.peek().clone() {
                    Tok::Temp(t) => {
                        p.bump();
                        Ok(Operand::Temp(t))
                    }
                    _ => Ok(Operand::Const(p.int()?)),
                })?;
                if args.len() != op.arity() {
                    return Err(ParseError::Syntax {
                        span: s,
                        message: format!("`{name}` takes {} operands, found {}", op.arity(), args.len()),
                    });
                }
                Ok(Statement::Intrinsic { into, op, args })
            }
            t => self.err(format!("expected a statement, found {}", t.describe())),
        }
    }
}

/// Parses a program and returns it together with the source span of every
/// node.
pub fn parse_program_with_spans(text: &str) -> Result<(Program, SpanMap), ParseError> {
    let (p, spans) = parse_syntax(text)?;
    check_scopes(&p.root, None, &mut Vec::new(), &spans)?;
    Ok((p, spans))
}

/// Syntax only: scoping mistakes are left for the validator to report.
pub fn parse_syntax(text: &str) -> Result<(Program, SpanMap), ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        spans: SpanMap::default(),
    };
    let root = p.block(&mut Vec::new())?;
    if *p.peek() != Tok::Eof {
        return p.err(format!("expected end of input, found {}", p.peek().describe()));
    }
    Ok((Program::new(root), p.spans))
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    parse_program_with_spans(text).map(|(p, _)| p)
}

fn check_scopes(b: &Block, parent: Option<&Block>, path: &mut Vec<usize>, spans: &SpanMap) -> PResult<()> {
    let here = path.clone();
    let scope_err = |item: NodeItem, message: String| ParseError::Scope {
        span: spans.nearest(&NodePath::new(&here, item)).unwrap_or_default(),
        message,
    };
    let parent_names: BTreeSet<&str> = parent
        .map(|p| p.indexes.iter().map(|i| i.name.as_str()).collect())
        .unwrap_or_default();
    let mut own = BTreeSet::new();
    for (k, i) in b.indexes.iter().enumerate() {
        if !own.insert(i.name.as_str()) {
            return Err(scope_err(NodeItem::Index(k), format!("index `{}` declared twice", i.name)));
        }
        if let IndexKind::Alias(e) = &i.kind {
            if let Some(n) = e.names().find(|n| !parent_names.contains(n)) {
                return Err(scope_err(
                    NodeItem::Index(k),
                    format!("alias `{}` refers to `{n}`, which is not an index of the parent block", i.name),
                ));
            }
        }
    }
    let unbound = |e: &Affine| e.names().find(|n| !own.contains(n)).map(str::to_string);
    for (k, c) in b.constraints.iter().enumerate() {
        if let Some(n) = unbound(&c.expr) {
            return Err(scope_err(NodeItem::Constraint(k), format!("undeclared index `{n}` in constraint")));
        }
    }
    let mut buffers = BTreeSet::new();
    for (k, r) in b.refinements.iter().enumerate() {
        for d in &r.dims {
            if let Some(n) = unbound(&d.offset) {
                return Err(scope_err(
                    NodeItem::Refinement(k),
                    format!("undeclared index `{n}` in refinement `{}`", r.buffer),
                ));
            }
        }
        if let Some(l) = &r.location {
            if let Some(n) = unbound(&l.bank) {
                return Err(scope_err(NodeItem::Refinement(k), format!("undeclared index `{n}` in bank")));
            }
        }
        if let Some(p) = parent {
            if r.dir != Direction::Temp && p.refinement(&r.buffer).is_none() {
                return Err(scope_err(
                    NodeItem::Refinement(k),
                    format!("buffer `{}` is not declared in the parent block", r.buffer),
                ));
            }
        }
        buffers.insert(r.buffer.as_str());
    }
    for (k, s) in b.statements.iter().enumerate() {
        if let Statement::Block(c) = s {
            path.push(k);
            check_scopes(c, Some(b), path, spans)?;
            path.pop();
            continue;
        }
        let (reads, writes) = s.buffer_uses();
        if let Some(n) = reads.iter().chain(&writes).find(|n| !buffers.contains(*n)) {
            return Err(scope_err(NodeItem::Statement(k), format!("undeclared buffer `{n}`")));
        }
    }
    Ok(())
}
