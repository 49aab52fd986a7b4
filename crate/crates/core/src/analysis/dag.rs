use std::collections::BTreeMap;
use std::fmt::{self, Write};

use crate::ir::{Affine, Block, IndexKind, Statement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DepKind {
    /// Write then read.
    True,
    /// Read then write.
    Anti,
    /// Write then write.
    Output,
}

impl fmt::Display for DepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DepKind::True => "true",
            DepKind::Anti => "anti",
            DepKind::Output => "output",
        })
    }
}

/// `from` precedes `to` in the statement list. `on` is a buffer name, or
/// `$name` for a scalar temp.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub on: String,
    pub kind: DepKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DependencyDag {
    pub nodes: Vec<usize>,
    pub edges: Vec<Edge>,
}

impl DependencyDag {
    pub fn predecessors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.to == node).map(|e| e.from)
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.iter().any(|e| e.from == from && e.to == to)
    }

    /// True iff `order` lists every node once and respects every edge.
    pub fn is_topological(&self, order: &[usize]) -> bool {
        let pos: BTreeMap<usize, usize> = order.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        pos.len() == self.nodes.len()
            && self.nodes.iter().all(|n| pos.contains_key(n))
            && self.edges.iter().all(|e| pos[&e.from] < pos[&e.to])
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph deps {\n");
        for n in &self.nodes {
            let _ = writeln!(s, "  s{n};");
        }
        for e in &self.edges {
            let _ = writeln!(s, "  s{} -> s{} [label=\"{} {}\"];", e.from, e.to, e.on, e.kind);
        }
        s.push_str("}\n");
        s
    }
}

/// Per-dimension interval of touched coordinates in the frame of the
/// enclosing block's window: `[lo + shift, hi + shift]`, where `shift` is an
/// affine function of the enclosing block's indexes.
#[derive(Debug, Clone)]
struct Span {
    lo: i64,
    hi: i64,
    shift: Affine,
}

struct Access {
    buffer: String,
    write: bool,
    dims: Vec<Span>,
}

fn accesses(s: &Statement, b: &Block) -> Vec<Access> {
    let mut out = Vec::new();
    let scalar = |buffer: &str, write: bool, whole: bool| -> Option<Access> {
        let r = b.refinement(buffer)?;
        Some(Access {
            buffer: buffer.to_string(),
            write,
            dims: r
                .dims
                .iter()
                .map(|d| Span {
                    lo: 0,
                    hi: if whole { d.size as i64 - 1 } else { 0 },
                    shift: Affine::zero(),
                })
                .collect(),
        })
    };
    match s {
        Statement::Load { buffer, .. } => out.extend(scalar(buffer, false, false)),
        Statement::Store { buffer, .. } => out.extend(scalar(buffer, true, false)),
        Statement::Special { args, .. } => {
            for (k, a) in args.iter().enumerate() {
                out.extend(scalar(a, k == 0, true));
            }
        }
        Statement::Intrinsic { .. } => {}
        Statement::Block(c) => {
            let mut ranges = BTreeMap::new();
            let mut aliases = BTreeMap::new();
            for i in &c.indexes {
                match &i.kind {
                    IndexKind::Range(n) => {
                        ranges.insert(i.name.clone(), (0, *n as i64 - 1));
                    }
                    IndexKind::Alias(e) => {
                        aliases.insert(i.name.clone(), e.clone());
                    }
                }
            }
            for r in &c.refinements {
                if r.dir == crate::ir::Direction::Temp || b.refinement(&r.buffer).is_none() {
                    continue;
                }
                let dims = r
                    .dims
                    .iter()
                    .map(|d| {
                        let e = d.offset.substitute(&aliases);
                        let own = Affine::from_terms(e.terms().filter(|(n, _)| ranges.contains_key(*n)), e.get_constant());
                        let shift = e.clone() - own.clone();
                        let (lo, hi) = own.bounds_with(|n| ranges.get(n).copied()).expect("ranged");
                        Span {
                            lo,
                            hi: hi + d.size as i64 - 1,
                            shift,
                        }
                    })
                    .collect();
                if r.dir.reads() {
                    out.push(Access {
                        buffer: r.buffer.clone(),
                        write: false,
                        dims: Vec::clone(&dims),
                    });
                }
                if r.dir.writes() {
                    out.push(Access {
                        buffer: r.buffer.clone(),
                        write: true,
                        dims,
                    });
                }
            }
        }
    }
    out
}

/// Conservative: when the two shifts differ the dimension is assumed to
/// overlap.
fn may_overlap(a: &Access, b: &Access) -> bool {
    a.buffer == b.buffer
        && a.dims.iter().zip(&b.dims).all(|(p, q)| {
            if p.shift != q.shift {
                return true;
            }
            p.lo.max(q.lo) <= p.hi.min(q.hi)
        })
}

/// Edges between statements of `b` whose accesses may touch a common
/// element (buffers) or the same scalar temp.
pub fn build_dependency_dag(b: &Block) -> DependencyDag {
    let acc: Vec<Vec<Access>> = b.statements.iter().map(|s| accesses(s, b)).collect();
    let temps: Vec<(Option<&str>, Vec<&str>)> = b.statements.iter().map(Statement::temp_uses).collect();
    let mut edges = Vec::new();
    for t in 0..b.statements.len() {
        for s in 0..t {
            let mut kinds: BTreeMap<(String, DepKind), ()> = BTreeMap::new();
            for x in &acc[s] {
                for y in &acc[t] {
                    if !(x.write || y.write) || !may_overlap(x, y) {
                        continue;
                    }
                    let kind = match (x.write, y.write) {
                        (true, false) => DepKind::True,
                        (false, true) => DepKind::Anti,
                        _ => DepKind::Output,
                    };
                    kinds.insert((x.buffer.clone(), kind), ());
                }
            }
            let (sd, su) = &temps[s];
            let (td, tu) = &temps[t];
            if let Some(d) = sd {
                if tu.contains(d) {
                    kinds.insert((format!("${d}"), DepKind::True), ());
                }
                if td == &Some(*d) {
                    kinds.insert((format!("${d}"), DepKind::Output), ());
                }
            }
            if let Some(d) = td {
                if su.contains(d) {
                    kinds.insert((format!("${d}"), DepKind::Anti), ());
                }
            }
            for (on, kind) in kinds.into_keys() {
                edges.push(Edge { from: s, to: t, on, kind });
            }
        }
    }
    DependencyDag {
        nodes: (0..b.statements.len()).collect(),
        edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_program;

    fn root(src: &str) -> Block {
        parse_program(src).unwrap().root
    }

    #[test]
    fn producer_consumer_edge() {
        let b = root(
            "block [] ( in A[0] i32(8):(1)  temp T[0] i32(8):(1)  out R[0]:assign i32(8):(1) ) {
                block [x:8] ( in A[x] i32(1):(1)  out T[x]:assign i32(1):(1) ) { $a = load(A)  T = store($a) }
                block [x:8] ( in T[x] i32(1):(1)  out R[x]:assign i32(1):(1) ) { $t = load(T)  R = store($t) }
            }",
        );
        let dag = build_dependency_dag(&b);
        assert_eq!(
            dag.edges,
            vec![Edge {
                from: 0,
                to: 1,
                on: "T".into(),
                kind: DepKind::True
            }]
        );
        assert!(dag.to_dot().contains("s0 -> s1 [label=\"T true\"]"));
    }

    #[test]
    fn disjoint_halves_are_independent() {
        let b = root(
            "block [] ( out O[0]:assign i32(8):(1) ) {
                block [x:4] ( out O[x]:assign i32(1):(1) ) { $c = constant(1)  O = store($c) }
                block [x:4] ( out O[x + 4]:assign i32(1):(1) ) { $c = constant(2)  O = store($c) }
            }",
        );
        assert!(build_dependency_dag(&b).edges.is_empty());
    }

    #[test]
    fn single_statement_and_temps() {
        let b = root("block [] ( ) { $c = constant(1) }");
        assert!(build_dependency_dag(&b).edges.is_empty());
        let b = root("block [] ( out O[0]:assign i32(1):(1) ) { $c = constant(1)  $d = add($c, $c)  O = store($d) }");
        let dag = build_dependency_dag(&b);
        assert!(dag.has_edge(0, 1) && dag.has_edge(1, 2) && !dag.has_edge(0, 2));
        assert!(dag.is_topological(&[0, 1, 2]));
        assert!(!dag.is_topological(&[1, 0, 2]));
    }
}
