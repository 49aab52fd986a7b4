use std::collections::HashMap;
use std::fmt;

/// Location of a parsed node: 1-based line/column of its first token and the
/// byte range it covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SourceSpan {
    pub line: u32,
    pub column: u32,
    pub start: usize,
    pub end: usize,
}

impl SourceSpan {
    pub fn join(self, other: SourceSpan) -> SourceSpan {
        SourceSpan {
            end: other.end.max(self.end),
            ..self
        }
    }

    pub fn contains(&self, other: &SourceSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// Which part of a block a path points at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeItem {
    Block,
    Index(usize),
    Constraint(usize),
    Refinement(usize),
    Statement(usize),
}

/// Addresses an IR node: statement indexes from the root down to a block,
/// then an item within that block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodePath {
    pub block: Vec<usize>,
    pub item: NodeItem,
}

impl NodePath {
    pub fn new(block: &[usize], item: NodeItem) -> Self {
        NodePath {
            block: block.to_vec(),
            item,
        }
    }

    pub fn block(block: &[usize]) -> Self {
        Self::new(block, NodeItem::Block)
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("root")?;
        for i in &self.block {
            write!(f, "/{i}")?;
        }
        match self.item {
            NodeItem::Block => Ok(()),
            NodeItem::Index(i) => write!(f, ".index[{i}]"),
            NodeItem::Constraint(i) => write!(f, ".constraint[{i}]"),
            NodeItem::Refinement(i) => write!(f, ".refinement[{i}]"),
            NodeItem::Statement(i) => write!(f, ".stmt[{i}]"),
        }
    }
}

/// Side table from IR nodes to where they were parsed.
#[derive(Debug, Clone, Default)]
pub struct SpanMap {
    spans: HashMap<NodePath, SourceSpan>,
}

impl SpanMap {
    pub fn insert(&mut self, path: NodePath, span: SourceSpan) {
        self.spans.insert(path, span);
    }

    pub fn get(&self, path: &NodePath) -> Option<SourceSpan> {
        self.spans.get(path).copied()
    }

    /// The span of `path`, or of the nearest enclosing block that has one.
    pub fn nearest(&self, path: &NodePath) -> Option<SourceSpan> {
        if let Some(s) = self.get(path) {
            return Some(s);
        }
        let mut block = path.block.clone();
        loop {
            if let Some(s) = self.get(&NodePath::block(&block)) {
                return Some(s);
            }
            block.pop()?;
        }
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodePath, &SourceSpan)> {
        self.spans.iter()
    }
}
