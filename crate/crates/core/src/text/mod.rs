//! The textual IR format (`.stripe` files).
//!
//! ```text
//! block [x:12, y:16, i:3, j:3, c:8, k:16] (
//!     #tag
//!     -1 + x + i >= 0
//!     in I[x + i - 1, y + j - 1, c] i8(1, 1, 1):(128, 8, 1)
//!     out O[x, y, k]:add i8(1, 1, 1):(256, 16, 1) @SRAM[0]:0
//! ) {
//!     0: $I = load(I)
//!     1: O = store($I)
//! }
//! ```
//!
//! Statement labels are accepted and ignored; the printer always emits them
//! as ordinals. Alias indexes (`xo=3*x`) are written after ranged ones.

mod lexer;
mod parser;
mod printer;
mod span;

use thiserror::Error;

pub use parser::{parse_program, parse_program_with_spans, parse_syntax};
pub use printer::{print_block_text, print_program};
pub use span::{NodeItem, NodePath, SourceSpan, SpanMap};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("SyntaxError at {span}: {message}")]
    Syntax { span: SourceSpan, message: String },
    #[error("ScopeError at {span}: {message}")]
    Scope { span: SourceSpan, message: String },
}

impl ParseError {
    pub fn span(&self) -> SourceSpan {
        match self {
            ParseError::Syntax { span, .. } | ParseError::Scope { span, .. } => *span,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ParseError::Syntax { .. } => "SyntaxError",
            ParseError::Scope { .. } => "ScopeError",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            ParseError::Syntax { message, .. } | ParseError::Scope { message, .. } => message,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{structural_equal, Affine, Program, Statement};

    pub(crate) const FIG6A: &str = include_str!("../../fixtures/fig6a.stripe");
    pub(crate) const FIG6B: &str = include_str!("../../fixtures/fig6b.stripe");

    #[test]
    fn empty_block() {
        let p = parse_program("block [] ( ) { }").unwrap();
        assert!(p.root.statements.is_empty() && p.root.refinements.is_empty());
        assert_eq!(print_program(&Program::empty()), "block []:1 (\n) {\n}\n");
    }

    #[test]
    fn fig6a_shape() {
        let p = parse_program(FIG6A).unwrap();
        assert_eq!(p.root.refinements.len(), 3);
        let inner = p.root.statements[0].as_block().unwrap();
        assert_eq!(inner.indexes.len(), 6);
        assert_eq!(inner.constraints.len(), 4);
        assert_eq!(inner.refinements.len(), 3);
        assert_eq!(inner.statements.len(), 4);
        assert!(inner.statements.iter().all(|s| !matches!(s, Statement::Block(_))));
    }

    #[test]
    fn fig6b_middle_refinement() {
        let p = parse_program(FIG6B).unwrap();
        let mid = p.root.statements[0].as_block().unwrap();
        let inner = mid.statements[0].as_block().unwrap();
        assert!(!inner.has_child_blocks());
        let i = mid.refinement("I").unwrap();
        assert_eq!(
            i.offsets(),
            vec![Affine::term("x", 3) - 1, Affine::term("y", 4) - 1, Affine::zero()]
        );
        assert_eq!(i.sizes(), vec![5, 6, 8]);
        assert_eq!(i.strides(), vec![128, 8, 1]);
        assert_eq!(inner.aliases().count(), 2);
    }

    #[test]
    fn round_trips_fixtures() {
        for src in [FIG6A, FIG6B] {
            let p = parse_program(src).unwrap();
            let text = print_program(&p);
            let q = parse_program(&text).unwrap();
            assert!(structural_equal(&p.root, &q.root, false));
            assert_eq!(text, print_program(&q));
        }
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_program("block [x:2] (\n  in A[x] i8(1):(1)\n) {\n  0: $a = load(A\n}").unwrap_err();
        assert_eq!(err.code(), "SyntaxError");
        assert_eq!(err.span().line, 5);
        let err = parse_program("garbage").unwrap_err();
        assert_eq!(err.span().line, 1);
        assert_eq!(err.span().column, 1);
    }

    #[test]
    fn scope_errors() {
        let err = parse_program("block [] ( in A[0] i8(4):(1) ) { block [x:4] ( in A[y] i8(1):(1) ) { } }").unwrap_err();
        assert_eq!(err.code(), "ScopeError");
        let err = parse_program("block [] ( in A[0] i8(4):(1) ) { block [x:4] ( in B[x] i8(1):(1) ) { } }").unwrap_err();
        assert_eq!(err.code(), "ScopeError");
        let err =
            parse_program("block [] ( in A[0] i8(4):(1) ) { block [x:4] ( in A[x] i8(1):(1) ) { $a = load(Q) } }")
                .unwrap_err();
        assert!(err.message().contains("`Q`"));
    }

    #[test]
    fn tags_locations_and_specials_round_trip() {
        let src = "block []:1 (
            in T[0] i32(8):(1)
            in IDX[0] i32(4):(1)
            out O[0]:assign i32(4):(1)
        ) {
            block [k:2] (
                #tensorize
                #hot
                in T[0] i32(8):(1) @SRAM[k]:16
                in IDX[0] i32(4):(1)
                out O[0]:max i32(4):(1)
            ) {
                special gather(O, T, IDX)
            }
        }";
        let p = parse_program(src).unwrap();
        let text = print_program(&p);
        assert!(text.contains("#hot"));
        assert!(text.contains("@SRAM[k]:16"));
        assert!(text.contains("special gather(O, T, IDX)"));
        let q = parse_program(&text).unwrap();
        assert_eq!(p, q);
    }
}
