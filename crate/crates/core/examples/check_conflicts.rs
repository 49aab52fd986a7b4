//! Static validation plus the dynamic parallel-semantics check. The conv
//! with an `assign` output passes static checks but every output element is
//! written by many iterations.

use nestpoly::interp::{BufferStore, ConflictKind};
use nestpoly::text::parse_program;
use nestpoly::validate::{check_parallel_semantics, validate_static};

fn main() {
    let p = parse_program(include_str!("../fixtures/conv_assign.stripe")).unwrap();
    println!("static diagnostics: {}", validate_static(&p).len());
    let report = check_parallel_semantics(&p, BufferStore::zeros_for(&p)).unwrap();
    let worst = report.of_kind(ConflictKind::Assign).map(|c| c.writers).max().unwrap_or(0);
    println!("assign conflicts: {}, most writers per element: {worst}", report.conflicts.len());

    let bad = parse_program("block [] ( in A[0] i32(4):(1) ) { block [x:5] ( in A[x] i32(1):(1) ) { } }").unwrap();
    for d in validate_static(&bad) {
        println!("{d}");
    }
}
