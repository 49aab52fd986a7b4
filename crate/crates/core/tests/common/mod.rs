#![allow(dead_code)]

use std::path::PathBuf;

use nestpoly::interp::{enumerate_points, execute, BufferStore};
use nestpoly::ir::{AggOp, Block, DType, Program, Statement};
use nestpoly::kernels::{conv2d, matmul, pool};
use nestpoly::passes::{tile_rewrite, TileShape};
use nestpoly::text::parse_program;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

pub fn fixture(name: &str) -> Program {
    parse_program(&fixture_text(name)).unwrap()
}

pub fn i32_variant(name: &str) -> Program {
    parse_program(&fixture_text(name).replace("i8(", "i32(")).unwrap()
}

pub fn leaf(p: &Program) -> &Block {
    p.root.children().next().unwrap()
}

pub fn with_statement(p: &Program, k: usize, b: Block) -> Program {
    let mut q = p.clone();
    q.root.statements[k] = Statement::Block(Box::new(b));
    q
}

/// A matmul, convolution or pooling kernel with every dimension at most 32.
pub fn random_kernel(rng: &mut impl Rng) -> Program {
    let dtype = *[DType::I8, DType::I16, DType::I32].choose(rng).unwrap();
    match rng.gen_range(0..3) {
        0 => matmul(rng.gen_range(1..=32), rng.gen_range(1..=32), rng.gen_range(1..=16), dtype),
        1 => {
            let kh = *[1, 3].choose(rng).unwrap();
            let kw = *[1, 3].choose(rng).unwrap();
            conv2d(rng.gen_range(1..=16), rng.gen_range(1..=16), rng.gen_range(1..=4), rng.gen_range(1..=4), kh, kw, dtype)
        }
        _ => {
            let (ph, pw) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
            let agg = *[AggOp::Add, AggOp::Max, AggOp::Min].choose(rng).unwrap();
            pool(agg, ph * rng.gen_range(1..=8), pw * rng.gen_range(1..=8), rng.gen_range(1..=8), ph, pw, dtype)
        }
    }
}

/// Any legal tile per ranged index, divisor or not, either split mode.
pub fn random_tiles(b: &Block, rng: &mut impl Rng) -> TileShape {
    let mut ts = TileShape::new(b.ranged().map(|(n, r)| (n.to_string(), rng.gen_range(1..=r))).collect::<Vec<_>>());
    ts.interleaved = rng.gen_bool(0.3);
    ts
}

pub fn tiled(p: &Program, ts: &TileShape) -> Program {
    with_statement(p, 0, tile_rewrite(leaf(p), ts).unwrap())
}

/// Iteration points of every leaf block under the root, constraints applied.
pub fn leaf_points(p: &Program) -> u64 {
    fn rec(b: &Block, env: &std::collections::BTreeMap<String, i64>) -> u64 {
        let pts = enumerate_points(b, env).unwrap();
        if !b.has_child_blocks() {
            return pts.len() as u64;
        }
        let mut n = 0;
        for pt in &pts {
            let mut e = env.clone();
            e.extend(pt.iter().map(|(k, v)| (k.clone(), *v)));
            n += b.children().map(|c| rec(c, &e)).sum::<u64>();
        }
        n
    }
    p.root.children().map(|c| rec(c, &Default::default())).sum()
}

pub fn outputs_equal(a: &Program, b: &Program, s: &BufferStore) -> bool {
    let (x, y) = (execute(a, s.clone()).unwrap(), execute(b, s.clone()).unwrap());
    a.outputs().iter().all(|r| x.get(&r.buffer) == y.get(&r.buffer))
}
