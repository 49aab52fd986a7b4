//! Builders for the small kernels used by tests, examples and the random
//! program generator. Every builder emits text and parses it, so the
//! results are exactly what a hand-written file would give.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::interp::BufferStore;
use crate::ir::{dense_strides, AggOp, DType, Program};
use crate::text::parse_program;

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

/// `dir NAME[offsets]:agg dtype(sizes):(strides)` with dense strides of `full`.
fn refine(dir: &str, name: &str, offsets: &[&str], agg: Option<AggOp>, dtype: DType, sizes: &[u64], full: &[u64]) -> String {
    let agg = agg.map(|a| format!(":{}", a.name())).unwrap_or_default();
    format!(
        "{dir} {name}[{}]{agg} {}({}):({})",
        offsets.join(", "),
        dtype.name(),
        join(sizes),
        join(&dense_strides(full))
    )
}

fn whole(dir: &str, name: &str, agg: Option<AggOp>, dtype: DType, full: &[u64]) -> String {
    let zeros = vec!["0"; full.len()];
    refine(dir, name, &zeros, agg, dtype, full, full)
}

fn ones(n: usize) -> Vec<u64> {
    vec![1; n]
}

fn parse(text: String) -> Program {
    parse_program(&text).unwrap_or_else(|e| panic!("kernel text does not parse: {e}\n{text}"))
}

/// Same-padded 2-D convolution `O[x,y,k] += I[x+i-p, y+j-p, c] * F[i,j,k,c]`
/// with `p = kh / 2` (and `kw / 2`), guarded by boundary constraints.
pub fn conv2d(h: u64, w: u64, c: u64, k: u64, kh: u64, kw: u64, dtype: DType) -> Program {
    let (ph, pw) = (kh / 2, kw / 2);
    let (ishape, fshape, oshape) = ([h, w, c], [kh, kw, k, c], [h, w, k]);
    let ix = format!("x+i-{ph}");
    let iy = format!("y+j-{pw}");
    parse(format!(
        "block []:1 ( {} {} {} ) {{
            block [x:{h}, y:{w}, i:{kh}, j:{kw}, c:{c}, k:{k}] (
                -{ph} + x + i >= 0
                {} - x - i >= 0
                -{pw} + y + j >= 0
                {} - y - j >= 0
                {} {} {}
            ) {{ $I = load(I)  $F = load(F)  $O = mul($I, $F)  O = store($O) }}
        }}",
        whole("in", "I", None, dtype, &ishape),
        whole("in", "F", None, dtype, &fshape),
        whole("out", "O", Some(AggOp::Assign), dtype, &oshape),
        h - 1 + ph,
        w - 1 + pw,
        refine("in", "I", &[&ix, &iy, "c"], None, dtype, &ones(3), &ishape),
        refine("in", "F", &["i", "j", "k", "c"], None, dtype, &ones(4), &fshape),
        refine("out", "O", &["x", "y", "k"], Some(AggOp::Add), dtype, &ones(3), &oshape),
    ))
}

/// `C[i,j] += A[i,l] * B[l,j]`.
pub fn matmul(m: u64, n: u64, k: u64, dtype: DType) -> Program {
    parse(format!(
        "block []:1 ( {} {} {} ) {{
            block [i:{m}, j:{n}, l:{k}] ( {} {} {} )
            {{ $a = load(A)  $b = load(B)  $c = mul($a, $b)  C = store($c) }}
        }}",
        whole("in", "A", None, dtype, &[m, k]),
        whole("in", "B", None, dtype, &[k, n]),
        whole("out", "C", Some(AggOp::Assign), dtype, &[m, n]),
        refine("in", "A", &["i", "l"], None, dtype, &[1, 1], &[m, k]),
        refine("in", "B", &["l", "j"], None, dtype, &[1, 1], &[k, n]),
        refine("out", "C", &["i", "j"], Some(AggOp::Add), dtype, &[1, 1], &[m, n]),
    ))
}

/// Non-overlapping `ph x pw` pooling of an `h x w x c` input with the
/// aggregation `agg` (max pooling for [`AggOp::Max`]). `h` and `w` must be
/// multiples of the window.
pub fn pool(agg: AggOp, h: u64, w: u64, c: u64, ph: u64, pw: u64, dtype: DType) -> Program {
    let (oh, ow) = (h / ph, w / pw);
    let ix = format!("{ph}*x+i");
    let iy = format!("{pw}*y+j");
    parse(format!(
        "block []:1 ( {} {} ) {{
            block [x:{oh}, y:{ow}, i:{ph}, j:{pw}, c:{c}] ( {} {} )
            {{ $v = load(I)  O = store($v) }}
        }}",
        whole("in", "I", None, dtype, &[h, w, c]),
        whole("out", "O", Some(AggOp::Assign), dtype, &[oh, ow, c]),
        refine("in", "I", &[&ix, &iy, "c"], None, dtype, &ones(3), &[h, w, c]),
        refine("out", "O", &["x", "y", "c"], Some(agg), dtype, &ones(3), &[oh, ow, c]),
    ))
}

pub fn maxpool(h: u64, w: u64, c: u64, ph: u64, pw: u64, dtype: DType) -> Program {
    pool(AggOp::Max, h, w, c, ph, pw, dtype)
}

/// A convolution into a block-local buffer `T` followed by `R = max(T, 0)`.
pub fn conv_relu(h: u64, w: u64, c: u64, k: u64, dtype: DType) -> Program {
    let conv = conv2d(h, w, c, k, 3, 3, dtype);
    let leaf = crate::text::print_block_text(conv.root.children().next().expect("conv has a leaf"));
    let leaf = leaf.replace("out O[", "out T[").replace("O = store", "T = store");
    let oshape = [h, w, k];
    parse(format!(
        "block []:1 ( {} {} {} {} ) {{
            {leaf}
            block [x:{h}, y:{w}, k:{k}] ( {} {} )
            {{ $t = load(T)  $z = constant(0)  $r = max($t, $z)  R = store($r) }}
        }}",
        whole("in", "I", None, dtype, &[h, w, c]),
        whole("in", "F", None, dtype, &[3, 3, k, c]),
        whole("temp", "T", None, dtype, &oshape),
        whole("out", "R", Some(AggOp::Assign), dtype, &oshape),
        refine("in", "T", &["x", "y", "k"], None, dtype, &ones(3), &oshape),
        refine("out", "R", &["x", "y", "k"], Some(AggOp::Assign), dtype, &ones(3), &oshape),
    ))
}

/// `B[x] = A[x]`.
pub fn copy1d(n: u64, dtype: DType) -> Program {
    parse(format!(
        "block []:1 ( {} {} ) {{
            block [x:{n}] ( {} {} ) {{ $a = load(A)  B = store($a) }}
        }}",
        whole("in", "A", None, dtype, &[n]),
        whole("out", "B", Some(AggOp::Assign), dtype, &[n]),
        refine("in", "A", &["x"], None, dtype, &[1], &[n]),
        refine("out", "B", &["x"], Some(AggOp::Assign), dtype, &[1], &[n]),
    ))
}

/// Buffers for `p`: inputs uniform in `lo..hi` from `seed`, outputs filled
/// with the identity of their aggregation.
pub fn random_inputs(p: &Program, seed: u64, lo: i32, hi: i32) -> BufferStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = BufferStore::zeros_for(p);
    s.init_outputs(p);
    let outputs: Vec<String> = p.outputs().iter().map(|r| r.buffer.clone()).collect();
    for (name, decl) in &p.buffers {
        if outputs.contains(name) {
            continue;
        }
        if let Some(t) = s.get_mut(name) {
            for v in &mut t.data {
                *v = decl.dtype.wrap(rng.gen_range(lo..hi) as i64);
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::execute;
    use crate::ir::structural_equal;
    use crate::validate::validate_static;

    #[test]
    fn conv_matches_fixture() {
        let fixture = parse_program(include_str!("../fixtures/fig6a_fixed.stripe")).unwrap();
        assert!(structural_equal(&conv2d(12, 16, 8, 16, 3, 3, DType::I8).root, &fixture.root, false));
    }

    #[test]
    fn kernels_validate() {
        for p in [
            matmul(4, 5, 6, DType::I32),
            maxpool(4, 6, 2, 2, 3, DType::I16),
            conv_relu(4, 5, 2, 3, DType::I32),
            copy1d(7, DType::I8),
            conv2d(4, 3, 1, 2, 1, 1, DType::I32),
            conv2d(5, 5, 2, 2, 3, 1, DType::I16),
        ] {
            assert!(validate_static(&p).is_empty(), "{}", crate::text::print_program(&p));
        }
    }

    #[test]
    fn matmul_small() {
        let p = matmul(2, 2, 2, DType::I32);
        let mut s = BufferStore::zeros_for(&p);
        s.get_mut("A").unwrap().data = vec![1, 2, 3, 4];
        s.get_mut("B").unwrap().data = vec![5, 6, 7, 8];
        assert_eq!(execute(&p, s).unwrap().get("C").unwrap().data, vec![19, 22, 43, 50]);
    }

    #[test]
    fn maxpool_and_relu() {
        let p = maxpool(2, 2, 1, 2, 2, DType::I32);
        let mut s = random_inputs(&p, 0, -5, 5);
        s.get_mut("I").unwrap().data = vec![-3, 7, 2, -9];
        assert_eq!(execute(&p, s).unwrap().get("O").unwrap().data, vec![7]);

        let p = conv_relu(3, 3, 1, 1, DType::I32);
        let out = execute(&p, random_inputs(&p, 3, -9, 9)).unwrap();
        assert!(out.get("R").unwrap().data.iter().all(|&v| v >= 0));
    }
}
