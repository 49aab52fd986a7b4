use super::PassError;
use crate::ir::{Block, Direction, Statement};

/// Re-lays out the block-local buffer `buffer` of `b` so that its dimensions
/// are dense in the order `order` (outermost first). The stride of dimension
/// `d` becomes the product of the sizes of the dimensions after `d` in that
/// order. Accesses keep their dimension order, so only strides change.
pub fn transpose_layout(b: &Block, buffer: &str, order: &[usize]) -> Result<Block, PassError> {
    let r = b.refinement(buffer).ok_or_else(|| PassError::UnknownBuffer(buffer.to_string()))?;
    if r.dir != Direction::Temp {
        return Err(PassError::ExternalBufferImmutable(buffer.to_string()));
    }
    let rank = r.dims.len();
    let mut seen = vec![false; rank];
    if order.len() != rank || order.iter().any(|&d| d >= rank || std::mem::replace(&mut seen[d], true)) {
        return Err(PassError::InvalidPermutation(format!("{order:?} for rank {rank}")));
    }
    if order.iter().enumerate().all(|(k, &d)| k == d) {
        return Ok(b.clone());
    }
    let sizes = r.sizes();
    let mut strides = vec![0i64; rank];
    let mut acc = 1i64;
    for &d in order.iter().rev() {
        strides[d] = acc;
        acc *= sizes[d] as i64;
    }
    let mut out = b.clone();
    restride(&mut out, buffer, &strides, true);
    Ok(out)
}

fn restride(b: &mut Block, buffer: &str, strides: &[i64], top: bool) {
    let Some(r) = b.refinement_mut(buffer) else { return };
    if r.dir == Direction::Temp && !top {
        return;
    }
    for (d, s) in r.dims.iter_mut().zip(strides) {
        d.stride = *s;
    }
    for st in &mut b.statements {
        if let Statement::Block(c) = st {
            restride(c, buffer, strides, false);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_program;

    fn prog() -> Block {
        parse_program(
            "block [] ( in A[0, 0, 0] i32(12, 16, 8):(128, 8, 1)  temp T[0, 0, 0] i32(12, 16, 8):(128, 8, 1)  out R[0, 0, 0]:assign i32(12, 16, 8):(128, 8, 1) ) {
                block [x:12, y:16, c:8] ( in A[x, y, c] i32(1, 1, 1):(128, 8, 1)  out T[x, y, c]:assign i32(1, 1, 1):(128, 8, 1) ) { $a = load(A)  T = store($a) }
                block [x:12, y:16, c:8] ( in T[x, y, c] i32(1, 1, 1):(128, 8, 1)  out R[x, y, c]:assign i32(1, 1, 1):(128, 8, 1) ) { $t = load(T)  R = store($t) }
            }",
        )
        .unwrap()
        .root
    }

    #[test]
    fn channel_major_strides() {
        let out = transpose_layout(&prog(), "T", &[2, 0, 1]).unwrap();
        assert_eq!(out.refinement("T").unwrap().strides(), vec![16, 1, 192]);
        for c in out.children() {
            assert_eq!(c.refinement("T").unwrap().strides(), vec![16, 1, 192]);
        }
        assert_eq!(transpose_layout(&prog(), "T", &[0, 1, 2]).unwrap(), prog());
    }

    #[test]
    fn refusals() {
        assert!(matches!(
            transpose_layout(&prog(), "A", &[2, 0, 1]),
            Err(PassError::ExternalBufferImmutable(_))
        ));
        assert!(matches!(
            transpose_layout(&prog(), "T", &[0, 0, 1]),
            Err(PassError::InvalidPermutation(_))
        ));
        assert!(matches!(transpose_layout(&prog(), "Q", &[0]), Err(PassError::UnknownBuffer(_))));
    }
}
