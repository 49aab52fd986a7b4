use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use super::{tile_rewrite, PassError, TileShape};
use crate::ir::{Block, DType, Direction, Statement};

/// Inner-block shape required by a specialized unit. `sizes` lists the
/// output indexes first, then the reduction indexes, each group in
/// declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StencilSpec {
    pub name: String,
    pub sizes: Vec<u64>,
    pub dtype: Option<DType>,
    pub tag: String,
}

impl StencilSpec {
    pub fn new(name: impl Into<String>, sizes: Vec<u64>, tag: impl Into<String>) -> Self {
        StencilSpec {
            name: name.into(),
            sizes,
            dtype: None,
            tag: tag.into(),
        }
    }
}

/// Parses the size list `16x16x4`.
pub(crate) fn parse_sizes(s: &str) -> Result<Vec<u64>, String> {
    let sizes: Result<Vec<u64>, _> = s.split('x').map(|p| p.trim().parse::<u64>()).collect();
    match sizes {
        Ok(v) if !v.is_empty() && v.iter().all(|&n| n >= 1) => Ok(v),
        _ => Err(format!("bad stencil `{s}`")),
    }
}

pub(crate) struct Sizes<'a>(pub &'a [u64]);

impl fmt::Display for Sizes<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        f.write_str(&parts.join("x"))
    }
}

impl FromStr for StencilSpec {
    type Err = String;

    /// `16x16x4` with the tag `stencil`.
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(StencilSpec::new(s, parse_sizes(s)?, "stencil"))
    }
}

/// Index names of `b` (range > 1) in stencil role order.
fn roles(b: &Block) -> Vec<(&str, u64)> {
    let out_names: BTreeSet<&str> = b
        .refinements
        .iter()
        .filter(|r| matches!(r.dir, Direction::Out | Direction::InOut))
        .flat_map(|r| r.dims.iter().flat_map(|d| d.offset.names()))
        .collect();
    let live: Vec<(&str, u64)> = b.ranged().filter(|(_, r)| *r > 1).collect();
    let (mut out, red): (Vec<_>, Vec<_>) = live.into_iter().partition(|(n, _)| out_names.contains(n));
    out.extend(red);
    out
}

/// Tiles `b` so its inner block has exactly the sizes of the first spec that
/// fits, and tags that block. Returns `b` unchanged when nothing fits.
pub fn stencil_match(b: &Block, specs: &[StencilSpec]) -> Block {
    let order = roles(b);
    for spec in specs {
        if spec.sizes.len() != order.len() || order.iter().zip(&spec.sizes).any(|((_, r), s)| r % s != 0) {
            continue;
        }
        if let Some(dt) = spec.dtype {
            if b.refinements.iter().any(|r| r.dir != Direction::Temp && r.dtype != dt) {
                continue;
            }
        }
        if order.iter().zip(&spec.sizes).all(|((_, r), s)| r == s) {
            return b.clone().with_tag(&spec.tag);
        }
        let ts = TileShape::new(order.iter().zip(&spec.sizes).map(|((n, _), s)| (*n, *s)));
        match tile_rewrite(b, &ts) {
            Ok(mut outer) => {
                if let Some(Statement::Block(inner)) = outer.statements.first_mut() {
                    inner.tags.insert(spec.tag.clone());
                }
                return outer;
            }
            Err(PassError::NotTileable(_)) => continue,
            Err(_) => continue,
        }
    }
    b.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_program;

    fn matmul(n: u64) -> Block {
        parse_program(&format!(
            "block [] ( in A[0, 0] i32({n}, {n}):({n}, 1)  in B[0, 0] i32({n}, {n}):({n}, 1)  out C[0, 0]:assign i32({n}, {n}):({n}, 1) ) {{
                block [i:{n}, j:{n}, k:{n}] ( in A[i, k] i32(1, 1):({n}, 1)  in B[k, j] i32(1, 1):({n}, 1)  out C[i, j]:add i32(1, 1):({n}, 1) ) {{
                    $a = load(A)  $b = load(B)  $c = mul($a, $b)  C = store($c)
                }}
            }}"
        ))
        .unwrap()
        .root
        .children()
        .next()
        .unwrap()
        .clone()
    }

    #[test]
    fn matmul_gets_exact_inner_shape() {
        let spec = StencilSpec::new("tensor", vec![16, 16, 4], "tensorize");
        let out = stencil_match(&matmul(64), &[spec]);
        let inner = out.children().next().unwrap();
        assert_eq!(inner.ranged().map(|(_, r)| r).collect::<Vec<_>>(), vec![16, 16, 4]);
        assert!(inner.tags.contains("tensorize"));
        assert_eq!(out.ranged().map(|(_, r)| r).collect::<Vec<_>>(), vec![4, 4, 16]);
    }

    #[test]
    fn no_fit_and_exact_fit() {
        let spec = StencilSpec::new("big", vec![16, 16, 32], "tensorize");
        assert_eq!(stencil_match(&matmul(16), &[spec]), matmul(16));
        let spec = StencilSpec::new("same", vec![16, 16, 16], "tensorize");
        let out = stencil_match(&matmul(16), &[spec]);
        assert_eq!(out, matmul(16).with_tag("tensorize"));
        assert_eq!("16x16x4".parse::<StencilSpec>().unwrap().sizes, vec![16, 16, 4]);
    }
}
