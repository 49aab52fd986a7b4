use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{AnalysisError, CacheModel};
use crate::interp::enumerate_points;
use crate::ir::{Block, IndexKind, Refinement, UnboundIndex};

/// Half-open coordinate range of one dimension. `step` is the spacing of
/// reachable coordinates (1 unless the window is a single element moved by
/// coarser coefficients).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FootDim {
    pub start: i64,
    pub end: i64,
    pub step: i64,
}

impl FootDim {
    pub fn len(&self) -> u64 {
        if self.end <= self.start {
            0
        } else {
            ((self.end - self.start - 1) / self.step + 1) as u64
        }
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Region of a buffer, in the coordinates of the window the refinement is
/// carved from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Footprint {
    pub buffer: String,
    pub dims: Vec<FootDim>,
    /// Number of elements: the box volume, or the exact set size.
    pub count: u64,
    pub exact: bool,
    /// Enumerated coordinates when `exact`.
    pub elements: Option<BTreeSet<Vec<i64>>>,
}

impl Footprint {
    /// The footprint of a plain window: coordinates `[0, size)` per dim.
    pub fn window(r: &Refinement) -> Footprint {
        let dims: Vec<FootDim> = r
            .dims
            .iter()
            .map(|d| FootDim {
                start: 0,
                end: d.size as i64,
                step: 1,
            })
            .collect();
        Footprint {
            buffer: r.buffer.clone(),
            count: dims.iter().map(FootDim::len).product(),
            dims,
            exact: false,
            elements: None,
        }
    }

    pub fn box_volume(&self) -> u64 {
        self.dims.iter().map(FootDim::len).product()
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Box footprint of `r` over every point of `b`, with alias indexes held at
/// zero. Constraints are ignored.
pub fn footprint(r: &Refinement, b: &Block) -> Footprint {
    let zeros: BTreeMap<String, i64> = b.aliases().flat_map(|(_, e)| e.names().map(|n| (n.to_string(), 0))).collect();
    footprint_at(r, b, &zeros).expect("aliases bound to zero")
}

/// Box footprint of `r` over every point of `b`, aliases evaluated in
/// `parent_env`.
pub fn footprint_at(r: &Refinement, b: &Block, parent_env: &BTreeMap<String, i64>) -> Result<Footprint, UnboundIndex> {
    let mut bounds: BTreeMap<&str, (i64, i64)> = BTreeMap::new();
    for i in &b.indexes {
        match &i.kind {
            IndexKind::Range(n) => {
                bounds.insert(&i.name, (0, *n as i64 - 1));
            }
            IndexKind::Alias(e) => {
                let v = e.eval(parent_env)?;
                bounds.insert(&i.name, (v, v));
            }
        }
    }
    let mut dims = Vec::new();
    for d in &r.dims {
        let (lo, hi) = d.offset.bounds_with(|n| bounds.get(n).copied())?;
        let step = if d.size > 1 {
            1
        } else {
            let g = d
                .offset
                .terms()
                .filter(|(n, _)| bounds.get(n).is_some_and(|(a, b)| a < b))
                .fold(0, |g, (_, c)| gcd(g, c));
            if g == 0 {
                1
            } else {
                g
            }
        };
        dims.push(FootDim {
            start: lo,
            end: hi + d.size as i64,
            step,
        });
    }
    Ok(Footprint {
        buffer: r.buffer.clone(),
        count: dims.iter().map(FootDim::len).product(),
        dims,
        exact: false,
        elements: None,
    })
}

/// Exact footprint of `r` over the constraint-satisfying points of `b`.
pub fn footprint_exact(r: &Refinement, b: &Block, parent_env: &BTreeMap<String, i64>) -> Result<Footprint, UnboundIndex> {
    let mut set = BTreeSet::new();
    for p in enumerate_points(b, parent_env)? {
        let origin: Vec<i64> = r.dims.iter().map(|d| d.offset.eval(&p)).collect::<Result<_, _>>()?;
        let sizes = r.sizes();
        if sizes.contains(&0) {
            continue;
        }
        let mut local = vec![0i64; sizes.len()];
        loop {
            set.insert(origin.iter().zip(&local).map(|(o, l)| o + l).collect::<Vec<_>>());
            let mut d = sizes.len();
            loop {
                if d == 0 {
                    break;
                }
                d -= 1;
                local[d] += 1;
                if (local[d] as u64) < sizes[d] {
                    break;
                }
                local[d] = 0;
            }
            if local.iter().all(|&v| v == 0) {
                break;
            }
        }
    }
    let rank = r.dims.len();
    let dims = (0..rank)
        .map(|k| {
            let lo = set.iter().map(|c| c[k]).min().unwrap_or(0);
            let hi = set.iter().map(|c| c[k]).max().unwrap_or(-1);
            FootDim {
                start: lo,
                end: hi + 1,
                step: 1,
            }
        })
        .collect();
    Ok(Footprint {
        buffer: r.buffer.clone(),
        dims,
        count: set.len() as u64,
        exact: true,
        elements: Some(set),
    })
}

/// Box intersection, or set intersection when both footprints are exact.
pub fn regions_overlap(a: &Footprint, b: &Footprint) -> Result<bool, AnalysisError> {
    if a.buffer != b.buffer {
        return Err(AnalysisError::DifferentBuffers(a.buffer.clone(), b.buffer.clone()));
    }
    if let (Some(x), Some(y)) = (&a.elements, &b.elements) {
        let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
        return Ok(small.iter().any(|c| large.contains(c)));
    }
    Ok(a
        .dims
        .iter()
        .zip(&b.dims)
        .all(|(p, q)| p.start.max(q.start) < p.end.min(q.end)))
}

/// Distinct values of `floor((base_offset + sum(stride * coord)) / line)`
/// over the elements of `f`.
pub fn count_cache_lines(f: &Footprint, strides: &[i64], cm: &CacheModel, base_offset: i64) -> u64 {
    let line = cm.line() as i64;
    let addr = |c: &[i64]| base_offset + c.iter().zip(strides).map(|(c, s)| c * s).sum::<i64>();
    if let Some(set) = &f.elements {
        return set.iter().map(|c| addr(c).div_euclid(line)).collect::<HashSet<_>>().len() as u64;
    }
    if f.dims.iter().any(FootDim::is_empty) {
        return 0;
    }
    let rank = f.dims.len();
    if rank == 0 {
        return 1;
    }
    let last = f.dims[rank - 1];
    let contiguous = strides[rank - 1].abs() == 1 && last.step == 1;
    let mut coord: Vec<i64> = f.dims.iter().map(|d| d.start).collect();
    let mut intervals = Vec::new();
    let mut lines = HashSet::new();
    loop {
        if contiguous {
            let a = addr(&coord);
            let b = a + (last.len() as i64 - 1) * strides[rank - 1];
            intervals.push((a.min(b).div_euclid(line), a.max(b).div_euclid(line)));
        } else {
            let mut c = coord.clone();
            while c[rank - 1] < last.end {
                lines.insert(addr(&c).div_euclid(line));
                c[rank - 1] += last.step;
            }
        }
        let mut d = rank - 1;
        loop {
            if d == 0 {
                if contiguous {
                    intervals.sort_unstable();
                    let mut total = 0u64;
                    let mut cur: Option<(i64, i64)> = None;
                    for (a, b) in intervals {
                        cur = match cur {
                            Some((s, e)) if a <= e + 1 => Some((s, e.max(b))),
                            Some((s, e)) => {
                                total += (e - s + 1) as u64;
                                Some((a, b))
                            }
                            None => Some((a, b)),
                        };
                    }
                    if let Some((s, e)) = cur {
                        total += (e - s + 1) as u64;
                    }
                    return total;
                }
                return lines.len() as u64;
            }
            d -= 1;
            coord[d] += f.dims[d].step;
            if coord[d] < f.dims[d].end {
                break;
            }
            coord[d] = f.dims[d].start;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::Affine;
    use crate::text::parse_program;
    use proptest::prelude::*;

    const FIG6A: &str = include_str!("../../fixtures/fig6a_fixed.stripe");
    const FIG6B: &str = include_str!("../../fixtures/fig6b.stripe");

    /// Oracle: walk every element and collect distinct line numbers.
    fn brute_lines(f: &Footprint, strides: &[i64], line: i64, base: i64) -> u64 {
        let mut set = HashSet::new();
        let mut c: Vec<i64> = f.dims.iter().map(|d| d.start).collect();
        'outer: loop {
            let a = base + c.iter().zip(strides).map(|(c, s)| c * s).sum::<i64>();
            set.insert(a.div_euclid(line));
            let mut d = c.len();
            loop {
                if d == 0 {
                    break 'outer;
                }
                d -= 1;
                c[d] += f.dims[d].step;
                if c[d] < f.dims[d].end {
                    break;
                }
                c[d] = f.dims[d].start;
            }
        }
        set.len() as u64
    }

    fn mid_block() -> Block {
        parse_program(FIG6B).unwrap().root.children().next().unwrap().clone()
    }

    #[test]
    fn fig6b_input_footprint() {
        let mid = mid_block();
        let f = footprint(mid.refinement("I").unwrap(), &mid);
        let spans: Vec<(i64, i64)> = f.dims.iter().map(|d| (d.start, d.end)).collect();
        assert_eq!(spans, vec![(-1, 13), (-1, 17), (0, 8)]);
        assert!(f.dims[0].end > 12);
    }

    #[test]
    fn constant_offsets_footprint_is_window() {
        let mid = mid_block();
        let r = mid.refinement("F").unwrap();
        let f = footprint(r, &mid);
        assert_eq!(f, Footprint::window(r));
    }

    #[test]
    fn fig6a_output_footprint_exact() {
        let p = parse_program(FIG6A).unwrap();
        let inner = p.root.children().next().unwrap();
        let r = inner.refinement("O").unwrap();
        let boxed = footprint(r, inner);
        let exact = footprint_exact(r, inner, &BTreeMap::new()).unwrap();
        assert_eq!(exact.count, 12 * 16 * 16);
        assert_eq!(boxed.count, exact.count);
        assert_eq!(boxed.dims, exact.dims);
    }

    #[test]
    fn overlap_cases() {
        let mid = mid_block();
        let i = mid.refinement("I").unwrap();
        let at = |x: i64| {
            let mut r = i.clone();
            r.dims[0].offset = r.dims[0].offset.substitute(&[("x".to_string(), Affine::constant(x))].into_iter().collect());
            footprint(&r, &mid)
        };
        let (t0, t1) = (at(0), at(1));
        assert_eq!((t0.dims[0].start, t0.dims[0].end), (-1, 4));
        assert_eq!((t1.dims[0].start, t1.dims[0].end), (2, 7));
        assert!(regions_overlap(&t0, &t1).unwrap());
        assert!(regions_overlap(&t0, &t0).unwrap());
        let o = mid.refinement("O").unwrap();
        let mut a = Footprint::window(o);
        a.dims[0] = FootDim { start: 0, end: 3, step: 1 };
        let mut b = a.clone();
        b.dims[0] = FootDim { start: 3, end: 6, step: 1 };
        assert!(!regions_overlap(&a, &b).unwrap());
        assert!(matches!(regions_overlap(&a, &t0), Err(AnalysisError::DifferentBuffers(..))));
    }

    #[test]
    fn cache_line_examples() {
        let cm = CacheModel::new(8, 512).unwrap();
        let mid = mid_block();
        let row = Footprint {
            buffer: "A".into(),
            dims: vec![FootDim { start: 0, end: 8, step: 1 }],
            count: 8,
            exact: false,
            elements: None,
        };
        assert_eq!(count_cache_lines(&row, &[1], &cm, 0), 1);
        assert_eq!(count_cache_lines(&row, &[1], &cm, 3), 2);
        let i = mid.refinement("I").unwrap();
        assert_eq!(count_cache_lines(&Footprint::window(i), &i.strides(), &cm, 0), 30);
        assert_eq!(brute_lines(&Footprint::window(i), &i.strides(), 8, 0), 30);
        let o = mid.refinement("O").unwrap();
        assert_eq!(count_cache_lines(&Footprint::window(o), &o.strides(), &cm, 0), 24);
        assert_eq!(brute_lines(&Footprint::window(o), &o.strides(), 8, 0), 24);
    }

    #[test]
    fn invalid_cache_model() {
        assert!(CacheModel::new(0, 8).is_err());
        assert!(CacheModel::new(8, 4).is_err());
    }

    proptest! {
        #[test]
        fn fast_line_count_matches_brute_force(
            dims in proptest::collection::vec((-4i64..4, 1i64..6), 1..4),
            strides in proptest::collection::vec(-40i64..40, 3),
            last_unit in any::<bool>(),
            line in 1u64..17,
            base in -50i64..50,
        ) {
            let rank = dims.len();
            let mut strides = strides[..rank].to_vec();
            if last_unit {
                strides[rank - 1] = 1;
            }
            let f = Footprint {
                buffer: "A".into(),
                dims: dims.iter().map(|&(s, n)| FootDim { start: s, end: s + n, step: 1 }).collect(),
                count: 0,
                exact: false,
                elements: None,
            };
            let cm = CacheModel::new(line, line).unwrap();
            prop_assert_eq!(count_cache_lines(&f, &strides, &cm, base), brute_lines(&f, &strides, line as i64, base));
        }

        #[test]
        fn box_contains_exact(
            r0 in 1u64..5, r1 in 1u64..5,
            a in -3i64..4, b in -3i64..4, c in -5i64..5,
            size in 1u64..4,
            bound in -2i64..6,
        ) {
            let off = Affine::from_terms([("x", a), ("y", b)], c + 40);
            let src = format!(
                "block [] ( in A[0] i32(1000):(1) ) {{ block [x:{r0}, y:{r1}] ( {bound} - x - y >= 0  in A[{off}] i32({size}):(1) ) {{ }} }}"
            );
            let p = parse_program(&src).unwrap();
            let blk = p.root.children().next().unwrap();
            let r = blk.refinement("A").unwrap();
            let boxed = footprint(r, blk);
            let exact = footprint_exact(r, blk, &BTreeMap::new()).unwrap();
            prop_assert!(exact.count <= boxed.box_volume());
            for e in exact.elements.as_ref().unwrap() {
                let d = boxed.dims[0];
                prop_assert!(d.start <= e[0] && e[0] < d.end && (e[0] - d.start) % d.step == 0);
            }
        }
    }
}
