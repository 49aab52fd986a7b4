use std::collections::BTreeMap;

use super::{Block, Constraint, Dim, Index, IndexKind, Location, Operand, Program, Refinement, Statement};

/// Tree equality, optionally up to a consistent renaming of index names and
/// scalar temps.
pub fn structural_equal(a: &Block, b: &Block, modulo_renaming: bool) -> bool {
    if modulo_renaming {
        canonicalize(a) == canonicalize(b)
    } else {
        a == b
    }
}

/// Renames every index to `%<depth>_<position>` and every scalar temp to
/// `t<depth>_<n>` in definition order. Two blocks are equal modulo renaming
/// iff their canonical forms are equal.
pub fn canonicalize(b: &Block) -> Block {
    canon_block(b, &BTreeMap::new(), 0)
}

fn canon_block(b: &Block, parent: &BTreeMap<String, String>, depth: usize) -> Block {
    let own: BTreeMap<String, String> = b
        .indexes
        .iter()
        .enumerate()
        .map(|(k, i)| (i.name.clone(), format!("%{depth}_{k}")))
        .collect();
    let indexes = b
        .indexes
        .iter()
        .map(|i| Index {
            name: own[&i.name].clone(),
            kind: match &i.kind {
                IndexKind::Range(r) => IndexKind::Range(*r),
                IndexKind::Alias(e) => IndexKind::Alias(e.rename(parent)),
            },
        })
        .collect();
    let constraints = b.constraints.iter().map(|c| Constraint::new(c.expr.rename(&own))).collect();
    let refinements = b
        .refinements
        .iter()
        .map(|r| Refinement {
            dims: r
                .dims
                .iter()
                .map(|d| Dim::new(d.offset.rename(&own), d.size, d.stride))
                .collect(),
            location: r.location.as_ref().map(|l| Location {
                unit: l.unit.clone(),
                bank: l.bank.rename(&own),
                address: l.address,
            }),
            ..r.clone()
        })
        .collect();
    let mut temps: BTreeMap<String, String> = BTreeMap::new();
    let temp = |name: &str, temps: &mut BTreeMap<String, String>| -> String {
        let n = temps.len();
        temps.entry(name.to_string()).or_insert_with(|| format!("t{depth}_{n}")).clone()
    };
    let lookup = |name: &str, temps: &BTreeMap<String, String>| temps.get(name).cloned().unwrap_or_else(|| name.to_string());
    let statements = b
        .statements
        .iter()
        .map(|s| match s {
            Statement::Block(c) => Statement::Block(Box::new(canon_block(c, &own, depth + 1))),
            Statement::Load { into, buffer } => Statement::Load {
                into: temp(into, &mut temps),
                buffer: buffer.clone(),
            },
            Statement::Store { buffer, from } => Statement::Store {
                buffer: buffer.clone(),
                from: lookup(from, &temps),
            },
            Statement::Intrinsic { into, op, args } => {
                let args = args
                    .iter()
                    .map(|a| match a {
                        Operand::Temp(t) => Operand::Temp(lookup(t, &temps)),
                        Operand::Const(c) => Operand::Const(*c),
                    })
                    .collect();
                Statement::Intrinsic {
                    into: temp(into, &mut temps),
                    op: *op,
                    args,
                }
            }
            Statement::Special { .. } => s.clone(),
        })
        .collect();
    Block {
        indexes,
        constraints,
        refinements,
        statements,
        tags: b.tags.clone(),
        count_hint: b.count_hint,
    }
}

/// Removes every tag from the program.
pub fn strip_tags(p: &Program) -> Program {
    let mut root = p.root.clone();
    root.walk_mut(&mut |b| b.tags.clear());
    Program::new(root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Affine, DType, Direction};

    fn sample() -> Block {
        let mut b = Block::new();
        b.indexes.push(Index::range("x", 4));
        b.indexes.push(Index::range("i", 3));
        b.constraints.push(Constraint::new(Affine::from_terms([("x", 1), ("i", 1)], -1)));
        b.refinements.push(Refinement::new(
            Direction::In,
            "I",
            DType::I8,
            vec![Dim::new(Affine::var("x") + Affine::var("i"), 1, 1)],
        ));
        b.statements.push(Statement::Load {
            into: "a".into(),
            buffer: "I".into(),
        });
        b
    }

    fn renamed() -> Block {
        let mut b = sample();
        let map: BTreeMap<String, String> = [("x".to_string(), "x0".to_string())].into_iter().collect();
        b.indexes[0].name = "x0".into();
        b.constraints[0].expr = b.constraints[0].expr.rename(&map);
        b.refinements[0].dims[0].offset = b.refinements[0].dims[0].offset.rename(&map);
        b.statements[0] = Statement::Load {
            into: "zz".into(),
            buffer: "I".into(),
        };
        b
    }

    #[test]
    fn reflexive_and_renaming() {
        let a = sample();
        assert!(structural_equal(&a, &a, false));
        assert!(!structural_equal(&a, &renamed(), false));
        assert!(structural_equal(&a, &renamed(), true));
    }

    #[test]
    fn renaming_is_positional_not_a_free_pass() {
        let mut b = sample();
        b.indexes.swap(0, 1);
        assert!(!structural_equal(&sample(), &b, true));
    }

    #[test]
    fn strip_tags_clears_nested() {
        let mut root = Block::new().with_tag("top");
        root.statements.push(Statement::Block(Box::new(sample().with_tag("inner"))));
        let p = strip_tags(&Program::new(root));
        let mut any = false;
        p.root.walk(&mut |b| any |= !b.tags.is_empty());
        assert!(!any);
    }
}
