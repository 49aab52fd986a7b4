use crate::ir::{AggOp, Block, DType, Direction, Operand, Statement};

/// Forwards stored scalars to later loads of the same block-local
/// single-element buffer and drops the buffer. Applied recursively.
pub fn scalarize(b: &Block) -> Block {
    let mut out = b.clone();
    let candidates: Vec<String> = out
        .refinements
        .iter()
        .filter(|r| {
            r.dir == Direction::Temp
                && r.dtype == DType::I32
                && r.sizes().iter().all(|&s| s == 1)
                && matches!(r.agg, None | Some(AggOp::Assign) | Some(AggOp::Add))
        })
        .map(|r| r.buffer.clone())
        .collect();
    for name in candidates {
        if let Some(stmts) = forward(&out.statements, &name) {
            out.statements = stmts;
            out.refinements.retain(|r| r.buffer != name);
        }
    }
    for st in &mut out.statements {
        if let Statement::Block(c) = st {
            **c = scalarize(c);
        }
    }
    out
}

fn defines(s: &Statement) -> Option<&str> {
    s.temp_uses().0
}

fn forward(stmts: &[Statement], name: &str) -> Option<Vec<Statement>> {
    let mut store = None;
    for (k, s) in stmts.iter().enumerate() {
        match s {
            Statement::Store { buffer, from } if buffer == name => {
                if store.is_some() {
                    return None;
                }
                store = Some((k, from.clone()));
            }
            Statement::Load { buffer, .. } if buffer == name => {
                store.as_ref()?;
            }
            Statement::Block(_) | Statement::Special { .. } if s.mentions_buffer(name) => return None,
            _ => {}
        }
    }
    let (at, value) = store?;
    if stmts[at + 1..].iter().any(|s| defines(s) == Some(value.as_str())) {
        return None;
    }
    let mut renames: Vec<String> = Vec::new();
    for s in &stmts[at + 1..] {
        if let Statement::Load { into, buffer } = s {
            if buffer == name {
                if stmts.iter().filter(|t| defines(t) == Some(into.as_str())).count() != 1 {
                    return None;
                }
                renames.push(into.clone());
            }
        }
    }
    let rename = |t: &str| if renames.iter().any(|r| r == t) { value.clone() } else { t.to_string() };
    let mut out = Vec::with_capacity(stmts.len());
    for (k, s) in stmts.iter().enumerate() {
        match s {
            _ if k == at => {}
            Statement::Load { buffer, .. } if buffer == name => {}
            Statement::Store { buffer, from } => out.push(Statement::Store {
                buffer: buffer.clone(),
                from: rename(from),
            }),
            Statement::Intrinsic { into, op, args } => out.push(Statement::Intrinsic {
                into: into.clone(),
                op: *op,
                args: args
                    .iter()
                    .map(|a| match a {
                        Operand::Temp(t) => Operand::Temp(rename(t)),
                        other => other.clone(),
                    })
                    .collect(),
            }),
            other => out.push(other.clone()),
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_program;

    fn leaf(src: &str) -> Block {
        parse_program(src).unwrap().root
    }

    #[test]
    fn forwards_through_temp() {
        let b = leaf(
            "block [] ( in A[0] i32(1):(1)  out O[0]:assign i32(1):(1)  temp T[0] i32(1):(1) ) {
                $x = load(A)  $a = mul($x, $x)  T = store($a)  $b = load(T)  O = store($b)
            }",
        );
        let want = leaf(
            "block [] ( in A[0] i32(1):(1)  out O[0]:assign i32(1):(1) ) {
                $x = load(A)  $a = mul($x, $x)  O = store($a)
            }",
        );
        assert_eq!(scalarize(&b), want);
    }

    #[test]
    fn escaping_store_is_kept() {
        let b = leaf(
            "block [] ( in A[0] i32(1):(1)  out O[0]:assign i32(1):(1)  temp T[0] i32(1):(1) ) {
                $x = load(A)  T = store($x)
                block [] ( in T[0] i32(1):(1)  out O[0]:assign i32(1):(1) ) { $t = load(T)  O = store($t) }
            }",
        );
        assert_eq!(scalarize(&b), b);
        assert_eq!(scalarize(&Block::new()), Block::new());
    }
}
