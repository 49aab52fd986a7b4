use std::fmt::Write;

use crate::ir::{Block, IndexKind, Operand, Program, Refinement, Statement};

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    print_block(&mut out, &p.root, &[], 0);
    out.push('\n');
    out
}

pub fn print_block_text(b: &Block) -> String {
    let mut out = String::new();
    print_block(&mut out, b, &[], 0);
    out.push('\n');
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push('\t');
    }
}

fn print_block(out: &mut String, b: &Block, parent_order: &[&str], depth: usize) {
    let order: Vec<&str> = b.indexes.iter().map(|i| i.name.as_str()).collect();
    out.push_str("block [");
    for (k, i) in b.indexes.iter().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        match &i.kind {
            IndexKind::Range(r) => {
                let _ = write!(out, "{}:{r}", i.name);
            }
            IndexKind::Alias(e) => {
                let _ = write!(out, "{}=", i.name);
                let _ = e.write_ordered(out, parent_order, false);
            }
        }
    }
    out.push(']');
    if let Some(n) = b.count_hint {
        let _ = write!(out, ":{n}");
    }
    out.push_str(" (\n");
    for t in &b.tags {
        indent(out, depth + 1);
        let _ = writeln!(out, "#{t}");
    }
    for c in &b.constraints {
        indent(out, depth + 1);
        let _ = c.expr.write_ordered(out, &order, true);
        out.push_str(" >= 0\n");
    }
    for r in &b.refinements {
        indent(out, depth + 1);
        print_refinement(out, r, &order);
        out.push('\n');
    }
    indent(out, depth);
    out.push_str(") {\n");
    for (k, s) in b.statements.iter().enumerate() {
        indent(out, depth + 1);
        let _ = write!(out, "{k}:");
        match s {
            Statement::Block(c) => {
                out.push('\n');
                indent(out, depth + 1);
                print_block(out, c, &order, depth + 1);
            }
            Statement::Load { into, buffer } => {
                let _ = write!(out, " ${into} = load({buffer})");
            }
            Statement::Store { buffer, from } => {
                let _ = write!(out, " {buffer} = store(${from})");
            }
            Statement::Intrinsic { into, op, args } => {
                let _ = write!(out, " ${into} = {op}(");
                for (a, arg) in args.iter().enumerate() {
                    if a > 0 {
                        out.push_str(", ");
                    }
                    match arg {
                        Operand::Temp(t) => {
                            let _ = write!(out, "${t}");
                        }
                        Operand::Const(c) => {
                            let _ = write!(out, "{c}");
                        }
                    }
                }
                out.push(')');
            }
            Statement::Special { op, args } => {
                let _ = write!(out, " special {op}({})", args.join(", "));
            }
        }
        out.push('\n');
    }
    indent(out, depth);
    out.push('}');
}

fn print_refinement(out: &mut String, r: &Refinement, order: &[&str]) {
    let _ = write!(out, "{} {}[", r.dir, r.buffer);
    for (k, d) in r.dims.iter().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        let _ = d.offset.write_ordered(out, order, false);
    }
    out.push(']');
    if let Some(a) = r.agg {
        let _ = write!(out, ":{a}");
    }
    let sizes: Vec<String> = r.dims.iter().map(|d| d.size.to_string()).collect();
    let strides: Vec<String> = r.dims.iter().map(|d| d.stride.to_string()).collect();
    let _ = write!(out, " {}({}):({})", r.dtype, sizes.join(", "), strides.join(", "));
    if let Some(l) = &r.location {
        let _ = write!(out, " @{}[", l.unit);
        let _ = l.bank.write_ordered(out, order, false);
        let _ = write!(out, "]:{}", l.address);
    }
}
