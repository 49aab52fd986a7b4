//! Parse a program, print its canonical form and check that it reparses to
//! the same tree.

use nestpoly::ir::structural_equal;
use nestpoly::text::{parse_program, print_program};

fn main() {
    let src = include_str!("../fixtures/fig6b.stripe");
    let p = parse_program(src).expect("fixture parses");
    let printed = print_program(&p);
    print!("{printed}");
    let again = parse_program(&printed).expect("printed form parses");
    println!("round trip equal: {}", structural_equal(&p.root, &again.root, false));
}
