//! Exhaustive tile-size search over the output indexes of the convolution.

use nestpoly::analysis::CacheModel;
use nestpoly::passes::{autotile, default_search, AutotileOptions};
use nestpoly::text::{parse_program, print_block_text};

fn main() {
    let p = parse_program(include_str!("../fixtures/fig6a_fixed.stripe")).unwrap();
    let conv = p.root.children().next().unwrap();
    println!("searching {:?}", default_search(conv));
    let cm = CacheModel::new(8, 512).unwrap();
    let (tiled, report) = autotile(conv, &cm, &AutotileOptions::default()).unwrap();
    println!("{} candidates, {} over the memory cap", report.candidates, report.excluded);
    if let Some(c) = &report.chosen {
        println!("chosen: {c}");
    }
    print!("{}", print_block_text(&tiled));
}
