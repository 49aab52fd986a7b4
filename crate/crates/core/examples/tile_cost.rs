//! Cache-line cost of a few tile shapes for the fig6a convolution, with
//! a 512-element memory and 8-element lines.

use nestpoly::analysis::CacheModel;
use nestpoly::passes::{tile_cost, TileShape};
use nestpoly::text::parse_program;

fn main() {
    let p = parse_program(include_str!("../fixtures/fig6a_fixed.stripe")).unwrap();
    let conv = p.root.children().next().unwrap();
    let cm = CacheModel::new(8, 512).unwrap();
    for shape in ["x:1,y:1", "x:3,y:4", "x:4,y:4", "x:6,y:8", "x:12,y:16"] {
        let ts: TileShape = shape.parse().unwrap();
        println!("{}", tile_cost(conv, &ts, &cm, 512).unwrap());
    }
}
