//! A config-driven pipeline on conv+relu: tile both blocks, fuse them, keep
//! the intermediate local, then check the result still computes the same.

use nestpoly::hwconfig::load_config;
use nestpoly::interp::execute;
use nestpoly::ir::DType;
use nestpoly::kernels::{conv_relu, random_inputs};
use nestpoly::passes::apply_pipeline;
use nestpoly::text::print_program;

const CONFIG: &str = "
mem DRAM cap=1e6 line=8
mem SRAM cap=512 line=8 banks=4
pass autotile mem=SRAM tiles=x:3,y:4
pass fuse
pass localize
pass scalarize
pass schedule mem=SRAM
";

fn main() {
    let p = conv_relu(12, 16, 8, 16, DType::I32);
    let cfg = load_config(CONFIG).unwrap();
    let (q, reports) = apply_pipeline(&p, &cfg).unwrap();
    for r in &reports {
        println!("{r}");
    }
    print!("{}", print_program(&q));
    let s = random_inputs(&p, 42, -50, 50);
    let same = execute(&p, s.clone()).unwrap().get("R") == execute(&q, s).unwrap().get("R");
    println!("outputs identical: {same}");
}
