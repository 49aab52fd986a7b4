//! Match a matrix multiply to a 16x16x4 tensor unit, then split a
//! convolution's output channels over four banks.

use nestpoly::ir::DType;
use nestpoly::kernels::{conv2d, matmul};
use nestpoly::passes::{partition, stencil_match, StencilSpec};
use nestpoly::text::print_block_text;

fn main() {
    let mm = matmul(64, 64, 64, DType::I32);
    let spec = StencilSpec::new("TENSOR", vec![16, 16, 4], "tensorize");
    print!("{}", print_block_text(&stencil_match(mm.root.children().next().unwrap(), &[spec])));

    let conv = conv2d(12, 16, 8, 16, 3, 3, DType::I32);
    let banked = partition(conv.root.children().next().unwrap(), "k", 4, "SRAM").unwrap();
    print!("{}", print_block_text(&banked));
}
