//! Run a small matrix multiply and a 2x2 max pool with the reference
//! interpreter.

use nestpoly::interp::{execute, BufferStore, Tensor};
use nestpoly::ir::DType;
use nestpoly::kernels::{matmul, maxpool};

fn main() {
    let p = matmul(2, 3, 2, DType::I32);
    let mut s = BufferStore::zeros_for(&p);
    s.insert("A", Tensor::from_values(DType::I32, [1, 2, 3, 4]));
    s.insert("B", Tensor::from_values(DType::I32, [1, 0, 2, 0, 1, 3]));
    let out = execute(&p, s).unwrap();
    println!("C = {:?}", out.get("C").unwrap().data);

    let p = maxpool(4, 4, 1, 2, 2, DType::I8);
    let mut s = BufferStore::zeros_for(&p);
    s.init_outputs(&p);
    s.insert("I", Tensor::from_values(DType::I8, (0..16).map(|v| (v * 37) % 23 - 11)));
    let out = execute(&p, s).unwrap();
    println!("pooled = {:?}", out.get("O").unwrap().data);
}
