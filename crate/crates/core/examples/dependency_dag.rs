//! Statement dependencies of conv+relu, as Graphviz.

use nestpoly::analysis::build_dependency_dag;
use nestpoly::ir::DType;
use nestpoly::kernels::conv_relu;

fn main() {
    let p = conv_relu(6, 6, 2, 2, DType::I32);
    print!("{}", build_dependency_dag(&p.root).to_dot());
    let leaf = p.root.children().next().unwrap();
    print!("{}", build_dependency_dag(leaf).to_dot());
}
