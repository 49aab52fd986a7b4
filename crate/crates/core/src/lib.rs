pub mod analysis;
pub mod cli;
pub mod hwconfig;
pub mod interp;
pub mod ir;
pub mod kernels;
pub mod passes;
pub mod text;
pub mod validate;
