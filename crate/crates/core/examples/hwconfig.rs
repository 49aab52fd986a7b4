//! Load a hardware description and print it back in canonical order.

use nestpoly::hwconfig::{load_config, print_config};

fn main() {
    let cfg = load_config(include_str!("../fixtures/accel_2level.hwcfg")).unwrap();
    let (name, sram) = cfg.hardware.smallest_mem().unwrap();
    println!("smallest memory: {name} ({} elements, {} banks)", sram.capacity, sram.banks);
    print!("{}", print_config(&cfg));
}
