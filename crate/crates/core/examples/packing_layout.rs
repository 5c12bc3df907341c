//! Shows the packed layout of a small A block and B panel, padding included.
//!
//! `cargo run --example packing_layout`

use ampgemm::packing::{pack_a, pack_b, unpack_a, unpack_b};
use ampgemm::Matrix;

fn main() {
    // Entry value encodes its position: 10 * row + col.
    let a = Matrix::from_fn(6, 3, |i, j| (10 * i + j) as f64);
    let pa = pack_a(a.view(), 4);
    println!("A (6x3) packed in m_r = 4 row panels, column by column:");
    for (p, panel) in pa.buffer.chunks(4 * 3).enumerate() {
        println!("  panel {p}: {panel:?}");
    }
    assert!(unpack_a(&pa).bitwise_eq(&a));

    let b = Matrix::from_fn(3, 5, |i, j| (10 * i + j) as f64);
    let pb = pack_b(b.view(), 4);
    println!("B (3x5) packed in n_r = 4 column panels, row by row:");
    for (p, panel) in pb.buffer.chunks(4 * 3).enumerate() {
        println!("  panel {p}: {panel:?}");
    }
    assert!(unpack_b(&pb).bitwise_eq(&b));
    println!("both round-trip; trailing zeros are padding");
}
