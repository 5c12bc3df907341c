//! Sequential five-loop GEMM checked against the naive triple loop.
//!
//! `cargo run --release --example sequential_gemm`

use ampgemm::reference::{max_relative_error, naive_gemm, tolerance};
use ampgemm::{gemm_sequential, CacheConfig, ControlTree, Matrix};

fn main() -> ampgemm::Result<()> {
    let (m, n, k) = (300, 200, 250);
    let a = Matrix::random(m, k, 1);
    let b = Matrix::random(k, n, 2);
    let c0 = Matrix::random(m, n, 3);

    // Small blocks so that every loop takes several iterations.
    let tree = ControlTree::sequential(CacheConfig::new(128, 96, 64, 4, 4)?);
    let mut c = c0.clone();
    let t = std::time::Instant::now();
    gemm_sequential(a.view(), b.view(), c.view_mut(), &tree)?;
    let secs = t.elapsed().as_secs_f64();

    let mut want = c0.clone();
    naive_gemm(&a, &b, &mut want);
    let err = max_relative_error(&c, &want, &a, &b, &c0);
    println!("{m}x{n}x{k} in {:.2} ms, {:.2} GFLOPS", secs * 1e3, ampgemm::bench::gflops(m, n, k, secs));
    println!("max relative error {err:.2e} (tolerance {:.2e})", tolerance(k));
    Ok(())
}
