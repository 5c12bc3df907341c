//! Naive triple-loop GEMM and error metrics used to validate the blocked engine.

use crate::matrix::Matrix;

/// `C += A * B` with a plain `i, j, p` loop; each entry is accumulated in
/// a fresh scalar in increasing `p` order and then added to `C`.
pub fn naive_gemm(a: &Matrix, b: &Matrix, c: &mut Matrix) {
    assert_eq!(a.cols(), b.rows());
    assert_eq!((a.rows(), b.cols()), (c.rows(), c.cols()));
    for j in 0..c.cols() {
        for i in 0..c.rows() {
            let mut acc = 0.0;
            for p in 0..a.cols() {
                acc += a[(i, p)] * b[(p, j)];
            }
            c[(i, j)] += acc;
        }
    }
}

/// Largest componentwise relative error of `got` against `want`, where the
/// reference magnitude of entry `(i, j)` is `|C0(i,j)| + sum_p |A(i,p)| |B(p,j)|`.
/// This is the scale in the standard rounding-error bound of a dot product,
/// so it stays meaningful under cancellation.
pub fn max_relative_error(got: &Matrix, want: &Matrix, a: &Matrix, b: &Matrix, c0: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..want.cols() {
        for i in 0..want.rows() {
            let scale: f64 = c0[(i, j)].abs() + (0..a.cols()).map(|p| (a[(i, p)] * b[(p, j)]).abs()).sum::<f64>();
            let diff = (got[(i, j)] - want[(i, j)]).abs();
            let rel = if scale > 0.0 {
                diff / scale
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(rel);
        }
    }
    worst
}

/// Tolerance `4 * k * eps` (at least one `eps` so that `k = 0` still compares).
pub fn tolerance(k: usize) -> f64 {
    4.0 * (k.max(1)) as f64 * f64::EPSILON
}
