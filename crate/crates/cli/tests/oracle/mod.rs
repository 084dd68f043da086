//! Reference matrix exponential, independent of the library's implementation.

use atriv_core::DenseMatrix;

/// `e^A` by a 200-term Taylor series on `A / 2¹⁶`, with compensated summation,
/// followed by 16 squarings carried on `e^X - I`.
pub fn taylor_expm(a: &DenseMatrix) -> DenseMatrix {
    const SQUARINGS: i32 = 16;
    const TERMS: usize = 200;
    let n = a.rows();
    let x = a.scale(0.5f64.powi(SQUARINGS));
    let mut sum = vec![0.0; n * n];
    let mut carry = vec![0.0; n * n];
    let mut term = DenseMatrix::identity(n);
    for k in 1..=TERMS {
        term = term.matmul(&x).scale(1.0 / k as f64);
        if term.max_abs() == 0.0 {
            break;
        }
        for (i, &t) in term.data().iter().enumerate() {
            let y = t - carry[i];
            let s = sum[i] + y;
            carry[i] = (s - sum[i]) - y;
            sum[i] = s;
        }
    }
    let mut y = DenseMatrix::from_vec(n, n, sum);
    for _ in 0..SQUARINGS {
        y = &y.scale(2.0) + &y.matmul(&y);
    }
    y.add_identity(1.0)
}
