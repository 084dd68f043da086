//! Reference implementations used as oracles. None of them share code with
//! the library's matrix functions.
#![allow(dead_code)]

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

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(points: usize) -> Vec<(f64, f64)> {
    let n = points;
    (1..=n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut derivative = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                derivative = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / derivative;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * derivative * derivative);
            (0.5 * (1.0 - x), 0.5 * w)
        })
        .collect()
}

/// `∫₀¹ e^{(1-s)Ω} E e^{sΩ} ds` by Gauss–Legendre quadrature with the Taylor oracle.
pub fn dexp_quadrature(omega: &DenseMatrix, e: &DenseMatrix) -> DenseMatrix {
    let n = omega.rows();
    let mut acc = DenseMatrix::zeros(n, n);
    for (s, w) in gauss_legendre(40) {
        let left = taylor_expm(&omega.scale(1.0 - s));
        let right = taylor_expm(&omega.scale(s));
        acc.axpy(w, &left.matmul(e).matmul(&right));
    }
    acc
}

pub fn rel_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
