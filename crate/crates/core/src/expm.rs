//! Matrix exponential, principal logarithm and the differential of `exp`.
//!
//! The exponential uses scaling and squaring around a degree-12 Taylor
//! polynomial evaluated Paterson–Stockmeyer style: `A², A³, A⁴` plus two
//! Horner products, so every call spends exactly five products on the
//! polynomial. Both the polynomial and the squaring phase carry `e^X - I`
//! instead of `e^X`, which keeps the small deviation from the identity at
//! full relative precision through the squarings.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::matrix::{skew_project, DenseMatrix};

/// Scaling threshold on `‖A/2^s‖₁`. Largest value of {0.25, 0.5, 1, 1.5, 2}
/// at which the degree-12 truncation stays within 1e-13 of the reference series.
pub const EXPM_THETA: f64 = 0.5;

/// Taylor degree of the polynomial kernel.
pub const EXPM_DEGREE: usize = 12;

/// Square-root phase of the logarithm stops once `‖X - I‖₁` is below this.
const LOGM_SQRT_THRESHOLD: f64 = 0.25;
const DENMAN_BEAVERS_MAX_SWEEPS: usize = 40;
const LOGM_MAX_SQUARE_ROOTS: usize = 64;

/// Spectral-norm cut-over from the Bernoulli series to the dense solve.
const DEXP_INVERSE_SERIES_LIMIT: f64 = 0.9 * PI;

#[derive(Debug, Clone)]
pub struct ExpmReport {
    pub result: DenseMatrix,
    /// Products spent on the polynomial kernel (never more than 5).
    pub polynomial_products: usize,
    pub squarings: usize,
}

#[derive(Debug, Clone)]
pub struct LogmReport {
    pub result: DenseMatrix,
    pub square_roots_taken: usize,
}

fn check_square(a: &DenseMatrix, what: &str) -> Result<()> {
    if !a.is_square() {
        return Err(Error::dim(format!("{what} needs a square matrix, got {:?}", a.shape())));
    }
    if !a.is_finite() {
        return Err(Error::Domain(format!("{what}: non-finite entries")));
    }
    Ok(())
}

fn check_same_square(a: &DenseMatrix, b: &DenseMatrix, what: &str) -> Result<()> {
    check_square(a, what)?;
    if a.shape() != b.shape() {
        return Err(Error::dim(format!("{what}: shapes {:?} and {:?}", a.shape(), b.shape())));
    }
    if !b.is_finite() {
        return Err(Error::Domain(format!("{what}: non-finite direction")));
    }
    Ok(())
}

/// Taylor coefficients `1/k!` for `k = 0..=12`.
fn taylor_coefficients() -> [f64; EXPM_DEGREE + 1] {
    let mut c = [1.0; EXPM_DEGREE + 1];
    for k in 1..=EXPM_DEGREE {
        c[k] = c[k - 1] / k as f64;
    }
    c
}

/// `T₁₂(X) - I` with five matrix products.
fn taylor12_minus_identity(x: &DenseMatrix) -> DenseMatrix {
    let c = taylor_coefficients();
    let x2 = x.matmul(x);
    let x3 = x2.matmul(x);
    let x4 = x2.matmul(&x2);

    let mut low = x.scale(c[1]);
    low.axpy(c[2], &x2);
    low.axpy(c[3], &x3);

    let mut mid = x.scale(c[5]);
    mid.axpy(c[6], &x2);
    mid.axpy(c[7], &x3);
    let mid = mid.add_identity(c[4]);

    let mut high = x.scale(c[9]);
    high.axpy(c[10], &x2);
    high.axpy(c[11], &x3);
    high.axpy(c[12], &x4);
    let high = high.add_identity(c[8]);

    let mut inner = high.matmul(&x4);
    inner += &mid;
    let mut y = inner.matmul(&x4);
    y += &low;
    y
}

/// Number of halvings that bring `‖A‖₁` under [`EXPM_THETA`].
pub fn expm_scaling(norm: f64) -> usize {
    if norm <= EXPM_THETA {
        0
    } else {
        let mut s = (norm / EXPM_THETA).log2().ceil().max(0.0) as usize;
        while norm / 2f64.powi(s as i32) > EXPM_THETA {
            s += 1;
        }
        s
    }
}

/// Matrix exponential by scaling and squaring.
pub fn expm(a: &DenseMatrix) -> Result<ExpmReport> {
    check_square(a, "expm")?;
    let n = a.rows();
    let norm = a.one_norm();
    if norm == 0.0 {
        return Ok(ExpmReport { result: DenseMatrix::identity(n), polynomial_products: 0, squarings: 0 });
    }
    let s = expm_scaling(norm);
    let x = a.scale(0.5f64.powi(s as i32));
    let mut y = taylor12_minus_identity(&x);
    // (I + Y)² = I + (2Y + Y²)
    for _ in 0..s {
        let mut next = y.matmul(&y);
        next.axpy(2.0, &y);
        y = next;
    }
    let result = y.add_identity(1.0);
    if !result.is_finite() {
        return Err(Error::Domain("expm overflowed".into()));
    }
    Ok(ExpmReport { result, polynomial_products: 5, squarings: s })
}

/// `expm(a).result`, for callers that do not need the report.
pub fn exp(a: &DenseMatrix) -> Result<DenseMatrix> {
    expm(a).map(|r| r.result)
}

/// Principal square root by the determinant-scaled Denman–Beavers iteration,
/// verified by squaring back.
fn sqrtm_denman_beavers(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    let mut y = a.clone();
    let mut z = DenseMatrix::identity(n);
    let mut scaling = true;
    for _ in 0..DENMAN_BEAVERS_MAX_SWEEPS {
        let y_lu = y.lu().map_err(|_| Error::Branch("square root iterate became singular".into()))?;
        let z_lu = z.lu().map_err(|_| Error::Branch("square root iterate became singular".into()))?;
        let y_inv = y_lu.solve(&DenseMatrix::identity(n))?;
        let z_inv = z_lu.solve(&DenseMatrix::identity(n))?;
        let gamma = if scaling {
            let d = (y_lu.determinant() * z_lu.determinant()).abs();
            d.powf(-1.0 / (2.0 * n as f64))
        } else {
            1.0
        };
        let gamma = if gamma.is_finite() && gamma > 0.0 { gamma } else { 1.0 };
        let y_next = &y.scale(0.5 * gamma) + &z_inv.scale(0.5 / gamma);
        let z_next = &z.scale(0.5 * gamma) + &y_inv.scale(0.5 / gamma);
        let change = (&y_next - &y).frobenius_norm() / y_next.frobenius_norm();
        y = y_next;
        z = z_next;
        if change < 1e-3 {
            scaling = false;
        }
        if change <= 1e-15 * (n as f64) {
            break;
        }
    }
    if !y.is_finite() {
        return Err(Error::Branch("square root diverged".into()));
    }
    let defect = (&y.matmul(&y) - a).frobenius_norm() / a.frobenius_norm();
    if defect > 1e-11 {
        return Err(Error::Branch(format!("square root check failed (relative defect {defect:e})")));
    }
    Ok(y)
}

/// `log(I + E)` for `‖E‖₁ < 1/4` by the Gregory series
/// `2·atanh(Z) = 2(Z + Z³/3 + …)`, `Z = E(2I + E)⁻¹`.
fn log_near_identity(e: &DenseMatrix) -> Result<DenseMatrix> {
    let two_plus_e = e.add_identity(2.0);
    // E and 2I + E commute
    let z = two_plus_e.solve(e)?;
    let z2 = z.matmul(&z);
    let mut sum = z.clone();
    let mut power = z;
    for k in (3..200).step_by(2) {
        power = power.matmul(&z2);
        let term = power.scale(1.0 / k as f64);
        sum += &term;
        if term.frobenius_norm() <= 1e-17 * sum.frobenius_norm() {
            break;
        }
    }
    Ok(sum.scale(2.0))
}

/// Principal matrix logarithm by inverse scaling and squaring.
///
/// Special orthogonal inputs are checked against the branch cut (a rotation
/// angle of π, i.e. `Q + I` singular) and their result is projected onto the
/// skew matrices.
pub fn logm_principal(q: &DenseMatrix) -> Result<LogmReport> {
    check_square(q, "logm")?;
    let n = q.rows();
    let orthogonal = q.orthogonality_defect() <= 1e-10;
    if orthogonal && q.add_identity(1.0).min_singular_value() <= 1e-8 {
        return Err(Error::Branch("rotation by π has no principal logarithm".into()));
    }
    let mut x = q.clone();
    let mut k = 0;
    while x.add_identity(-1.0).one_norm() >= LOGM_SQRT_THRESHOLD {
        if k == LOGM_MAX_SQUARE_ROOTS {
            return Err(Error::Convergence { what: "logm square-root phase", iterations: k });
        }
        x = sqrtm_denman_beavers(&x)?;
        k += 1;
    }
    let log = log_near_identity(&x.add_identity(-1.0))?.scale(2f64.powi(k as i32));
    let result = if orthogonal {
        skew_project(&log)?.into_matrix()
    } else {
        log
    };
    if !result.is_finite() || n == 0 {
        return Err(Error::Branch("logarithm is not finite".into()));
    }
    Ok(LogmReport { result, square_roots_taken: k })
}

/// Fréchet derivative of `exp` at `omega` in direction `e`, read off the
/// top-right block of `exp([[Ω, E], [0, Ω]])`.
pub fn dexp(omega: &DenseMatrix, e: &DenseMatrix) -> Result<DenseMatrix> {
    check_same_square(omega, e, "dexp")?;
    let n = omega.rows();
    let block = DenseMatrix::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) => omega[(i, j)],
        (true, false) => e[(i, j - n)],
        (false, true) => 0.0,
        (false, false) => omega[(i - n, j - n)],
    });
    let big = exp(&block)?;
    Ok(DenseMatrix::from_fn(n, n, |i, j| big[(i, j + n)]))
}

/// Adjoint of `dexp(Ω, ·)` under the Frobenius pairing, `dexp(Ωᵀ, F)`.
pub fn dexp_adjoint(omega: &DenseMatrix, f: &DenseMatrix) -> Result<DenseMatrix> {
    dexp(&omega.transpose(), f)
}

const ZETA_TABLE_LEN: usize = 5000;

/// `ζ(2k)` for `1 ≤ k < 5000`, tabulated on first use.
fn zeta_even(k: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| (0..ZETA_TABLE_LEN).map(zeta_even_uncached).collect())[k]
}

fn zeta_even_uncached(k: usize) -> f64 {
    match k {
        0 => -0.5,
        1 => PI * PI / 6.0,
        2 => PI.powi(4) / 90.0,
        3 => PI.powi(6) / 945.0,
        _ => {
            let p = -(2.0 * k as f64);
            let mut last = 1;
            while last < 100_000 && ((last + 1) as f64).powf(p) > 1e-20 {
                last += 1;
            }
            // smallest terms first
            (1..=last).rev().map(|m| (m as f64).powf(p)).sum()
        }
    }
}

/// Inverse of the left-trivialized differential
/// `L_Ω(X) = ∫₀¹ e^{-sΩ} X e^{sΩ} ds = ((1 - e^{-ad})/ad)(X)`
/// through `ad/(1 - e^{-ad}) = 1 + ad/2 + Σ_k (B₂ₖ/(2k)!) ad^{2k}`.
/// Uses `B₂ₖ/(2k)! = (-1)^{k+1} 2ζ(2k)/(2π)^{2k}`, carrying `ad^{2k}(X)/(2π)^{2k}`
/// to avoid overflow.
fn left_dexp_inverse_series(omega: &DenseMatrix, x: &DenseMatrix) -> Option<DenseMatrix> {
    let tol = 1e-16 * x.frobenius_norm();
    let mut sum = x.clone();
    sum.axpy(0.5, &omega.commutator(x));
    let inv_two_pi_sq = 1.0 / (4.0 * PI * PI);
    let mut scaled = x.clone();
    for k in 1..ZETA_TABLE_LEN {
        let next = omega.commutator(&omega.commutator(&scaled));
        scaled = next.scale(inv_two_pi_sq);
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let term = scaled.scale(sign * 2.0 * zeta_even(k));
        sum += &term;
        if term.frobenius_norm() <= tol {
            return Some(sum);
        }
        if !term.is_finite() {
            return None;
        }
    }
    None
}

/// Dense fallback: build the `n²×n²` matrix of `dexp(Ω, ·)` and solve.
fn dexp_inverse_dense(omega: &DenseMatrix, e: &DenseMatrix) -> Result<DenseMatrix> {
    let n = omega.rows();
    let nn = n * n;
    let mut op = DenseMatrix::zeros(nn, nn);
    for col in 0..nn {
        let mut basis = DenseMatrix::zeros(n, n);
        basis.data_mut()[col] = 1.0;
        let image = dexp(omega, &basis)?;
        for (row, v) in image.data().iter().enumerate() {
            op[(row, col)] = *v;
        }
    }
    let rhs = DenseMatrix::from_vec(nn, 1, e.data().to_vec());
    let sol = op
        .solve(&rhs)
        .map_err(|_| Error::Branch("differential of exp is singular".into()))?;
    Ok(DenseMatrix::from_vec(n, n, sol.into_vec()))
}

/// `G` with `dexp(Ω, G) = E`, for `‖Ω‖₂ < π`.
pub fn dexp_inverse(omega: &DenseMatrix, e: &DenseMatrix) -> Result<DenseMatrix> {
    check_same_square(omega, e, "dexp_inverse")?;
    let rho = omega.spectral_norm();
    if rho >= PI {
        return Err(Error::Branch(format!("‖Ω‖₂ = {rho} is not below π")));
    }
    if rho <= DEXP_INVERSE_SERIES_LIMIT {
        // dexp(Ω, G) = e^Ω L_Ω(G)
        let left = exp(&-omega)?.matmul(e);
        if let Some(g) = left_dexp_inverse_series(omega, &left) {
            return Ok(g);
        }
    }
    dexp_inverse_dense(omega, e)
}

/// Left-trivialized differential `L_Ω(X) = e^{-Ω} dexp(Ω, X)`.
pub fn dexp_left(omega: &DenseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(exp(&-omega)?.matmul(&dexp(omega, x)?))
}

/// Inverse of [`dexp_left`].
pub fn dexp_left_inverse(omega: &DenseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    dexp_inverse(omega, &exp(omega)?.matmul(x))
}
