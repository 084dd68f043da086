//! Dense real matrices, norms, factorizations and the small numeric oracles
//! (polar factor, power iteration) the harness uses to certify optima.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{gaussian_vec, RngSeed};

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    /// Validating constructor: positive shape, matching entry count, finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim(format!("empty shape {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite matrix entry".into()));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Unvalidated constructor for internal arithmetic. Panics on a length mismatch.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count does not match shape");
        DenseMatrix { rows, cols, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        DenseMatrix::from_vec(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|x| x * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        DenseMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &DenseMatrix) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn add_identity(&self, s: f64) -> Self {
        assert!(self.is_square());
        let mut out = self.clone();
        for i in 0..self.rows {
            out[(i, i)] += s;
        }
        out
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let (n, m, p) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; n * p];
        for i in 0..n {
            let out_row = &mut out[i * p..(i + 1) * p];
            for k in 0..m {
                let a = self.data[i * m + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * p..(k + 1) * p];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        DenseMatrix { rows: n, cols: p, data: out }
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `AB - BA`
    pub fn commutator(&self, other: &DenseMatrix) -> DenseMatrix {
        &self.matmul(other) - &other.matmul(self)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self[(r, c)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest singular value, from the Jacobi spectrum of `AᵀA`.
    pub fn spectral_norm(&self) -> f64 {
        if self.data.iter().all(|&x| x == 0.0) {
            return 0.0;
        }
        let gram = self.transpose().matmul(self);
        let (vals, _) = symmetric_eigen(&gram);
        vals.iter().fold(0.0_f64, |m, &x| m.max(x)).max(0.0).sqrt()
    }

    /// Smallest singular value, from the Jacobi spectrum of `AᵀA`.
    pub fn min_singular_value(&self) -> f64 {
        let gram = self.transpose().matmul(self);
        let (vals, _) = symmetric_eigen(&gram);
        vals.iter().fold(f64::INFINITY, |m, &x| m.min(x)).max(0.0).sqrt()
    }

    /// Frobenius distance of `AᵀA` from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        self.transpose().matmul(self).add_identity(-1.0).frobenius_norm()
    }

    pub fn lu(&self) -> Result<Lu> {
        Lu::factor(self)
    }

    pub fn determinant(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::dim("determinant of a non-square matrix"));
        }
        match Lu::factor(self) {
            Ok(lu) => Ok(lu.determinant()),
            Err(Error::Singular(_)) => Ok(0.0),
            Err(e) => Err(e),
        }
    }

    pub fn inverse(&self) -> Result<DenseMatrix> {
        self.lu()?.solve(&DenseMatrix::identity(self.rows))
    }

    /// Solves `self · X = rhs`.
    pub fn solve(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.lu()?.solve(rhs)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

macro_rules! elementwise {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&DenseMatrix> for &DenseMatrix {
            type Output = DenseMatrix;
            fn $method(self, rhs: &DenseMatrix) -> DenseMatrix {
                assert_eq!(self.shape(), rhs.shape(), "elementwise shape mismatch");
                DenseMatrix {
                    rows: self.rows,
                    cols: self.cols,
                    data: self.data.iter().zip(&rhs.data).map(|(a, b)| a $op b).collect(),
                }
            }
        }
        impl $tr<DenseMatrix> for DenseMatrix {
            type Output = DenseMatrix;
            fn $method(self, rhs: DenseMatrix) -> DenseMatrix {
                (&self).$method(&rhs)
            }
        }
    };
}

elementwise!(Add, add, +);
elementwise!(Sub, sub, -);

impl AddAssign<&DenseMatrix> for DenseMatrix {
    fn add_assign(&mut self, rhs: &DenseMatrix) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&DenseMatrix> for DenseMatrix {
    fn sub_assign(&mut self, rhs: &DenseMatrix) {
        self.axpy(-1.0, rhs);
    }
}

impl Mul<&DenseMatrix> for &DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.matmul(rhs)
    }
}

impl Mul<f64> for &DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, rhs: f64) -> DenseMatrix {
        self.scale(rhs)
    }
}

impl Neg for &DenseMatrix {
    type Output = DenseMatrix;
    fn neg(self) -> DenseMatrix {
        self.scale(-1.0)
    }
}

impl Neg for DenseMatrix {
    type Output = DenseMatrix;
    fn neg(self) -> DenseMatrix {
        self.scale(-1.0)
    }
}

/// Skew-symmetric square matrix: a left-trivialized tangent coordinate on SO(n).
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix(DenseMatrix);

impl SkewMatrix {
    /// Accepts `m` if `m + mᵀ` vanishes to `1e-14 · max(1, ‖m‖_F)`.
    pub fn new(m: DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim("skew matrix must be square"));
        }
        if !m.is_finite() {
            return Err(Error::Domain("non-finite skew entry".into()));
        }
        let defect = (&m + &m.transpose()).frobenius_norm();
        if defect > 1e-14 * m.frobenius_norm().max(1.0) {
            return Err(Error::Domain(format!("matrix is not skew (‖M + Mᵀ‖ = {defect:e})")));
        }
        Ok(SkewMatrix(m))
    }

    pub fn zeros(n: usize) -> Self {
        SkewMatrix(DenseMatrix::zeros(n, n))
    }

    pub fn n(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> SkewMatrix {
        SkewMatrix(self.0.scale(s))
    }

    pub fn norm(&self) -> f64 {
        self.0.frobenius_norm()
    }

    pub fn inner(&self, other: &SkewMatrix) -> f64 {
        dot(&self.0.data, &other.0.data)
    }
}

impl Add<&SkewMatrix> for &SkewMatrix {
    type Output = SkewMatrix;
    fn add(self, rhs: &SkewMatrix) -> SkewMatrix {
        SkewMatrix(&self.0 + &rhs.0)
    }
}

impl Sub<&SkewMatrix> for &SkewMatrix {
    type Output = SkewMatrix;
    fn sub(self, rhs: &SkewMatrix) -> SkewMatrix {
        SkewMatrix(&self.0 - &rhs.0)
    }
}

/// `trace(AᵀB)`.
pub fn frobenius_inner(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!("inner product of {:?} and {:?}", a.shape(), b.shape())));
    }
    Ok(dot(&a.data, &b.data))
}

/// Orthogonal projection `(M - Mᵀ)/2` onto the skew-symmetric matrices.
pub fn skew_project(m: &DenseMatrix) -> Result<SkewMatrix> {
    if !m.is_square() {
        return Err(Error::dim(format!("skew projection of a {}x{} matrix", m.rows, m.cols)));
    }
    let n = m.rows;
    Ok(SkewMatrix(DenseMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] - m[(j, i)]))))
}

/// Symmetric part `(M + Mᵀ)/2`.
pub fn symmetric_part(m: &DenseMatrix) -> DenseMatrix {
    let n = m.rows;
    DenseMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

pub fn one_norm(m: &DenseMatrix) -> f64 {
    m.one_norm()
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    factors: DenseMatrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factor(m: &DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim("LU of a non-square matrix"));
        }
        let n = m.rows;
        let mut a = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = m.max_abs();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|r| (r, a[(r, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot == 0.0 || pivot <= f64::EPSILON * scale * 1e-3 || !pivot.is_finite() {
                return Err(Error::Singular(format!("zero pivot in column {k}")));
            }
            if p != k {
                for c in 0..n {
                    a.data.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let d = a[(k, k)];
            for r in k + 1..n {
                let l = a[(r, k)] / d;
                a[(r, k)] = l;
                if l != 0.0 {
                    for c in k + 1..n {
                        a.data[r * n + c] -= l * a.data[k * n + c];
                    }
                }
            }
        }
        Ok(Lu { factors: a, perm, sign })
    }

    pub fn determinant(&self) -> f64 {
        (0..self.factors.rows).map(|i| self.factors[(i, i)]).product::<f64>() * self.sign
    }

    pub fn solve(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.factors.rows;
        if rhs.rows != n {
            return Err(Error::dim("LU solve right-hand side has wrong row count"));
        }
        let m = rhs.cols;
        let mut x = DenseMatrix::from_fn(n, m, |i, j| rhs[(self.perm[i], j)]);
        let a = &self.factors;
        for i in 0..n {
            for k in 0..i {
                let l = a[(i, k)];
                if l != 0.0 {
                    for j in 0..m {
                        x.data[i * m + j] -= l * x.data[k * m + j];
                    }
                }
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = a[(i, k)];
                if u != 0.0 {
                    for j in 0..m {
                        x.data[i * m + j] -= u * x.data[k * m + j];
                    }
                }
            }
            let d = a[(i, i)];
            for j in 0..m {
                x.data[i * m + j] /= d;
            }
        }
        Ok(x)
    }
}

/// Householder QR of a square matrix. Returns `(Q, R)` with `diag(R) >= 0`.
pub fn qr(m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if !m.is_square() {
        return Err(Error::dim("QR of a non-square matrix"));
    }
    let n = m.rows;
    let mut r = m.clone();
    let mut q = DenseMatrix::identity(n);
    for k in 0..n.saturating_sub(1) {
        let x: Vec<f64> = (k..n).map(|i| r[(i, k)]).collect();
        let alpha = norm2(&x);
        if alpha == 0.0 {
            continue;
        }
        let mut v = x;
        v[0] += alpha.copysign(v[0]);
        let vnorm2 = dot(&v, &v);
        if vnorm2 == 0.0 {
            continue;
        }
        // R <- (I - 2vvᵀ/vᵀv) R on rows k..n
        for c in 0..n {
            let s: f64 = (k..n).map(|i| v[i - k] * r[(i, c)]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..n {
                r[(i, c)] -= s * v[i - k];
            }
        }
        // Q <- Q (I - 2vvᵀ/vᵀv) on columns k..n
        for row in 0..n {
            let s: f64 = (k..n).map(|i| q[(row, i)] * v[i - k]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..n {
                q[(row, i)] -= s * v[i - k];
            }
        }
    }
    for i in 0..n {
        if r[(i, i)] < 0.0 {
            for c in 0..n {
                r[(i, c)] = -r[(i, c)];
                q[(c, i)] = -q[(c, i)];
            }
        }
        for c in 0..i {
            r[(i, c)] = 0.0;
        }
    }
    Ok((q, r))
}

/// Orthogonal QR factor (positive-diagonal `R`). If `det(M) < 0` the last
/// column is negated so the result lies in SO(n).
pub fn orthonormalize(m: &DenseMatrix) -> Result<DenseMatrix> {
    let (mut q, r) = qr(m)?;
    let n = m.rows;
    let min_diag = (0..n).map(|i| r[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(min_diag > 1e-10 * m.frobenius_norm()) {
        return Err(Error::Singular("orthonormalize: rank-deficient input".into()));
    }
    if m.determinant()? < 0.0 {
        for row in 0..n {
            q[(row, n - 1)] = -q[(row, n - 1)];
        }
    }
    Ok(q)
}

/// Orthogonal polar factor `U` of `M = U·P`, by the Newton iteration
/// `U ← (U + U⁻ᵀ)/2` with Frobenius-norm scaling while far from convergence.
pub fn polar_orthogonal(m: &DenseMatrix) -> Result<DenseMatrix> {
    const MAX_ITERS: usize = 100;
    if !m.is_square() {
        return Err(Error::dim("polar factor of a non-square matrix"));
    }
    let mut u = m.clone();
    let mut last_step = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        let inv_t = u.inverse()?.transpose();
        let step_scale = (&u - &inv_t).frobenius_norm() / u.frobenius_norm();
        let gamma = if step_scale > 1e-2 {
            (inv_t.frobenius_norm() / u.frobenius_norm()).sqrt()
        } else {
            1.0
        };
        let next = &u.scale(0.5 * gamma) + &inv_t.scale(0.5 / gamma);
        let step = (&next - &u).frobenius_norm();
        u = next;
        // rounding floor: accept once the update stops shrinking near machine precision
        if step <= 1e-14 || (step < 1e-12 && step >= last_step) {
            return Ok(u);
        }
        last_step = step;
    }
    Err(Error::Convergence { what: "polar Newton iteration", iterations: MAX_ITERS })
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (unsorted) and the matrix whose columns are eigenvectors.
pub fn symmetric_eigen(m: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = m.rows;
    let mut a = symmetric_part(m);
    let mut v = DenseMatrix::identity(n);
    let total = a.frobenius_norm();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// Dominant (largest-magnitude) eigenpair of a symmetric matrix.
pub fn power_iteration(m: &DenseMatrix, seed: RngSeed) -> Result<(f64, Vec<f64>)> {
    const MAX_ITERS: usize = 100_000;
    if !m.is_square() {
        return Err(Error::dim("power iteration needs a square matrix"));
    }
    let n = m.rows;
    let mut rng = seed.rng();
    let mut v = gaussian_vec(&mut rng, n);
    if norm2(&v) == 0.0 {
        v[rng.random_range(0..n)] = 1.0;
    }
    normalize(&mut v);
    for _ in 0..MAX_ITERS {
        let mv = m.matvec(&v);
        let lambda = dot(&v, &mv);
        let residual = norm2(&mv.iter().zip(&v).map(|(a, b)| a - lambda * b).collect::<Vec<_>>());
        if residual <= 1e-10 {
            return Ok((lambda, v));
        }
        let len = norm2(&mv);
        if len == 0.0 {
            return Ok((0.0, v));
        }
        v = mv.into_iter().map(|x| x / len).collect();
    }
    Err(Error::Convergence { what: "power iteration", iterations: MAX_ITERS })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot length mismatch");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: &mut [f64]) {
    let n = norm2(a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
}

/// Haar-distributed rotation in SO(n).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DenseMatrix {
    loop {
        let g = crate::rng::gaussian_matrix(rng, n, n);
        if let Ok(q) = orthonormalize(&g) {
            return q;
        }
    }
}

/// Random skew matrix with Gaussian entries.
pub fn random_skew<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SkewMatrix {
    let g = crate::rng::gaussian_matrix(rng, n, n);
    skew_project(&g).expect("square by construction")
}
