//! SO(n) in left-trivialized coordinates, the unit sphere Sⁿ⁻¹ and flat ℝⁿ
//! behind one set of free functions.
//!
//! On SO(n) a tangent vector at `B` is stored as the skew matrix `Ω = Bᵀ A`
//! of its ambient representative `A`, and the metric is `trace(Ω₁ᵀΩ₂)`
//! (bi-invariant). Geodesics through `B` are `B·exp(tΩ)`.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::expm::{exp, logm_principal};
use crate::matrix::{dot, norm2, random_rotation, random_skew, skew_project, DenseMatrix, SkewMatrix};
use crate::rng::gaussian_vec;

/// Margin kept from the SO(n) injectivity radius (`‖Ω‖₂ < π`).
pub const SO_BRANCH_MARGIN: f64 = 1e-6;
/// Antipodal guard on the sphere: `‖p + q‖` must exceed this.
pub const SPHERE_ANTIPODAL_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManifoldKind {
    SpecialOrthogonal(usize),
    /// Unit sphere in ℝⁿ (so `Sphere(3)` is S²).
    Sphere(usize),
    Euclidean(usize),
}

impl ManifoldKind {
    /// Length of the ambient coordinate array (`n²` for SO(n)).
    pub fn ambient_len(self) -> usize {
        match self {
            ManifoldKind::SpecialOrthogonal(n) => n * n,
            ManifoldKind::Sphere(n) | ManifoldKind::Euclidean(n) => n,
        }
    }

    pub fn zero_tangent(self) -> TangentVector {
        match self {
            ManifoldKind::SpecialOrthogonal(n) => TangentVector::Skew(SkewMatrix::zeros(n)),
            ManifoldKind::Sphere(n) | ManifoldKind::Euclidean(n) => TangentVector::Vector(vec![0.0; n]),
        }
    }

    /// Builds a tangent vector from flat coordinates (row-major skew matrix on SO(n)).
    pub fn tangent_from_coords(self, coords: Vec<f64>) -> Result<TangentVector> {
        if coords.len() != self.ambient_len() {
            return Err(Error::dim(format!(
                "{} tangent coordinates for {:?}",
                coords.len(),
                self
            )));
        }
        Ok(match self {
            ManifoldKind::SpecialOrthogonal(n) => {
                TangentVector::Skew(skew_project(&DenseMatrix::from_vec(n, n, coords))?)
            }
            _ => TangentVector::Vector(coords),
        })
    }

    /// Haar rotation, uniform sphere point, or standard Gaussian vector.
    pub fn random_point<R: Rng + ?Sized>(self, rng: &mut R) -> ManifoldPoint {
        match self {
            ManifoldKind::SpecialOrthogonal(n) => ManifoldPoint::SpecialOrthogonal(random_rotation(rng, n)),
            ManifoldKind::Sphere(n) => loop {
                let x = gaussian_vec(rng, n);
                let len = norm2(&x);
                if len > 1e-8 {
                    break ManifoldPoint::Sphere(x.into_iter().map(|v| v / len).collect());
                }
            },
            ManifoldKind::Euclidean(n) => ManifoldPoint::Euclidean(gaussian_vec(rng, n)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ManifoldPoint {
    SpecialOrthogonal(DenseMatrix),
    Sphere(Vec<f64>),
    Euclidean(Vec<f64>),
}

impl ManifoldPoint {
    pub fn special_orthogonal(q: DenseMatrix) -> Result<Self> {
        let p = ManifoldPoint::SpecialOrthogonal(q);
        p.check()?;
        Ok(p)
    }

    pub fn sphere(x: Vec<f64>) -> Result<Self> {
        let p = ManifoldPoint::Sphere(x);
        p.check()?;
        Ok(p)
    }

    pub fn euclidean(x: Vec<f64>) -> Result<Self> {
        let p = ManifoldPoint::Euclidean(x);
        p.check()?;
        Ok(p)
    }

    pub fn identity(n: usize) -> Self {
        ManifoldPoint::SpecialOrthogonal(DenseMatrix::identity(n))
    }

    pub fn kind(&self) -> ManifoldKind {
        match self {
            ManifoldPoint::SpecialOrthogonal(q) => ManifoldKind::SpecialOrthogonal(q.rows()),
            ManifoldPoint::Sphere(x) => ManifoldKind::Sphere(x.len()),
            ManifoldPoint::Euclidean(x) => ManifoldKind::Euclidean(x.len()),
        }
    }

    /// Ambient coordinates (row-major matrix entries on SO(n)).
    pub fn ambient(&self) -> &[f64] {
        match self {
            ManifoldPoint::SpecialOrthogonal(q) => q.data(),
            ManifoldPoint::Sphere(x) | ManifoldPoint::Euclidean(x) => x,
        }
    }

    pub fn as_matrix(&self) -> Option<&DenseMatrix> {
        match self {
            ManifoldPoint::SpecialOrthogonal(q) => Some(q),
            _ => None,
        }
    }

    /// Checks the kind invariant: orthogonality with positive determinant,
    /// unit norm, or finiteness.
    pub fn check(&self) -> Result<()> {
        if self.ambient().iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite point".into()));
        }
        match self {
            ManifoldPoint::SpecialOrthogonal(q) => {
                if !q.is_square() {
                    return Err(Error::dim("SO(n) point must be square"));
                }
                let defect = q.orthogonality_defect();
                if defect > 1e-10 {
                    return Err(Error::Domain(format!("not orthogonal (‖QᵀQ - I‖ = {defect:e})")));
                }
                if q.determinant()? <= 0.0 {
                    return Err(Error::Domain("orthogonal matrix with negative determinant".into()));
                }
            }
            ManifoldPoint::Sphere(x) => {
                if x.is_empty() {
                    return Err(Error::dim("empty sphere point"));
                }
                let gap = (norm2(x) - 1.0).abs();
                if gap > 1e-12 {
                    return Err(Error::Domain(format!("not unit norm (|‖x‖ - 1| = {gap:e})")));
                }
            }
            ManifoldPoint::Euclidean(x) => {
                if x.is_empty() {
                    return Err(Error::dim("empty Euclidean point"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TangentVector {
    /// Left-trivialized SO(n) tangent `Ω = Bᵀ A`.
    Skew(SkewMatrix),
    /// Ambient sphere tangent or plain Euclidean vector.
    Vector(Vec<f64>),
}

impl TangentVector {
    pub fn coords(&self) -> &[f64] {
        match self {
            TangentVector::Skew(s) => s.as_matrix().data(),
            TangentVector::Vector(v) => v,
        }
    }

    pub fn norm(&self) -> f64 {
        norm2(self.coords())
    }

    pub fn inner(&self, other: &TangentVector) -> f64 {
        dot(self.coords(), other.coords())
    }

    pub fn is_zero(&self) -> bool {
        self.coords().iter().all(|&x| x == 0.0)
    }

    pub fn scale(&self, s: f64) -> TangentVector {
        match self {
            TangentVector::Skew(m) => TangentVector::Skew(m.scale(s)),
            TangentVector::Vector(v) => TangentVector::Vector(v.iter().map(|x| x * s).collect()),
        }
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &TangentVector) -> TangentVector {
        match (self, other) {
            (TangentVector::Skew(a), TangentVector::Skew(b)) => {
                let mut m = a.as_matrix().clone();
                m.axpy(alpha, b.as_matrix());
                TangentVector::Skew(skew_project(&m).expect("square"))
            }
            (TangentVector::Vector(a), TangentVector::Vector(b)) => {
                assert_eq!(a.len(), b.len(), "tangent length mismatch");
                TangentVector::Vector(a.iter().zip(b).map(|(x, y)| x + alpha * y).collect())
            }
            _ => panic!("mixing skew and vector tangents"),
        }
    }

    pub fn as_skew(&self) -> Option<&SkewMatrix> {
        match self {
            TangentVector::Skew(s) => Some(s),
            TangentVector::Vector(_) => None,
        }
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            TangentVector::Vector(v) => Some(v),
            TangentVector::Skew(_) => None,
        }
    }
}

/// Checks that `v` is a tangent vector at `p`.
pub fn check_tangent(p: &ManifoldPoint, v: &TangentVector) -> Result<()> {
    match (p, v) {
        (ManifoldPoint::SpecialOrthogonal(q), TangentVector::Skew(s)) if q.rows() == s.n() => Ok(()),
        (ManifoldPoint::Sphere(x), TangentVector::Vector(t)) if x.len() == t.len() => {
            let radial = dot(x, t).abs();
            if radial > 1e-12 * norm2(t) + 1e-15 {
                Err(Error::Domain(format!("vector is not tangent to the sphere (⟨x, v⟩ = {radial:e})")))
            } else {
                Ok(())
            }
        }
        (ManifoldPoint::Euclidean(x), TangentVector::Vector(t)) if x.len() == t.len() => Ok(()),
        _ => Err(Error::Domain(format!("tangent vector does not belong to a {:?} point", p.kind()))),
    }
}

fn check_same_kind(p: &ManifoldPoint, q: &ManifoldPoint) -> Result<()> {
    if p.kind() != q.kind() {
        return Err(Error::Domain(format!("points on {:?} and {:?}", p.kind(), q.kind())));
    }
    Ok(())
}

fn renormalized(x: Vec<f64>) -> Vec<f64> {
    let len = norm2(&x);
    x.into_iter().map(|v| v / len).collect()
}

/// Riemannian exponential.
pub fn exp_point(p: &ManifoldPoint, v: &TangentVector) -> Result<ManifoldPoint> {
    check_tangent(p, v)?;
    Ok(match (p, v) {
        (ManifoldPoint::SpecialOrthogonal(b), TangentVector::Skew(w)) => {
            if w.norm() == 0.0 {
                return Ok(p.clone());
            }
            ManifoldPoint::SpecialOrthogonal(b.matmul(&exp(w.as_matrix())?))
        }
        (ManifoldPoint::Sphere(x), TangentVector::Vector(t)) => {
            let theta = norm2(t);
            if theta == 0.0 {
                return Ok(p.clone());
            }
            let (s, c) = theta.sin_cos();
            ManifoldPoint::Sphere(renormalized(
                x.iter().zip(t).map(|(xi, ti)| c * xi + s * ti / theta).collect(),
            ))
        }
        (ManifoldPoint::Euclidean(x), TangentVector::Vector(t)) => {
            ManifoldPoint::Euclidean(x.iter().zip(t).map(|(a, b)| a + b).collect())
        }
        _ => unreachable!("checked by check_tangent"),
    })
}

/// Riemannian logarithm, guarded by the injectivity domain.
pub fn log_point(p: &ManifoldPoint, q: &ManifoldPoint) -> Result<TangentVector> {
    check_same_kind(p, q)?;
    match (p, q) {
        (ManifoldPoint::SpecialOrthogonal(b), ManifoldPoint::SpecialOrthogonal(c)) => {
            let rel = b.transpose().matmul(c);
            let w = skew_project(&logm_principal(&rel)?.result)?;
            check_so_generator(&w)?;
            Ok(TangentVector::Skew(w))
        }
        (ManifoldPoint::Sphere(x), ManifoldPoint::Sphere(y)) => {
            let sum: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
            if norm2(&sum) <= SPHERE_ANTIPODAL_GUARD {
                return Err(Error::Branch("antipodal points on the sphere".into()));
            }
            let c = dot(x, y);
            let tangential: Vec<f64> = y.iter().zip(x).map(|(yi, xi)| yi - c * xi).collect();
            let s = norm2(&tangential);
            if s == 0.0 {
                return Ok(TangentVector::Vector(vec![0.0; x.len()]));
            }
            // same angle as arccos(clamp(c)), better conditioned near 0
            let theta = s.atan2(c);
            Ok(TangentVector::Vector(tangential.into_iter().map(|t| theta * t / s).collect()))
        }
        (ManifoldPoint::Euclidean(x), ManifoldPoint::Euclidean(y)) => {
            Ok(TangentVector::Vector(y.iter().zip(x).map(|(a, b)| a - b).collect()))
        }
        _ => unreachable!("kinds checked"),
    }
}

/// Fails with a branch error unless `‖Ω‖₂ ≤ π - SO_BRANCH_MARGIN`.
pub fn check_so_generator(w: &SkewMatrix) -> Result<()> {
    let rho = w.as_matrix().spectral_norm();
    if rho > PI - SO_BRANCH_MARGIN {
        return Err(Error::Branch(format!("‖Ω‖₂ = {rho} at the injectivity boundary")));
    }
    Ok(())
}

/// Orthogonal projection of a vector with matching shape onto `T_pM`. Only
/// the sphere has a normal direction; other kinds return `v` unchanged.
pub fn project_tangent(p: &ManifoldPoint, v: &TangentVector) -> TangentVector {
    match (p, v) {
        (ManifoldPoint::Sphere(x), TangentVector::Vector(t)) => {
            let r = dot(x, t);
            TangentVector::Vector(t.iter().zip(x).map(|(ti, xi)| ti - r * xi).collect())
        }
        _ => v.clone(),
    }
}

/// Converts an ambient (Euclidean) gradient into the Riemannian gradient.
pub fn egrad_to_rgrad(p: &ManifoldPoint, g: &[f64]) -> Result<TangentVector> {
    let kind = p.kind();
    if g.len() != kind.ambient_len() {
        return Err(Error::dim(format!("gradient of length {} for {kind:?}", g.len())));
    }
    Ok(match p {
        ManifoldPoint::SpecialOrthogonal(b) => {
            let n = b.rows();
            let gm = DenseMatrix::from_vec(n, n, g.to_vec());
            TangentVector::Skew(skew_project(&b.transpose().matmul(&gm))?)
        }
        ManifoldPoint::Sphere(x) => {
            let r = dot(x, g);
            TangentVector::Vector(g.iter().zip(x).map(|(gi, xi)| gi - r * xi).collect())
        }
        ManifoldPoint::Euclidean(_) => TangentVector::Vector(g.to_vec()),
    })
}

/// Ambient representative of a tangent vector (`B·Ω` on SO(n)).
pub fn ambient_tangent(p: &ManifoldPoint, v: &TangentVector) -> Vec<f64> {
    match (p, v) {
        (ManifoldPoint::SpecialOrthogonal(b), TangentVector::Skew(w)) => b.matmul(w.as_matrix()).into_vec(),
        (_, TangentVector::Vector(t)) => t.clone(),
        _ => panic!("tangent does not match point"),
    }
}

/// Parallel transport of `w` along the geodesic `t ↦ exp_p(t·v)`, `t ∈ [0, 1]`.
pub fn parallel_transport(p: &ManifoldPoint, v: &TangentVector, w: &TangentVector) -> Result<TangentVector> {
    check_tangent(p, v)?;
    check_tangent(p, w)?;
    match (p, v, w) {
        (ManifoldPoint::SpecialOrthogonal(_), TangentVector::Skew(sv), TangentVector::Skew(sw)) => {
            if sv.norm() == 0.0 {
                return Ok(w.clone());
            }
            check_so_generator(sv)?;
            // ω ↦ e^{-Ω/2} ω e^{Ω/2}
            let half = exp(&sv.as_matrix().scale(0.5))?;
            let moved = half.transpose().matmul(sw.as_matrix()).matmul(&half);
            Ok(TangentVector::Skew(skew_project(&moved)?))
        }
        (ManifoldPoint::Sphere(x), TangentVector::Vector(tv), TangentVector::Vector(tw)) => {
            let theta = norm2(tv);
            if theta == 0.0 {
                return Ok(w.clone());
            }
            if theta >= PI {
                return Err(Error::Branch(format!("geodesic of length {theta} leaves the injectivity domain")));
            }
            let u: Vec<f64> = tv.iter().map(|t| t / theta).collect();
            let a = dot(&u, tw);
            let (s, c) = theta.sin_cos();
            let moved: Vec<f64> =
                tw.iter().zip(&u).zip(x).map(|((wi, ui), xi)| wi + a * ((c - 1.0) * ui - s * xi)).collect();
            // remove the rounding-level normal component at the endpoint
            let end = exp_point(p, v)?;
            Ok(project_tangent(&end, &TangentVector::Vector(moved)))
        }
        (ManifoldPoint::Euclidean(_), _, _) => Ok(w.clone()),
        _ => unreachable!("checked by check_tangent"),
    }
}

/// Transports `w` around the closed geodesic polygon through `waypoints`
/// (first and last waypoint must equal `p`).
pub fn holonomy_loop(p: &ManifoldPoint, waypoints: &[ManifoldPoint], w: &TangentVector) -> Result<TangentVector> {
    check_tangent(p, w)?;
    let (first, last) = match (waypoints.first(), waypoints.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::Domain("empty loop".into())),
    };
    for end in [first, last] {
        check_same_kind(p, end)?;
        let gap = norm2(&end.ambient().iter().zip(p.ambient()).map(|(a, b)| a - b).collect::<Vec<_>>());
        if gap > 1e-12 {
            return Err(Error::Domain("loop does not start and end at p".into()));
        }
    }
    let mut carried = w.clone();
    for leg in waypoints.windows(2) {
        let step = log_point(&leg[0], &leg[1])?;
        carried = parallel_transport(&leg[0], &step, &carried)?;
    }
    Ok(carried)
}

/// Cayley retraction `B (I + Ω/2)(I - Ω/2)⁻¹` on SO(n).
pub fn cayley_retract(p: &ManifoldPoint, v: &TangentVector) -> Result<ManifoldPoint> {
    check_tangent(p, v)?;
    match (p, v) {
        (ManifoldPoint::SpecialOrthogonal(b), TangentVector::Skew(w)) => {
            let half = w.as_matrix().scale(0.5);
            let minus = (-&half).add_identity(1.0);
            let plus = half.add_identity(1.0);
            // the two factors commute
            let c = minus
                .solve(&plus)
                .map_err(|_| Error::Singular("I - Ω/2 is singular".into()))?;
            Ok(ManifoldPoint::SpecialOrthogonal(b.matmul(&c)))
        }
        _ => Err(Error::Unsupported(format!("Cayley retraction on {:?}", p.kind()))),
    }
}

/// Geodesic distance `‖log_p(q)‖`.
pub fn distance(p: &ManifoldPoint, q: &ManifoldPoint) -> Result<f64> {
    Ok(log_point(p, q)?.norm())
}

/// Random tangent at `p` with Gaussian coordinates scaled to norm `len`.
pub fn random_tangent<R: Rng + ?Sized>(p: &ManifoldPoint, len: f64, rng: &mut R) -> TangentVector {
    let raw = match p {
        ManifoldPoint::SpecialOrthogonal(b) => TangentVector::Skew(random_skew(rng, b.rows())),
        ManifoldPoint::Sphere(x) => {
            let g = gaussian_vec(rng, x.len());
            egrad_to_rgrad(p, &g).expect("shape")
        }
        ManifoldPoint::Euclidean(x) => TangentVector::Vector(gaussian_vec(rng, x.len())),
    };
    let n = raw.norm();
    if n == 0.0 {
        raw
    } else {
        raw.scale(len / n)
    }
}
