//! Benchmark objectives with independently computed optima.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;

use crate::engine::Problem;
use crate::error::{Error, Result};
use crate::expm::exp;
use crate::manifold::{distance, log_point, ManifoldKind, ManifoldPoint};
use crate::matrix::{polar_orthogonal, power_iteration, random_rotation, random_skew, DenseMatrix};
use crate::rng::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProblemName {
    Procrustes,
    RayleighSphere,
    GeodesicDistance,
}

impl ProblemName {
    pub const ALL: [ProblemName; 3] =
        [ProblemName::Procrustes, ProblemName::RayleighSphere, ProblemName::GeodesicDistance];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemName::Procrustes => "procrustes",
            ProblemName::RayleighSphere => "rayleigh-sphere",
            ProblemName::GeodesicDistance => "geodesic-distance",
        }
    }
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown problem `{s}`")))
    }
}

/// Spectral norm of the target rotation's generator in geodesic-distance problems.
const GEODESIC_TARGET_RADIUS: f64 = 1.5;

/// Builds a randomized instance of the named problem on dimension `n`.
///
/// * `procrustes`: `½‖AX - B‖²_F` on SO(n), `A` with singular values in
///   `[1, 2]`, `B = A·Q*`. Starts at the identity.
/// * `rayleigh-sphere`: `-½xᵀMx` on Sⁿ⁻¹. Starts at a random point.
/// * `geodesic-distance`: `½ d(X, Q*)²` on SO(n) with `Q*` at distance
///   below π from the identity. Starts at the identity.
pub fn build_problem(name: ProblemName, n: usize, seed: RngSeed) -> Result<Problem> {
    if n < 2 {
        return Err(Error::Config(format!("problem dimension must be at least 2, got {n}")));
    }
    let mut rng = seed.rng();
    match name {
        ProblemName::Procrustes => {
            let u = random_rotation(&mut rng, n);
            let v = random_rotation(&mut rng, n);
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..=2.0)).collect();
            let a = u.matmul(&DenseMatrix::from_diagonal(&s)).matmul(&v.transpose());
            let q_star = random_rotation(&mut rng, n);
            let b = a.matmul(&q_star);
            procrustes(a, b)
        }
        ProblemName::RayleighSphere => {
            let q = random_rotation(&mut rng, n);
            let mut lambda: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            lambda[0] = 2.0;
            let m = q.matmul(&DenseMatrix::from_diagonal(&lambda)).matmul(&q.transpose());
            let m = &m.scale(0.5) + &m.transpose().scale(0.5);
            let start = ManifoldKind::Sphere(n).random_point(&mut rng);
            rayleigh_sphere(m, start, RngSeed(seed.0.wrapping_add(1)))
        }
        ProblemName::GeodesicDistance => {
            let w = random_skew(&mut rng, n);
            let w = w.scale(GEODESIC_TARGET_RADIUS / w.as_matrix().spectral_norm());
            geodesic_distance(exp(w.as_matrix())?)
        }
    }
}

fn so_point(p: &ManifoldPoint) -> &DenseMatrix {
    p.as_matrix().expect("problem registered on SO(n)")
}

/// `½‖AX - B‖²_F` on SO(n). The optimum value comes from the polar factor of
/// `AᵀB`, and the Hessian bound is `σ_max(A)²`.
pub fn procrustes(a: DenseMatrix, b: DenseMatrix) -> Result<Problem> {
    let n = a.rows();
    if !a.is_square() || b.shape() != a.shape() {
        return Err(Error::dim("procrustes needs square A and B of the same size"));
    }
    let a = Arc::new(a);
    let b = Arc::new(b);
    let value = {
        let (a, b) = (a.clone(), b.clone());
        move |x: &DenseMatrix| 0.5 * (&a.matmul(x) - b.as_ref()).frobenius_norm().powi(2)
    };
    let optimum = {
        let c = a.transpose().matmul(&b);
        let x = polar_orthogonal(&c)?;
        if x.determinant()? > 0.0 {
            Some(value(&x))
        } else {
            None
        }
    };
    let alpha = a.spectral_norm().powi(2);
    let objective = {
        let value = value.clone();
        Arc::new(move |p: &ManifoldPoint| value(so_point(p)))
    };
    let gradient = {
        let (a, b) = (a.clone(), b.clone());
        Arc::new(move |p: &ManifoldPoint| {
            let residual = &a.matmul(so_point(p)) - b.as_ref();
            a.transpose().matmul(&residual).into_vec()
        })
    };
    let mut problem = Problem::new(
        "procrustes",
        ManifoldKind::SpecialOrthogonal(n),
        objective,
        gradient,
        ManifoldPoint::identity(n),
    )?
    .with_hessian_bound(alpha);
    problem.known_optimum = optimum;
    Ok(problem)
}

/// `-½xᵀMx` on the unit sphere; optimum `-λ_max/2` by power iteration on a
/// shifted copy of `M`.
pub fn rayleigh_sphere(m: DenseMatrix, start: ManifoldPoint, seed: RngSeed) -> Result<Problem> {
    let n = m.rows();
    if !m.is_square() {
        return Err(Error::dim("rayleigh quotient needs a square matrix"));
    }
    let shift = m.one_norm();
    let (top, _) = power_iteration(&m.add_identity(shift), seed)?;
    let lambda_max = top - shift;
    let m = Arc::new(m);
    let objective = {
        let m = m.clone();
        Arc::new(move |p: &ManifoldPoint| {
            let x = p.ambient();
            -0.5 * crate::matrix::dot(x, &m.matvec(x))
        })
    };
    let gradient = {
        let m = m.clone();
        Arc::new(move |p: &ManifoldPoint| m.matvec(p.ambient()).into_iter().map(|v| -v).collect())
    };
    Ok(Problem::new("rayleigh-sphere", ManifoldKind::Sphere(n), objective, gradient, start)?
        .with_known_optimum(-0.5 * lambda_max)
        .with_hessian_bound(m.spectral_norm()))
}

/// `½ d(X, Q*)²` on SO(n). Not finite where `Q*` lies on the cut locus of `X`.
pub fn geodesic_distance(q_star: DenseMatrix) -> Result<Problem> {
    let n = q_star.rows();
    let target = Arc::new(ManifoldPoint::special_orthogonal(q_star)?);
    let objective = {
        let target = target.clone();
        Arc::new(move |p: &ManifoldPoint| distance(p, &target).map_or(f64::NAN, |d| 0.5 * d * d))
    };
    let gradient = {
        let target = target.clone();
        Arc::new(move |p: &ManifoldPoint| match log_point(p, &target) {
            Ok(w) => {
                let skew = w.as_skew().expect("SO(n) tangent");
                so_point(p).matmul(&skew.as_matrix().scale(-1.0)).into_vec()
            }
            Err(_) => vec![f64::NAN; n * n],
        })
    };
    Ok(Problem::new(
        "geodesic-distance",
        ManifoldKind::SpecialOrthogonal(n),
        objective,
        gradient,
        ManifoldPoint::identity(n),
    )?
    .with_known_optimum(0.0)
    // Hess ½d² ≤ 1 on a manifold of nonnegative curvature
    .with_hessian_bound(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::egrad_to_rgrad;

    #[test]
    fn procrustes_with_b_equal_a_has_identity_optimum() {
        let a = DenseMatrix::from_rows(&[[2.0, 0.3, 0.0], [0.1, 1.5, 0.2], [0.0, 0.4, 1.2]]);
        let p = procrustes(a.clone(), a).unwrap();
        assert!(p.known_optimum.unwrap().abs() < 1e-30);
        assert_eq!(p.value(&ManifoldPoint::identity(3)), 0.0);
    }

    #[test]
    fn rayleigh_diagonal() {
        let m = DenseMatrix::from_diagonal(&[5.0, 1.0, 1.0]);
        let start = ManifoldPoint::sphere(vec![0.0, 1.0, 0.0]).unwrap();
        let p = rayleigh_sphere(m, start, RngSeed(3)).unwrap();
        assert!((p.known_optimum.unwrap() + 2.5).abs() < 1e-12);
        let e1 = ManifoldPoint::sphere(vec![1.0, 0.0, 0.0]).unwrap();
        assert!((p.value(&e1) + 2.5).abs() < 1e-15);
    }

    #[test]
    fn procrustes_oracle_is_stationary() {
        let p = build_problem(ProblemName::Procrustes, 8, RngSeed(73)).unwrap();
        let c = {
            // recover the oracle point from the problem by minimizing over candidates
            let mut rng = RngSeed(73).rng();
            let u = random_rotation(&mut rng, 8);
            let v = random_rotation(&mut rng, 8);
            let s: Vec<f64> = (0..8).map(|_| rng.random_range(1.0..=2.0)).collect();
            let a = u.matmul(&DenseMatrix::from_diagonal(&s)).matmul(&v.transpose());
            let q = random_rotation(&mut rng, 8);
            a.transpose().matmul(&a.matmul(&q))
        };
        let x = ManifoldPoint::special_orthogonal(polar_orthogonal(&c).unwrap()).unwrap();
        assert!((p.value(&x) - p.known_optimum.unwrap()).abs() < 1e-14);
        let g = egrad_to_rgrad(&x, &p.ambient_gradient(&x)).unwrap();
        assert!(g.norm() <= 1e-8, "{}", g.norm());
    }

    #[test]
    fn names_roundtrip_and_reject_unknown() {
        for name in ProblemName::ALL {
            assert_eq!(name.as_str().parse::<ProblemName>().unwrap(), name);
        }
        assert!(matches!("rosenbrock".parse::<ProblemName>(), Err(Error::Config(_))));
        assert!(build_problem(ProblemName::Procrustes, 1, RngSeed(0)).is_err());
    }

    #[test]
    fn all_problems_build_with_consistent_gradients() {
        for name in ProblemName::ALL {
            for n in [3, 4, 8] {
                let p = build_problem(name, n, RngSeed(5)).unwrap();
                p.check_gradient(RngSeed(9)).unwrap();
                assert!(p.known_optimum.is_some());
                assert!(p.value(&p.start) >= p.known_optimum.unwrap() - 1e-12);
            }
        }
    }
}
