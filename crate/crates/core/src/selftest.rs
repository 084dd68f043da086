//! Fast invariant checks over the whole stack, used by `bench selftest`.

use std::f64::consts::PI;

use crate::engine::{
    atriv_run, dtriv_run, pullback_gradient, rgd_run, static_run, steepest_transport, Period, Retraction,
    RunOptions,
};
use crate::error::Result;
use crate::expm::{dexp, dexp_adjoint, dexp_inverse, expm, logm_principal};
use crate::manifold::{
    exp_point, holonomy_loop, log_point, parallel_transport, random_tangent, ManifoldKind, ManifoldPoint,
    TangentVector,
};
use crate::matrix::{frobenius_inner, random_skew, DenseMatrix};
use crate::optimizer::OptimizerRule;
use crate::problems::{build_problem, ProblemName};
use crate::rng::RngSeed;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn() -> Result<(bool, String)>;

const CHECKS: &[(&str, Check)] = &[
    ("expm budget and orthogonality", expm_budget),
    ("log inverts exp on SO(n)", log_inverts_exp),
    ("dexp adjoint pairing", dexp_adjoint_pairing),
    ("dexp inverse round trip", dexp_inverse_round_trip),
    ("sphere exp/log round trip", sphere_round_trip),
    ("parallel transport isometry", transport_isometry),
    ("octant loop holonomy", octant_holonomy),
    ("steepest transport maps pullback gradients", steepest_transport_property),
    ("static trivialization equals ATRIV-inf", static_equals_atriv_infinity),
    ("DTRIV-1 with SGD equals RGD", dtriv_sgd_equals_rgd),
    ("ATRIV equals Adam on Euclidean space", atriv_equals_euclidean_adam),
];

/// Runs every check; a check that returns an error counts as failed.
pub fn run_selftest() -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|(name, check)| match check() {
            Ok((passed, detail)) => CheckOutcome { name, passed, detail },
            Err(e) => CheckOutcome { name, passed: false, detail: format!("error: {e}") },
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn verdict(err: f64, tol: f64) -> (bool, String) {
    (err <= tol, format!("max error {err:.3e} (tolerance {tol:.0e})"))
}

fn expm_budget() -> Result<(bool, String)> {
    let mut rng = RngSeed(1).rng();
    let mut worst: f64 = 0.0;
    let mut products = 0;
    for n in [4, 8, 16] {
        for _ in 0..20 {
            let w = random_skew(&mut rng, n);
            let w = w.scale(10.0 / w.as_matrix().one_norm());
            let r = expm(w.as_matrix())?;
            products = products.max(r.polynomial_products);
            worst = worst.max(r.result.orthogonality_defect());
        }
    }
    Ok((worst <= 1e-12 && products <= 5, format!("defect {worst:.3e}, products {products}")))
}

fn log_inverts_exp() -> Result<(bool, String)> {
    let mut rng = RngSeed(2).rng();
    let mut worst: f64 = 0.0;
    for n in [3, 4, 8] {
        for _ in 0..10 {
            let w = random_skew(&mut rng, n);
            let w = w.as_matrix().scale((PI - 0.1) / w.as_matrix().spectral_norm());
            let back = logm_principal(&expm(&w)?.result)?.result;
            worst = worst.max((&back - &w).frobenius_norm() / w.frobenius_norm());
        }
    }
    Ok(verdict(worst, 1e-10))
}

fn dexp_adjoint_pairing() -> Result<(bool, String)> {
    let mut rng = RngSeed(3).rng();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let w = crate::rng::gaussian_matrix(&mut rng, 5, 5);
        let e = crate::rng::gaussian_matrix(&mut rng, 5, 5);
        let f = crate::rng::gaussian_matrix(&mut rng, 5, 5);
        let lhs = frobenius_inner(&dexp(&w, &e)?, &f)?;
        let rhs = frobenius_inner(&e, &dexp_adjoint(&w, &f)?)?;
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    Ok(verdict(worst, 1e-10))
}

fn dexp_inverse_round_trip() -> Result<(bool, String)> {
    let mut rng = RngSeed(4).rng();
    let mut worst: f64 = 0.0;
    for target in [0.5, 2.0, 0.95 * PI] {
        let w = random_skew(&mut rng, 4);
        let w = w.as_matrix().scale(target / w.as_matrix().spectral_norm());
        let e = random_skew(&mut rng, 4).into_matrix();
        let back = dexp_inverse(&w, &dexp(&w, &e)?)?;
        worst = worst.max((&back - &e).frobenius_norm() / e.frobenius_norm());
    }
    Ok(verdict(worst, 1e-10))
}

fn sphere_round_trip() -> Result<(bool, String)> {
    let mut rng = RngSeed(5).rng();
    let kind = ManifoldKind::Sphere(5);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let p = kind.random_point(&mut rng);
        let v = random_tangent(&p, 2.5, &mut rng);
        let back = log_point(&p, &exp_point(&p, &v)?)?;
        worst = worst.max(max_abs_diff(back.coords(), v.coords()));
    }
    Ok(verdict(worst, 1e-10))
}

fn transport_isometry() -> Result<(bool, String)> {
    let mut rng = RngSeed(6).rng();
    let mut worst: f64 = 0.0;
    for kind in [ManifoldKind::SpecialOrthogonal(4), ManifoldKind::Sphere(5)] {
        for _ in 0..10 {
            let p = kind.random_point(&mut rng);
            let v = random_tangent(&p, 1.0, &mut rng);
            let a = random_tangent(&p, 1.0, &mut rng);
            let b = random_tangent(&p, 1.0, &mut rng);
            let ta = parallel_transport(&p, &v, &a)?;
            let tb = parallel_transport(&p, &v, &b)?;
            worst = worst.max((ta.inner(&tb) - a.inner(&b)).abs());
        }
    }
    Ok(verdict(worst, 1e-12))
}

fn octant_holonomy() -> Result<(bool, String)> {
    let e = |i: usize| {
        let mut x = vec![0.0; 3];
        x[i] = 1.0;
        ManifoldPoint::Sphere(x)
    };
    let loop_points = [e(0), e(1), e(2), e(0)];
    let w = TangentVector::Vector(vec![0.0, 1.0, 0.0]);
    let out = holonomy_loop(&e(0), &loop_points, &w)?;
    let c = out.coords();
    let angle = c[2].atan2(c[1]).abs();
    Ok(verdict((angle - PI / 2.0).abs(), 1e-6))
}

fn steepest_transport_property() -> Result<(bool, String)> {
    let mut rng = RngSeed(7).rng();
    let mut worst: f64 = 0.0;
    for name in [ProblemName::Procrustes, ProblemName::RayleighSphere] {
        let problem = build_problem(name, 4, RngSeed(8))?;
        for _ in 0..5 {
            let p0 = problem.kind.random_point(&mut rng);
            let pi = exp_point(&p0, &random_tangent(&p0, 0.5, &mut rng))?;
            let v = random_tangent(&pi, 0.5, &mut rng);
            let w = log_point(&p0, &exp_point(&pi, &v)?)?;
            let direct = pullback_gradient(&pi, &v, &problem)?;
            let moved = steepest_transport(&p0, &pi, &v, &pullback_gradient(&p0, &w, &problem)?)?;
            let diff = moved.add_scaled(-1.0, &direct);
            worst = worst.max(diff.norm() / direct.norm().max(1e-300));
        }
    }
    Ok(verdict(worst, 1e-7))
}

fn trace_gap(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    max_abs_diff(a, b)
}

fn static_equals_atriv_infinity() -> Result<(bool, String)> {
    let problem = build_problem(ProblemName::Procrustes, 4, RngSeed(9))?;
    let opts = RunOptions::new(1e-2, 50);
    let a = atriv_run(&problem, OptimizerRule::adam(), Period::Never, opts, &problem.start)?;
    let s = static_run(&problem, OptimizerRule::adam(), opts, &problem.start)?;
    Ok(verdict(trace_gap(&a.values(), &s.values()), 1e-10))
}

fn dtriv_sgd_equals_rgd() -> Result<(bool, String)> {
    let problem = build_problem(ProblemName::Procrustes, 4, RngSeed(10))?;
    let opts = RunOptions::new(1e-2, 50);
    let d = dtriv_run(&problem, OptimizerRule::Sgd, Period::Every(1), opts, &problem.start)?;
    let r = rgd_run(&problem, opts, &problem.start, Retraction::Exp)?;
    Ok(verdict(trace_gap(&d.values(), &r.values()), 1e-10))
}

fn atriv_equals_euclidean_adam() -> Result<(bool, String)> {
    let m = DenseMatrix::from_rows(&[[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 3.0]]);
    let kind = ManifoldKind::Euclidean(3);
    let start = ManifoldPoint::Euclidean(vec![1.0, -2.0, 0.5]);
    let problem = crate::engine::Problem::new(
        "quadratic",
        kind,
        std::sync::Arc::new({
            let m = m.clone();
            move |p: &ManifoldPoint| 0.5 * crate::matrix::dot(p.ambient(), &m.matvec(p.ambient()))
        }),
        std::sync::Arc::new(move |p: &ManifoldPoint| m.matvec(p.ambient())),
        start.clone(),
    )?;
    let opts = RunOptions::new(1e-2, 50);
    let reference = static_run(&problem, OptimizerRule::adam(), opts, &start)?;
    let mut worst: f64 = 0.0;
    for period in [Period::Every(1), Period::Every(5), Period::Never] {
        let run = atriv_run(&problem, OptimizerRule::adam(), period, opts, &start)?;
        worst = worst.max(trace_gap(&run.values(), &reference.values()));
    }
    Ok(verdict(worst, 1e-12))
}
