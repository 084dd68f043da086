//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod oracle;

use std::f64::consts::PI;
use std::fs;
use std::sync::Arc;
use std::time::Instant;

use atriv_cli::{run_experiment, run_grid, ConfigPairs, ExperimentConfig};
use atriv_core::engine::{
    atriv_run, dtriv_run, pullback_gradient, rgd_momentum_full_history_run, rgd_momentum_transport_run, rgd_run,
    static_run, steepest_transport, theorem_iteration_bound, theorem_step_size, Period, Problem, Retraction,
    RunOptions,
};
use atriv_core::expm::{dexp, dexp_adjoint, expm, logm_principal};
use atriv_core::manifold::{exp_point, holonomy_loop, log_point, random_tangent};
use atriv_core::matrix::{frobenius_inner, random_skew};
use atriv_core::rng::{gaussian_matrix, gaussian_vec};
use atriv_core::{build_problem, DenseMatrix, ManifoldKind, ManifoldPoint, OptimizerRule, ProblemName, RngSeed};
use oracle::taylor_expm;
use rand::Rng;

struct Outcome {
    passed: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { passed: true, details: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.passed &= ok;
        self.details.push(format!("{} {detail}", if ok { "ok" } else { "FAILED" }));
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn rel_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).frobenius_norm() / b.frobenius_norm()
}

fn scaled_skew(rng: &mut impl Rng, n: usize, spectral: f64) -> DenseMatrix {
    let w = random_skew(rng, n).into_matrix();
    let s = w.spectral_norm();
    w.scale(spectral / s)
}

fn expm_budget_and_accuracy() -> Outcome {
    let mut out = Outcome::new();
    let started = Instant::now();
    let mut rng = RngSeed(1001).rng();
    let (mut worst_products, mut worst_err) = (0, 0.0f64);
    for i in 0..1000 {
        let n = [4, 8, 16][i % 3];
        let w = random_skew(&mut rng, n).into_matrix();
        let w = w.scale(rng.random_range(0.0..=50.0) / w.one_norm());
        let r = expm(&w).expect("expm");
        worst_products = worst_products.max(r.polynomial_products);
        worst_err = worst_err.max(rel_err(&r.result, &taylor_expm(&w)));
    }
    let elapsed = started.elapsed().as_secs_f64();
    out.check(worst_products <= 5, format!("max polynomial products {worst_products} (≤ 5)"));
    out.check(worst_err <= 1e-12, format!("max relative error {worst_err:.2e} vs Taylor oracle (≤ 1e-12)"));
    out.check(elapsed < 30.0, format!("runtime {elapsed:.1} s (< 30 s)"));
    out
}

fn exp_log_dexp_consistency() -> Outcome {
    let mut out = Outcome::new();
    let mut rng = RngSeed(1002).rng();
    let mut worst_roundtrip = 0.0f64;
    for i in 0..100 {
        let n = [3, 4, 8][i % 3];
        let spectral = rng.random_range(1e-3..=PI - 0.1);
        let w = scaled_skew(&mut rng, n, spectral);
        let back = logm_principal(&expm(&w).unwrap().result).unwrap().result;
        worst_roundtrip = worst_roundtrip.max((&back - &w).frobenius_norm());
    }
    out.check(worst_roundtrip <= 1e-10, format!("log∘exp round trip {worst_roundtrip:.2e} (≤ 1e-10)"));

    let mut worst_pairing = 0.0f64;
    for _ in 0..100 {
        let w = gaussian_matrix(&mut rng, 5, 5);
        let e = gaussian_matrix(&mut rng, 5, 5);
        let f = gaussian_matrix(&mut rng, 5, 5);
        let lhs = frobenius_inner(&dexp(&w, &e).unwrap(), &f).unwrap();
        let rhs = frobenius_inner(&e, &dexp_adjoint(&w, &f).unwrap()).unwrap();
        worst_pairing = worst_pairing.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    out.check(worst_pairing <= 1e-10, format!("adjoint pairing {worst_pairing:.2e} (≤ 1e-10)"));

    let w = scaled_skew(&mut rng, 5, 2.0);
    let e = random_skew(&mut rng, 5).into_matrix();
    let d = dexp(&w, &e).unwrap();
    let fd_err = |h: f64| {
        let plus = taylor_expm(&(&w + &e.scale(h)));
        let minus = taylor_expm(&(&w - &e.scale(h)));
        (&(&plus - &minus).scale(0.5 / h) - &d).frobenius_norm()
    };
    let order = (fd_err(1e-2) / fd_err(5e-3)).log2();
    out.check(order >= 1.9, format!("central-difference order {order:.3} (≥ 1.9)"));
    out
}

fn linear_problem(kind: ManifoldKind, seed: u64) -> Problem {
    let c = Arc::new(gaussian_vec(&mut RngSeed(seed).rng(), kind.ambient_len()));
    let c2 = c.clone();
    let start = kind.random_point(&mut RngSeed(seed + 1).rng());
    Problem::new(
        "linear",
        kind,
        Arc::new(move |p: &ManifoldPoint| p.ambient().iter().zip(c.iter()).map(|(x, y)| x * y).sum()),
        Arc::new(move |_: &ManifoldPoint| c2.to_vec()),
        start,
    )
    .unwrap()
}

fn steepest_descent_property() -> Outcome {
    let mut out = Outcome::new();
    let mut rng = RngSeed(1003).rng();
    let mut worst = 0.0f64;
    let mut instances = 0;
    for kind in [ManifoldKind::SpecialOrthogonal(4), ManifoldKind::Sphere(5)] {
        for i in 0..25u64 {
            let problem = if i % 2 == 0 {
                linear_problem(kind, 2000 + i)
            } else {
                let (name, n) = match kind {
                    ManifoldKind::SpecialOrthogonal(n) => (ProblemName::Procrustes, n),
                    ManifoldKind::Sphere(n) | ManifoldKind::Euclidean(n) => (ProblemName::RayleighSphere, n),
                };
                build_problem(name, n, RngSeed(2000 + i)).unwrap()
            };
            let p0 = kind.random_point(&mut rng);
            let (a, b) = (rng.random_range(0.1..1.0), rng.random_range(0.1..1.0));
            let pi = exp_point(&p0, &random_tangent(&p0, a, &mut rng)).unwrap();
            let v = random_tangent(&pi, b, &mut rng);
            let w = log_point(&p0, &exp_point(&pi, &v).unwrap()).unwrap();
            let direct = pullback_gradient(&pi, &v, &problem).unwrap();
            let moved = steepest_transport(&p0, &pi, &v, &pullback_gradient(&p0, &w, &problem).unwrap()).unwrap();
            worst = worst.max(moved.add_scaled(-1.0, &direct).norm() / direct.norm());
            instances += 1;
        }
    }
    out.check(worst <= 1e-7, format!("{instances} instances, max relative error {worst:.2e} (≤ 1e-7)"));
    out
}

/// Adam on flat coordinates, written out independently of the library.
fn hand_adam(problem: &Problem, eta: f64, iters: usize) -> Vec<f64> {
    let (beta1, beta2, eps) = (0.9f64, 0.99f64, 1e-8);
    let mut x = problem.start.ambient().to_vec();
    let mut m = vec![0.0; x.len()];
    let mut v = vec![0.0; x.len()];
    let mut values = Vec::new();
    for t in 1..=iters {
        let g = problem.ambient_gradient(&ManifoldPoint::Euclidean(x.clone()));
        for j in 0..x.len() {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            let m_hat = m[j] / (1.0 - beta1.powi(t as i32));
            let v_hat = v[j] / (1.0 - beta2.powi(t as i32));
            x[j] -= eta * m_hat / (v_hat.sqrt() + eps);
        }
        values.push(problem.value(&ManifoldPoint::Euclidean(x.clone())));
    }
    values
}

fn euclidean_quadratic(n: usize, seed: u64) -> Problem {
    let g = gaussian_matrix(&mut RngSeed(seed).rng(), n, n);
    let m = Arc::new(&g.transpose().matmul(&g).scale(1.0 / n as f64) + &DenseMatrix::identity(n));
    let m2 = m.clone();
    let start = ManifoldPoint::Euclidean(gaussian_vec(&mut RngSeed(seed + 1).rng(), n));
    Problem::new(
        "quadratic",
        ManifoldKind::Euclidean(n),
        Arc::new(move |p: &ManifoldPoint| {
            0.5 * p.ambient().iter().zip(m.matvec(p.ambient())).map(|(a, b)| a * b).sum::<f64>()
        }),
        Arc::new(move |p: &ManifoldPoint| m2.matvec(p.ambient())),
        start,
    )
    .unwrap()
}

fn equivalence_family() -> Outcome {
    let mut out = Outcome::new();
    for (name, n, seed) in [(ProblemName::Procrustes, 8, 3001), (ProblemName::RayleighSphere, 16, 3002)] {
        let problem = build_problem(name, n, RngSeed(seed)).unwrap();
        let opts = RunOptions::new(1e-2, 500);
        let a = atriv_run(&problem, OptimizerRule::adam(), Period::Never, opts, &problem.start).unwrap();
        let s = static_run(&problem, OptimizerRule::adam(), opts, &problem.start).unwrap();
        let gap = max_abs_diff(&a.values(), &s.values());
        out.check(gap <= 1e-10, format!("(a) ATRIV-inf vs static on {name}: {gap:.2e} (≤ 1e-10)"));
    }

    let problem = build_problem(ProblemName::Procrustes, 6, RngSeed(59)).unwrap();
    let opts = RunOptions::new(1e-2, 200).recording();
    let d = dtriv_run(&problem, OptimizerRule::Sgd, Period::Every(1), opts, &problem.start).unwrap();
    let r = rgd_run(&problem, opts, &problem.start, Retraction::Exp).unwrap();
    let f_gap = max_abs_diff(&d.values(), &r.values());
    let point_gap = d
        .points
        .iter()
        .zip(&r.points)
        .map(|(a, b)| max_abs_diff(a.ambient(), b.ambient()))
        .fold(0.0, f64::max);
    out.check(
        f_gap <= 1e-10 && point_gap <= 1e-10 && d.points.len() == 200,
        format!("(b) DTRIV-1(SGD) vs RGD(exp): f {f_gap:.2e}, points {point_gap:.2e} (≤ 1e-10)"),
    );

    let problem = euclidean_quadratic(6, 3003);
    let reference = hand_adam(&problem, 5e-2, 300);
    for period in [Period::Every(1), Period::Every(5), Period::Never] {
        let run = atriv_run(&problem, OptimizerRule::adam(), period, RunOptions::new(5e-2, 300), &problem.start)
            .unwrap();
        let gap = max_abs_diff(&run.values(), &reference);
        out.check(gap <= 1e-12, format!("(c) Euclidean ATRIV-{period} vs plain Adam: {gap:.2e} (≤ 1e-12)"));
    }
    out
}

fn holonomy() -> Outcome {
    let mut out = Outcome::new();
    let e = |i: usize| {
        let mut x = vec![0.0; 3];
        x[i] = 1.0;
        ManifoldPoint::sphere(x).unwrap()
    };
    let w = atriv_core::TangentVector::Vector(vec![0.0, 1.0, 0.0]);
    let turned = holonomy_loop(&e(0), &[e(0), e(1), e(2), e(0)], &w).unwrap();
    let c = turned.coords();
    let angle = c[2].atan2(c[1]).abs();
    out.check(
        (angle - PI / 2.0).abs() <= 1e-6,
        format!("S² octant loop rotation {angle:.12} vs π/2 (± 1e-6)"),
    );

    let flat = |x: [f64; 3]| ManifoldPoint::Euclidean(x.to_vec());
    let origin = flat([0.0, 0.0, 0.0]);
    let loop_points = [origin.clone(), flat([1.0, 0.0, 0.0]), flat([0.0, 1.0, 0.0]), origin.clone()];
    let v = atriv_core::TangentVector::Vector(vec![0.3, -1.2, 2.0]);
    let back = holonomy_loop(&origin, &loop_points, &v).unwrap();
    let gap = max_abs_diff(back.coords(), v.coords());
    out.check(gap <= 1e-14, format!("Euclidean loop is the identity: {gap:.2e} (≤ 1e-14)"));

    let momentum_gap = |problem: &Problem, steps: usize| {
        let opts = RunOptions::new(5e-2, steps).recording();
        let heavy = rgd_momentum_transport_run(problem, 0.9, opts, &problem.start).unwrap();
        let full = rgd_momentum_full_history_run(problem, 0.9, opts, &problem.start).unwrap();
        heavy
            .directions
            .iter()
            .zip(&full.directions)
            .map(|(a, b)| max_abs_diff(a.coords(), b.coords()))
            .fold(0.0, f64::max)
    };
    let sphere = build_problem(ProblemName::RayleighSphere, 3, RngSeed(71)).unwrap();
    let gap = momentum_gap(&sphere, 200);
    out.check(gap > 1e-4, format!("S² transported vs full-history momentum gap {gap:.2e} by step 200 (> 1e-4)"));
    let flat = euclidean_quadratic(3, 71);
    let gap = momentum_gap(&flat, 200);
    out.check(gap <= 1e-12, format!("Euclidean transported vs full-history momentum gap {gap:.2e} (≤ 1e-12)"));
    out
}

fn convergence_bound() -> Outcome {
    let mut out = Outcome::new();
    let started = Instant::now();
    let problem = build_problem(ProblemName::Procrustes, 4, RngSeed(4001)).unwrap();
    let eps = 1e-2;
    // geodesic diameter of SO(4) under the trace metric
    let r = 2.0 * PI;
    let eta = theorem_step_size(&problem, r).unwrap();
    let alpha_hat = 1.0 / eta;
    let gap0 = problem.value(&problem.start) - problem.known_optimum.unwrap();
    let bound = theorem_iteration_bound(alpha_hat, gap0, eps);
    for period in [Period::Every(1), Period::Every(10)] {
        let budget = bound.min(20_000);
        let run = atriv_run(&problem, OptimizerRule::Sgd, period, RunOptions::new(eta, budget), &problem.start)
            .unwrap();
        let hit = run.rows.iter().position(|row| row.grad_norm < eps);
        let mut previous = run.initial_value;
        let mut worst_rise = f64::NEG_INFINITY;
        for row in &run.rows {
            worst_rise = worst_rise.max(row.f - previous);
            previous = row.f;
        }
        out.check(
            hit.is_some_and(|t| t <= bound),
            format!("K={period}: ‖grad‖ < {eps} after {hit:?} iterations, bound {bound} (η = {eta:.4})"),
        );
        out.check(worst_rise <= 1e-12, format!("K={period}: largest increase {worst_rise:.2e} (≤ 1e-12)"));
    }
    let elapsed = started.elapsed().as_secs_f64();
    out.check(elapsed < 60.0, format!("runtime {elapsed:.1} s (< 60 s)"));
    out
}

fn grid_config(problem: ProblemName, n: usize, algo: &str, k: &str, seed: u64, dir: &std::path::Path) -> ExperimentConfig {
    let mut pairs = ConfigPairs::default();
    pairs.set("problem", problem.as_str());
    pairs.set("n", n.to_string());
    pairs.set("algo", algo);
    pairs.set("k", k);
    pairs.set("opt", "adam");
    pairs.set("lr", "0.01");
    pairs.set("iters", "5000");
    pairs.set("seed", seed.to_string());
    pairs.set("out", dir.join(format!("{problem}-{algo}-k{k}.csv")).to_string_lossy().into_owned());
    pairs.into_config().unwrap()
}

fn optimization_quality() -> Outcome {
    let mut out = Outcome::new();
    let dir = tempfile::tempdir().unwrap();
    for (problem, n, seed) in [(ProblemName::Procrustes, 8, 53), (ProblemName::RayleighSphere, 16, 67)] {
        let configs = [("atriv", "1"), ("dtriv", "1"), ("dtriv", "inf")]
            .map(|(algo, k)| grid_config(problem, n, algo, k, seed, dir.path()));
        let grid = run_grid(&configs).unwrap();
        assert!(grid.failures.is_empty(), "{:?}", grid.failures);
        let find = |algo: &str, period: Period| {
            grid.rows
                .iter()
                .find(|r| r.config.algorithm.as_str() == algo && r.config.period == period)
                .unwrap()
        };
        let atriv = find("atriv", Period::Every(1));
        let dtriv = find("dtriv", Period::Every(1));
        let fixed = find("dtriv", Period::Never);
        let gap = atriv.best_gap.unwrap();
        out.check(gap <= 1e-8, format!("{problem} n={n} seed {seed}: ATRIV-1(Adam) best gap {gap:.2e} (≤ 1e-8)"));
        out.check(
            atriv.best_f <= dtriv.best_f,
            format!(
                "{problem}: best f ATRIV-1 {:.6e} ≤ DTRIV-1 {:.6e} (DTRIV-inf {:.6e})",
                atriv.best_f, dtriv.best_f, fixed.best_f
            ),
        );
    }
    out
}

fn numerical_hygiene() -> Outcome {
    let mut out = Outcome::new();
    let problem = build_problem(ProblemName::Procrustes, 16, RngSeed(83)).unwrap();
    let opts = RunOptions { record_points: true, ..RunOptions::new(1e-2, 10_000) };
    let run = atriv_run(&problem, OptimizerRule::adam(), Period::Every(1), opts, &problem.start).unwrap();
    let drift = run
        .points
        .iter()
        .map(|p| p.as_matrix().unwrap().orthogonality_defect())
        .fold(0.0, f64::max);
    out.check(
        drift <= 1e-10 && run.points.len() == 10_000,
        format!("max ‖PᵀP − I‖_F over {} SO(16) iterates: {drift:.2e} (≤ 1e-10)", run.points.len()),
    );

    let dir = tempfile::tempdir().unwrap();
    for (algo, k) in [("atriv", "5"), ("dtriv", "1"), ("rgd-full-history", "")] {
        let mut bytes = Vec::new();
        for copy in 0..2 {
            let mut pairs = ConfigPairs::default();
            pairs.set("problem", "geodesic-distance");
            pairs.set("n", "6");
            pairs.set("algo", algo);
            if !k.is_empty() {
                pairs.set("k", k);
            }
            pairs.set("iters", "300");
            pairs.set("seed", "7");
            let path = dir.path().join(format!("{algo}-{copy}.csv"));
            pairs.set("out", path.to_string_lossy().into_owned());
            run_experiment(&pairs.into_config().unwrap()).unwrap();
            bytes.push(fs::read(&path).unwrap());
        }
        out.check(bytes[0] == bytes[1], format!("{algo}: repeated runs give byte-identical CSVs ({} bytes)", bytes[0].len()));
    }
    out
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("matrix exponential budget and accuracy", expm_budget_and_accuracy),
        ("exp/log/dexp consistency", exp_log_dexp_consistency),
        ("steepest-descent transport property", steepest_descent_property),
        ("equivalence family", equivalence_family),
        ("holonomy", holonomy),
        ("convergence-theorem step size and bound", convergence_bound),
        ("optimization quality", optimization_quality),
        ("numerical hygiene", numerical_hygiene),
    ];
    let mut failed = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = criterion();
        let verdict = if outcome.passed { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {}: {name} ({:.1} s)", i + 1, started.elapsed().as_secs_f64());
        for detail in &outcome.details {
            println!("    {detail}");
        }
        failed += usize::from(!outcome.passed);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
