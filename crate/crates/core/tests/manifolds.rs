mod common;

use std::f64::consts::PI;

use atriv_core::manifold::{
    distance, egrad_to_rgrad, exp_point, holonomy_loop, log_point, parallel_transport, random_tangent,
};
use atriv_core::matrix::{normalize, skew_project};
use atriv_core::rng::gaussian_vec;
use atriv_core::{DenseMatrix, ManifoldKind, ManifoldPoint, RngSeed, SkewMatrix, TangentVector};
use common::{cross, dot, max_abs_diff};

fn sphere_point(x: Vec<f64>) -> ManifoldPoint {
    ManifoldPoint::sphere(x).unwrap()
}

fn random_unit(rng: &mut impl rand::Rng) -> Vec<f64> {
    let mut x = gaussian_vec(rng, 3);
    normalize(&mut x);
    x
}

/// Girard: area of a spherical triangle is its angular excess. Uses the
/// l'Huilier-free tangent formula of Van Oosterom and Strackee.
fn spherical_triangle_area(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    let numerator = dot(a, &cross(b, c)).abs();
    let denominator = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
    2.0 * numerator.atan2(denominator)
}

/// Signed rotation angle from `u` to `w` in the tangent plane at `p`.
fn tangent_angle(p: &[f64], u: &[f64], w: &[f64]) -> f64 {
    dot(&cross(u, w), p).atan2(dot(u, w))
}

#[test]
fn octant_loop_rotates_by_enclosed_area() {
    let e = |i: usize| {
        let mut x = vec![0.0; 3];
        x[i] = 1.0;
        sphere_point(x)
    };
    let loop_points = [e(0), e(1), e(2), e(0)];
    let w = TangentVector::Vector(vec![0.0, 1.0, 0.0]);
    let out = holonomy_loop(&e(0), &loop_points, &w).unwrap();
    let angle = tangent_angle(&[1.0, 0.0, 0.0], w.coords(), out.coords());
    assert!((angle.abs() - PI / 2.0).abs() <= 1e-12, "angle {angle}");
    assert!((out.norm() - 1.0).abs() <= 1e-14);
}

#[test]
fn random_triangle_holonomy_equals_spherical_excess() {
    let mut rng = RngSeed(211).rng();
    let mut checked = 0;
    while checked < 20 {
        let (a, b, c) = (random_unit(&mut rng), random_unit(&mut rng), random_unit(&mut rng));
        // keep triangles well inside a hemisphere so every edge is a short geodesic
        if dot(&a, &b) < 0.2 || dot(&b, &c) < 0.2 || dot(&c, &a) < 0.2 {
            continue;
        }
        let p = sphere_point(a.clone());
        let loop_points = [p.clone(), sphere_point(b.clone()), sphere_point(c.clone()), p.clone()];
        let w = random_tangent(&p, 1.0, &mut rng);
        let out = holonomy_loop(&p, &loop_points, &w).unwrap();
        let angle = tangent_angle(&a, w.coords(), out.coords()).abs();
        let area = spherical_triangle_area(&a, &b, &c);
        assert!((angle - area).abs() <= 1e-10, "angle {angle} vs area {area}");
        checked += 1;
    }
}

#[test]
fn sphere_transport_matches_integrated_transport_equation() {
    // Along γ(t) = exp_p(t v), a parallel field satisfies W' = -⟨W, γ'⟩ γ.
    let mut rng = RngSeed(223).rng();
    let kind = ManifoldKind::Sphere(4);
    for _ in 0..5 {
        let p = kind.random_point(&mut rng);
        let v = random_tangent(&p, 2.0, &mut rng);
        let w = random_tangent(&p, 1.0, &mut rng);
        let (x, vv) = (p.ambient().to_vec(), v.coords().to_vec());
        let theta = atriv_core::matrix::norm2(&vv);
        let u: Vec<f64> = vv.iter().map(|t| t / theta).collect();
        let gamma = |t: f64| -> (Vec<f64>, Vec<f64>) {
            let (s, c) = (theta * t).sin_cos();
            let pos = x.iter().zip(&u).map(|(xi, ui)| c * xi + s * ui).collect();
            let vel = x.iter().zip(&u).map(|(xi, ui)| theta * (-s * xi + c * ui)).collect();
            (pos, vel)
        };
        let rhs = |t: f64, field: &[f64]| -> Vec<f64> {
            let (pos, vel) = gamma(t);
            let k = dot(field, &vel);
            pos.iter().map(|pi| -k * pi).collect()
        };
        let steps = 2000;
        let h = 1.0 / steps as f64;
        let mut field = w.coords().to_vec();
        for i in 0..steps {
            let t = i as f64 * h;
            let add = |a: &[f64], b: &[f64], s: f64| a.iter().zip(b).map(|(x, y)| x + s * y).collect::<Vec<_>>();
            let k1 = rhs(t, &field);
            let k2 = rhs(t + h / 2.0, &add(&field, &k1, h / 2.0));
            let k3 = rhs(t + h / 2.0, &add(&field, &k2, h / 2.0));
            let k4 = rhs(t + h, &add(&field, &k3, h));
            for j in 0..field.len() {
                field[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        let got = parallel_transport(&p, &v, &w).unwrap();
        assert!(max_abs_diff(got.coords(), &field) <= 1e-11);
    }
}

#[test]
fn so3_exponential_matches_rodrigues() {
    let mut rng = RngSeed(227).rng();
    for _ in 0..10 {
        let axis = random_unit(&mut rng);
        let theta = 3.0 * rand::Rng::random::<f64>(&mut rng);
        let k = DenseMatrix::from_rows(&[
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]);
        let rodrigues = &(&DenseMatrix::identity(3) + &k.scale(theta.sin())) + &k.matmul(&k).scale(1.0 - theta.cos());
        let omega = TangentVector::Skew(SkewMatrix::new(k.scale(theta)).unwrap());
        let q = exp_point(&ManifoldPoint::identity(3), &omega).unwrap();
        assert!(max_abs_diff(q.ambient(), rodrigues.data()) <= 1e-14);
        let d = distance(&ManifoldPoint::identity(3), &q).unwrap();
        assert!((d - 2f64.sqrt() * theta).abs() <= 1e-12);
    }
}

#[test]
fn so_transport_matches_bi_invariant_formula() {
    // On a bi-invariant group, parallel transport of BΩ along B e^{tV} is
    // B e^{V} (e^{-V/2} Ω e^{V/2}).
    let mut rng = RngSeed(229).rng();
    let kind = ManifoldKind::SpecialOrthogonal(4);
    let p = kind.random_point(&mut rng);
    let v = random_tangent(&p, 1.2, &mut rng);
    let w = random_tangent(&p, 1.0, &mut rng);
    let half = common::taylor_expm(&v.as_skew().unwrap().as_matrix().scale(0.5));
    let expected = half.transpose().matmul(w.as_skew().unwrap().as_matrix()).matmul(&half);
    let got = parallel_transport(&p, &v, &w).unwrap();
    assert!(max_abs_diff(got.coords(), expected.data()) <= 1e-13);
}

#[test]
fn so_logarithm_inverts_exponential_near_the_cut_locus() {
    let mut rng = RngSeed(233).rng();
    let kind = ManifoldKind::SpecialOrthogonal(5);
    for _ in 0..10 {
        let p = kind.random_point(&mut rng);
        let v = random_tangent(&p, 1.0, &mut rng);
        let s = v.as_skew().unwrap().as_matrix().spectral_norm();
        let v = v.scale((PI - 0.1) / s);
        let back = log_point(&p, &exp_point(&p, &v).unwrap()).unwrap();
        assert!(max_abs_diff(back.coords(), v.coords()) <= 1e-10);
    }
}

#[test]
fn riemannian_gradient_of_linear_function_matches_finite_differences() {
    let mut rng = RngSeed(239).rng();
    let c = atriv_core::rng::gaussian_matrix(&mut rng, 4, 4);
    let kind = ManifoldKind::SpecialOrthogonal(4);
    let p = kind.random_point(&mut rng);
    let g = egrad_to_rgrad(&p, c.data()).unwrap();
    let expected = skew_project(&p.as_matrix().unwrap().transpose().matmul(&c)).unwrap();
    assert!(max_abs_diff(g.coords(), expected.as_matrix().data()) <= 1e-15);
    let f = |q: &ManifoldPoint| dot(q.ambient(), c.data());
    for _ in 0..5 {
        let w = random_tangent(&p, 1.0, &mut rng);
        let h = 1e-5;
        let fd = (f(&exp_point(&p, &w.scale(h)).unwrap()) - f(&exp_point(&p, &w.scale(-h)).unwrap())) / (2.0 * h);
        assert!((fd - g.inner(&w)).abs() <= 1e-8);
    }
}
