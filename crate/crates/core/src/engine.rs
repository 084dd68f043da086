//! Trivialization-based optimizers.
//!
//! * [`atriv_run`]: adaptive dynamic trivialization. The optimizer state lives
//!   on `T_{p0}M`; each adapted direction is moved to `T_{p_i}M` by
//!   [`steepest_transport`] before it is applied.
//! * [`dtriv_run`]: dynamic trivialization that keeps the raw optimizer state
//!   when the base point moves. With [`Period::Never`] this is the static
//!   trivialization, see [`static_run`].
//! * [`rgd_run`], [`rgd_momentum_transport_run`] and
//!   [`rgd_momentum_full_history_run`]: classical Riemannian baselines.
//!
//! Every run records one [`TraceRow`] per iteration. A row holds the objective
//! *after* the step, the norm of the gradient of the pulled-back objective
//! *before* the step, and the length of the step in the tangent space it was
//! taken in.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expm::{dexp_adjoint, dexp_left, dexp_left_inverse};
use crate::manifold::{
    cayley_retract, check_so_generator, egrad_to_rgrad, exp_point, log_point, parallel_transport, project_tangent,
    random_tangent, ManifoldKind, ManifoldPoint, TangentVector, SO_BRANCH_MARGIN,
};
use crate::matrix::{dot, norm2, orthonormalize, skew_project, DenseMatrix};
use crate::optimizer::{OptimizerRule, OptimizerState};
use crate::rng::RngSeed;

pub type Objective = Arc<dyn Fn(&ManifoldPoint) -> f64 + Send + Sync>;
pub type AmbientGradient = Arc<dyn Fn(&ManifoldPoint) -> Vec<f64> + Send + Sync>;

/// Points whose orthogonality defect exceeds this are re-orthonormalized
/// after an outer update.
pub const REORTHONORMALIZE_THRESHOLD: f64 = 1e-12;

/// A smooth objective on one of the supported manifolds.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub kind: ManifoldKind,
    objective: Objective,
    gradient: AmbientGradient,
    pub known_optimum: Option<f64>,
    /// Bound `α` on the norm of the Hessian.
    pub hessian_bound: Option<f64>,
    /// Default starting point.
    pub start: ManifoldPoint,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("known_optimum", &self.known_optimum)
            .field("hessian_bound", &self.hessian_bound)
            .finish_non_exhaustive()
    }
}

const GRADIENT_CHECK_POINTS: usize = 10;
const GRADIENT_CHECK_STEP: f64 = 1e-5;
const GRADIENT_CHECK_TOLERANCE: f64 = 1e-5;

impl Problem {
    /// Registers a problem after checking its gradient against central
    /// differences at random points.
    pub fn new(
        name: impl Into<String>,
        kind: ManifoldKind,
        objective: Objective,
        gradient: AmbientGradient,
        start: ManifoldPoint,
    ) -> Result<Self> {
        if start.kind() != kind {
            return Err(Error::Domain(format!("start point on {:?}, problem on {kind:?}", start.kind())));
        }
        let problem = Problem {
            name: name.into(),
            kind,
            objective,
            gradient,
            known_optimum: None,
            hessian_bound: None,
            start,
        };
        problem.check_gradient(RngSeed(0))?;
        Ok(problem)
    }

    pub fn with_known_optimum(mut self, value: f64) -> Self {
        self.known_optimum = Some(value);
        self
    }

    pub fn with_hessian_bound(mut self, alpha: f64) -> Self {
        self.hessian_bound = Some(alpha);
        self
    }

    pub fn value(&self, p: &ManifoldPoint) -> f64 {
        (self.objective)(p)
    }

    pub fn ambient_gradient(&self, p: &ManifoldPoint) -> Vec<f64> {
        (self.gradient)(p)
    }

    pub fn rgrad(&self, p: &ManifoldPoint) -> Result<TangentVector> {
        egrad_to_rgrad(p, &self.ambient_gradient(p))
    }

    /// Compares `⟨rgrad, w⟩` with central differences of `f(exp_p(t·w))`.
    /// Points where the objective or gradient is not finite (cut loci) are skipped.
    pub fn check_gradient(&self, seed: RngSeed) -> Result<()> {
        let mut rng = seed.rng();
        let h = GRADIENT_CHECK_STEP;
        for _ in 0..GRADIENT_CHECK_POINTS {
            let p = if rand::Rng::random_bool(&mut rng, 0.5) {
                self.kind.random_point(&mut rng)
            } else {
                let v = random_tangent(&self.start, 1.0, &mut rng);
                exp_point(&self.start, &v)?
            };
            let g = self.ambient_gradient(&p);
            if g.len() != self.kind.ambient_len() {
                return Err(Error::dim(format!("gradient of length {} for {:?}", g.len(), self.kind)));
            }
            if g.iter().any(|x| !x.is_finite()) || !self.value(&p).is_finite() {
                continue;
            }
            let rg = egrad_to_rgrad(&p, &g)?;
            let w = random_tangent(&p, 1.0, &mut rng);
            let plus = self.value(&exp_point(&p, &w.scale(h))?);
            let minus = self.value(&exp_point(&p, &w.scale(-h))?);
            if !plus.is_finite() || !minus.is_finite() {
                continue;
            }
            let fd = (plus - minus) / (2.0 * h);
            let analytic = rg.inner(&w);
            let scale = analytic.abs().max(rg.norm()).max(1e-12);
            if (fd - analytic).abs() > GRADIENT_CHECK_TOLERANCE * scale {
                return Err(Error::Config(format!(
                    "gradient of `{}` disagrees with finite differences ({analytic} vs {fd})",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// How many inner steps are taken before the trivialization point moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Period {
    Every(usize),
    /// K = ∞: the trivialization point never moves.
    Never,
}

impl Period {
    fn reached(self, k: usize) -> bool {
        matches!(self, Period::Every(n) if k >= n)
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Every(k) => write!(f, "{k}"),
            Period::Never => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retraction {
    Exp,
    Cayley,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub eta: f64,
    pub iters: usize,
    /// Keep every iterate in [`RunRecord::points`].
    pub record_points: bool,
    /// Keep every search direction (adapted direction or momentum) in
    /// [`RunRecord::directions`].
    pub record_directions: bool,
}

impl RunOptions {
    pub fn new(eta: f64, iters: usize) -> Self {
        RunOptions { eta, iters, record_points: false, record_directions: false }
    }

    pub fn recording(mut self) -> Self {
        self.record_points = true;
        self.record_directions = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.eta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub outer: usize,
    pub inner: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub step_dist: f64,
    pub restarts: usize,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub initial_value: f64,
    pub rows: Vec<TraceRow>,
    pub terminal: ManifoldPoint,
    pub restarts: usize,
    pub points: Vec<ManifoldPoint>,
    pub directions: Vec<TangentVector>,
    pub warnings: Vec<String>,
    /// Set when the run stopped early on a non-finite value.
    pub aborted: Option<String>,
}

impl RunRecord {
    fn start(problem: &Problem, p0: &ManifoldPoint) -> Self {
        let initial_value = problem.value(p0);
        let aborted = (!initial_value.is_finite()).then(|| "objective is not finite at the start point".to_string());
        RunRecord {
            initial_value,
            rows: Vec::new(),
            terminal: p0.clone(),
            restarts: 0,
            points: Vec::new(),
            directions: Vec::new(),
            warnings: Vec::new(),
            aborted,
        }
    }

    pub fn final_value(&self) -> f64 {
        self.rows.last().map_or(self.initial_value, |r| r.f)
    }

    pub fn best_value(&self) -> f64 {
        self.rows.iter().map(|r| r.f).fold(self.initial_value, f64::min)
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.f).collect()
    }

    /// Records the step's row; returns `false` (and marks the run aborted) if
    /// the new objective value is not finite.
    fn push(&mut self, opts: &RunOptions, row: TraceRow, point: &ManifoldPoint, direction: Option<&TangentVector>) -> bool {
        if !row.f.is_finite() {
            self.aborted = Some(format!("objective became non-finite at iteration {}", self.rows.len()));
            return false;
        }
        self.rows.push(row);
        self.restarts = row.restarts;
        self.terminal = point.clone();
        if opts.record_points {
            self.points.push(point.clone());
        }
        if let (true, Some(d)) = (opts.record_directions, direction) {
            self.directions.push(d.clone());
        }
        true
    }

    fn abort_on_gradient(&mut self, g: &[f64]) -> bool {
        if g.iter().any(|x| !x.is_finite()) {
            self.aborted = Some(format!("gradient became non-finite at iteration {}", self.rows.len()));
            true
        } else {
            false
        }
    }
}

fn check_start(problem: &Problem, p0: &ManifoldPoint) -> Result<()> {
    if p0.kind() != problem.kind {
        return Err(Error::Domain(format!(
            "start point on {:?} for a problem on {:?}",
            p0.kind(),
            problem.kind
        )));
    }
    p0.check()
}

/// `∇(f ∘ exp_p)(w)` given the ambient gradient `g` of `f` at `exp_p(w)`.
pub fn pullback_from_ambient(p: &ManifoldPoint, w: &TangentVector, g: &[f64]) -> Result<TangentVector> {
    match (p, w) {
        (ManifoldPoint::SpecialOrthogonal(b), TangentVector::Skew(sw)) => {
            let n = b.rows();
            let local = b.transpose().matmul(&DenseMatrix::from_vec(n, n, g.to_vec()));
            if sw.norm() == 0.0 {
                return Ok(TangentVector::Skew(skew_project(&local)?));
            }
            Ok(TangentVector::Skew(skew_project(&dexp_adjoint(sw.as_matrix(), &local)?)?))
        }
        (ManifoldPoint::Sphere(x), TangentVector::Vector(t)) => Ok(TangentVector::Vector(sphere_dexp_adjoint(x, t, g))),
        (ManifoldPoint::Euclidean(_), TangentVector::Vector(_)) => Ok(TangentVector::Vector(g.to_vec())),
        _ => Err(Error::Domain("tangent vector does not match the point".into())),
    }
}

/// Gradient of `f ∘ exp_{p0}` at `w`.
pub fn pullback_gradient(p0: &ManifoldPoint, w: &TangentVector, problem: &Problem) -> Result<TangentVector> {
    let x = exp_point(p0, w)?;
    pullback_from_ambient(p0, w, &problem.ambient_gradient(&x))
}

/// Adjoint of `d(exp_x)_t` applied to an ambient vector `g`, on the sphere.
fn sphere_dexp_adjoint(x: &[f64], t: &[f64], g: &[f64]) -> Vec<f64> {
    let theta = norm2(t);
    let gx = dot(g, x);
    if theta == 0.0 {
        return g.iter().zip(x).map(|(gi, xi)| gi - gx * xi).collect();
    }
    let (s, c) = theta.sin_cos();
    let u: Vec<f64> = t.iter().map(|ti| ti / theta).collect();
    let gu = dot(g, &u);
    // image of the radial direction: -sin θ x + cos θ u
    let along = -s * gx + c * gu;
    let ratio = s / theta;
    g.iter()
        .zip(&u)
        .zip(x)
        .map(|((gi, ui), xi)| along * ui + ratio * (gi - gu * ui - gx * xi))
        .collect()
}

/// Inverse of [`sphere_dexp_adjoint`] restricted to `T_x S`: returns the
/// tangent vector at `exp_x(t)` that the adjoint maps to `g`.
fn sphere_dexp_adjoint_inverse(x: &[f64], t: &[f64], g: &[f64]) -> Vec<f64> {
    let theta = norm2(t);
    if theta == 0.0 {
        return g.to_vec();
    }
    let (s, c) = theta.sin_cos();
    let u: Vec<f64> = t.iter().map(|ti| ti / theta).collect();
    let a = dot(g, &u);
    let ratio = theta / s;
    g.iter()
        .zip(&u)
        .zip(x)
        .map(|((gi, ui), xi)| a * (-s * xi + c * ui) + ratio * (gi - a * ui))
        .collect()
}

fn check_sphere_length(t: &[f64]) -> Result<()> {
    let theta = norm2(t);
    if theta > PI - SO_BRANCH_MARGIN {
        return Err(Error::Branch(format!("tangent of length {theta} at the injectivity boundary")));
    }
    Ok(())
}

/// Maps `ĝ ∈ T_{p0}M` to `T_{p_i}M` by the adjoint of
/// `d(exp_{p0}⁻¹ ∘ exp_{p_i})` at `v`: the unique linear map that takes
/// gradients of `f ∘ exp_{p0}` to gradients of `f ∘ exp_{p_i}`.
pub fn steepest_transport(
    p0: &ManifoldPoint,
    pi: &ManifoldPoint,
    v: &TangentVector,
    ghat: &TangentVector,
) -> Result<TangentVector> {
    let x = exp_point(pi, v)?;
    let w = log_point(p0, &x)?;
    steepest_transport_at(p0, pi, v, &w, ghat)
}

/// [`steepest_transport`] with `w = exp_{p0}⁻¹(exp_{p_i}(v))` already known.
///
/// On SO(n), writing `L_Ω(X) = e^{-Ω} dexp(Ω, X)`, the map is
/// `ĝ ↦ L_{-v}(L_{-w}⁻¹(ĝ))`: the inverse adjoint of `d exp_{p0}` at `w`
/// followed by the adjoint of `d exp_{p_i}` at `v`.
pub fn steepest_transport_at(
    p0: &ManifoldPoint,
    pi: &ManifoldPoint,
    v: &TangentVector,
    w: &TangentVector,
    ghat: &TangentVector,
) -> Result<TangentVector> {
    match (p0, pi, v, w, ghat) {
        (
            ManifoldPoint::SpecialOrthogonal(_),
            ManifoldPoint::SpecialOrthogonal(_),
            TangentVector::Skew(sv),
            TangentVector::Skew(sw),
            TangentVector::Skew(sg),
        ) => {
            check_so_generator(sw)?;
            check_so_generator(sv)?;
            let mut out = sg.as_matrix().clone();
            if sw.norm() != 0.0 {
                out = dexp_left_inverse(&-sw.as_matrix(), &out)?;
            }
            if sv.norm() != 0.0 {
                out = dexp_left(&-sv.as_matrix(), &out)?;
            }
            Ok(TangentVector::Skew(skew_project(&out)?))
        }
        (
            ManifoldPoint::Sphere(x0),
            ManifoldPoint::Sphere(xi),
            TangentVector::Vector(tv),
            TangentVector::Vector(tw),
            TangentVector::Vector(g),
        ) => {
            check_sphere_length(tw)?;
            check_sphere_length(tv)?;
            let at_x = sphere_dexp_adjoint_inverse(x0, tw, g);
            Ok(TangentVector::Vector(sphere_dexp_adjoint(xi, tv, &at_x)))
        }
        (ManifoldPoint::Euclidean(_), ManifoldPoint::Euclidean(_), _, _, TangentVector::Vector(g)) => {
            Ok(TangentVector::Vector(g.clone()))
        }
        _ => Err(Error::Domain("mismatched points and tangents in steepest_transport".into())),
    }
}

/// Tangent vector at `p` from optimizer output. Coordinate-wise rules do not
/// preserve tangency on the sphere, so the normal component is removed there.
fn adapted_tangent(p: &ManifoldPoint, coords: Vec<f64>) -> Result<TangentVector> {
    match p {
        ManifoldPoint::Sphere(_) => egrad_to_rgrad(p, &coords),
        _ => p.kind().tangent_from_coords(coords),
    }
}

fn repaired(p: ManifoldPoint) -> Result<ManifoldPoint> {
    match p {
        ManifoldPoint::SpecialOrthogonal(q) if q.orthogonality_defect() > REORTHONORMALIZE_THRESHOLD => {
            Ok(ManifoldPoint::SpecialOrthogonal(orthonormalize(&q)?))
        }
        other => Ok(other),
    }
}

/// Adaptive dynamic trivialization (ATRIV-K).
///
/// Inner step on `T_{p_i}M`:
/// `w = exp_{p0}⁻¹(exp_{p_i}(v))`, `g = ∇(f ∘ exp_{p0})(w)`,
/// `ĝ = optimizer(g)` with state on `T_{p0}M`,
/// `g̃ = steepest_transport(ĝ)`, `v ← v - η g̃`.
/// After `K` inner steps the trivialization point becomes `exp_{p_i}(v)`.
///
/// If a logarithm or transport leaves the injectivity domain, the run
/// restarts: `p0` and `p_i` move to the current iterate and the optimizer
/// state is reset.
pub fn atriv_run(
    problem: &Problem,
    rule: OptimizerRule,
    period: Period,
    opts: RunOptions,
    p0: &ManifoldPoint,
) -> Result<RunRecord> {
    opts.validate()?;
    check_start(problem, p0)?;
    let kind = problem.kind;
    let mut record = RunRecord::start(problem, p0);
    if record.aborted.is_some() {
        return Ok(record);
    }
    let mut base = p0.clone();
    let mut pi = p0.clone();
    let mut x = p0.clone();
    let mut v = kind.zero_tangent();
    let mut opt = OptimizerState::new(rule, kind.ambient_len());
    let (mut outer, mut inner, mut restarts) = (0usize, 0usize, 0usize);

    for _ in 0..opts.iters {
        let grad = problem.ambient_gradient(&x);
        if record.abort_on_gradient(&grad) {
            break;
        }
        let mut rebase = |x: &ManifoldPoint,
                          base: &mut ManifoldPoint,
                          pi: &mut ManifoldPoint,
                          v: &mut TangentVector,
                          opt: &mut OptimizerState|
         -> Result<()> {
            let fresh = repaired(x.clone())?;
            *base = fresh.clone();
            *pi = fresh;
            *v = kind.zero_tangent();
            opt.reset();
            restarts += 1;
            outer += 1;
            inner = 0;
            Ok(())
        };

        let w = match log_point(&base, &x) {
            Ok(w) => w,
            Err(e) if e.is_restartable() => {
                rebase(&x, &mut base, &mut pi, &mut v, &mut opt)?;
                kind.zero_tangent()
            }
            Err(e) => return Err(e),
        };
        let grad_norm = pullback_from_ambient(&pi, &v, &grad)?.norm();
        let g = pullback_from_ambient(&base, &w, &grad)?;
        let ghat = adapted_tangent(&base, opt.step(g.coords())?)?;
        let direction = match steepest_transport_at(&base, &pi, &v, &w, &ghat) {
            Ok(d) => d,
            Err(e) if e.is_restartable() => {
                rebase(&x, &mut base, &mut pi, &mut v, &mut opt)?;
                let g = pullback_from_ambient(&base, &kind.zero_tangent(), &grad)?;
                adapted_tangent(&base, opt.step(g.coords())?)?
            }
            Err(e) => return Err(e),
        };
        let row_outer = outer;
        let row_inner = inner;
        v = v.add_scaled(-opts.eta, &direction);
        x = exp_point(&pi, &v)?;
        inner += 1;
        if period.reached(inner) {
            pi = repaired(x)?;
            x = pi.clone();
            v = kind.zero_tangent();
            inner = 0;
            outer += 1;
        }
        let row = TraceRow {
            outer: row_outer,
            inner: row_inner,
            f: problem.value(&x),
            grad_norm,
            step_dist: opts.eta * direction.norm(),
            restarts,
        };
        if !record.push(&opts, row, &x, Some(&direction)) {
            break;
        }
    }
    Ok(record)
}

/// Dynamic trivialization (DTRIV-K) with the optimizer state carried over
/// unchanged when the trivialization point moves.
pub fn dtriv_run(
    problem: &Problem,
    rule: OptimizerRule,
    period: Period,
    opts: RunOptions,
    p0: &ManifoldPoint,
) -> Result<RunRecord> {
    opts.validate()?;
    check_start(problem, p0)?;
    let kind = problem.kind;
    let mut record = RunRecord::start(problem, p0);
    if record.aborted.is_some() {
        return Ok(record);
    }
    let mut pi = p0.clone();
    let mut x = p0.clone();
    let mut v = kind.zero_tangent();
    let mut opt = OptimizerState::new(rule, kind.ambient_len());
    let (mut outer, mut inner) = (0usize, 0usize);

    for _ in 0..opts.iters {
        let grad = problem.ambient_gradient(&x);
        if record.abort_on_gradient(&grad) {
            break;
        }
        let g = pullback_from_ambient(&pi, &v, &grad)?;
        let ghat = adapted_tangent(&pi, opt.step(g.coords())?)?;
        let row_outer = outer;
        let row_inner = inner;
        v = v.add_scaled(-opts.eta, &ghat);
        x = exp_point(&pi, &v)?;
        inner += 1;
        if period.reached(inner) {
            pi = repaired(x)?;
            x = pi.clone();
            v = kind.zero_tangent();
            inner = 0;
            outer += 1;
        }
        let row = TraceRow {
            outer: row_outer,
            inner: row_inner,
            f: problem.value(&x),
            grad_norm: g.norm(),
            step_dist: opts.eta * ghat.norm(),
            restarts: 0,
        };
        if !record.push(&opts, row, &x, Some(&ghat)) {
            break;
        }
    }
    Ok(record)
}

/// Static trivialization: optimize `f ∘ exp_{p0}` on `T_{p0}M` for the whole run.
pub fn static_run(problem: &Problem, rule: OptimizerRule, opts: RunOptions, p0: &ManifoldPoint) -> Result<RunRecord> {
    dtriv_run(problem, rule, Period::Never, opts, p0)
}

const CAYLEY_MAX_HALVINGS: usize = 30;

/// Riemannian gradient descent `p ← R_p(-η grad f(p))`.
pub fn rgd_run(problem: &Problem, opts: RunOptions, p0: &ManifoldPoint, retraction: Retraction) -> Result<RunRecord> {
    opts.validate()?;
    check_start(problem, p0)?;
    if retraction == Retraction::Cayley && !matches!(problem.kind, ManifoldKind::SpecialOrthogonal(_)) {
        return Err(Error::Unsupported(format!("Cayley retraction on {:?}", problem.kind)));
    }
    let mut record = RunRecord::start(problem, p0);
    if record.aborted.is_some() {
        return Ok(record);
    }
    let mut x = p0.clone();
    for t in 0..opts.iters {
        let grad = problem.ambient_gradient(&x);
        if record.abort_on_gradient(&grad) {
            break;
        }
        let g = egrad_to_rgrad(&x, &grad)?;
        let (next, length) = match retraction {
            Retraction::Exp => (exp_point(&x, &g.scale(-opts.eta))?, opts.eta * g.norm()),
            Retraction::Cayley => {
                let mut eta = opts.eta;
                let mut halvings = 0;
                loop {
                    match cayley_retract(&x, &g.scale(-eta)) {
                        Ok(p) => break (p, eta * g.norm()),
                        Err(Error::Singular(_)) if halvings < CAYLEY_MAX_HALVINGS => {
                            eta *= 0.5;
                            halvings += 1;
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
        };
        x = repaired(next)?;
        let row = TraceRow { outer: t, inner: 0, f: problem.value(&x), grad_norm: g.norm(), step_dist: length, restarts: 0 };
        if !record.push(&opts, row, &x, Some(&g)) {
            break;
        }
    }
    Ok(record)
}

/// Riemannian heavy ball: `m ← grad f(p) + μ·τ(m)`, where `τ` is parallel
/// transport along the previous step; `p ← exp_p(-η m)`.
pub fn rgd_momentum_transport_run(
    problem: &Problem,
    mu: f64,
    opts: RunOptions,
    p0: &ManifoldPoint,
) -> Result<RunRecord> {
    opts.validate()?;
    check_start(problem, p0)?;
    let mut record = RunRecord::start(problem, p0);
    if record.aborted.is_some() {
        return Ok(record);
    }
    let mut x = p0.clone();
    let mut momentum: Option<(ManifoldPoint, TangentVector, TangentVector)> = None;
    let mut restarts = 0;
    for t in 0..opts.iters {
        let grad = problem.ambient_gradient(&x);
        if record.abort_on_gradient(&grad) {
            break;
        }
        let g = egrad_to_rgrad(&x, &grad)?;
        let m = match momentum.take() {
            Some((prev, step, m_prev)) => match parallel_transport(&prev, &step, &m_prev) {
                Ok(carried) => project_tangent(&x, &g.add_scaled(mu, &carried)),
                Err(e) if e.is_restartable() => {
                    restarts += 1;
                    record.warnings.push(format!("iteration {t}: momentum reset ({e})"));
                    g.clone()
                }
                Err(e) => return Err(e),
            },
            None => g.clone(),
        };
        let step = m.scale(-opts.eta);
        let next = repaired(exp_point(&x, &step)?)?;
        let row = TraceRow { outer: t, inner: 0, f: problem.value(&next), grad_norm: g.norm(), step_dist: step.norm(), restarts };
        momentum = Some((x, step, m.clone()));
        x = next;
        if !record.push(&opts, row, &x, Some(&m)) {
            break;
        }
    }
    Ok(record)
}

/// Riemannian momentum that keeps every past gradient and transports each
/// along the geodesic from where it was taken to the current iterate:
/// `m_k = Σ_t μ^{k-t} τ_{x_t → x_k}(g_t)`.
///
/// Memory grows linearly with the iteration count. A stored gradient whose
/// point leaves the logarithm's domain is dropped with a warning.
pub fn rgd_momentum_full_history_run(
    problem: &Problem,
    mu: f64,
    opts: RunOptions,
    p0: &ManifoldPoint,
) -> Result<RunRecord> {
    opts.validate()?;
    check_start(problem, p0)?;
    let mut record = RunRecord::start(problem, p0);
    if record.aborted.is_some() {
        return Ok(record);
    }
    let mut x = p0.clone();
    // (iteration, point, gradient)
    let mut history: Vec<(usize, ManifoldPoint, TangentVector)> = Vec::new();
    for t in 0..opts.iters {
        let grad = problem.ambient_gradient(&x);
        if record.abort_on_gradient(&grad) {
            break;
        }
        let g = egrad_to_rgrad(&x, &grad)?;
        let mut m = g.clone();
        let mut dropped = Vec::new();
        for (idx, (when, point, past)) in history.iter().enumerate() {
            let weight = mu.powi((t - when) as i32);
            let carried = log_point(point, &x).and_then(|leg| parallel_transport(point, &leg, past));
            match carried {
                Ok(c) => m = m.add_scaled(weight, &c),
                Err(e) if e.is_restartable() => {
                    record.warnings.push(format!("iteration {t}: dropped gradient from iteration {when} ({e})"));
                    dropped.push(idx);
                }
                Err(e) => return Err(e),
            }
        }
        let m = project_tangent(&x, &m);
        for idx in dropped.into_iter().rev() {
            history.remove(idx);
        }
        history.push((t, x.clone(), g.clone()));
        let step = m.scale(-opts.eta);
        x = repaired(exp_point(&x, &step)?)?;
        let row = TraceRow { outer: t, inner: 0, f: problem.value(&x), grad_norm: g.norm(), step_dist: step.norm(), restarts: 0 };
        if !record.push(&opts, row, &x, Some(&m)) {
            break;
        }
    }
    Ok(record)
}

/// Step size `1/α̂_r` with `α̂_r = (1 + r/3)·α` for gradient descent through
/// exponential trivializations on SO(n), where `α` bounds the Hessian of `f`
/// and `r` is the diameter of the region the iterates stay in.
pub fn theorem_step_size(problem: &Problem, r: f64) -> Result<f64> {
    let alpha = problem
        .hessian_bound
        .ok_or_else(|| Error::Config(format!("problem `{}` has no Hessian bound", problem.name)))?;
    if !matches!(problem.kind, ManifoldKind::SpecialOrthogonal(_)) {
        return Err(Error::Unsupported(format!("no curvature constant for {:?}", problem.kind)));
    }
    if !(r >= 0.0 && r.is_finite() && alpha > 0.0) {
        return Err(Error::Config(format!("invalid radius {r} or Hessian bound {alpha}")));
    }
    Ok(1.0 / ((1.0 + r / 3.0) * alpha))
}

/// Iteration budget `⌈2 α̂_r (f(p0) - f*) / ε²⌉` of the non-convex rate.
pub fn theorem_iteration_bound(alpha_hat: f64, initial_gap: f64, eps: f64) -> usize {
    (2.0 * alpha_hat * initial_gap / (eps * eps)).ceil().max(0.0) as usize
}
