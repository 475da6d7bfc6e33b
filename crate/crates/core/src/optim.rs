//! Small dense constrained minimization and eigenvalue ascent.
//!
//! [`minimize`] handles `min f(z)` over a box with inequality constraints
//! `g(z) ≤ 0`: a PHR augmented-Lagrangian outer loop around a spectral
//! projected-gradient inner loop (nonmonotone Armijo backtracking). Several
//! deterministic starts are tried and the best report is kept.
//!
//! [`max_min_eigenvalue`] pushes up `λ_min` of a parameterized symmetric
//! matrix, using eigenvector-based (sub)gradients smoothed by a softmin over
//! the bottom of the spectrum.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::systems::BoxSet;

/// Central-difference step for gradients that are not supplied analytically.
pub const FD_STEP: f64 = 1e-6;

const ARMIJO_C: f64 = 1e-4;
const NONMONOTONE_MEMORY: usize = 10;
const MAX_BACKTRACKS: usize = 60;
const BB_MIN: f64 = 1e-12;
const BB_MAX: f64 = 1e12;

/// A smooth problem `min f(z)` s.t. `z ∈ box`, `g(z) ≤ 0`.
///
/// Gradients default to central finite differences with step [`FD_STEP`].
pub trait NlpProblem {
    fn dim(&self) -> usize;
    fn bounds(&self) -> &BoxSet;
    fn objective(&self, z: &DVector<f64>) -> f64;

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        fd_gradient(|w| self.objective(w), z)
    }

    fn n_constraints(&self) -> usize {
        0
    }

    /// Constraint values `g(z)`; feasible when every entry is `≤ 0`.
    fn constraints(&self, _z: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(0)
    }

    /// Jacobian of [`constraints`](Self::constraints), one row per constraint.
    fn constraint_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let m = self.n_constraints();
        let mut jac = DMatrix::zeros(m, z.len());
        for j in 0..z.len() {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += FD_STEP;
            zm[j] -= FD_STEP;
            let col = (self.constraints(&zp) - self.constraints(&zm)) / (2.0 * FD_STEP);
            jac.set_column(j, &col);
        }
        jac
    }
}

pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, z: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(z.len(), |j, _| {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[j] += FD_STEP;
        zm[j] -= FD_STEP;
        (f(&zp) - f(&zm)) / (2.0 * FD_STEP)
    })
}

type ScalarFn<'a> = Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync + 'a>;
type VectorFn<'a> = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'a>;

/// Closure-backed [`NlpProblem`].
pub struct FnProblem<'a> {
    bounds: BoxSet,
    objective: ScalarFn<'a>,
    gradient: Option<VectorFn<'a>>,
    constraints: Vec<ScalarFn<'a>>,
}

impl<'a> FnProblem<'a> {
    pub fn new(bounds: BoxSet, objective: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'a) -> Self {
        Self {
            bounds,
            objective: Box::new(objective),
            gradient: None,
            constraints: Vec::new(),
        }
    }

    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'a,
    ) -> Self {
        self.gradient = Some(Box::new(gradient));
        self
    }

    /// Adds `g(z) ≤ 0`.
    pub fn with_constraint(mut self, g: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'a) -> Self {
        self.constraints.push(Box::new(g));
        self
    }
}

impl NlpProblem for FnProblem<'_> {
    fn dim(&self) -> usize {
        self.bounds.dim()
    }
    fn bounds(&self) -> &BoxSet {
        &self.bounds
    }
    fn objective(&self, z: &DVector<f64>) -> f64 {
        (self.objective)(z)
    }
    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        match &self.gradient {
            Some(g) => g(z),
            None => fd_gradient(|w| (self.objective)(w), z),
        }
    }
    fn n_constraints(&self) -> usize {
        self.constraints.len()
    }
    fn constraints(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.constraints.len(), self.constraints.iter().map(|g| g(z)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SolverSettings {
    pub rho0: f64,
    pub rho_factor: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// KKT and constraint-violation tolerance for `Converged`.
    pub tol: f64,
    /// A start whose final violation exceeds this is reported `Infeasible`.
    pub feas_tol: f64,
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            rho0: 10.0,
            rho_factor: 10.0,
            max_outer: 8,
            max_inner: 500,
            tol: 1e-8,
            feas_tol: 1e-6,
            n_starts: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub z_star: DVector<f64>,
    pub value: f64,
    pub kkt_residual: f64,
    pub constraint_violation: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

impl SolveReport {
    pub fn is_feasible(&self) -> bool {
        self.status != SolveStatus::Infeasible
    }

    /// Ordering key: feasible reports by value, then infeasible ones by violation.
    fn better_than(&self, other: &SolveReport) -> bool {
        match (self.is_feasible(), other.is_feasible()) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => self.value < other.value,
            (false, false) => self.constraint_violation < other.constraint_violation,
        }
    }
}

/// Multi-start augmented-Lagrangian solve.
///
/// Starts, in order: the projected warm start (if any), the box center, then
/// seeded uniform points in the box, `settings.n_starts` in total.
pub fn minimize<P: NlpProblem + ?Sized>(
    problem: &P,
    settings: &SolverSettings,
    warm_start: Option<&DVector<f64>>,
) -> SolveReport {
    let bounds = problem.bounds();
    let mut starts = Vec::with_capacity(settings.n_starts.max(1));
    if let Some(w) = warm_start {
        starts.push(bounds.project(w));
    }
    starts.push(bounds.center());
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    while starts.len() < settings.n_starts.max(1) {
        starts.push(random_point(bounds, &mut rng));
    }
    starts.truncate(settings.n_starts.max(1));

    let mut best: Option<SolveReport> = None;
    let mut iterations = 0;
    for z0 in starts {
        let report = solve_from(problem, settings, z0);
        iterations += report.iterations;
        if best.as_ref().is_none_or(|b| report.better_than(b)) {
            best = Some(report);
        }
    }
    let mut best = best.expect("at least one start");
    best.iterations = iterations;
    best
}

fn random_point(bounds: &BoxSet, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let center = bounds.center();
    DVector::from_fn(bounds.dim(), |i, _| {
        let (lo, hi) = (bounds.lower()[i], bounds.upper()[i]);
        if lo.is_finite() && hi.is_finite() {
            rng.random_range(lo..=hi)
        } else {
            (center[i] + rng.random_range(-1.0..=1.0)).clamp(lo, hi)
        }
    })
}

/// One augmented-Lagrangian run from a single start.
pub fn solve_from<P: NlpProblem + ?Sized>(
    problem: &P,
    settings: &SolverSettings,
    z0: DVector<f64>,
) -> SolveReport {
    let bounds = problem.bounds();
    let n_con = problem.n_constraints();
    let mut z = bounds.project(&z0);
    let mut lambda = DVector::zeros(n_con);
    let mut rho = settings.rho0;
    let mut iterations = 0;
    let mut kkt = f64::INFINITY;
    let mut violation = f64::INFINITY;

    for _ in 0..settings.max_outer.max(1) {
        let (z_next, inner_iters) = inner_spg(problem, &z, &lambda, rho, settings);
        z = z_next;
        iterations += inner_iters;

        let g = problem.constraints(&z);
        violation = g.iter().fold(0.0_f64, |acc, v| acc.max(*v));
        let lambda_next = (&lambda + &g * rho).map(|v| v.max(0.0));
        kkt = kkt_residual(problem, &z, &lambda_next, &g);
        lambda = lambda_next;

        if violation <= settings.tol && kkt <= settings.tol {
            break;
        }
        if n_con > 0 {
            rho *= settings.rho_factor;
        }
    }

    let status = if violation <= settings.tol && kkt <= settings.tol {
        SolveStatus::Converged
    } else if violation <= settings.feas_tol {
        SolveStatus::MaxIter
    } else {
        SolveStatus::Infeasible
    };
    SolveReport {
        value: problem.objective(&z),
        z_star: z,
        kkt_residual: kkt,
        constraint_violation: violation,
        iterations,
        status,
    }
}

/// Projected-gradient stationarity of the Lagrangian plus complementarity.
fn kkt_residual<P: NlpProblem + ?Sized>(
    problem: &P,
    z: &DVector<f64>,
    lambda: &DVector<f64>,
    g: &DVector<f64>,
) -> f64 {
    let mut grad = problem.gradient(z);
    if !lambda.is_empty() {
        grad += problem.constraint_jacobian(z).transpose() * lambda;
    }
    let stationarity = (problem.bounds().project(&(z - &grad)) - z).amax();
    let complementarity = lambda
        .iter()
        .zip(g.iter())
        .map(|(l, gi)| (l * gi).abs())
        .fold(0.0, f64::max);
    stationarity.max(complementarity)
}

struct Merit<'p, P: ?Sized> {
    problem: &'p P,
    lambda: &'p DVector<f64>,
    rho: f64,
}

impl<P: NlpProblem + ?Sized> Merit<'_, P> {
    fn value(&self, z: &DVector<f64>) -> f64 {
        let f = self.problem.objective(z);
        if self.lambda.is_empty() {
            return f;
        }
        let g = self.problem.constraints(z);
        let penalty: f64 = self
            .lambda
            .iter()
            .zip(g.iter())
            .map(|(l, gi)| {
                let shifted = (l + self.rho * gi).max(0.0);
                shifted * shifted - l * l
            })
            .sum();
        f + penalty / (2.0 * self.rho)
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut grad = self.problem.gradient(z);
        if !self.lambda.is_empty() {
            let g = self.problem.constraints(z);
            let weights = DVector::from_iterator(
                g.len(),
                self.lambda
                    .iter()
                    .zip(g.iter())
                    .map(|(l, gi)| (l + self.rho * gi).max(0.0)),
            );
            if weights.iter().any(|w| *w > 0.0) {
                grad += self.problem.constraint_jacobian(z).transpose() * weights;
            }
        }
        grad
    }
}

/// Spectral projected gradient on the augmented Lagrangian.
fn inner_spg<P: NlpProblem + ?Sized>(
    problem: &P,
    z0: &DVector<f64>,
    lambda: &DVector<f64>,
    rho: f64,
    settings: &SolverSettings,
) -> (DVector<f64>, usize) {
    let bounds = problem.bounds();
    let merit = Merit {
        problem,
        lambda,
        rho,
    };
    let mut z = z0.clone();
    let mut f = merit.value(&z);
    let mut grad = merit.gradient(&z);
    let mut history = vec![f];
    let mut bb = 1.0 / grad.amax().max(1.0);
    let mut iters = 0;

    while iters < settings.max_inner {
        let pg = bounds.project(&(&z - &grad)) - &z;
        if pg.amax() <= settings.tol * 0.1 {
            break;
        }
        iters += 1;
        let dir = bounds.project(&(&z - &grad * bb)) - &z;
        let slope = grad.dot(&dir);
        if slope >= 0.0 {
            break;
        }
        let f_ref = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &z + &dir * step;
            let f_trial = merit.value(&trial);
            if f_trial <= f_ref + ARMIJO_C * step * slope {
                accepted = Some((trial, f_trial));
                break;
            }
            step *= 0.5;
        }
        let Some((z_next, f_next)) = accepted else {
            break;
        };
        let grad_next = merit.gradient(&z_next);
        let s = &z_next - &z;
        let y = &grad_next - &grad;
        let sy = s.dot(&y);
        bb = if sy > 0.0 {
            (s.dot(&s) / sy).clamp(BB_MIN, BB_MAX)
        } else {
            BB_MAX.min(1.0 / grad_next.amax().max(1e-12))
        };
        z = z_next;
        f = f_next;
        grad = grad_next;
        history.push(f);
        if history.len() > NONMONOTONE_MEMORY {
            history.remove(0);
        }
    }
    (z, iters)
}

// ---------------------------------------------------------------------------
// λ_min ascent

/// A symmetric matrix depending smoothly on a parameter vector.
pub trait SymmetricFamily {
    fn n_params(&self) -> usize;
    fn matrix(&self, theta: &DVector<f64>) -> DMatrix<f64>;

    /// `∂M/∂θᵢ`. The default central difference is exact for affine families.
    fn derivative(&self, theta: &DVector<f64>, i: usize) -> DMatrix<f64> {
        const H: f64 = 1e-4;
        let mut tp = theta.clone();
        let mut tm = theta.clone();
        tp[i] += H;
        tm[i] -= H;
        (self.matrix(&tp) - self.matrix(&tm)) / (2.0 * H)
    }

    /// Optional box on the parameters.
    fn bounds(&self) -> Option<BoxSet> {
        None
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct EigenSettings {
    /// Iteration cap per smoothing level.
    pub max_iter: usize,
    /// Eigenvalues within this of `λ_min` are averaged in the final stage.
    pub cluster_tol: f64,
    /// Softmin temperatures, relative to `max(1, ‖M‖)`, visited in order.
    pub smoothing: Vec<f64>,
    /// Stop a stage once the accepted improvement falls below this.
    pub improve_tol: f64,
    /// Stop everything once `λ_min` reaches this.
    pub target: Option<f64>,
}

impl Default for EigenSettings {
    fn default() -> Self {
        Self {
            max_iter: 400,
            cluster_tol: 1e-8,
            smoothing: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            improve_tol: 1e-12,
            target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenAscent {
    pub params: DVector<f64>,
    pub min_eig: f64,
    pub iterations: usize,
}

/// Softmin of the spectrum and its gradient in `θ`.
///
/// With `mu == 0` the weights are uniform over the cluster of eigenvalues
/// within `cluster_tol` of the minimum.
fn smoothed_min<F: SymmetricFamily + ?Sized>(
    family: &F,
    theta: &DVector<f64>,
    mu: f64,
    cluster_tol: f64,
) -> (f64, f64, DVector<f64>) {
    let m = family.matrix(theta);
    let (vals, vecs) = linalg::sym_eigen(&m);
    let lmin = vals[0];
    let weights: Vec<f64> = if mu > 0.0 {
        let raw: Vec<f64> = vals.iter().map(|l| (-(l - lmin) / mu).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|w| w / total).collect()
    } else {
        let count = vals.iter().filter(|l| **l - lmin <= cluster_tol).count() as f64;
        vals.iter()
            .map(|l| if *l - lmin <= cluster_tol { 1.0 / count } else { 0.0 })
            .collect()
    };
    let smooth = if mu > 0.0 {
        let total: f64 = vals.iter().map(|l| (-(l - lmin) / mu).exp()).sum();
        lmin - mu * total.ln()
    } else {
        lmin
    };
    let active: Vec<(f64, DVector<f64>)> = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 1e-14)
        .map(|(i, w)| (*w, vecs.column(i).into_owned()))
        .collect();
    let grad = DVector::from_fn(family.n_params(), |i, _| {
        let d = family.derivative(theta, i);
        active
            .iter()
            .map(|(w, v)| w * linalg::quad_form(&d, v))
            .sum()
    });
    (smooth, lmin, grad)
}

/// Ascent on `λ_min(M(θ))` from `init`; returns the best point seen.
pub fn max_min_eigenvalue<F: SymmetricFamily + ?Sized>(
    family: &F,
    init: &DVector<f64>,
    settings: &EigenSettings,
) -> EigenAscent {
    let bounds = family.bounds();
    let project = |t: &DVector<f64>| match &bounds {
        Some(b) => b.project(t),
        None => t.clone(),
    };
    let mut theta = project(init);
    let scale = linalg::max_abs(&family.matrix(&theta)).max(1.0);
    let mut best_theta = theta.clone();
    let mut best = linalg::min_eigenvalue(&family.matrix(&theta));
    let mut iterations = 0;
    let reached = |v: f64| settings.target.is_some_and(|t| v >= t);

    let mut levels: Vec<f64> = settings.smoothing.iter().map(|m| m * scale).collect();
    levels.push(0.0);

    'levels: for mu in levels {
        if family.n_params() == 0 || reached(best) {
            break;
        }
        let (mut phi, _, mut grad) = smoothed_min(family, &theta, mu, settings.cluster_tol);
        let mut step = 1.0 / grad.amax().max(1e-12);
        for _ in 0..settings.max_iter {
            if grad.amax() <= 1e-14 {
                break;
            }
            iterations += 1;
            let mut accepted = None;
            let mut t = step;
            for _ in 0..MAX_BACKTRACKS {
                let trial = project(&(&theta + &grad * t));
                let moved = &trial - &theta;
                if moved.amax() <= 1e-16 {
                    break;
                }
                let (phi_t, lmin_t, grad_t) = smoothed_min(family, &trial, mu, settings.cluster_tol);
                if phi_t >= phi + ARMIJO_C * grad.dot(&moved) {
                    accepted = Some((trial, phi_t, lmin_t, grad_t, t));
                    break;
                }
                t *= 0.5;
            }
            let Some((next, phi_next, lmin_next, grad_next, t_used)) = accepted else {
                break;
            };
            let gain = phi_next - phi;
            theta = next;
            phi = phi_next;
            grad = grad_next;
            step = t_used * 2.0;
            if lmin_next > best {
                best = lmin_next;
                best_theta = theta.clone();
                if reached(best) {
                    break 'levels;
                }
            }
            if gain <= settings.improve_tol {
                break;
            }
        }
        // Each level restarts from the best point so far.
        theta = best_theta.clone();
    }

    EigenAscent {
        params: best_theta,
        min_eig: best,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn vecf(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn unconstrained_quadratic_on_box() {
        let b = BoxSet::new(vecf(&[-1.0]), vecf(&[1.0])).unwrap();
        let p = FnProblem::new(b, |z| z[0] * z[0] + 1.0);
        let r = minimize(&p, &SolverSettings::default(), None);
        assert_eq!(r.status, SolveStatus::Converged);
        assert_abs_diff_eq!(r.z_star[0], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn scalar_one_step_problem() {
        let b = BoxSet::new(vecf(&[-4.0]), vecf(&[4.0])).unwrap();
        let p = FnProblem::new(b, |u| u[0] * u[0] + (0.5 + u[0]).powi(2));
        let r = minimize(&p, &SolverSettings::default(), None);
        assert_abs_diff_eq!(r.z_star[0], -0.25, epsilon = 1e-8);
        assert_abs_diff_eq!(r.value, 0.125, epsilon = 1e-12);
    }

    #[test]
    fn active_box() {
        let b = BoxSet::new(vecf(&[-4.0]), vecf(&[4.0])).unwrap();
        let p = FnProblem::new(b, |u| (u[0] - 10.0).powi(2));
        let r = minimize(&p, &SolverSettings::default(), None);
        assert_eq!(r.z_star[0], 4.0);
        assert_eq!(r.status, SolveStatus::Converged);
    }

    #[test]
    fn inequality_constraint_active() {
        // min (z0-2)² + (z1-2)² s.t. z0 + z1 ≤ 1 → (0.5, 0.5)
        let b = BoxSet::new(vecf(&[-5.0, -5.0]), vecf(&[5.0, 5.0])).unwrap();
        let p = FnProblem::new(b, |z| (z[0] - 2.0).powi(2) + (z[1] - 2.0).powi(2))
            .with_gradient(|z| vecf(&[2.0 * (z[0] - 2.0), 2.0 * (z[1] - 2.0)]))
            .with_constraint(|z| z[0] + z[1] - 1.0);
        let r = minimize(&p, &SolverSettings::default(), None);
        assert_eq!(r.status, SolveStatus::Converged, "{r:?}");
        assert_abs_diff_eq!(r.z_star[0], 0.5, epsilon = 1e-7);
        assert_abs_diff_eq!(r.z_star[1], 0.5, epsilon = 1e-7);
        assert!(r.constraint_violation <= 1e-8);
    }

    #[test]
    fn infeasible_reported() {
        let b = BoxSet::new(vecf(&[-1.0]), vecf(&[1.0])).unwrap();
        let p = FnProblem::new(b, |z| z[0] * z[0]).with_constraint(|z| 3.0 - z[0]);
        let r = minimize(&p, &SolverSettings::default(), None);
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert_abs_diff_eq!(r.z_star[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn deterministic_reports() {
        let b = BoxSet::new(vecf(&[-3.0, -3.0]), vecf(&[3.0, 3.0])).unwrap();
        let make = || {
            FnProblem::new(b.clone(), |z| (z[0] * z[1] - 1.0).powi(2) + 0.1 * z[0].powi(2))
                .with_constraint(|z| z[0] * z[0] + z[1] * z[1] - 4.0)
        };
        let s = SolverSettings {
            seed: 42,
            ..SolverSettings::default()
        };
        let a = minimize(&make(), &s, Some(&vecf(&[1.0, 0.5])));
        let c = minimize(&make(), &s, Some(&vecf(&[1.0, 0.5])));
        assert_eq!(a, c);
    }

    struct Crossing;
    impl SymmetricFamily for Crossing {
        fn n_params(&self) -> usize {
            1
        }
        fn matrix(&self, t: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_diagonal(&vecf(&[t[0], 1.0 - t[0]]))
        }
        fn bounds(&self) -> Option<BoxSet> {
            Some(BoxSet::new(vecf(&[0.0]), vecf(&[1.0])).unwrap())
        }
    }

    #[test]
    fn eigen_crossing() {
        let r = max_min_eigenvalue(&Crossing, &vecf(&[0.1]), &EigenSettings::default());
        assert_abs_diff_eq!(r.params[0], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(r.min_eig, 0.5, epsilon = 1e-6);
    }

    struct Constant;
    impl SymmetricFamily for Constant {
        fn n_params(&self) -> usize {
            2
        }
        fn matrix(&self, _t: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])
        }
    }

    #[test]
    fn eigen_constant_family() {
        let init = vecf(&[0.3, -0.7]);
        let r = max_min_eigenvalue(&Constant, &init, &EigenSettings::default());
        assert_eq!(r.params, init);
        assert_abs_diff_eq!(r.min_eig, 1.0, epsilon = 1e-12);
    }
}
