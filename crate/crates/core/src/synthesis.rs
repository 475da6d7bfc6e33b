//! Terminal ingredients: the Riccati baseline, BMI synthesis of a terminal
//! weight whose one-step value function is a CLF, the scalar first-order
//! stability regions, and sizing of ellipsoidal terminal sets.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::costs::{QuadStageCost, QuadTerminalCost};
use crate::linalg::{self, quad_form};
use crate::optim::{self, EigenSettings, SymmetricFamily};
use crate::osvf::{self, TerminalSet, WitnessSearch};
use crate::systems::{BoxSet, DiscreteSystem, LinearSystem, StateVec};
use crate::{Error, Result};

pub const DARE_TOL: f64 = 1e-12;
pub const DARE_MAX_ITER: usize = 100_000;
/// Strictness used by the first-order membership tests.
pub const REGION_TOL: f64 = 1e-12;

fn check_weights(sys: &LinearSystem, stage: &QuadStageCost) -> Result<()> {
    Error::check_dim("Q", sys.a.nrows(), stage.q.nrows())?;
    Error::check_dim("R", sys.b.ncols(), stage.r.nrows())
}

fn riccati_map(sys: &LinearSystem, stage: &QuadStageCost, p: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (a, b) = (&sys.a, &sys.b);
    let bpa = b.transpose() * p * a;
    let rbb = &stage.r + b.transpose() * p * b;
    let solved = rbb.cholesky()?.solve(&bpa);
    Some(linalg::symmetrize(&(a.transpose() * p * a + &stage.q - bpa.transpose() * solved)))
}

/// Fixed-point iteration `P ← AᵀPA + Q - AᵀPB(R+BᵀPB)⁻¹BᵀPA` from `P₀ = Q`.
pub fn solve_dare(sys: &LinearSystem, stage: &QuadStageCost) -> Result<DMatrix<f64>> {
    check_weights(sys, stage)?;
    if linalg::min_eigenvalue(&stage.r) <= 0.0 {
        return Err(Error::invalid("DARE needs R positive definite"));
    }
    let mut p = stage.q.clone();
    for it in 1..=DARE_MAX_ITER {
        let next = riccati_map(sys, stage, &p).ok_or(Error::DareDiverged { iterations: it })?;
        if !linalg::all_finite(&next) {
            return Err(Error::DareDiverged { iterations: it });
        }
        let change = linalg::inf_norm(&(&next - &p));
        p = next;
        if change <= DARE_TOL * linalg::inf_norm(&p).max(1.0) {
            return Ok(p);
        }
    }
    Err(Error::DareDiverged {
        iterations: DARE_MAX_ITER,
    })
}

/// `AᵀPA - P + Q - AᵀPB(R+BᵀPB)⁻¹BᵀPA`.
pub fn dare_residual(sys: &LinearSystem, stage: &QuadStageCost, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_weights(sys, stage)?;
    let next = riccati_map(sys, stage, p).ok_or_else(|| Error::invalid("R + BᵀPB is not positive definite"))?;
    Ok(next - p)
}

/// `K = -(R+BᵀPB)⁻¹BᵀPA`, the LQR gain when `P` solves the DARE.
pub fn lqr_gain(sys: &LinearSystem, stage: &QuadStageCost, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(osvf::osvf_matrix(sys, stage, &QuadTerminalCost::new(p.clone())?)?.gain)
}

/// The symmetric `2(n+m)` matrix
///
/// ```text
/// [ M    GᵀM ]     G = [ A+BK₁  0 ]
/// [ MG   M   ]         [ K₂     0 ]
/// ```
///
/// which is positive definite iff `M ≻ 0` and `M_P ≻ HᵀMH` with
/// `H = [A+BK₁; K₂]`, i.e. the OSVF decreases along `u = K₁x`.
pub fn bmi_assemble(
    sys: &LinearSystem,
    stage: &QuadStageCost,
    p: &DMatrix<f64>,
    k1: &DMatrix<f64>,
    k2: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_weights(sys, stage)?;
    let n = sys.a.nrows();
    let m = sys.b.ncols();
    Error::check_dim("P", n, p.nrows())?;
    for k in [k1, k2] {
        Error::check_dim("gain rows", m, k.nrows())?;
        Error::check_dim("gain cols", n, k.ncols())?;
    }
    let big_m = osvf::assemble_m(sys, stage, &QuadTerminalCost::new(p.clone())?)?.m;
    let d = n + m;
    let mut g = DMatrix::zeros(d, d);
    g.view_mut((0, 0), (n, n)).copy_from(&(&sys.a + &sys.b * k1));
    g.view_mut((n, 0), (m, n)).copy_from(k2);
    let mg = &big_m * g;
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    out.view_mut((0, 0), (d, d)).copy_from(&big_m);
    out.view_mut((d, d), (d, d)).copy_from(&big_m);
    out.view_mut((d, 0), (d, d)).copy_from(&mg);
    out.view_mut((0, d), (d, d)).copy_from(&mg.transpose());
    Ok(linalg::symmetrize(&out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BmiCandidate {
    pub p: DMatrix<f64>,
    pub k1: DMatrix<f64>,
    pub k2: DMatrix<f64>,
    pub min_eig: f64,
}

impl BmiCandidate {
    pub fn evaluate(
        sys: &LinearSystem,
        stage: &QuadStageCost,
        p: DMatrix<f64>,
        k1: DMatrix<f64>,
        k2: DMatrix<f64>,
    ) -> Result<Self> {
        let min_eig = linalg::min_eigenvalue(&bmi_assemble(sys, stage, &p, &k1, &k2)?);
        Ok(Self { p, k1, k2, min_eig })
    }
}

pub fn bmi_feasible(candidate: &BmiCandidate, tol: f64) -> bool {
    candidate.min_eig > tol
}

fn unpack_gains(theta: &DVector<f64>, m: usize, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let k1 = DMatrix::from_column_slice(m, n, &theta.as_slice()[..m * n]);
    let k2 = DMatrix::from_column_slice(m, n, &theta.as_slice()[m * n..]);
    (k1, k2)
}

fn pack_gains(k1: &DMatrix<f64>, k2: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(k1.len() + k2.len(), k1.iter().chain(k2.iter()).copied())
}

fn unpack_sym(theta: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n, n);
    let mut idx = 0;
    for j in 0..n {
        for i in j..n {
            p[(i, j)] = theta[idx];
            p[(j, i)] = theta[idx];
            idx += 1;
        }
    }
    p
}

fn pack_sym(p: &DMatrix<f64>) -> DVector<f64> {
    let n = p.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in j..n {
            out.push(0.5 * (p[(i, j)] + p[(j, i)]));
        }
    }
    DVector::from_vec(out)
}

/// The BMI matrix as a function of `(K₁, K₂)` for fixed `P` (affine).
struct GainFamily<'a> {
    sys: &'a LinearSystem,
    stage: &'a QuadStageCost,
    p: &'a DMatrix<f64>,
}

impl SymmetricFamily for GainFamily<'_> {
    fn n_params(&self) -> usize {
        2 * self.sys.a.nrows() * self.sys.b.ncols()
    }

    fn matrix(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let (k1, k2) = unpack_gains(theta, self.sys.b.ncols(), self.sys.a.nrows());
        bmi_assemble(self.sys, self.stage, self.p, &k1, &k2).expect("dimensions checked")
    }
}

/// The BMI matrix as a function of symmetric `P` for fixed gains (affine).
struct WeightFamily<'a> {
    sys: &'a LinearSystem,
    stage: &'a QuadStageCost,
    k1: &'a DMatrix<f64>,
    k2: &'a DMatrix<f64>,
}

impl SymmetricFamily for WeightFamily<'_> {
    fn n_params(&self) -> usize {
        let n = self.sys.a.nrows();
        n * (n + 1) / 2
    }

    fn matrix(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let p = unpack_sym(theta, self.sys.a.nrows());
        bmi_assemble(self.sys, self.stage, &p, self.k1, self.k2).expect("dimensions checked")
    }
}

/// Maximizes `λ_min` of the BMI matrix over the gains with `P` held fixed.
pub fn optimize_gains(
    sys: &LinearSystem,
    stage: &QuadStageCost,
    p: &DMatrix<f64>,
    k1: &DMatrix<f64>,
    k2: &DMatrix<f64>,
    settings: &EigenSettings,
) -> Result<BmiCandidate> {
    let start = BmiCandidate::evaluate(sys, stage, p.clone(), k1.clone(), k2.clone())?;
    let family = GainFamily { sys, stage, p };
    let ascent = optim::max_min_eigenvalue(&family, &pack_gains(k1, k2), settings);
    if ascent.min_eig <= start.min_eig {
        return Ok(start);
    }
    let (k1, k2) = unpack_gains(&ascent.params, sys.b.ncols(), sys.a.nrows());
    BmiCandidate::evaluate(sys, stage, p.clone(), k1, k2)
}

/// Default gains for a given `P`: `K₁` the one-step gain and
/// `K₂ = K₁(A + BK₁)`, i.e. the one-step gain applied at the successor.
pub fn default_gains(
    sys: &LinearSystem,
    stage: &QuadStageCost,
    p: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let k = lqr_gain(sys, stage, p)?;
    let k2 = &k * (&sys.a + &sys.b * &k);
    Ok((k, k2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BmiOptions {
    /// Stop once `λ_min` reaches this.
    pub margin: f64,
    /// `P₀ = p_scale · P_dare`.
    pub p_scale: f64,
    pub max_rounds: usize,
    /// Stop when a full round improves `λ_min` by less than this.
    pub improve_tol: f64,
    pub eigen: EigenSettings,
}

impl Default for BmiOptions {
    fn default() -> Self {
        Self {
            margin: 1e-3,
            p_scale: 0.3,
            max_rounds: 50,
            improve_tol: 1e-8,
            eigen: EigenSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BmiSynthesis {
    pub candidate: BmiCandidate,
    pub feasible: bool,
    pub rounds: usize,
    /// `λ_min` after each round, starting with the initial point.
    pub history: Vec<f64>,
    pub notes: Vec<String>,
}

/// Alternating `λ_min` ascent over `(K₁, K₂)` and `P`.
///
/// Starts from `P₀ = p_scale·P_dare`, `K₁` the LQR gain and
/// `K₂ = K̃₂(A + BK₁)` with `K̃₂` the one-step gain at `P₀`. Returns the best
/// candidate even when it is infeasible.
pub fn synth_terminal_bmi(sys: &LinearSystem, stage: &QuadStageCost, options: &BmiOptions) -> Result<BmiSynthesis> {
    check_weights(sys, stage)?;
    let n = sys.a.nrows();
    let m = sys.b.ncols();
    let mut notes = Vec::new();
    let (p0, k1) = match solve_dare(sys, stage) {
        Ok(p_dare) => {
            let k1 = lqr_gain(sys, stage, &p_dare)?;
            (&p_dare * options.p_scale, k1)
        }
        Err(e) => {
            notes.push(format!("no Riccati initialization ({e}); starting from P = 0, K1 = 0"));
            (DMatrix::zeros(n, n), DMatrix::zeros(m, n))
        }
    };
    let k2 = match lqr_gain(sys, stage, &p0) {
        Ok(k_os) => k_os * (&sys.a + &sys.b * &k1),
        Err(_) => DMatrix::zeros(m, n),
    };
    let mut best = BmiCandidate::evaluate(sys, stage, p0, k1, k2)?;
    let mut history = vec![best.min_eig];
    let mut eigen = options.eigen.clone();
    eigen.target = Some(options.margin);
    let mut rounds = 0;
    while rounds < options.max_rounds && best.min_eig < options.margin {
        rounds += 1;
        let before = best.min_eig;
        best = optimize_gains(sys, stage, &best.p, &best.k1, &best.k2, &eigen)?;
        if best.min_eig < options.margin {
            let family = WeightFamily {
                sys,
                stage,
                k1: &best.k1,
                k2: &best.k2,
            };
            let ascent = optim::max_min_eigenvalue(&family, &pack_sym(&best.p), &eigen);
            if ascent.min_eig > best.min_eig {
                best = BmiCandidate::evaluate(sys, stage, unpack_sym(&ascent.params, n), best.k1.clone(), best.k2.clone())?;
            }
        }
        history.push(best.min_eig);
        if best.min_eig - before < options.improve_tol {
            break;
        }
    }
    let feasible = bmi_feasible(&best, 0.0);
    if !feasible {
        notes.push(format!("no feasible candidate: best lambda_min = {:e}", best.min_eig));
    }
    Ok(BmiSynthesis {
        candidate: best,
        feasible,
        rounds,
        history,
        notes,
    })
}

// ---------------------------------------------------------------------------
// First-order (scalar) stability regions for x⁺ = ax + bu

fn require_b(b: f64) -> Result<()> {
    if b == 0.0 || !b.is_finite() {
        return Err(Error::invalid("first-order analysis needs b != 0"));
    }
    Ok(())
}

/// Smallest stage weight `q̲ = (2|ar| - (1+a²)r)/b²` admitting a stabilizing `p`.
pub fn firstorder_qmin(a: f64, b: f64, r: f64) -> Result<f64> {
    require_b(b)?;
    let b2 = b * b;
    Ok(if r == 0.0 {
        0.0
    } else if r > 0.0 {
        -(a.abs() - 1.0).powi(2) * r / b2
    } else {
        -(a.abs() + 1.0).powi(2) * r / b2
    })
}

/// Scalar `M_P = a²p + q - p - a²p²b²/(r + b²p)`; `None` when `r + b²p ≤ 0`.
pub fn scalar_mp(a: f64, b: f64, q: f64, r: f64, p: f64) -> Option<f64> {
    let z = r + b * b * p;
    (z > REGION_TOL).then(|| a * a * p + q - p - a * a * p * p * b * b / z)
}

/// OSVF is a CLF: `r + b²p > 0` and `M_P > 0`.
pub fn firstorder_proposed_member(a: f64, b: f64, q: f64, r: f64, p: f64) -> Result<bool> {
    require_b(b)?;
    Ok(scalar_mp(a, b, q, r, p).is_some_and(|mp| mp > REGION_TOL))
}

/// Conventional terminal-cost condition (FARE inequality)
/// `q ≤ (z + a²r²/z - (1+a²)r)/b²` with `z = r + b²p`, and `q > 0, r ≥ 0, p ≥ 0`.
pub fn firstorder_conventional_member(a: f64, b: f64, q: f64, r: f64, p: f64) -> Result<bool> {
    require_b(b)?;
    if !(q > 0.0 && r >= 0.0 && p >= 0.0) {
        return Ok(false);
    }
    let z = r + b * b * p;
    if z <= 0.0 {
        return Ok(false);
    }
    Ok(q <= (z + a * a * r * r / z - (1.0 + a * a) * r) / (b * b))
}

/// Positive root of the scalar DARE `b²p² + (r(1-a²) - b²q)p - qr = 0`.
pub fn scalar_dare(a: f64, b: f64, q: f64, r: f64) -> Result<f64> {
    require_b(b)?;
    let b2 = b * b;
    let lin = r * (1.0 - a * a) - b2 * q;
    let disc = lin * lin + 4.0 * b2 * q * r;
    if disc < 0.0 {
        return Err(Error::invalid("scalar DARE has no real root"));
    }
    Ok((-lin + disc.sqrt()) / (2.0 * b2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub r: f64,
    pub p: f64,
    pub proposed_member: bool,
    pub conventional_member: bool,
}

impl RegionPoint {
    pub fn classify(a: f64, b: f64, q: f64, r: f64, p: f64) -> Result<Self> {
        Ok(Self {
            a,
            b,
            q,
            r,
            p,
            proposed_member: firstorder_proposed_member(a, b, q, r, p)?,
            conventional_member: firstorder_conventional_member(a, b, q, r, p)?,
        })
    }
}

/// Inclusive grid `start, start+step, …, ≤ stop`, computed by index and
/// rounded to 10 decimals.
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::invalid(format!("invalid grid [{start}, {stop}] step {step}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10)
        .collect())
}

// ---------------------------------------------------------------------------
// Terminal-set sizing

/// Which one-step decrease the sized set must show on its boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum DecreaseTest {
    /// Containment in `𝕏` only.
    None,
    /// `xᵀS f(x,u) < xᵀSx` for the set's own shape `S`.
    Shape,
    /// `V(f(x,u)) - V(x) + γ·l(x,u) < 0` with `V(x) = xᵀSx`.
    StageFraction { fraction: f64, stage: QuadStageCost },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizingOptions {
    pub test: DecreaseTest,
    pub rel_tol: f64,
    /// Boundary samples; 720 evenly spaced angles when `n = 2`.
    pub n_boundary: usize,
    pub seed: u64,
}

impl Default for SizingOptions {
    fn default() -> Self {
        Self {
            test: DecreaseTest::Shape,
            rel_tol: 1e-4,
            n_boundary: 720,
            seed: 0,
        }
    }
}

/// Outcome of checking one level `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaCheck {
    pub alpha: f64,
    pub inside_state_set: bool,
    /// Worst change of the tested function on the boundary (negative is good).
    pub worst_change: f64,
    pub inputs_admissible: bool,
    pub passed: bool,
}

fn boundary_directions(n: usize, count: usize, seed: u64) -> Vec<StateVec> {
    match n {
        1 => vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
        2 => (0..count)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / count as f64;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                let d = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
                let norm = d.norm();
                if norm > 1e-3 && norm <= 1.0 {
                    out.push(d / norm);
                }
            }
            out
        }
    }
}

/// Checks `Ω(α) ⊆ 𝕏` and the decrease test at boundary samples of `Ω(α)`.
pub fn check_terminal_alpha<S: DiscreteSystem + ?Sized>(
    witness: &WitnessSearch<'_, S>,
    shape: &DMatrix<f64>,
    state_set: &BoxSet,
    alpha: f64,
    options: &SizingOptions,
) -> Result<AlphaCheck> {
    let set = TerminalSet::new(shape.clone(), alpha)?;
    let inside = set.inside_box(state_set);
    let mut check = AlphaCheck {
        alpha,
        inside_state_set: inside,
        worst_change: f64::NEG_INFINITY,
        inputs_admissible: true,
        passed: false,
    };
    if !inside {
        return Ok(check);
    }
    let level = |x: &StateVec| quad_form(shape, x);
    let target = |x: &StateVec, u: &DVector<f64>, next: &StateVec| match &options.test {
        DecreaseTest::None => -1.0,
        DecreaseTest::Shape => level(next) - level(x),
        DecreaseTest::StageFraction { fraction, stage } => {
            level(next) - level(x) + fraction * (quad_form(&stage.q, x) + quad_form(&stage.r, u))
        }
    };
    if options.test != DecreaseTest::None && alpha > 0.0 {
        for d in boundary_directions(set.dim(), options.n_boundary, options.seed) {
            let x = set.boundary_point(&d);
            let (u, change, _) = witness.find(target, &x);
            check.worst_change = check.worst_change.max(change);
            check.inputs_admissible &= witness.input_set.contains(&u);
        }
    } else {
        check.worst_change = -1.0;
    }
    check.passed = check.inside_state_set && check.inputs_admissible && check.worst_change < 0.0;
    Ok(check)
}

/// Largest `α` (bisection, relative tolerance `rel_tol`) whose level set lies
/// in `𝕏` and passes the decrease test on boundary samples.
pub fn size_terminal_alpha<S: DiscreteSystem + ?Sized>(
    witness: &WitnessSearch<'_, S>,
    shape: &DMatrix<f64>,
    state_set: &BoxSet,
    options: &SizingOptions,
) -> Result<f64> {
    if linalg::min_eigenvalue(shape) <= 0.0 {
        return Err(Error::invalid("terminal set shape must be positive definite"));
    }
    let alpha_max = osvf::max_alpha_in_box(shape, state_set)?;
    if !alpha_max.is_finite() {
        return Err(Error::invalid("state set does not bound the terminal set"));
    }
    let passes = |alpha: f64| -> Result<bool> {
        Ok(check_terminal_alpha(witness, shape, state_set, alpha, options)?.passed)
    };
    if passes(alpha_max)? {
        return Ok(alpha_max);
    }
    let (mut lo, mut hi) = (0.0, alpha_max);
    while hi - lo > options.rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if passes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi < f64::MIN_POSITIVE * 1e6 {
            break;
        }
    }
    if lo <= 0.0 {
        return Err(Error::DegenerateTerminalSet);
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cart_linearization() -> (LinearSystem, QuadStageCost) {
        let sys = LinearSystem::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.4, -0.132, 0.56]),
            DMatrix::from_row_slice(2, 1, &[0.0, 0.4]),
        )
        .unwrap();
        let stage = QuadStageCost::new(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0])), DMatrix::identity(1, 1)).unwrap();
        (sys, stage)
    }

    #[test]
    fn dare_scalar_root() {
        let sys = LinearSystem::scalar(0.5, 1.0);
        let stage = QuadStageCost::scalar(1.0, 1.0);
        let p = solve_dare(&sys, &stage).unwrap();
        let expected = (0.25 + 4.0625f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(p[(0, 0)], expected, epsilon = 1e-10);
        assert_abs_diff_eq!(scalar_dare(0.5, 1.0, 1.0, 1.0).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn dare_deadbeat() {
        let sys = LinearSystem::new(DMatrix::zeros(2, 2), DMatrix::from_row_slice(2, 1, &[0.0, 1.0])).unwrap();
        let (_, stage) = cart_linearization();
        assert_eq!(solve_dare(&sys, &stage).unwrap(), stage.q);
    }

    #[test]
    fn dare_cart_spring_residual() {
        let (sys, stage) = cart_linearization();
        let p = solve_dare(&sys, &stage).unwrap();
        let res = dare_residual(&sys, &stage, &p).unwrap();
        assert!(linalg::inf_norm(&res) <= 1e-9 * linalg::inf_norm(&stage.q));
    }

    #[test]
    fn dare_diverges_when_unstabilizable() {
        let sys = LinearSystem::new(
            DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 0.5]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap();
        let (_, stage) = cart_linearization();
        assert!(matches!(solve_dare(&sys, &stage), Err(Error::DareDiverged { .. })));
    }

    #[test]
    fn bmi_scalar_example() {
        let sys = LinearSystem::scalar(0.5, 1.0);
        let stage = QuadStageCost::scalar(1.0, 1.0);
        let k1 = DMatrix::from_element(1, 1, -0.25);
        let k2 = DMatrix::from_element(1, 1, -0.0625);
        let c = BmiCandidate::evaluate(&sys, &stage, DMatrix::from_element(1, 1, 1.0), k1, k2).unwrap();
        assert_eq!(bmi_assemble(&sys, &stage, &c.p, &c.k1, &c.k2).unwrap().nrows(), 4);
        assert!(bmi_feasible(&c, 0.0), "{c:?}");
    }

    #[test]
    fn bmi_deadbeat_blockdiag() {
        let sys = LinearSystem::new(DMatrix::zeros(2, 2), DMatrix::from_row_slice(2, 1, &[0.0, 1.0])).unwrap();
        let (_, stage) = cart_linearization();
        let z = DMatrix::zeros(1, 2);
        let mat = bmi_assemble(&sys, &stage, &DMatrix::zeros(2, 2), &z, &z).unwrap();
        let mut expected = DMatrix::zeros(6, 6);
        for (i, v) in [2.0, 4.0, 1.0, 2.0, 4.0, 1.0].iter().enumerate() {
            expected[(i, i)] = *v;
        }
        assert_eq!(mat, expected);
        let c = BmiCandidate::evaluate(&sys, &stage, DMatrix::zeros(2, 2), z.clone(), z).unwrap();
        assert!(bmi_feasible(&c, 1e-9));
    }

    #[test]
    fn bmi_indefinite_weight_infeasible() {
        let (sys, stage) = cart_linearization();
        let p = DMatrix::from_row_slice(2, 2, &[-5.0, 0.0, 0.0, 3.0]);
        let z = DMatrix::zeros(1, 2);
        let c = BmiCandidate::evaluate(&sys, &stage, p, z.clone(), z).unwrap();
        assert!(!bmi_feasible(&c, 0.0));
    }

    #[test]
    fn synth_scalar_inside_region() {
        let sys = LinearSystem::scalar(0.5, 1.0);
        let stage = QuadStageCost::scalar(1.0, 1.0);
        let out = synth_terminal_bmi(&sys, &stage, &BmiOptions::default()).unwrap();
        assert!(out.feasible, "{out:?}");
        let p = out.candidate.p[(0, 0)];
        assert!(p > -1.0 && p < scalar_dare(0.5, 1.0, 1.0, 1.0).unwrap(), "p = {p}");
        assert!(firstorder_proposed_member(0.5, 1.0, 1.0, 1.0, p).unwrap());
    }

    #[test]
    fn synth_uncontrollable_unstable() {
        let sys = LinearSystem::new(
            DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 0.5]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap();
        let (_, stage) = cart_linearization();
        let out = synth_terminal_bmi(&sys, &stage, &BmiOptions::default()).unwrap();
        assert!(!out.feasible);
        assert!(!out.notes.is_empty());
    }

    #[test]
    fn qmin_branches() {
        assert_eq!(firstorder_qmin(0.5, 1.0, 1.0).unwrap(), -0.25);
        assert_eq!(firstorder_qmin(0.5, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(firstorder_qmin(2.0, 1.0, -1.0).unwrap(), 9.0);
        assert!(firstorder_qmin(2.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn membership_examples() {
        assert!(firstorder_proposed_member(0.5, 1.0, 1.0, 1.0, 1.0).unwrap());
        let pstar = scalar_dare(0.5, 1.0, 1.0, 1.0).unwrap();
        assert!(!firstorder_proposed_member(0.5, 1.0, 1.0, 1.0, pstar).unwrap());
        assert!(firstorder_conventional_member(0.5, 1.0, 1.0, 1.0, 2.0).unwrap());
        assert!(!firstorder_conventional_member(0.5, 1.0, 1.0, 1.0, 1.0).unwrap());
        assert!(!firstorder_conventional_member(0.5, 1.0, 1.0, -1.0, 2.0).unwrap());
        // q = -0.1, p = -0.5: z = 0.5, M_P = -0.125 - 0.1 + 0.5 - 0.125 = 0.15
        assert_abs_diff_eq!(scalar_mp(0.5, 1.0, -0.1, 1.0, -0.5).unwrap(), 0.15, epsilon = 1e-15);
        assert!(firstorder_proposed_member(0.5, 1.0, -0.1, 1.0, -0.5).unwrap());
        assert!(!firstorder_conventional_member(0.5, 1.0, -0.1, 1.0, -0.5).unwrap());
    }

    #[test]
    fn grid_inclusive() {
        let g = grid(-1.0, 1.0, 0.01).unwrap();
        assert_eq!(g.len(), 201);
        assert_abs_diff_eq!(*g.last().unwrap(), 1.0, epsilon = 1e-12);
        assert!(grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn containment_only_sizing() {
        let sys = LinearSystem::new(DMatrix::identity(2, 2), DMatrix::from_row_slice(2, 1, &[0.0, 1.0])).unwrap();
        let (_, stage) = cart_linearization();
        let v = QuadTerminalCost::zero(2);
        let uset = BoxSet::symmetric(&[1.0]).unwrap();
        let gain = DMatrix::zeros(1, 2);
        let witness = WitnessSearch {
            system: &sys,
            stage: &stage,
            terminal: &v,
            input_set: &uset,
            gain: &gain,
        };
        let opts = SizingOptions {
            test: DecreaseTest::None,
            ..SizingOptions::default()
        };
        let xset = BoxSet::symmetric(&[1.0, 1.0]).unwrap();
        let alpha = size_terminal_alpha(&witness, &DMatrix::identity(2, 2), &xset, &opts).unwrap();
        assert_eq!(alpha, 1.0);
    }

    #[test]
    fn degenerate_when_no_decrease() {
        // x⁺ = 2x with no input authority: nothing shrinks.
        let sys = LinearSystem::new(DMatrix::from_element(1, 1, 2.0), DMatrix::from_element(1, 1, 1e-9)).unwrap();
        let stage = QuadStageCost::scalar(1.0, 1.0);
        let v = QuadTerminalCost::scalar(0.0);
        let uset = BoxSet::symmetric(&[1.0]).unwrap();
        let gain = DMatrix::zeros(1, 1);
        let witness = WitnessSearch {
            system: &sys,
            stage: &stage,
            terminal: &v,
            input_set: &uset,
            gain: &gain,
        };
        let xset = BoxSet::symmetric(&[1.0]).unwrap();
        let err = size_terminal_alpha(&witness, &DMatrix::identity(1, 1), &xset, &SizingOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateTerminalSet));
    }
}
