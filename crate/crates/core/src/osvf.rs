//! One-step value function `m(x) = min_u ℓ(x, u, f(x, u))`.
//!
//! For `x⁺ = Ax + Bu` with quadratic weights, `ℓ = [x; u]ᵀ M [x; u]` with
//!
//! ```text
//! M = [ AᵀPA + Q - P   AᵀPB     ]
//!     [ BᵀPA           R + BᵀPB ]
//! ```
//!
//! and, whenever `R + BᵀPB ≻ 0`, `m(x) = xᵀ M_P x` with the Schur complement
//! `M_P = AᵀPA + Q - P - AᵀPB (R + BᵀPB)⁻¹ BᵀPA` and minimizer
//! `u = K_os x`, `K_os = -(R + BᵀPB)⁻¹ BᵀPA`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::costs::{AugmentedStageCost, QuadStageCost, QuadTerminalCost};
use crate::linalg::{self, quad_form};
use crate::optim::{self, FnProblem, SolveReport, SolverSettings};
use crate::systems::{BoxSet, DiscreteSystem, InputVec, LinearSystem, StateVec};
use crate::{Error, Result};

/// `λ_min(R + BᵀPB)` must exceed this for the one-step problem to be posed.
pub const ILL_POSED_TOL: f64 = 1e-10;
/// `λ_min(M_P)` must exceed this for a CLF certificate.
pub const CERTIFY_TOL: f64 = 1e-8;
/// Slack on sublevel-set membership.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

fn check_weights(sys: &LinearSystem, stage: &QuadStageCost, terminal: &QuadTerminalCost) -> Result<()> {
    let n = sys.a.nrows();
    let m = sys.b.ncols();
    Error::check_dim("Q", n, stage.q.nrows())?;
    Error::check_dim("R", m, stage.r.nrows())?;
    Error::check_dim("P", n, terminal.p.nrows())
}

/// The symmetric `(n+m)×(n+m)` matrix of the rotated quadratic stage cost.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrixM {
    pub m: DMatrix<f64>,
    n: usize,
}

impl BlockMatrixM {
    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m.nrows() - self.n
    }

    pub fn state_block(&self) -> DMatrix<f64> {
        self.m.view((0, 0), (self.n, self.n)).into_owned()
    }

    pub fn cross_block(&self) -> DMatrix<f64> {
        self.m.view((0, self.n), (self.n, self.input_dim())).into_owned()
    }

    pub fn input_block(&self) -> DMatrix<f64> {
        let k = self.input_dim();
        self.m.view((self.n, self.n), (k, k)).into_owned()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.m)
    }

    pub fn is_positive_definite(&self, tol: f64) -> bool {
        self.min_eigenvalue() > tol
    }

    /// The same test through the Schur complement: `R + BᵀPB ≻ 0` and `M_P ≻ 0`.
    pub fn schur_positive_definite(&self, tol: f64) -> bool {
        let rbb = self.input_block();
        if linalg::min_eigenvalue(&rbb) <= tol {
            return false;
        }
        let Some(rbb_inv) = rbb.try_inverse() else {
            return false;
        };
        let cross = self.cross_block();
        let mp = self.state_block() - &cross * rbb_inv * cross.transpose();
        linalg::min_eigenvalue(&mp) > tol
    }
}

pub fn assemble_m(
    sys: &LinearSystem,
    stage: &QuadStageCost,
    terminal: &QuadTerminalCost,
) -> Result<BlockMatrixM> {
    check_weights(sys, stage, terminal)?;
    let (a, b, p) = (&sys.a, &sys.b, &terminal.p);
    let n = a.nrows();
    let m = b.ncols();
    let pa = p * a;
    let pb = p * b;
    let top_left = a.transpose() * &pa + &stage.q - p;
    let top_right = a.transpose() * &pb;
    let bottom_right = &stage.r + b.transpose() * &pb;
    let mut full = DMatrix::zeros(n + m, n + m);
    full.view_mut((0, 0), (n, n)).copy_from(&top_left);
    full.view_mut((0, n), (n, m)).copy_from(&top_right);
    full.view_mut((n, 0), (m, n)).copy_from(&top_right.transpose());
    full.view_mut((n, n), (m, m)).copy_from(&bottom_right);
    Ok(BlockMatrixM {
        m: linalg::symmetrize(&full),
        n,
    })
}

/// Closed-form OSVF of a linear-quadratic problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsvfQuadratic {
    /// `M_P`, so that `m(x) = xᵀ M_P x`.
    pub mp: DMatrix<f64>,
    /// One-step optimal feedback `K_os`.
    pub gain: DMatrix<f64>,
    /// `R + BᵀPB`.
    pub rbb: DMatrix<f64>,
}

pub fn osvf_matrix(
    sys: &LinearSystem,
    stage: &QuadStageCost,
    terminal: &QuadTerminalCost,
) -> Result<OsvfQuadratic> {
    check_weights(sys, stage, terminal)?;
    let (a, b, p) = (&sys.a, &sys.b, &terminal.p);
    let rbb = linalg::symmetrize(&(&stage.r + b.transpose() * p * b));
    let min_eig = linalg::min_eigenvalue(&rbb);
    if min_eig <= ILL_POSED_TOL {
        return Err(Error::IllPosed { min_eig });
    }
    let rbb_inv = rbb
        .clone()
        .try_inverse()
        .ok_or(Error::IllPosed { min_eig })?;
    let bpa = b.transpose() * p * a;
    let gain = -&rbb_inv * &bpa;
    let mp = a.transpose() * p * a + &stage.q - p - bpa.transpose() * &rbb_inv * &bpa;
    Ok(OsvfQuadratic {
        mp: linalg::symmetrize(&mp),
        gain,
        rbb,
    })
}

impl OsvfQuadratic {
    pub fn eval(&self, x: &StateVec) -> f64 {
        quad_form(&self.mp, x)
    }

    pub fn eval_checked(&self, x: &StateVec) -> Result<f64> {
        Error::check_dim("OSVF state", self.mp.nrows(), x.len())?;
        Ok(self.eval(x))
    }

    pub fn argmin(&self, x: &StateVec) -> InputVec {
        &self.gain * x
    }

    pub fn lambda_min(&self) -> f64 {
        linalg::min_eigenvalue(&self.mp)
    }

    pub fn lambda_max(&self) -> f64 {
        linalg::max_eigenvalue(&self.mp)
    }

    pub fn is_positive_definite(&self, tol: f64) -> bool {
        self.lambda_min() > tol
    }
}

/// `Ω(α) = {x : xᵀ S x ≤ α}` with `S ≻ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalSet {
    shape: DMatrix<f64>,
    alpha: f64,
}

impl TerminalSet {
    pub fn new(shape: DMatrix<f64>, alpha: f64) -> Result<Self> {
        if !shape.is_square() {
            return Err(Error::invalid("terminal set shape must be square"));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("terminal level must be >= 0, got {alpha}")));
        }
        let shape = linalg::symmetrize(&shape);
        let lmin = linalg::min_eigenvalue(&shape);
        if lmin <= 0.0 {
            return Err(Error::invalid(format!(
                "terminal set shape must be positive definite (lambda_min = {lmin:e})"
            )));
        }
        Ok(Self { shape, alpha })
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.shape.clone(), alpha)
    }

    pub fn dim(&self) -> usize {
        self.shape.nrows()
    }

    /// `xᵀ S x`.
    pub fn level(&self, x: &StateVec) -> f64 {
        quad_form(&self.shape, x)
    }

    pub fn contains(&self, x: &StateVec) -> bool {
        self.level(x) <= self.alpha + MEMBERSHIP_TOL
    }

    /// Half-widths of the axis-aligned bounding box, `sqrt(α (S⁻¹)ᵢᵢ)`.
    pub fn half_widths(&self) -> DVector<f64> {
        let inv = self
            .shape
            .clone()
            .try_inverse()
            .expect("positive definite shape is invertible");
        DVector::from_fn(self.dim(), |i, _| (self.alpha * inv[(i, i)]).max(0.0).sqrt())
    }

    /// Exact containment test via the support function on each box face.
    pub fn inside_box(&self, set: &BoxSet) -> bool {
        let w = self.half_widths();
        (0..self.dim()).all(|i| set.lower()[i] <= -w[i] && w[i] <= set.upper()[i])
    }

    /// Rescales a nonzero direction onto the boundary `xᵀ S x = α`.
    pub fn boundary_point(&self, direction: &StateVec) -> StateVec {
        let lvl = self.level(direction);
        direction * (self.alpha / lvl).sqrt()
    }
}

/// Largest `α` with `{xᵀ S x ≤ α} ⊆ set`.
pub fn max_alpha_in_box(shape: &DMatrix<f64>, set: &BoxSet) -> Result<f64> {
    let inv = linalg::symmetrize(shape)
        .try_inverse()
        .ok_or_else(|| Error::invalid("shape is singular"))?;
    let mut alpha = f64::INFINITY;
    for i in 0..shape.nrows() {
        let reach = set.lower()[i].abs().min(set.upper()[i].abs());
        alpha = alpha.min(reach * reach / inv[(i, i)]);
    }
    Ok(alpha)
}

/// Result of a numeric one-step solve.
#[derive(Debug, Clone)]
pub struct OneStepSolution {
    pub value: f64,
    pub input: InputVec,
    pub report: SolveReport,
}

/// OSVF of a general system, evaluated by numeric minimization of
/// `ℓ(x, u, f(x, u))` over `u ∈ 𝕌` with `f(x, u) ∈ Ω` when `Ω` is given.
pub struct NumericOsvf<'a, S: ?Sized> {
    pub system: &'a S,
    pub stage: &'a QuadStageCost,
    pub terminal: &'a QuadTerminalCost,
    pub input_set: &'a BoxSet,
    pub outer: Option<&'a TerminalSet>,
    pub settings: SolverSettings,
}

impl<'a, S: DiscreteSystem + ?Sized> NumericOsvf<'a, S> {
    pub fn new(
        system: &'a S,
        stage: &'a QuadStageCost,
        terminal: &'a QuadTerminalCost,
        input_set: &'a BoxSet,
    ) -> Self {
        Self {
            system,
            stage,
            terminal,
            input_set,
            outer: None,
            settings: SolverSettings::default(),
        }
    }

    pub fn with_outer(mut self, outer: &'a TerminalSet) -> Self {
        self.outer = Some(outer);
        self
    }

    pub fn solve(&self, x: &StateVec, warm: Option<&InputVec>) -> Result<OneStepSolution> {
        Error::check_dim("state", self.system.state_dim(), x.len())?;
        let aug = AugmentedStageCost::new(self.system, self.stage, self.terminal);
        let system = self.system;
        let mut problem = FnProblem::new(self.input_set.clone(), move |u| {
            let next = system.transition(x, u);
            aug.with_successor(x, u, &next)
        });
        if let Some(outer) = self.outer {
            problem = problem.with_constraint(move |u| outer.level(&system.transition(x, u)) - outer.alpha());
        }
        let report = optim::minimize(&problem, &self.settings, warm);
        if !report.is_feasible() {
            return Err(Error::OneStepInfeasible {
                x: x.iter().copied().collect(),
                violation: report.constraint_violation,
            });
        }
        Ok(OneStepSolution {
            value: report.value,
            input: report.z_star.clone(),
            report,
        })
    }

    pub fn eval(&self, x: &StateVec) -> Result<f64> {
        self.solve(x, None).map(|s| s.value)
    }
}

/// Empirical CLF certificate for a quadratic `m(x) = xᵀ S x`.
///
/// `lambda_min`/`lambda_max` bound `m` between quadratic class-K∞ functions;
/// `margin` is the worst observed one-step decrease `m(x) - m(f(x, u))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClfCertificate {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub margin: f64,
    /// Worst `(m(x) - m(f(x,u))) / m(x)` over the samples.
    pub min_decrease_ratio: f64,
    pub samples: usize,
    /// Samples where neither the clipped gain nor the refined one-step input
    /// decreased `m`, so the direct search over `𝕌` supplied the witness.
    pub search_witnesses: usize,
    pub verified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
}

/// Everything needed to produce a decrease witness at a state.
pub struct WitnessSearch<'a, S: ?Sized> {
    pub system: &'a S,
    pub stage: &'a QuadStageCost,
    pub terminal: &'a QuadTerminalCost,
    pub input_set: &'a BoxSet,
    pub gain: &'a DMatrix<f64>,
}

/// How a witness was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessKind {
    ClippedGain,
    OneStepRefined,
    DirectSearch,
}

impl<S: DiscreteSystem + ?Sized> WitnessSearch<'_, S> {
    /// Tries the clipped gain, then the one-step optimal input on the true
    /// dynamics, then the admissible input minimizing `xᵀ S x` at the
    /// successor. Returns the first input achieving `target(f(x,u)) < target(x)`,
    /// or the best of the three if none does.
    pub fn find(
        &self,
        target: impl Fn(&StateVec, &InputVec, &StateVec) -> f64 + Sync,
        x: &StateVec,
    ) -> (InputVec, f64, WitnessKind) {
        let sys = self.system;
        let score = |u: &InputVec| target(x, u, &sys.transition(x, u));
        let clipped = self.input_set.project(&(self.gain * x));
        let s0 = score(&clipped);
        if s0 < 0.0 {
            return (clipped, s0, WitnessKind::ClippedGain);
        }
        let local = SolverSettings {
            n_starts: 1,
            ..SolverSettings::default()
        };
        let aug = AugmentedStageCost::new(sys, self.stage, self.terminal);
        let one_step = FnProblem::new(self.input_set.clone(), |u| aug.with_successor(x, u, &sys.transition(x, u)));
        let refined = optim::minimize(&one_step, &local, Some(&clipped)).z_star;
        let s1 = score(&refined);
        if s1 < 0.0 {
            return (refined, s1, WitnessKind::OneStepRefined);
        }
        let search = SolverSettings {
            n_starts: 3,
            ..SolverSettings::default()
        };
        let direct = FnProblem::new(self.input_set.clone(), score);
        let found = optim::minimize(&direct, &search, Some(&clipped)).z_star;
        let s2 = score(&found);
        let mut best = (found, s2, WitnessKind::DirectSearch);
        if s1 < best.1 {
            best = (refined, s1, WitnessKind::OneStepRefined);
        }
        if s0 < best.1 {
            best = (clipped, s0, WitnessKind::ClippedGain);
        }
        best
    }
}

/// Samples `n_samples` points of `Ω(α)` (rejection sampling in its bounding
/// box, seeded) and checks `m(f(x, u)) < m(x)` on the true dynamics with an
/// admissible witness `u` from [`WitnessSearch::find`].
pub fn verify_clf<S: DiscreteSystem + ?Sized>(
    witness: &WitnessSearch<'_, S>,
    region: &TerminalSet,
    state_set: &BoxSet,
    n_samples: usize,
    seed: u64,
) -> Result<ClfCertificate> {
    let sys = witness.system;
    Error::check_dim("region", sys.state_dim(), region.dim())?;
    Error::check_dim("state set", sys.state_dim(), state_set.dim())?;
    Error::check_dim("input set", sys.input_dim(), witness.input_set.dim())?;
    Error::check_dim("gain rows", sys.input_dim(), witness.gain.nrows())?;
    Error::check_dim("gain cols", sys.state_dim(), witness.gain.ncols())?;
    let lambda_min = linalg::min_eigenvalue(region.shape());
    let lambda_max = linalg::max_eigenvalue(region.shape());
    let mut cert = ClfCertificate {
        lambda_min,
        lambda_max,
        margin: f64::INFINITY,
        min_decrease_ratio: f64::INFINITY,
        samples: 0,
        search_witnesses: 0,
        verified: false,
        witness: None,
    };
    if lambda_min <= CERTIFY_TOL {
        return Ok(cert);
    }

    let widths = region.half_widths();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = 0usize;
    let target = |x: &StateVec, _: &InputVec, next: &StateVec| region.level(next) - region.level(x);
    while cert.samples < n_samples {
        draws += 1;
        if draws > n_samples.saturating_mul(1000).max(1000) {
            return Err(Error::invalid("rejection sampling failed to fill the region"));
        }
        let x = DVector::from_fn(region.dim(), |i, _| {
            if widths[i] > 0.0 {
                rng.random_range(-widths[i]..=widths[i])
            } else {
                0.0
            }
        });
        if !region.contains(&x) {
            continue;
        }
        cert.samples += 1;
        let level = region.level(&x);
        if level <= 0.0 {
            continue;
        }
        let (u, change, kind) = witness.find(target, &x);
        if kind == WitnessKind::DirectSearch {
            cert.search_witnesses += 1;
        }
        let decrease = -change;
        cert.margin = cert.margin.min(decrease);
        cert.min_decrease_ratio = cert.min_decrease_ratio.min(decrease / level);
        let admissible = witness.input_set.contains(&u) && state_set.contains(&x);
        if (!(decrease > 0.0) || !admissible) && cert.witness.is_none() {
            cert.witness = Some(x.iter().copied().collect());
        }
    }
    cert.verified = cert.witness.is_none() && cert.margin > 0.0;
    Ok(cert)
}

/// [`verify_clf`] over `{xᵀSx ≤ α}`, or an unverified certificate without
/// sampling when `λ_min(S)` does not clear [`CERTIFY_TOL`].
pub fn certify_shape<S: DiscreteSystem + ?Sized>(
    witness: &WitnessSearch<'_, S>,
    shape: &DMatrix<f64>,
    alpha: f64,
    state_set: &BoxSet,
    n_samples: usize,
    seed: u64,
) -> Result<ClfCertificate> {
    let lambda_min = linalg::min_eigenvalue(shape);
    if lambda_min <= CERTIFY_TOL {
        return Ok(ClfCertificate {
            lambda_min,
            lambda_max: linalg::max_eigenvalue(shape),
            margin: f64::NAN,
            min_decrease_ratio: f64::NAN,
            samples: 0,
            search_witnesses: 0,
            verified: false,
            witness: None,
        });
    }
    verify_clf(witness, &TerminalSet::new(shape.clone(), alpha)?, state_set, n_samples, seed)
}
