//! Receding-horizon control with a contractive terminal set.
//!
//! Each step solves
//!
//! ```text
//! V(x_k, α_k) = min  Σ ℓ(x_i, u_i, x_{i+1})   s.t.  u_i ∈ 𝕌, x_i ∈ 𝕏, x_N ∈ Ω(α_k)
//! ```
//!
//! applies `u_0`, and shrinks the level through
//! `α_{k+1} = min(m(x*_1), m(x*_N)) - δ` (or `0` once that minimum drops
//! below `δ`). The conventional baseline keeps `α` fixed and minimizes the
//! plain cost `Σ l + V_f(x_N)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::costs::{QuadStageCost, QuadTerminalCost, StageCost, TerminalCost};
use crate::linalg::{self, quad_form};
use crate::optim::{self, NlpProblem, SolveStatus, SolverSettings};
use crate::systems::{self, BoxSet, DiscreteSystem, InputVec, StateVec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MpcMode {
    Contractive,
    Conventional,
}

/// Which horizon cost the online problem minimizes. The two differ by the
/// constant `V_f(x_k)`, so they share minimizers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveForm {
    /// `Σ ℓ(x_i, u_i, x_{i+1})`.
    Rotated,
    /// `Σ l(x_i, u_i) + V_f(x_N)`.
    Standard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    pub horizon: usize,
    /// Contraction decrement; `None` means `1e-3·alpha0`.
    pub delta: Option<f64>,
    pub alpha0: f64,
    /// Level used in place of the equality `x_N = 0` when `α = 0`.
    pub eps_term: f64,
    pub mode: MpcMode,
    /// Defaults to rotated for contractive and standard for conventional.
    pub objective: Option<ObjectiveForm>,
    pub solver: SolverSettings,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 3,
            delta: None,
            alpha0: 1.0,
            eps_term: 1e-8,
            mode: MpcMode::Contractive,
            objective: None,
            solver: SolverSettings::default(),
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        if !(self.alpha0 >= 0.0 && self.alpha0.is_finite()) {
            return Err(Error::invalid("alpha0 must be finite and >= 0"));
        }
        if !(self.eps_term > 0.0) {
            return Err(Error::invalid("eps_term must be > 0"));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::invalid("delta must be > 0"));
            }
        }
        if self.mode == MpcMode::Contractive && self.delta() <= 0.0 {
            return Err(Error::invalid("default delta needs alpha0 > 0; set delta explicitly"));
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(1e-3 * self.alpha0)
    }

    pub fn objective(&self) -> ObjectiveForm {
        self.objective.unwrap_or(match self.mode {
            MpcMode::Contractive => ObjectiveForm::Rotated,
            MpcMode::Conventional => ObjectiveForm::Standard,
        })
    }
}

/// Plant, costs, constraints and terminal ingredients of one controller.
pub struct MpcSetup<'a, S: ?Sized> {
    pub system: &'a S,
    pub stage: &'a QuadStageCost,
    pub terminal: &'a QuadTerminalCost,
    pub state_set: &'a BoxSet,
    pub input_set: &'a BoxSet,
    /// Shape `S` of `Ω(α) = {xᵀSx ≤ α}`; `M_P` for the contractive scheme.
    pub terminal_shape: &'a DMatrix<f64>,
    /// Feedback used to extend shifted warm starts.
    pub gain: &'a DMatrix<f64>,
}

impl<S: DiscreteSystem + ?Sized> MpcSetup<'_, S> {
    fn check(&self) -> Result<()> {
        let n = self.system.state_dim();
        let m = self.system.input_dim();
        Error::check_dim("Q", n, self.stage.state_dim())?;
        Error::check_dim("R", m, self.stage.input_dim())?;
        Error::check_dim("P", n, self.terminal.p.nrows())?;
        Error::check_dim("state set", n, self.state_set.dim())?;
        Error::check_dim("input set", m, self.input_set.dim())?;
        Error::check_dim("terminal shape", n, self.terminal_shape.nrows())?;
        Error::check_dim("gain rows", m, self.gain.nrows())?;
        Error::check_dim("gain cols", n, self.gain.ncols())
    }

    /// `m(x) = xᵀSx` with the terminal shape.
    pub fn level(&self, x: &StateVec) -> f64 {
        quad_form(self.terminal_shape, x)
    }
}

/// The single-shooting online problem in the stacked inputs `z = (u_0, …, u_{N-1})`.
pub struct OnlineProblem<'a, S: ?Sized> {
    setup: &'a MpcSetup<'a, S>,
    x0: StateVec,
    horizon: usize,
    level: f64,
    objective: ObjectiveForm,
    bounds: BoxSet,
    /// `(time index, state component, upper?)` of each finite state bound.
    state_rows: Vec<(usize, usize, bool)>,
}

impl<'a, S: DiscreteSystem + ?Sized> OnlineProblem<'a, S> {
    pub fn new(setup: &'a MpcSetup<'a, S>, x0: StateVec, horizon: usize, level: f64, objective: ObjectiveForm) -> Self {
        let n = setup.system.state_dim();
        let mut state_rows = Vec::new();
        for i in 1..=horizon {
            for j in 0..n {
                if setup.state_set.upper()[j].is_finite() {
                    state_rows.push((i, j, true));
                }
                if setup.state_set.lower()[j].is_finite() {
                    state_rows.push((i, j, false));
                }
            }
        }
        Self {
            setup,
            x0,
            horizon,
            level,
            objective,
            bounds: setup.input_set.repeat(horizon),
            state_rows,
        }
    }

    pub fn inputs(&self, z: &DVector<f64>) -> Vec<InputVec> {
        let m = self.setup.system.input_dim();
        (0..self.horizon)
            .map(|i| z.rows(i * m, m).into_owned())
            .collect()
    }

    fn states(&self, z: &DVector<f64>) -> Vec<StateVec> {
        let sys = self.setup.system;
        let mut xs = Vec::with_capacity(self.horizon + 1);
        xs.push(self.x0.clone());
        for (i, u) in self.inputs(z).iter().enumerate() {
            let next = sys.transition(&xs[i], u);
            xs.push(next);
        }
        xs
    }

    fn jacobians(&self, xs: &[StateVec], us: &[InputVec]) -> Vec<(DMatrix<f64>, DMatrix<f64>)> {
        xs.iter()
            .zip(us)
            .map(|(x, u)| {
                let lin = systems::linearize(self.setup.system, x, u).expect("dimensions checked");
                (lin.a, lin.b)
            })
            .collect()
    }

    /// `∂x_i/∂z` for `i = 0..=N`.
    fn sensitivities(&self, jac: &[(DMatrix<f64>, DMatrix<f64>)]) -> Vec<DMatrix<f64>> {
        let n = self.setup.system.state_dim();
        let m = self.setup.system.input_dim();
        let d = self.horizon * m;
        let mut out = Vec::with_capacity(self.horizon + 1);
        out.push(DMatrix::zeros(n, d));
        for (i, (a, b)) in jac.iter().enumerate() {
            let mut next = a * &out[i];
            let mut block = next.view_mut((0, i * m), (n, m));
            block += b;
            out.push(next);
        }
        out
    }

    fn terminal_level(&self) -> f64 {
        self.level
    }
}

impl<S: DiscreteSystem + ?Sized> NlpProblem for OnlineProblem<'_, S> {
    fn dim(&self) -> usize {
        self.horizon * self.setup.system.input_dim()
    }

    fn bounds(&self) -> &BoxSet {
        &self.bounds
    }

    fn objective(&self, z: &DVector<f64>) -> f64 {
        let us = self.inputs(z);
        let xs = self.states(z);
        let mut total: f64 = xs.iter().zip(&us).map(|(x, u)| self.setup.stage.stage(x, u)).sum();
        total += self.setup.terminal.terminal(&xs[self.horizon]);
        if self.objective == ObjectiveForm::Rotated {
            total -= self.setup.terminal.terminal(&xs[0]);
        }
        total
    }

    /// Adjoint recursion `λ_N = 2P x_N`, `λ_i = 2Q x_i + A_iᵀ λ_{i+1}`.
    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let m = self.setup.system.input_dim();
        let us = self.inputs(z);
        let xs = self.states(z);
        let jac = self.jacobians(&xs, &us);
        let (q, r, p) = (&self.setup.stage.q, &self.setup.stage.r, &self.setup.terminal.p);
        let mut grad = DVector::zeros(self.dim());
        let mut costate = p * &xs[self.horizon] * 2.0;
        for i in (0..self.horizon).rev() {
            let (a, b) = &jac[i];
            let gu = r * &us[i] * 2.0 + b.transpose() * &costate;
            grad.rows_mut(i * m, m).copy_from(&gu);
            costate = q * &xs[i] * 2.0 + a.transpose() * &costate;
        }
        grad
    }

    fn n_constraints(&self) -> usize {
        self.state_rows.len() + 1
    }

    /// State bounds, then the terminal constraint in radius form
    /// `sqrt(x_Nᵀ S x_N) - sqrt(α) ≤ 0`, whose gradient does not vanish as
    /// the level shrinks to zero.
    fn constraints(&self, z: &DVector<f64>) -> DVector<f64> {
        let xs = self.states(z);
        let set = self.setup.state_set;
        let mut g = DVector::zeros(self.n_constraints());
        for (row, &(i, j, upper)) in self.state_rows.iter().enumerate() {
            g[row] = if upper {
                xs[i][j] - set.upper()[j]
            } else {
                set.lower()[j] - xs[i][j]
            };
        }
        g[self.state_rows.len()] = self.setup.level(&xs[self.horizon]).max(0.0).sqrt() - self.terminal_level().sqrt();
        g
    }

    fn constraint_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let us = self.inputs(z);
        let xs = self.states(z);
        let sens = self.sensitivities(&self.jacobians(&xs, &us));
        let mut jac = DMatrix::zeros(self.n_constraints(), self.dim());
        for (row, &(i, j, upper)) in self.state_rows.iter().enumerate() {
            let sign = if upper { 1.0 } else { -1.0 };
            jac.row_mut(row).copy_from(&(sens[i].row(j) * sign));
        }
        let xn = &xs[self.horizon];
        let radius = self.setup.level(xn).max(0.0).sqrt();
        if radius > 0.0 {
            let dradius = (self.setup.terminal_shape * xn / radius).transpose() * &sens[self.horizon];
            jac.row_mut(self.state_rows.len()).copy_from(&dradius);
        }
        jac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcIterate {
    pub k: usize,
    pub alpha: f64,
    pub inputs: Vec<InputVec>,
    pub states: Vec<StateVec>,
    /// Optimal value of the minimized objective form.
    pub value: f64,
    /// `m(x*_{k+1|k})`.
    pub m_first: f64,
    /// `m(x*_{k+N|k})`.
    pub m_last: f64,
    pub status: SolveStatus,
    pub kkt_residual: f64,
    pub constraint_violation: f64,
    pub iterations: usize,
}

/// Solves the online problem at `x_k` with terminal level `alpha`.
pub fn solve_online<S: DiscreteSystem + ?Sized>(
    setup: &MpcSetup<'_, S>,
    config: &MpcConfig,
    k: usize,
    x: &StateVec,
    alpha: f64,
    warm: Option<&DVector<f64>>,
) -> Result<MpcIterate> {
    setup.check()?;
    config.validate()?;
    Error::check_dim("state", setup.system.state_dim(), x.len())?;
    if !setup.state_set.contains(x) {
        return Err(Error::invalid(format!("x_{k} lies outside the state constraint set")));
    }
    let level = if alpha > 0.0 { alpha } else { config.eps_term };
    let problem = OnlineProblem::new(setup, x.clone(), config.horizon, level, config.objective());
    let report = optim::minimize(&problem, &config.solver, warm);
    if !report.is_feasible() || report.constraint_violation > config.solver.feas_tol {
        return Err(Error::OnlineInfeasible {
            k,
            status: report.status,
            violation: report.constraint_violation,
        });
    }
    let inputs = problem.inputs(&report.z_star);
    let states = systems::rollout(setup.system, x, &inputs)?;
    Ok(MpcIterate {
        k,
        alpha,
        m_first: setup.level(&states[1]),
        m_last: setup.level(&states[config.horizon]),
        inputs,
        states,
        value: report.value,
        status: report.status,
        kkt_residual: report.kkt_residual,
        constraint_violation: report.constraint_violation,
        iterations: report.iterations,
    })
}

/// `α_{k+1} = m_s - δ` if `m_s ≥ δ`, else `0`, with `m_s = min(m_first, m_last)`.
pub fn update_alpha(m_first: f64, m_last: f64, delta: f64) -> f64 {
    let ms = m_first.min(m_last);
    if ms >= delta {
        ms - delta
    } else {
        0.0
    }
}

fn shifted_warm_start<S: DiscreteSystem + ?Sized>(setup: &MpcSetup<'_, S>, it: &MpcIterate) -> DVector<f64> {
    let tail = setup.input_set.project(&(setup.gain * it.states.last().expect("nonempty")));
    let parts: Vec<f64> = it.inputs[1..]
        .iter()
        .chain(std::iter::once(&tail))
        .flat_map(|u| u.iter().copied())
        .collect();
    DVector::from_vec(parts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopResult {
    pub mode: MpcMode,
    pub delta: f64,
    pub states: Vec<StateVec>,
    pub inputs: Vec<InputVec>,
    /// Level `α_k` used at each step.
    pub alphas: Vec<f64>,
    /// `V(x_k, α_k)` at each step.
    pub values: Vec<f64>,
    pub stage_costs: Vec<f64>,
    pub m_first: Vec<f64>,
    pub m_last: Vec<f64>,
    pub statuses: Vec<SolveStatus>,
    pub j_run: f64,
    pub feasible_all: bool,
    pub terminal_norm: f64,
    /// Steps where `V(x, α) > N·λ_max(S)·|x|²`.
    pub value_bound_violations: usize,
}

impl ClosedLoopResult {
    pub fn csv_header(&self) -> Vec<String> {
        let n = self.states.first().map_or(0, |x| x.len());
        let m = self.inputs.first().map_or(0, |u| u.len());
        let mut h = vec!["k".to_string()];
        h.extend((0..n).map(|i| format!("x{}", i + 1)));
        h.extend((0..m).map(|i| format!("u{}", i + 1)));
        h.extend(["alpha", "V", "stage_cost"].map(String::from));
        h
    }

    /// One row per applied step: `k, x…, u…, alpha, V, stage_cost`.
    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        self.inputs
            .iter()
            .enumerate()
            .map(|(k, u)| {
                let mut row = vec![k as f64];
                row.extend(self.states[k].iter());
                row.extend(u.iter());
                row.extend([self.alphas[k], self.values[k], self.stage_costs[k]]);
                row
            })
            .collect()
    }
}

/// Measure, solve, apply `u*_{k|k}`, update `α`, for `steps` steps.
pub fn run_closed_loop<S: DiscreteSystem + ?Sized>(
    setup: &MpcSetup<'_, S>,
    config: &MpcConfig,
    x0: &StateVec,
    steps: usize,
) -> Result<ClosedLoopResult> {
    setup.check()?;
    config.validate()?;
    let delta = config.delta();
    let bound_gain = config.horizon as f64 * linalg::max_eigenvalue(setup.terminal_shape);
    let mut result = ClosedLoopResult {
        mode: config.mode,
        delta,
        states: vec![x0.clone()],
        inputs: Vec::with_capacity(steps),
        alphas: Vec::with_capacity(steps),
        values: Vec::with_capacity(steps),
        stage_costs: Vec::with_capacity(steps),
        m_first: Vec::with_capacity(steps),
        m_last: Vec::with_capacity(steps),
        statuses: Vec::with_capacity(steps),
        j_run: 0.0,
        feasible_all: true,
        terminal_norm: x0.norm(),
        value_bound_violations: 0,
    };
    let mut alpha = config.alpha0;
    let mut warm: Option<DVector<f64>> = None;
    let mut x = x0.clone();
    for k in 0..steps {
        let it = solve_online(setup, config, k, &x, alpha, warm.as_ref())?;
        let u = it.inputs[0].clone();
        let next = systems::step(setup.system, &x, &u)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow { step: k + 1 });
        }
        let cost = setup.stage.stage(&x, &u);
        if config.mode == MpcMode::Contractive && it.value > bound_gain * x.norm_squared() + config.solver.feas_tol {
            result.value_bound_violations += 1;
        }
        result.j_run += cost;
        result.stage_costs.push(cost);
        result.alphas.push(alpha);
        result.values.push(it.value);
        result.m_first.push(it.m_first);
        result.m_last.push(it.m_last);
        result.statuses.push(it.status);
        result.inputs.push(u);
        result.states.push(next.clone());
        if config.mode == MpcMode::Contractive {
            alpha = update_alpha(it.m_first, it.m_last, delta);
        }
        warm = Some(shifted_warm_start(setup, &it));
        x = next;
    }
    result.terminal_norm = x.norm();
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub passed: bool,
    pub alpha_chain_checked: bool,
    /// First offending step and what went wrong.
    pub first_violation: Option<(usize, String)>,
}

/// Checks that every solve succeeded and, in contractive mode, that `α` never
/// increases and drops by at least `δ` whenever it stays positive.
pub fn assert_feasibility_chain(result: &ClosedLoopResult, tol: f64) -> ChainDiagnostics {
    let fail = |k: usize, why: String, checked: bool| ChainDiagnostics {
        passed: false,
        alpha_chain_checked: checked,
        first_violation: Some((k, why)),
    };
    let checked = result.mode == MpcMode::Contractive;
    if !result.feasible_all {
        return fail(0, "run reported an infeasible online solve".into(), checked);
    }
    if let Some(k) = result.statuses.iter().position(|s| *s == SolveStatus::Infeasible) {
        return fail(k, "online solve infeasible".into(), checked);
    }
    if checked {
        for (k, w) in result.alphas.windows(2).enumerate() {
            let (now, next) = (w[0], w[1]);
            if next > now + tol {
                return fail(k + 1, format!("alpha increased from {now} to {next}"), true);
            }
            if next > 0.0 && next > now - result.delta + tol {
                return fail(k + 1, format!("alpha {next} not below {now} - delta"), true);
            }
        }
    }
    ChainDiagnostics {
        passed: true,
        alpha_chain_checked: checked,
        first_violation: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::fd_gradient;
    use crate::osvf::osvf_matrix;
    use crate::systems::{CartSpring, LinearSystem};
    use approx::assert_abs_diff_eq;

    struct Scalar {
        sys: LinearSystem,
        stage: QuadStageCost,
        terminal: QuadTerminalCost,
        xset: BoxSet,
        uset: BoxSet,
        shape: DMatrix<f64>,
        gain: DMatrix<f64>,
    }

    fn scalar(xmax: f64, umax: f64) -> Scalar {
        let sys = LinearSystem::scalar(0.5, 1.0);
        let stage = QuadStageCost::scalar(1.0, 1.0);
        let terminal = QuadTerminalCost::scalar(1.0);
        let os = osvf_matrix(&sys, &stage, &terminal).unwrap();
        Scalar {
            sys,
            stage,
            terminal,
            xset: BoxSet::symmetric(&[xmax]).unwrap(),
            uset: BoxSet::symmetric(&[umax]).unwrap(),
            shape: os.mp,
            gain: os.gain,
        }
    }

    impl Scalar {
        fn setup(&self) -> MpcSetup<'_, LinearSystem> {
            MpcSetup {
                system: &self.sys,
                stage: &self.stage,
                terminal: &self.terminal,
                state_set: &self.xset,
                input_set: &self.uset,
                terminal_shape: &self.shape,
                gain: &self.gain,
            }
        }
    }

    #[test]
    fn one_step_horizon_matches_closed_form() {
        let s = scalar(100.0, 100.0);
        let cfg = MpcConfig {
            horizon: 1,
            alpha0: 100.0,
            ..MpcConfig::default()
        };
        let it = solve_online(&s.setup(), &cfg, 0, &DVector::from_vec(vec![1.0]), 100.0, None).unwrap();
        assert_abs_diff_eq!(it.inputs[0][0], -0.25, epsilon = 1e-7);
        assert_abs_diff_eq!(it.value, 0.125, epsilon = 1e-10);
    }

    #[test]
    fn origin_is_equilibrium() {
        let s = scalar(5.0, 2.0);
        let cfg = MpcConfig::default();
        let it = solve_online(&s.setup(), &cfg, 0, &DVector::zeros(1), 0.0, None).unwrap();
        assert!(it.inputs.iter().all(|u| u[0].abs() < 1e-9));
        assert!(it.value.abs() < 1e-12);
    }

    #[test]
    fn alpha_rule() {
        assert_abs_diff_eq!(update_alpha(0.5, 0.3, 0.1), 0.2, epsilon = 1e-15);
        assert_eq!(update_alpha(0.05, 0.3, 0.1), 0.0);
        assert_eq!(update_alpha(0.1, 0.1, 0.1), 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cart = CartSpring::default();
        let stage = QuadStageCost::new(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0])), DMatrix::identity(1, 1)).unwrap();
        let terminal = QuadTerminalCost::new(DMatrix::from_row_slice(2, 2, &[3.5, -0.35, -0.35, 1.57])).unwrap();
        let xset = BoxSet::symmetric(&[2.0, 3.0]).unwrap();
        let uset = BoxSet::symmetric(&[4.0]).unwrap();
        let shape = DMatrix::from_row_slice(2, 2, &[2.0, 1.5, 1.5, 3.2]);
        let gain = DMatrix::zeros(1, 2);
        let setup = MpcSetup {
            system: &cart,
            stage: &stage,
            terminal: &terminal,
            state_set: &xset,
            input_set: &uset,
            terminal_shape: &shape,
            gain: &gain,
        };
        let problem = OnlineProblem::new(&setup, DVector::from_vec(vec![-2.0, 1.0]), 3, 1.0, ObjectiveForm::Rotated);
        let z = DVector::from_vec(vec![0.7, -1.2, 2.5]);
        let fd = fd_gradient(|w| problem.objective(w), &z);
        let an = problem.gradient(&z);
        assert!((fd - an).amax() < 1e-6);
        let mut fd_jac = DMatrix::zeros(problem.n_constraints(), 3);
        for j in 0..3 {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += 1e-6;
            zm[j] -= 1e-6;
            fd_jac.set_column(j, &((problem.constraints(&zp) - problem.constraints(&zm)) / 2e-6));
        }
        assert!((fd_jac - problem.constraint_jacobian(&z)).amax() < 1e-6);
    }

    #[test]
    fn zero_start_stays_zero() {
        let s = scalar(5.0, 2.0);
        let cfg = MpcConfig {
            alpha0: 3.125,
            ..MpcConfig::default()
        };
        let r = run_closed_loop(&s.setup(), &cfg, &DVector::zeros(1), 10).unwrap();
        assert_eq!(r.j_run, 0.0);
        assert!(r.states.iter().all(|x| x[0] == 0.0));
    }

    #[test]
    fn scalar_contractive_converges() {
        let s = scalar(5.0, 2.0);
        let cfg = MpcConfig {
            alpha0: 3.125,
            ..MpcConfig::default()
        };
        let r = run_closed_loop(&s.setup(), &cfg, &DVector::from_vec(vec![4.0]), 50).unwrap();
        assert!(r.terminal_norm <= 1e-4, "{}", r.terminal_norm);
        assert!(assert_feasibility_chain(&r, 1e-6).passed);
        assert_eq!(r.states.len(), r.inputs.len() + 1);
    }

    #[test]
    fn chain_detects_increase() {
        let s = scalar(5.0, 2.0);
        let cfg = MpcConfig {
            alpha0: 3.125,
            ..MpcConfig::default()
        };
        let mut r = run_closed_loop(&s.setup(), &cfg, &DVector::from_vec(vec![4.0]), 5).unwrap();
        r.alphas[3] = r.alphas[2] + 1.0;
        let d = assert_feasibility_chain(&r, 1e-6);
        assert!(!d.passed);
        assert_eq!(d.first_violation.unwrap().0, 3);
    }

    #[test]
    fn conventional_skips_alpha_chain() {
        let s = scalar(5.0, 2.0);
        let cfg = MpcConfig {
            alpha0: 3.125,
            mode: MpcMode::Conventional,
            ..MpcConfig::default()
        };
        let r = run_closed_loop(&s.setup(), &cfg, &DVector::from_vec(vec![4.0]), 5).unwrap();
        assert!(r.alphas.iter().all(|a| *a == 3.125));
        let d = assert_feasibility_chain(&r, 1e-6);
        assert!(d.passed && !d.alpha_chain_checked);
    }

    #[test]
    fn infeasible_start_reported() {
        let s = scalar(5.0, 0.01);
        let cfg = MpcConfig {
            horizon: 1,
            alpha0: 0.01,
            ..MpcConfig::default()
        };
        let err = run_closed_loop(&s.setup(), &cfg, &DVector::from_vec(vec![4.0]), 3).unwrap_err();
        assert!(matches!(err, Error::OnlineInfeasible { k: 0, .. }));
    }

    #[test]
    fn csv_layout() {
        let s = scalar(5.0, 2.0);
        let cfg = MpcConfig {
            alpha0: 3.125,
            ..MpcConfig::default()
        };
        let r = run_closed_loop(&s.setup(), &cfg, &DVector::from_vec(vec![1.0]), 4).unwrap();
        assert_eq!(r.csv_header(), ["k", "x1", "u1", "alpha", "V", "stage_cost"]);
        let rows = r.csv_rows();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0][1], 1.0);
    }
}
