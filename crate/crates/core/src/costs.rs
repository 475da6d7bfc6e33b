//! Stage, terminal, augmented (rotated) and horizon costs.
//!
//! Rotating the terminal cost into the stage cost gives
//! `ℓ(x, u, x⁺) = -V_f(x) + l(x, u) + V_f(x⁺)`, and over any trajectory
//! `Σ ℓ = J - V_f(x₀)`. Weights may be indefinite.

use nalgebra::DMatrix;

use crate::linalg::{self, quad_form};
use crate::systems::{self, DiscreteSystem, InputVec, StateVec};
use crate::{Error, Result};

pub trait StageCost: Send + Sync {
    fn stage(&self, x: &StateVec, u: &InputVec) -> f64;
}

pub trait TerminalCost: Send + Sync {
    fn terminal(&self, x: &StateVec) -> f64;
}

/// `l(x, u) = xᵀQx + uᵀRu`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadStageCost {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl QuadStageCost {
    /// Symmetrizes both weights. Neither needs to be definite.
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        if !q.is_square() || !r.is_square() {
            return Err(Error::invalid("Q and R must be square"));
        }
        if !linalg::all_finite(&q) || !linalg::all_finite(&r) {
            return Err(Error::invalid("Q and R must be finite"));
        }
        Ok(Self {
            q: linalg::symmetrize(&q),
            r: linalg::symmetrize(&r),
        })
    }

    pub fn scalar(q: f64, r: f64) -> Self {
        Self {
            q: DMatrix::from_element(1, 1, q),
            r: DMatrix::from_element(1, 1, r),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.r.nrows()
    }

    /// Checked evaluation.
    pub fn eval(&self, x: &StateVec, u: &InputVec) -> Result<f64> {
        Error::check_dim("stage cost state", self.state_dim(), x.len())?;
        Error::check_dim("stage cost input", self.input_dim(), u.len())?;
        Ok(self.stage(x, u))
    }
}

impl StageCost for QuadStageCost {
    fn stage(&self, x: &StateVec, u: &InputVec) -> f64 {
        quad_form(&self.q, x) + quad_form(&self.r, u)
    }
}

/// `V_f(x) = xᵀPx`, sign-indefinite allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadTerminalCost {
    pub p: DMatrix<f64>,
}

impl QuadTerminalCost {
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::invalid("P must be square"));
        }
        if !linalg::all_finite(&p) {
            return Err(Error::invalid("P must be finite"));
        }
        Ok(Self {
            p: linalg::symmetrize(&p),
        })
    }

    pub fn scalar(p: f64) -> Self {
        Self {
            p: DMatrix::from_element(1, 1, p),
        }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            p: DMatrix::zeros(n, n),
        }
    }

    pub fn eval(&self, x: &StateVec) -> Result<f64> {
        Error::check_dim("terminal cost state", self.p.nrows(), x.len())?;
        Ok(self.terminal(x))
    }
}

impl TerminalCost for QuadTerminalCost {
    fn terminal(&self, x: &StateVec) -> f64 {
        quad_form(&self.p, x)
    }
}

/// Closure-backed stage cost, for non-quadratic (e.g. economic) costs.
pub struct FnStageCost<F>(pub F);

impl<F> StageCost for FnStageCost<F>
where
    F: Fn(&StateVec, &InputVec) -> f64 + Send + Sync,
{
    fn stage(&self, x: &StateVec, u: &InputVec) -> f64 {
        (self.0)(x, u)
    }
}

pub struct FnTerminalCost<F>(pub F);

impl<F> TerminalCost for FnTerminalCost<F>
where
    F: Fn(&StateVec) -> f64 + Send + Sync,
{
    fn terminal(&self, x: &StateVec) -> f64 {
        (self.0)(x)
    }
}

/// The rotated stage cost `ℓ(x, u, f(x,u))` bound to a system.
pub struct AugmentedStageCost<'a, Sys: ?Sized, L: ?Sized, V: ?Sized> {
    pub system: &'a Sys,
    pub stage: &'a L,
    pub terminal: &'a V,
}

impl<'a, Sys, L, V> AugmentedStageCost<'a, Sys, L, V>
where
    Sys: DiscreteSystem + ?Sized,
    L: StageCost + ?Sized,
    V: TerminalCost + ?Sized,
{
    pub fn new(system: &'a Sys, stage: &'a L, terminal: &'a V) -> Self {
        Self {
            system,
            stage,
            terminal,
        }
    }

    /// `-V_f(x) + l(x,u) + V_f(x_next)` for an explicitly given successor.
    pub fn with_successor(&self, x: &StateVec, u: &InputVec, x_next: &StateVec) -> f64 {
        -self.terminal.terminal(x) + self.stage.stage(x, u) + self.terminal.terminal(x_next)
    }

    /// `ℓ(x, u, f(x, u))` with the successor computed through the system.
    pub fn eval(&self, x: &StateVec, u: &InputVec) -> Result<f64> {
        let next = systems::step(self.system, x, u)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow { step: 1 });
        }
        Ok(self.with_successor(x, u, &next))
    }
}

fn check_lengths(x_seq: &[StateVec], u_seq: &[InputVec]) -> Result<()> {
    if x_seq.len() != u_seq.len() + 1 {
        return Err(Error::invalid(format!(
            "trajectory length mismatch: {} states for {} inputs",
            x_seq.len(),
            u_seq.len()
        )));
    }
    Ok(())
}

/// `J = Σᵢ l(xᵢ, uᵢ) + V_f(x_N)`.
pub fn horizon_cost<L, V>(stage: &L, terminal: &V, x_seq: &[StateVec], u_seq: &[InputVec]) -> Result<f64>
where
    L: StageCost + ?Sized,
    V: TerminalCost + ?Sized,
{
    check_lengths(x_seq, u_seq)?;
    let running: f64 = x_seq
        .iter()
        .zip(u_seq)
        .map(|(x, u)| stage.stage(x, u))
        .sum();
    Ok(running + terminal.terminal(&x_seq[u_seq.len()]))
}

/// `𝒥 = Σᵢ ℓ(xᵢ, uᵢ, xᵢ₊₁)` over the given trajectory.
pub fn rotated_cost<Sys, L, V>(
    aug: &AugmentedStageCost<'_, Sys, L, V>,
    x_seq: &[StateVec],
    u_seq: &[InputVec],
) -> Result<f64>
where
    Sys: DiscreteSystem + ?Sized,
    L: StageCost + ?Sized,
    V: TerminalCost + ?Sized,
{
    check_lengths(x_seq, u_seq)?;
    Ok(u_seq
        .iter()
        .enumerate()
        .map(|(i, u)| aug.with_successor(&x_seq[i], u, &x_seq[i + 1]))
        .sum())
}

/// Sum of quadratic stage costs over applied pairs.
pub fn running_cost(stage: &QuadStageCost, states: &[StateVec], inputs: &[InputVec]) -> f64 {
    states
        .iter()
        .zip(inputs)
        .map(|(x, u)| stage.stage(x, u))
        .sum()
}

#[cfg(test)]
pub(crate) fn dvec(xs: &[f64]) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(xs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{rollout, CartSpring, LinearSystem};
    use approx::assert_abs_diff_eq;

    fn benchmark_stage() -> QuadStageCost {
        QuadStageCost::new(
            DMatrix::from_diagonal(&dvec(&[2.0, 4.0])),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn stage_cost_examples() {
        assert_eq!(benchmark_stage().eval(&dvec(&[1.0, 1.0]), &dvec(&[2.0])).unwrap(), 10.0);
        assert_eq!(benchmark_stage().eval(&dvec(&[0.0, 0.0]), &dvec(&[0.0])).unwrap(), 0.0);
        let neg = QuadStageCost::scalar(1.0, -1.0);
        assert_eq!(neg.eval(&dvec(&[1.0]), &dvec(&[2.0])).unwrap(), -3.0);
        assert!(neg.eval(&dvec(&[1.0, 0.0]), &dvec(&[2.0])).is_err());
    }

    #[test]
    fn terminal_cost_examples() {
        let p = QuadTerminalCost::new(DMatrix::from_row_slice(
            2,
            2,
            &[10.9153, 4.5604, 4.5604, 7.5023],
        ))
        .unwrap();
        assert_eq!(p.eval(&dvec(&[1.0, 0.0])).unwrap(), 10.9153);
        assert_eq!(p.eval(&dvec(&[0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(QuadTerminalCost::scalar(-1.0).eval(&dvec(&[2.0])).unwrap(), -4.0);
    }

    #[test]
    fn augmented_cost_examples() {
        let sys = LinearSystem::scalar(0.5, 1.0);
        let l = QuadStageCost::scalar(1.0, 1.0);
        let p = QuadTerminalCost::scalar(1.0);
        let aug = AugmentedStageCost::new(&sys, &l, &p);
        // -4 + 4 + 0 + 1
        assert_eq!(aug.eval(&dvec(&[2.0]), &dvec(&[0.0])).unwrap(), 1.0);
        assert_eq!(aug.eval(&dvec(&[0.0]), &dvec(&[0.0])).unwrap(), 0.0);

        let zero = QuadTerminalCost::scalar(0.0);
        let aug0 = AugmentedStageCost::new(&sys, &l, &zero);
        assert_eq!(aug0.eval(&dvec(&[1.0]), &dvec(&[1.0])).unwrap(), 2.0);
    }

    #[test]
    fn horizon_and_rotated_scalar() {
        let sys = LinearSystem::scalar(0.5, 1.0);
        let l = QuadStageCost::scalar(1.0, 1.0);
        let p = QuadTerminalCost::scalar(1.0);
        let us = vec![dvec(&[0.0])];
        let xs = rollout(&sys, &dvec(&[1.0]), &us).unwrap();
        let j = horizon_cost(&l, &p, &xs, &us).unwrap();
        assert_eq!(j, 1.25);
        let aug = AugmentedStageCost::new(&sys, &l, &p);
        assert_eq!(rotated_cost(&aug, &xs, &us).unwrap(), 0.25);

        // N = 0
        let x0 = vec![dvec(&[3.0])];
        assert_eq!(horizon_cost(&l, &p, &x0, &[]).unwrap(), 9.0);
        assert_eq!(rotated_cost(&aug, &x0, &[]).unwrap(), 0.0);

        assert!(horizon_cost(&l, &p, &xs, &[]).is_err());
        assert!(rotated_cost(&aug, &x0, &us).is_err());
    }

    #[test]
    fn cart_spring_horizon_cost_by_hand() {
        let cart = CartSpring::default();
        let l = benchmark_stage();
        let p = QuadTerminalCost::new(DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 2.0])).unwrap();
        let us = vec![dvec(&[0.0]); 3];
        let xs = rollout(&cart, &dvec(&[-2.0, 1.0]), &us).unwrap();

        // Independent element-wise evaluation.
        let mut s = (-2.0f64, 1.0f64);
        let mut expected = 0.0;
        for _ in 0..3 {
            expected += 2.0 * s.0 * s.0 + 4.0 * s.1 * s.1;
            s = (s.0 + 0.4 * s.1, -0.132 * (-s.0).exp() * s.0 + 0.56 * s.1);
        }
        expected += 3.0 * s.0 * s.0 + 2.0 * 0.5 * s.0 * s.1 + 2.0 * s.1 * s.1;
        assert_abs_diff_eq!(horizon_cost(&l, &p, &xs, &us).unwrap(), expected, epsilon = 1e-10);
    }

    #[test]
    fn symmetrized_weights() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let c = QuadStageCost::new(q, DMatrix::identity(1, 1)).unwrap();
        assert_eq!(c.q[(0, 1)], 1.0);
        assert_eq!(c.q[(1, 0)], 1.0);
    }

    #[test]
    fn closure_costs_plug_in() {
        let econ = FnStageCost(|x: &StateVec, u: &InputVec| x[0] - u[0] * u[0]);
        let vf = FnTerminalCost(|x: &StateVec| x[0].abs());
        let xs = vec![dvec(&[1.0]), dvec(&[-2.0])];
        let us = vec![dvec(&[3.0])];
        assert_eq!(horizon_cost(&econ, &vf, &xs, &us).unwrap(), 1.0 - 9.0 + 2.0);
    }
}
