//! Discrete-time dynamics `x⁺ = f(x, u)`, constraint boxes, linearization and
//! open-loop rollout.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::{Error, Result};

pub type StateVec = DVector<f64>;
pub type InputVec = DVector<f64>;

/// Central finite-difference step used whenever analytic Jacobians are absent.
pub const FD_STEP: f64 = 1e-6;

/// A discrete-time transition map.
///
/// Implementors must satisfy `f(0, 0) = 0`. `transition` is called with
/// vectors of the right length; use [`step`] for a checked call.
pub trait DiscreteSystem: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn transition(&self, x: &StateVec, u: &InputVec) -> StateVec;

    /// Analytic Jacobians `(∂f/∂x, ∂f/∂u)` at `(x, u)`, when available.
    fn jacobians(&self, _x: &StateVec, _u: &InputVec) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        None
    }
}

impl<S: DiscreteSystem + ?Sized> DiscreteSystem for &S {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn transition(&self, x: &StateVec, u: &InputVec) -> StateVec {
        (**self).transition(x, u)
    }
    fn jacobians(&self, x: &StateVec, u: &InputVec) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        (**self).jacobians(x, u)
    }
}

/// `x⁺ = A x + B u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::invalid(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        Error::check_dim("B rows", a.nrows(), b.nrows())?;
        if b.ncols() == 0 {
            return Err(Error::invalid("B must have at least one column"));
        }
        if !linalg::all_finite(&a) || !linalg::all_finite(&b) {
            return Err(Error::invalid("A and B must have finite entries"));
        }
        Ok(Self { a, b })
    }

    /// Scalar system `x⁺ = a x + b u`.
    pub fn scalar(a: f64, b: f64) -> Self {
        Self {
            a: DMatrix::from_element(1, 1, a),
            b: DMatrix::from_element(1, 1, b),
        }
    }
}

impl DiscreteSystem for LinearSystem {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    fn input_dim(&self) -> usize {
        self.b.ncols()
    }
    fn transition(&self, x: &StateVec, u: &InputVec) -> StateVec {
        &self.a * x + &self.b * u
    }
    fn jacobians(&self, _x: &StateVec, _u: &InputVec) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        Some((self.a.clone(), self.b.clone()))
    }
}

/// Cart on a plane tied to a wall by a hardening spring `k_s = k0·e^{-x₁}`,
/// Euler-discretized:
///
/// ```text
/// x₁⁺ = x₁ + dt·x₂
/// x₂⁺ = x₂ + dt·(-(k0/M)·e^{-x₁}·x₁ - (hd/M)·x₂ + u/M)
/// ```
///
/// With the default parameters this is `x₂⁺ = -0.132·e^{-x₁}·x₁ + 0.56·x₂ + 0.4·u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartSpring {
    pub k0: f64,
    pub hd: f64,
    pub mass: f64,
    pub dt: f64,
}

impl Default for CartSpring {
    fn default() -> Self {
        Self {
            k0: 0.33,
            hd: 1.1,
            mass: 1.0,
            dt: 0.4,
        }
    }
}

impl CartSpring {
    pub fn new(k0: f64, hd: f64, mass: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::invalid(format!("mass must be positive, got {mass}")));
        }
        if !k0.is_finite() || !hd.is_finite() {
            return Err(Error::invalid("k0 and hd must be finite"));
        }
        Ok(Self { k0, hd, mass, dt })
    }
}

impl DiscreteSystem for CartSpring {
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn transition(&self, x: &StateVec, u: &InputVec) -> StateVec {
        let (x1, x2) = (x[0], x[1]);
        let spring = self.k0 / self.mass * (-x1).exp() * x1;
        DVector::from_vec(vec![
            x1 + self.dt * x2,
            x2 + self.dt * (-spring - self.hd / self.mass * x2 + u[0] / self.mass),
        ])
    }
    fn jacobians(&self, x: &StateVec, _u: &InputVec) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let x1 = x[0];
        // d/dx₁ of e^{-x₁}·x₁
        let dspring = self.k0 / self.mass * (-x1).exp() * (1.0 - x1);
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                1.0,
                self.dt,
                -self.dt * dspring,
                1.0 - self.dt * self.hd / self.mass,
            ],
        );
        let b = DMatrix::from_row_slice(2, 1, &[0.0, self.dt / self.mass]);
        Some((a, b))
    }
}

/// Systems that can be described in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SystemSpec {
    Linear {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
    },
    CartSpring {
        #[serde(default = "default_k0")]
        k0: f64,
        #[serde(default = "default_hd")]
        hd: f64,
        #[serde(default = "default_mass")]
        mass: f64,
        #[serde(default = "default_dt")]
        dt: f64,
    },
}

fn default_k0() -> f64 {
    CartSpring::default().k0
}
fn default_hd() -> f64 {
    CartSpring::default().hd
}
fn default_mass() -> f64 {
    CartSpring::default().mass
}
fn default_dt() -> f64 {
    CartSpring::default().dt
}

impl SystemSpec {
    pub fn build(&self) -> Result<Plant> {
        match self {
            SystemSpec::Linear { a, b } => {
                let a = linalg::from_rows(a).ok_or_else(|| Error::invalid("ragged A"))?;
                let b = linalg::from_rows(b).ok_or_else(|| Error::invalid("ragged B"))?;
                if b.iter().all(|v| *v == 0.0) {
                    return Err(Error::invalid("B must be nonzero"));
                }
                Ok(Plant::Linear(LinearSystem::new(a, b)?))
            }
            SystemSpec::CartSpring { k0, hd, mass, dt } => {
                Ok(Plant::CartSpring(CartSpring::new(*k0, *hd, *mass, *dt)?))
            }
        }
    }
}

/// Closed set of the systems shipped with the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Plant {
    Linear(LinearSystem),
    CartSpring(CartSpring),
}

impl DiscreteSystem for Plant {
    fn state_dim(&self) -> usize {
        match self {
            Plant::Linear(s) => s.state_dim(),
            Plant::CartSpring(s) => s.state_dim(),
        }
    }
    fn input_dim(&self) -> usize {
        match self {
            Plant::Linear(s) => s.input_dim(),
            Plant::CartSpring(s) => s.input_dim(),
        }
    }
    fn transition(&self, x: &StateVec, u: &InputVec) -> StateVec {
        match self {
            Plant::Linear(s) => s.transition(x, u),
            Plant::CartSpring(s) => s.transition(x, u),
        }
    }
    fn jacobians(&self, x: &StateVec, u: &InputVec) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        match self {
            Plant::Linear(s) => s.jacobians(x, u),
            Plant::CartSpring(s) => s.jacobians(x, u),
        }
    }
}

/// Axis-aligned box `{v : lower ≤ v ≤ upper}` (closed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl BoxSet {
    /// Any non-empty box.
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        Error::check_dim("box bounds", lower.len(), upper.len())?;
        for (i, (lo, hi)) in lower.iter().zip(upper.iter()).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::invalid(format!(
                    "box bound {i}: lower {lo} exceeds upper {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// A state or input constraint set: non-empty and containing the origin
    /// in its interior.
    pub fn constraint_set(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        let set = Self::new(lower, upper)?;
        if set.lower.iter().any(|v| *v >= 0.0) || set.upper.iter().any(|v| *v <= 0.0) {
            return Err(Error::invalid(
                "constraint set must contain the origin in its interior",
            ));
        }
        Ok(set)
    }

    pub fn from_slices(lower: &[f64], upper: &[f64]) -> Result<Self> {
        Self::constraint_set(
            DVector::from_column_slice(lower),
            DVector::from_column_slice(upper),
        )
    }

    /// `[-r, r]ⁿ`.
    pub fn symmetric(radius: &[f64]) -> Result<Self> {
        let lower: Vec<f64> = radius.iter().map(|r| -r).collect();
        Self::from_slices(&lower, radius)
    }

    /// Unbounded box of dimension `n`.
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: DVector::from_element(n, f64::NEG_INFINITY),
            upper: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn contains(&self, v: &DVector<f64>) -> bool {
        v.len() == self.dim()
            && v.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(x, (lo, hi))| *lo <= *x && *x <= *hi)
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            v.len(),
            v.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .map(|(x, (lo, hi))| x.clamp(*lo, *hi)),
        )
    }

    /// Midpoint, with infinite sides mapped to zero.
    pub fn center(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lower.iter().zip(self.upper.iter()).map(|(lo, hi)| {
                match (lo.is_finite(), hi.is_finite()) {
                    (true, true) => 0.5 * (lo + hi),
                    (true, false) => lo.max(0.0),
                    (false, true) => hi.min(0.0),
                    (false, false) => 0.0,
                }
            }),
        )
    }

    /// Largest amount by which `v` leaves the box (0 inside).
    pub fn violation(&self, v: &DVector<f64>) -> f64 {
        v.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .map(|(x, (lo, hi))| (lo - x).max(x - hi).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Cartesian power `B × … × B` (`times` copies).
    pub fn repeat(&self, times: usize) -> Self {
        let n = self.dim();
        Self {
            lower: DVector::from_fn(n * times, |i, _| self.lower[i % n]),
            upper: DVector::from_fn(n * times, |i, _| self.upper[i % n]),
        }
    }
}

/// Checked single step.
pub fn step<S: DiscreteSystem + ?Sized>(sys: &S, x: &StateVec, u: &InputVec) -> Result<StateVec> {
    Error::check_dim("state", sys.state_dim(), x.len())?;
    Error::check_dim("input", sys.input_dim(), u.len())?;
    Ok(sys.transition(x, u))
}

/// Jacobians of `f` at `(x̄, ū)`: analytic when the system provides them,
/// central finite differences otherwise.
pub fn linearize<S: DiscreteSystem + ?Sized>(
    sys: &S,
    x_bar: &StateVec,
    u_bar: &InputVec,
) -> Result<LinearSystem> {
    Error::check_dim("state", sys.state_dim(), x_bar.len())?;
    Error::check_dim("input", sys.input_dim(), u_bar.len())?;
    let (a, b) = sys
        .jacobians(x_bar, u_bar)
        .unwrap_or_else(|| fd_jacobians(sys, x_bar, u_bar));
    Ok(LinearSystem { a, b })
}

/// Central finite-difference Jacobians with step [`FD_STEP`].
pub fn fd_jacobians<S: DiscreteSystem + ?Sized>(
    sys: &S,
    x: &StateVec,
    u: &InputVec,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = sys.state_dim();
    let m = sys.input_dim();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, m);
    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += FD_STEP;
        xm[j] -= FD_STEP;
        let d = (sys.transition(&xp, u) - sys.transition(&xm, u)) / (2.0 * FD_STEP);
        a.set_column(j, &d);
    }
    for j in 0..m {
        let mut up = u.clone();
        let mut um = u.clone();
        up[j] += FD_STEP;
        um[j] -= FD_STEP;
        let d = (sys.transition(x, &up) - sys.transition(x, &um)) / (2.0 * FD_STEP);
        b.set_column(j, &d);
    }
    (a, b)
}

/// `(x₀, x₁, …, x_N)` with `x_{i+1} = f(x_i, u_i)`.
pub fn rollout<S: DiscreteSystem + ?Sized>(
    sys: &S,
    x0: &StateVec,
    u_seq: &[InputVec],
) -> Result<Vec<StateVec>> {
    Error::check_dim("state", sys.state_dim(), x0.len())?;
    for u in u_seq {
        Error::check_dim("input", sys.input_dim(), u.len())?;
    }
    let mut states = Vec::with_capacity(u_seq.len() + 1);
    states.push(x0.clone());
    for (i, u) in u_seq.iter().enumerate() {
        let next = sys.transition(&states[i], u);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow { step: i + 1 });
        }
        states.push(next);
    }
    Ok(states)
}
