//! Model predictive control with a rotated (augmented) stage cost.
//!
//! The terminal cost is folded into the stage cost, `ℓ(x,u,x⁺) = -V_f(x) + l(x,u) + V_f(x⁺)`,
//! and stability is certified through the one-step value function (OSVF)
//! `m(x) = min_u ℓ(x,u,f(x,u))` acting as a control Lyapunov function. The
//! receding-horizon controller in [`mpc`] shrinks a terminal sublevel set of
//! `m` at every step.
//!
//! Module map:
//! - [`systems`]: discrete-time dynamics, boxes, linearization, rollout.
//! - [`costs`]: stage, terminal, augmented and horizon costs.
//! - [`osvf`]: closed-form and numeric OSVF, sublevel sets, CLF sampling.
//! - [`synthesis`]: Riccati baseline, BMI terminal-cost synthesis,
//!   first-order stability regions, terminal-set sizing.
//! - [`optim`]: augmented-Lagrangian solver and eigenvalue ascent.
//! - [`mpc`]: the contractive and conventional closed loops.

pub mod costs;
pub mod error;
pub mod linalg;
pub mod mpc;
pub mod optim;
pub mod osvf;
pub mod synthesis;
pub mod systems;

pub use error::{Error, Result};
