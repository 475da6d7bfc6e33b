//! Contractive closed-loop invariants on a scalar plant.

use cmpc::costs::{QuadStageCost, QuadTerminalCost};
use cmpc::mpc::{assert_feasibility_chain, run_closed_loop, update_alpha, MpcConfig, MpcMode, MpcSetup};
use cmpc::osvf::{osvf_matrix, WitnessSearch};
use cmpc::synthesis::{size_terminal_alpha, SizingOptions};
use cmpc::systems::{BoxSet, LinearSystem};
use nalgebra::DVector;
use proptest::prelude::*;

struct Scalar {
    sys: LinearSystem,
    stage: QuadStageCost,
    terminal: QuadTerminalCost,
    xs: BoxSet,
    us: BoxSet,
}

fn scalar() -> Scalar {
    Scalar {
        sys: LinearSystem::scalar(0.5, 1.0),
        stage: QuadStageCost::scalar(1.0, 1.0),
        terminal: QuadTerminalCost::scalar(1.0),
        xs: BoxSet::symmetric(&[5.0]).unwrap(),
        us: BoxSet::symmetric(&[2.0]).unwrap(),
    }
}

#[test]
fn scalar_contractive_run() {
    let s = scalar();
    let os = osvf_matrix(&s.sys, &s.stage, &s.terminal).unwrap();
    // a = 0.5, b = 1, q = r = p = 1: M_P = 0.25 + 1 - 1 - 0.25/2 = 0.125, K = -0.25.
    assert!((os.mp[(0, 0)] - 0.125).abs() < 1e-12);
    assert!((os.gain[(0, 0)] + 0.25).abs() < 1e-12);
    let witness = WitnessSearch {
        system: &s.sys,
        stage: &s.stage,
        terminal: &s.terminal,
        input_set: &s.us,
        gain: &os.gain,
    };
    let alpha0 = size_terminal_alpha(&witness, &os.mp, &s.xs, &SizingOptions::default()).unwrap();
    // Containment bound 0.125·5² = 3.125; decrease holds everywhere inside.
    assert!((alpha0 - 3.125).abs() <= 3.125 * 1e-3, "alpha0 {alpha0}");

    let setup = MpcSetup {
        system: &s.sys,
        stage: &s.stage,
        terminal: &s.terminal,
        state_set: &s.xs,
        input_set: &s.us,
        terminal_shape: &os.mp,
        gain: &os.gain,
    };
    let config = MpcConfig {
        alpha0,
        ..MpcConfig::default()
    };
    let x0 = DVector::from_element(1, 4.0);
    let run = run_closed_loop(&setup, &config, &x0, 50).unwrap();
    let chain = assert_feasibility_chain(&run, 1e-9);
    assert!(chain.passed, "{:?}", chain.first_violation);

    let delta = config.delta();
    let limit = (alpha0 / delta).ceil() as usize;
    let zero_at = run.alphas.iter().position(|&a| a == 0.0).expect("alpha reaches zero");
    assert!(zero_at <= limit);
    for w in run.values[zero_at..].windows(2) {
        assert!(w[1] <= w[0] + 1e-6, "value increased after alpha hit zero");
    }
    assert!(run.terminal_norm <= 1e-3);
    assert_eq!(run.value_bound_violations, 0);

    // Recompute J_run from the stored trajectory.
    let j: f64 = run.states.iter().zip(&run.inputs).map(|(x, u)| x[0] * x[0] + u[0] * u[0]).sum();
    assert!((j - run.j_run).abs() <= 1e-9 * j.max(1.0));
    for (k, u) in run.inputs.iter().enumerate() {
        assert!(s.us.contains(u));
        let next = 0.5 * run.states[k][0] + u[0];
        assert!((next - run.states[k + 1][0]).abs() <= 1e-12);
    }

    let again = run_closed_loop(&setup, &config, &x0, 50).unwrap();
    assert_eq!(run, again, "closed loop must be deterministic");

    let conv = MpcConfig {
        mode: MpcMode::Conventional,
        ..config.clone()
    };
    let conv_run = run_closed_loop(&setup, &conv, &x0, 50).unwrap();
    assert!(conv_run.alphas.iter().all(|&a| a == alpha0));
    assert!(assert_feasibility_chain(&conv_run, 1e-9).passed);
}

proptest! {
    #[test]
    fn alpha_update_contracts(m1 in 0.0f64..10.0, mn in 0.0f64..10.0, delta in 1e-4f64..1.0) {
        let next = update_alpha(m1, mn, delta);
        let ms = m1.min(mn);
        prop_assert!(next >= 0.0);
        if ms >= delta {
            prop_assert!((next - (ms - delta)).abs() < 1e-15);
        } else {
            prop_assert_eq!(next, 0.0);
        }
    }
}
