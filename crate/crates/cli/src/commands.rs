use std::fs;
use std::path::{Path, PathBuf};

use cmpc::costs::{QuadStageCost, QuadTerminalCost};
use cmpc::linalg;
use cmpc::mpc::{self, ChainDiagnostics, ClosedLoopResult, MpcMode, MpcSetup};
use cmpc::osvf::{self, ClfCertificate, WitnessSearch};
use cmpc::synthesis::{self, BmiCandidate, DecreaseTest, RegionPoint, SizingOptions};
use cmpc::systems::{self, BoxSet, LinearSystem, Plant};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{
    ClosedLoopConfig, DareConfig, Problem, ProposedSource, RegionConfig, Rows, SynthConfig, VerifyConfig,
};
use crate::CliError;

fn rows(m: &DMatrix<f64>) -> Rows {
    linalg::to_rows(m)
}

/// Plant, origin linearization, weights and constraint sets of a problem.
pub struct Built {
    pub plant: Plant,
    pub linear: LinearSystem,
    pub stage: QuadStageCost,
    pub state_set: BoxSet,
    pub input_set: BoxSet,
}

pub fn build(problem: &Problem) -> Result<Built, CliError> {
    let plant = problem.system.build()?;
    let n = problem.weights.q.len();
    let m = problem.weights.r.len();
    let linear = systems::linearize(&plant, &DVector::zeros(n), &DVector::zeros(m))?;
    let stage = problem.weights.build()?;
    let (state_set, input_set) = problem.constraints.build()?;
    Ok(Built {
        plant,
        linear,
        stage,
        state_set,
        input_set,
    })
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

fn write_csv(dir: &Path, name: &str, header: &[String], data: impl Iterator<Item = Vec<String>>) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header)?;
    for row in data {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// region1d

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub q: f64,
    /// Largest grid `p` in the proposed region.
    pub p_sup: Option<f64>,
    /// Positive scalar DARE root.
    pub p_dare: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCase {
    pub a: f64,
    pub r: f64,
    pub q_min: f64,
    pub points: usize,
    pub proposed: usize,
    pub conventional: usize,
    pub overlap: usize,
    pub boundary: Vec<BoundaryPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub b: f64,
    pub q_step: f64,
    pub p_step: f64,
    pub complementary: bool,
    pub cases: Vec<RegionCase>,
}

pub struct RegionOutput {
    pub points: Vec<RegionPoint>,
    pub summary: RegionSummary,
}

pub fn region1d(cfg: &RegionConfig) -> Result<RegionOutput, CliError> {
    let qs = cfg.q.values()?;
    let ps = cfg.p.values()?;
    let mut points = Vec::with_capacity(cfg.a.len() * cfg.r.len() * qs.len() * ps.len());
    let mut cases = Vec::new();
    for &a in &cfg.a {
        for &r in &cfg.r {
            let mut case = RegionCase {
                a,
                r,
                q_min: synthesis::firstorder_qmin(a, cfg.b, r)?,
                points: 0,
                proposed: 0,
                conventional: 0,
                overlap: 0,
                boundary: Vec::new(),
            };
            for &q in &qs {
                let mut p_sup: Option<f64> = None;
                for &p in &ps {
                    let pt = RegionPoint::classify(a, cfg.b, q, r, p)?;
                    case.points += 1;
                    case.proposed += pt.proposed_member as usize;
                    case.conventional += pt.conventional_member as usize;
                    case.overlap += (pt.proposed_member && pt.conventional_member) as usize;
                    if pt.proposed_member {
                        p_sup = Some(p_sup.map_or(p, |s: f64| s.max(p)));
                    }
                    points.push(pt);
                }
                if r > 0.0 && q > 0.0 {
                    case.boundary.push(BoundaryPoint {
                        q,
                        p_sup,
                        p_dare: synthesis::scalar_dare(a, cfg.b, q, r)?,
                    });
                }
            }
            cases.push(case);
        }
    }
    let summary = RegionSummary {
        b: cfg.b,
        q_step: cfg.q.step,
        p_step: cfg.p.step,
        complementary: cases.iter().all(|c| c.overlap == 0),
        cases,
    };
    Ok(RegionOutput { points, summary })
}

pub fn write_region1d(out: &RegionOutput, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let header: Vec<String> = ["a", "b", "q", "r", "p", "proposed", "conventional"].map(String::from).to_vec();
    let csv = write_csv(
        dir,
        "region1d.csv",
        &header,
        out.points.iter().map(|pt| {
            vec![
                pt.a.to_string(),
                pt.b.to_string(),
                pt.q.to_string(),
                pt.r.to_string(),
                pt.p.to_string(),
                (pt.proposed_member as u8).to_string(),
                (pt.conventional_member as u8).to_string(),
            ]
        }),
    )?;
    let json = write_json(dir, "region1d_summary.json", &out.summary)?;
    Ok(vec![csv, json])
}

// ---------------------------------------------------------------------------
// dare

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DareOutput {
    #[serde(rename = "P")]
    pub p: Rows,
    #[serde(rename = "K")]
    pub k: Rows,
    pub residual_inf_norm: f64,
    /// `‖M_P‖∞` for the Riccati weight, zero up to rounding.
    pub mp_inf_norm: f64,
}

pub fn dare(cfg: &DareConfig) -> Result<DareOutput, CliError> {
    let b = build(&cfg.problem())?;
    let p = synthesis::solve_dare(&b.linear, &b.stage)?;
    let os = osvf::osvf_matrix(&b.linear, &b.stage, &QuadTerminalCost::new(p.clone())?)?;
    Ok(DareOutput {
        residual_inf_norm: linalg::inf_norm(&synthesis::dare_residual(&b.linear, &b.stage, &p)?),
        mp_inf_norm: linalg::inf_norm(&os.mp),
        k: rows(&os.gain),
        p: rows(&p),
    })
}

// ---------------------------------------------------------------------------
// verify / synth

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmiReport {
    #[serde(rename = "K1")]
    pub k1: Rows,
    #[serde(rename = "K2")]
    pub k2: Rows,
    pub min_eig: f64,
    pub feasible: bool,
}

impl From<&BmiCandidate> for BmiReport {
    fn from(c: &BmiCandidate) -> Self {
        Self {
            k1: rows(&c.k1),
            k2: rows(&c.k2),
            min_eig: c.min_eig,
            feasible: synthesis::bmi_feasible(c, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    #[serde(rename = "P")]
    pub p: Rows,
    #[serde(rename = "M_min_eig")]
    pub m_min_eig: f64,
    #[serde(rename = "M_positive_definite")]
    pub m_positive_definite: bool,
    /// The Schur-complement test agrees with the direct eigenvalue test.
    pub schur_consistent: bool,
    pub rbb_min_eig: f64,
    #[serde(rename = "M_P")]
    pub mp: Rows,
    #[serde(rename = "K_os")]
    pub k_os: Rows,
    pub bmi: BmiReport,
    pub alpha: Option<f64>,
    pub clf_certificate: ClfCertificate,
}

/// Quadratic OSVF, BMI check with optimized gains, and sampled CLF test on
/// the true dynamics.
fn certify(b: &Built, p: &DMatrix<f64>, alpha: Option<f64>, samples: usize, seed: u64) -> Result<VerifyOutput, CliError> {
    let terminal = QuadTerminalCost::new(p.clone())?;
    let os = osvf::osvf_matrix(&b.linear, &b.stage, &terminal)?;
    let big_m = osvf::assemble_m(&b.linear, &b.stage, &terminal)?;
    let pd = big_m.is_positive_definite(osvf::CERTIFY_TOL);
    let (k1, k2) = synthesis::default_gains(&b.linear, &b.stage, p)?;
    let bmi = synthesis::optimize_gains(&b.linear, &b.stage, p, &k1, &k2, &Default::default())?;
    let witness = WitnessSearch {
        system: &b.plant,
        stage: &b.stage,
        terminal: &terminal,
        input_set: &b.input_set,
        gain: &os.gain,
    };
    let alpha = if os.is_positive_definite(osvf::CERTIFY_TOL) {
        Some(match alpha {
            Some(a) => a,
            None => synthesis::size_terminal_alpha(&witness, &os.mp, &b.state_set, &SizingOptions::default())?,
        })
    } else {
        None
    };
    let cert = osvf::certify_shape(&witness, &os.mp, alpha.unwrap_or(0.0), &b.state_set, samples, seed)?;
    Ok(VerifyOutput {
        p: rows(p),
        m_min_eig: big_m.min_eigenvalue(),
        m_positive_definite: pd,
        schur_consistent: pd == big_m.schur_positive_definite(osvf::CERTIFY_TOL),
        rbb_min_eig: linalg::min_eigenvalue(&os.rbb),
        mp: rows(&os.mp),
        k_os: rows(&os.gain),
        bmi: BmiReport::from(&bmi),
        alpha,
        clf_certificate: cert,
    })
}

pub fn verify(cfg: &VerifyConfig) -> Result<VerifyOutput, CliError> {
    let b = build(&cfg.problem())?;
    let p = linalg::from_rows(&cfg.p).ok_or_else(|| CliError::Config("P must be rectangular".into()))?;
    certify(&b, &p, cfg.certify.alpha, cfg.certify.samples, cfg.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOutput {
    #[serde(rename = "P")]
    pub p: Rows,
    #[serde(rename = "K1")]
    pub k1: Rows,
    #[serde(rename = "K2")]
    pub k2: Rows,
    pub min_eig: f64,
    pub feasible: bool,
    pub rounds: usize,
    pub history: Vec<f64>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerifyOutput>,
}

pub fn synth(cfg: &SynthConfig) -> Result<SynthOutput, CliError> {
    let b = build(&cfg.problem())?;
    let out = synthesis::synth_terminal_bmi(&b.linear, &b.stage, &cfg.bmi)?;
    let c = &out.candidate;
    let verification = if out.feasible {
        Some(certify(&b, &c.p, cfg.certify.alpha, cfg.certify.samples, cfg.seed)?)
    } else {
        None
    };
    Ok(SynthOutput {
        p: rows(&c.p),
        k1: rows(&c.k1),
        k2: rows(&c.k2),
        min_eig: c.min_eig,
        feasible: out.feasible,
        rounds: out.rounds,
        history: out.history,
        notes: out.notes,
        verification,
    })
}

// ---------------------------------------------------------------------------
// closed-loop comparison

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub alpha0: f64,
    pub delta: Option<f64>,
    pub j_run: f64,
    pub feasible_all: bool,
    pub terminal_norm: f64,
    pub chain: ChainDiagnostics,
    /// First step at which the level reached zero.
    pub alpha_zero_step: Option<usize>,
    /// Largest step-to-step increase of `V` once `α = 0`.
    pub max_value_increase_at_zero: Option<f64>,
    pub value_bound_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    #[serde(rename = "P_dare")]
    pub p_dare: Rows,
    #[serde(rename = "K_lqr")]
    pub k_lqr: Rows,
    #[serde(rename = "P_synthesized")]
    pub p_synth: Rows,
    pub synth_min_eig: f64,
    pub synth_feasible: bool,
    #[serde(rename = "P_proposed")]
    pub p_proposed: Rows,
    #[serde(rename = "M_P")]
    pub mp: Rows,
    /// BMI check of the proposed weight after gain optimization.
    pub proposed_bmi: BmiReport,
    pub proposed: RunSummary,
    pub conventional: RunSummary,
    pub proposed_better: bool,
}

pub struct ComparisonOutput {
    pub summary: ComparisonSummary,
    pub proposed: ClosedLoopResult,
    pub conventional: ClosedLoopResult,
}

fn summarize(r: &ClosedLoopResult, alpha0: f64, delta: Option<f64>, tol: f64) -> RunSummary {
    let zero = r.alphas.iter().position(|a| *a == 0.0);
    let increase = zero.map(|k0| {
        r.values[k0..]
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    });
    RunSummary {
        alpha0,
        delta,
        j_run: r.j_run,
        feasible_all: r.feasible_all,
        terminal_norm: r.terminal_norm,
        chain: mpc::assert_feasibility_chain(r, tol),
        alpha_zero_step: zero,
        max_value_increase_at_zero: increase.filter(|v| v.is_finite()),
        value_bound_violations: r.value_bound_violations,
    }
}

/// Synthesis, terminal-set sizing, and both closed loops from the same
/// initial state.
pub fn cartspring(cfg: &ClosedLoopConfig) -> Result<ComparisonOutput, CliError> {
    let b = build(&cfg.problem())?;
    let p_dare = synthesis::solve_dare(&b.linear, &b.stage)?;
    let k_lqr = synthesis::lqr_gain(&b.linear, &b.stage, &p_dare)?;
    let synth = synthesis::synth_terminal_bmi(&b.linear, &b.stage, &cfg.bmi)?;
    let p_prop = match cfg.proposed_source {
        ProposedSource::Given => linalg::from_rows(&cfg.proposed_p).ok_or_else(|| CliError::Config("proposed_p".into()))?,
        ProposedSource::Synthesized if synth.feasible => synth.candidate.p.clone(),
        ProposedSource::Synthesized => {
            return Err(CliError::Failed(format!(
                "BMI synthesis found no feasible terminal weight (lambda_min = {:e})",
                synth.candidate.min_eig
            )))
        }
    };
    let term_prop = QuadTerminalCost::new(p_prop.clone())?;
    let term_conv = QuadTerminalCost::new(p_dare.clone())?;
    let os = osvf::osvf_matrix(&b.linear, &b.stage, &term_prop)?;
    if !os.is_positive_definite(osvf::CERTIFY_TOL) {
        return Err(CliError::Failed(format!(
            "M_P of the proposed terminal weight is not positive definite (lambda_min = {:e})",
            os.lambda_min()
        )));
    }
    let (k1, k2) = synthesis::default_gains(&b.linear, &b.stage, &p_prop)?;
    let prop_bmi = synthesis::optimize_gains(&b.linear, &b.stage, &p_prop, &k1, &k2, &Default::default())?;

    let sizing = SizingOptions {
        rel_tol: cfg.sizing.rel_tol,
        n_boundary: cfg.sizing.n_boundary,
        seed: cfg.seed,
        ..SizingOptions::default()
    };
    let w_prop = WitnessSearch {
        system: &b.plant,
        stage: &b.stage,
        terminal: &term_prop,
        input_set: &b.input_set,
        gain: &os.gain,
    };
    let w_conv = WitnessSearch {
        system: &b.plant,
        stage: &b.stage,
        terminal: &term_conv,
        input_set: &b.input_set,
        gain: &k_lqr,
    };
    let alpha_prop = match cfg.alpha_proposed {
        Some(a) => a,
        None => synthesis::size_terminal_alpha(&w_prop, &os.mp, &b.state_set, &sizing)?,
    };
    let conv_sizing = match cfg.sizing.conventional_stage_fraction {
        Some(fraction) => SizingOptions {
            test: DecreaseTest::StageFraction {
                fraction,
                stage: b.stage.clone(),
            },
            ..sizing.clone()
        },
        None => sizing.clone(),
    };
    let alpha_conv = match cfg.alpha_conventional {
        Some(a) => a,
        None => synthesis::size_terminal_alpha(&w_conv, &p_dare, &b.state_set, &conv_sizing)?,
    };

    let x0 = DVector::from_vec(cfg.x0.clone());
    let setup_prop = MpcSetup {
        system: &b.plant,
        stage: &b.stage,
        terminal: &term_prop,
        state_set: &b.state_set,
        input_set: &b.input_set,
        terminal_shape: &os.mp,
        gain: &os.gain,
    };
    let setup_conv = MpcSetup {
        system: &b.plant,
        stage: &b.stage,
        terminal: &term_conv,
        state_set: &b.state_set,
        input_set: &b.input_set,
        terminal_shape: &p_dare,
        gain: &k_lqr,
    };
    let cfg_prop = cfg.mpc(MpcMode::Contractive, alpha_prop, cfg.delta);
    let cfg_conv = cfg.mpc(MpcMode::Conventional, alpha_conv, None);
    let proposed = mpc::run_closed_loop(&setup_prop, &cfg_prop, &x0, cfg.steps)?;
    let conventional = mpc::run_closed_loop(&setup_conv, &cfg_conv, &x0, cfg.steps)?;
    let tol = cfg.solver.feas_tol;
    let summary = ComparisonSummary {
        p_dare: rows(&p_dare),
        k_lqr: rows(&k_lqr),
        p_synth: rows(&synth.candidate.p),
        synth_min_eig: synth.candidate.min_eig,
        synth_feasible: synth.feasible,
        p_proposed: rows(&p_prop),
        mp: rows(&os.mp),
        proposed_bmi: BmiReport::from(&prop_bmi),
        proposed: summarize(&proposed, alpha_prop, Some(cfg_prop.delta()), tol),
        conventional: summarize(&conventional, alpha_conv, None, tol),
        proposed_better: proposed.j_run < conventional.j_run,
    };
    Ok(ComparisonOutput {
        summary,
        proposed,
        conventional,
    })
}

fn trajectory_rows(r: &ClosedLoopResult) -> impl Iterator<Item = Vec<String>> + '_ {
    r.csv_rows().into_iter().map(|row| row.iter().map(|v| v.to_string()).collect())
}

pub fn write_cartspring(out: &ComparisonOutput, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    Ok(vec![
        write_csv(dir, "proposed.csv", &out.proposed.csv_header(), trajectory_rows(&out.proposed))?,
        write_csv(dir, "conventional.csv", &out.conventional.csv_header(), trajectory_rows(&out.conventional))?,
        write_json(dir, "comparison.json", &out.summary)?,
    ])
}

pub fn write_named<T: Serialize>(value: &T, dir: &Path, name: &str) -> Result<Vec<PathBuf>, CliError> {
    Ok(vec![write_json(dir, name, value)?])
}
