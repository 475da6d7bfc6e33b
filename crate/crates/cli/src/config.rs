//! Experiment configuration files (TOML or JSON).
//!
//! Every command has its own config type. All fields have defaults that
//! reproduce the cart-spring benchmark, so an empty file is valid.

use std::path::Path;

use cmpc::linalg;
use cmpc::mpc::{MpcConfig, MpcMode};
use cmpc::optim::SolverSettings;
use cmpc::synthesis::BmiOptions;
use cmpc::systems::{BoxSet, SystemSpec};
use cmpc::costs::QuadStageCost;
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub type Rows = Vec<Vec<f64>>;

/// Proposed terminal weight of the cart-spring benchmark.
pub fn benchmark_proposed_p() -> Rows {
    vec![vec![3.5249, -0.3522], vec![-0.3522, 1.5731]]
}

fn matrix(name: &str, rows: &Rows) -> Result<DMatrix<f64>, CliError> {
    linalg::from_rows(rows).ok_or_else(|| CliError::Config(format!("{name} must be a non-empty rectangular matrix")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    #[serde(rename = "Q")]
    pub q: Rows,
    #[serde(rename = "R")]
    pub r: Rows,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            q: vec![vec![2.0, 0.0], vec![0.0, 4.0]],
            r: vec![vec![1.0]],
        }
    }
}

impl Weights {
    pub fn build(&self) -> Result<QuadStageCost, CliError> {
        Ok(QuadStageCost::new(matrix("Q", &self.q)?, matrix("R", &self.r)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraints {
    pub x_lower: Vec<f64>,
    pub x_upper: Vec<f64>,
    pub u_lower: Vec<f64>,
    pub u_upper: Vec<f64>,
}

impl Default for Constraints {
    fn default() -> Self {
        Self {
            x_lower: vec![-2.0, -3.0],
            x_upper: vec![2.0, 3.0],
            u_lower: vec![-4.0],
            u_upper: vec![4.0],
        }
    }
}

impl Constraints {
    pub fn build(&self) -> Result<(BoxSet, BoxSet), CliError> {
        let x = BoxSet::constraint_set(self.x_lower.clone().into(), self.x_upper.clone().into())
            .map_err(|e| CliError::Config(format!("state constraints: {e}")))?;
        let u = BoxSet::constraint_set(self.u_lower.clone().into(), self.u_upper.clone().into())
            .map_err(|e| CliError::Config(format!("input constraints: {e}")))?;
        Ok((x, u))
    }
}

fn default_system() -> SystemSpec {
    SystemSpec::CartSpring {
        k0: 0.33,
        hd: 1.1,
        mass: 1.0,
        dt: 0.4,
    }
}

/// Plant, weights and constraints shared by most commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Problem {
    pub system: SystemSpec,
    pub weights: Weights,
    pub constraints: Constraints,
}

impl Default for Problem {
    fn default() -> Self {
        Self {
            system: default_system(),
            weights: Weights::default(),
            constraints: Constraints::default(),
        }
    }
}

impl Problem {
    pub fn validate(&self) -> Result<(), CliError> {
        let plant = self.system.build().map_err(|e| CliError::Config(format!("system: {e}")))?;
        let stage = self.weights.build().map_err(|e| CliError::Config(format!("weights: {e}")))?;
        let (x, u) = self.constraints.build()?;
        use cmpc::systems::DiscreteSystem;
        let (n, m) = (plant.state_dim(), plant.input_dim());
        if stage.state_dim() != n || stage.input_dim() != m || x.dim() != n || u.dim() != m {
            return Err(CliError::Config(format!(
                "dimension mismatch: system is {n} states / {m} inputs, Q is {}, R is {}, X is {}, U is {}",
                stage.state_dim(),
                stage.input_dim(),
                x.dim(),
                u.dim()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        cmpc::synthesis::grid(self.start, self.stop, self.step).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionConfig {
    pub b: f64,
    pub a: Vec<f64>,
    pub r: Vec<f64>,
    pub q: GridSpec,
    pub p: GridSpec,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self {
            b: 1.0,
            a: vec![0.5, 1.0, 2.0],
            r: vec![1.0, 0.0, -1.0],
            q: GridSpec {
                start: -1.0,
                stop: 5.0,
                step: 0.05,
            },
            p: GridSpec {
                start: -2.0,
                stop: 6.0,
                step: 0.05,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DareConfig {
    pub system: SystemSpec,
    pub weights: Weights,
    pub constraints: Constraints,
}

impl Default for DareConfig {
    fn default() -> Self {
        Self {
            system: default_system(),
            weights: Weights::default(),
            constraints: Constraints::default(),
        }
    }
}

fn default_samples() -> usize {
    10_000
}

/// CLF sampling settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyConfig {
    /// Level of the sampled region; sized automatically when absent.
    pub alpha: Option<f64>,
    pub samples: usize,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub system: SystemSpec,
    pub weights: Weights,
    pub constraints: Constraints,
    pub bmi: BmiOptions,
    pub certify: CertifyConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            system: default_system(),
            weights: Weights::default(),
            constraints: Constraints::default(),
            bmi: BmiOptions::default(),
            certify: CertifyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub seed: u64,
    pub system: SystemSpec,
    pub weights: Weights,
    pub constraints: Constraints,
    #[serde(rename = "P")]
    pub p: Rows,
    pub certify: CertifyConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            system: default_system(),
            weights: Weights::default(),
            constraints: Constraints::default(),
            p: benchmark_proposed_p(),
            certify: CertifyConfig::default(),
        }
    }
}

/// Which terminal weight the contractive controller uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposedSource {
    /// The matrix in `proposed_p`.
    Given,
    /// The BMI synthesis result.
    Synthesized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SizingConfig {
    pub rel_tol: f64,
    pub n_boundary: usize,
    /// When set, the conventional set must satisfy
    /// `V_f(f(x,u)) - V_f(x) + fraction·l(x,u) < 0` instead of plain decrease.
    pub conventional_stage_fraction: Option<f64>,
}

impl Default for SizingConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-4,
            n_boundary: 720,
            conventional_stage_fraction: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClosedLoopConfig {
    pub seed: u64,
    pub system: SystemSpec,
    pub weights: Weights,
    pub constraints: Constraints,
    pub x0: Vec<f64>,
    pub steps: usize,
    pub horizon: usize,
    pub proposed_source: ProposedSource,
    pub proposed_p: Rows,
    /// Terminal levels; sized automatically when absent.
    pub alpha_proposed: Option<f64>,
    pub alpha_conventional: Option<f64>,
    /// Contraction decrement; `1e-3·alpha_proposed` when absent.
    pub delta: Option<f64>,
    pub eps_term: f64,
    pub solver: SolverSettings,
    pub bmi: BmiOptions,
    pub sizing: SizingConfig,
}

impl Default for ClosedLoopConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            system: default_system(),
            weights: Weights::default(),
            constraints: Constraints::default(),
            x0: vec![-2.0, 1.0],
            steps: 125,
            horizon: 3,
            proposed_source: ProposedSource::Given,
            proposed_p: benchmark_proposed_p(),
            alpha_proposed: None,
            alpha_conventional: None,
            delta: None,
            eps_term: 1e-8,
            solver: SolverSettings::default(),
            bmi: BmiOptions::default(),
            sizing: SizingConfig::default(),
        }
    }
}

impl ClosedLoopConfig {
    pub fn mpc(&self, mode: MpcMode, alpha0: f64, delta: Option<f64>) -> MpcConfig {
        MpcConfig {
            horizon: self.horizon,
            delta,
            alpha0,
            eps_term: self.eps_term,
            mode,
            objective: None,
            solver: SolverSettings {
                seed: self.seed,
                ..self.solver.clone()
            },
        }
    }
}

/// Checks applied after parsing and before any computation.
pub trait Validate {
    fn validate(&self) -> Result<(), CliError>;
    fn set_seed(&mut self, _seed: u64) {}
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

fn check_level(name: &str, v: Option<f64>) -> Result<(), CliError> {
    v.map_or(Ok(()), |v| positive(name, v))
}

impl Validate for RegionConfig {
    fn validate(&self) -> Result<(), CliError> {
        if self.b == 0.0 || !self.b.is_finite() {
            return Err(CliError::Config("b must be nonzero".into()));
        }
        if self.a.is_empty() || self.r.is_empty() {
            return Err(CliError::Config("a and r lists must be non-empty".into()));
        }
        self.q.values()?;
        self.p.values()?;
        Ok(())
    }
}

impl DareConfig {
    pub fn problem(&self) -> Problem {
        Problem {
            system: self.system.clone(),
            weights: self.weights.clone(),
            constraints: self.constraints.clone(),
        }
    }
}

impl Validate for DareConfig {
    fn validate(&self) -> Result<(), CliError> {
        self.problem().validate()
    }
}

impl SynthConfig {
    pub fn problem(&self) -> Problem {
        Problem {
            system: self.system.clone(),
            weights: self.weights.clone(),
            constraints: self.constraints.clone(),
        }
    }
}

impl Validate for SynthConfig {
    fn validate(&self) -> Result<(), CliError> {
        self.problem().validate()?;
        check_level("certify.alpha", self.certify.alpha)?;
        positive("bmi.p_scale", self.bmi.p_scale)
    }

    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }
}

impl VerifyConfig {
    pub fn problem(&self) -> Problem {
        Problem {
            system: self.system.clone(),
            weights: self.weights.clone(),
            constraints: self.constraints.clone(),
        }
    }
}

impl Validate for VerifyConfig {
    fn validate(&self) -> Result<(), CliError> {
        self.problem().validate()?;
        check_level("certify.alpha", self.certify.alpha)?;
        let p = matrix("P", &self.p)?;
        let n = self.weights.q.len();
        if p.nrows() != n || p.ncols() != n {
            return Err(CliError::Config(format!("P must be {n}x{n}")));
        }
        Ok(())
    }

    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }
}

impl ClosedLoopConfig {
    pub fn problem(&self) -> Problem {
        Problem {
            system: self.system.clone(),
            weights: self.weights.clone(),
            constraints: self.constraints.clone(),
        }
    }
}

impl Validate for ClosedLoopConfig {
    fn validate(&self) -> Result<(), CliError> {
        self.problem().validate()?;
        let n = self.weights.q.len();
        if self.x0.len() != n {
            return Err(CliError::Config(format!("x0 must have {n} entries")));
        }
        if self.horizon == 0 {
            return Err(CliError::Config("horizon must be at least 1".into()));
        }
        let p = matrix("proposed_p", &self.proposed_p)?;
        if p.nrows() != n || p.ncols() != n {
            return Err(CliError::Config(format!("proposed_p must be {n}x{n}")));
        }
        check_level("alpha_proposed", self.alpha_proposed)?;
        check_level("alpha_conventional", self.alpha_conventional)?;
        check_level("delta", self.delta)?;
        positive("eps_term", self.eps_term)?;
        positive("sizing.rel_tol", self.sizing.rel_tol)?;
        if let Some(f) = self.sizing.conventional_stage_fraction {
            positive("sizing.conventional_stage_fraction", f)?;
        }
        Ok(())
    }

    fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }
}

/// Reads a config by extension (`.json`, anything else as TOML); a missing
/// path gives the defaults. An explicit seed overrides the file.
pub fn load<T>(path: Option<&Path>, seed: Option<u64>) -> Result<T, CliError>
where
    T: DeserializeOwned + Default + Validate,
{
    let mut cfg: T = match path {
        None => T::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            parse(&text, p.extension().is_some_and(|e| e == "json"))?
        }
    };
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse<T: DeserializeOwned>(text: &str, json: bool) -> Result<T, CliError> {
    if json {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    } else {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}
