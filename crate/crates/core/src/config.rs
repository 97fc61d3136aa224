//! Experiment configuration read from TOML.
//!
//! Every section is optional except `[problem]`. Missing per-problem values
//! (decomposition counts, grids, `n`) are filled by [`RunConfig::resolve`];
//! the resolved form is what gets echoed next to results.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::basis::Activation;
use crate::error::{Error, Result};
use crate::krylov::{SolveConfig, SolverKind};
use crate::reduction::Threshold;
use crate::schwarz::PreconditionerKind;

/// Environment variable overriding `run.output_dir`.
pub const OUTPUT_DIR_ENV: &str = "RANN_DD_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Example1,
    Example2,
    Example3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// Frequency count of example 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<usize>>,
    #[serde(default = "default_overlap")]
    pub overlap: f64,
}

fn default_overlap() -> f64 {
    2.0
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        Self {
            counts: None,
            overlap: default_overlap(),
        }
    }
}

/// PCA threshold: `"off"` or a nonnegative number.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Tau {
    #[default]
    Off,
    Value(f64),
}

impl Serialize for Tau {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Tau::Off => s.serialize_str("off"),
            Tau::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Tau {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Tau::Value(v)),
            Raw::Int(v) => Ok(Tau::Value(v as f64)),
            Raw::Text(t) if t.eq_ignore_ascii_case("off") => Ok(Tau::Off),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("tau must be \"off\" or a number, got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    #[serde(default = "default_neurons")]
    pub neurons: usize,
    #[serde(default)]
    pub activation: Activation,
    /// Seed of the first repetition; repetition `r` uses `seed + r`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tau: Tau,
    /// Interpret `tau` relative to the largest singular value.
    #[serde(default)]
    pub relative_tau: bool,
}

fn default_neurons() -> usize {
    16
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            neurons: default_neurons(),
            activation: Activation::default(),
            seed: 0,
            tau: Tau::Off,
            relative_tau: false,
        }
    }
}

impl BasisConfig {
    pub fn threshold(&self) -> Threshold {
        match (self.tau, self.relative_tau) {
            (Tau::Off, _) => Threshold::Off,
            (Tau::Value(t), false) => Threshold::Absolute(t),
            (Tau::Value(t), true) => Threshold::Relative(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collocation: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<Vec<usize>>,
    /// Nodes per axis of the finite-difference reference (example 2).
    #[serde(default = "default_reference_resolution")]
    pub reference_resolution: usize,
}

fn default_reference_resolution() -> usize {
    2001
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            collocation: None,
            test: None,
            reference_resolution: default_reference_resolution(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub solver: SolverKind,
    #[serde(default)]
    pub preconditioner: PreconditionerKind,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restart: Option<usize>,
}

fn default_rel_tol() -> f64 {
    1e-5
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            solver: SolverKind::default(),
            preconditioner: PreconditionerKind::default(),
            rel_tol: default_rel_tol(),
            max_iter: None,
            restart: None,
        }
    }
}

impl SolverConfig {
    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            rel_tol: self.rel_tol,
            max_iter: self.max_iter,
            restart: self.restart,
            ..SolveConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Compute dense condition-number estimates (limited by `dense_limit`).
    #[serde(default)]
    pub condition: bool,
    #[serde(default = "default_dense_limit")]
    pub dense_limit: usize,
}

fn default_seeds() -> usize {
    10
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_dense_limit() -> usize {
    crate::krylov::DEFAULT_DENSE_LIMIT
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seeds: default_seeds(),
            output_dir: default_output_dir(),
            condition: false,
            dense_limit: default_dense_limit(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
}

fn default_taus() -> Vec<f64> {
    vec![1e-4, 1e-3, 1e-2, 1e-1]
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { taus: default_taus() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    #[serde(default = "default_levels")]
    pub levels: Vec<u32>,
    #[serde(default = "default_scaling_preconditioners")]
    pub preconditioners: Vec<PreconditionerKind>,
    /// GMRES restart used for the unpreconditioned rows.
    #[serde(default = "default_baseline_restart", skip_serializing_if = "Option::is_none")]
    pub baseline_restart: Option<usize>,
    /// Seeds for the unpreconditioned rows; `None` uses `run.seeds`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_seeds: Option<usize>,
    #[serde(default = "default_neurons_scaling")]
    pub neurons: usize,
    #[serde(default = "default_scaling_tau")]
    pub tau: f64,
}

pub const SCALING_LEVEL_CAP: u32 = 4;

fn default_levels() -> Vec<u32> {
    vec![2, 3, 4]
}

fn default_scaling_preconditioners() -> Vec<PreconditionerKind> {
    vec![PreconditionerKind::None, PreconditionerKind::As, PreconditionerKind::Sas]
}

fn default_baseline_restart() -> Option<usize> {
    Some(20)
}

fn default_neurons_scaling() -> usize {
    32
}

fn default_scaling_tau() -> f64 {
    1e-3
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            levels: default_levels(),
            preconditioners: default_scaling_preconditioners(),
            baseline_restart: default_baseline_restart(),
            baseline_seeds: None,
            neurons: default_neurons_scaling(),
            tau: default_scaling_tau(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub decomposition: DecompositionConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub grids: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub run: RunOptions,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub scaling: ScalingConfig,
}

impl RunConfig {
    pub fn for_problem(kind: ProblemKind) -> Self {
        Self {
            problem: ProblemConfig { kind, n: None },
            decomposition: DecompositionConfig::default(),
            basis: BasisConfig::default(),
            grids: GridConfig::default(),
            solver: SolverConfig::default(),
            run: RunOptions::default(),
            sweep: SweepConfig::default(),
            scaling: ScalingConfig::default(),
        }
        .resolve()
        .expect("defaults are valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.resolve()
    }

    /// Reads a config file and applies the output-directory environment
    /// override.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            cfg.run.output_dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn dim(&self) -> usize {
        match self.problem.kind {
            ProblemKind::Example3 => 3,
            _ => 2,
        }
    }

    /// Fills per-problem defaults and validates.
    pub fn resolve(mut self) -> Result<Self> {
        let d = self.dim();
        let (counts, colloc, test) = match self.problem.kind {
            ProblemKind::Example1 => (vec![4, 4], vec![40, 40], vec![350, 350]),
            ProblemKind::Example2 => (vec![4, 4], vec![160, 160], vec![200, 200]),
            ProblemKind::Example3 => (vec![2, 2, 2], vec![20, 20, 20], vec![50, 50, 50]),
        };
        match self.problem.kind {
            ProblemKind::Example1 => {
                self.problem.n.get_or_insert(2);
            }
            _ if self.problem.n.is_some() => {
                return Err(Error::Config("problem.n only applies to example1".into()));
            }
            _ => {}
        }
        self.decomposition.counts.get_or_insert(counts);
        self.grids.collocation.get_or_insert(colloc);
        self.grids.test.get_or_insert(test);
        let check = |name: &str, v: &Vec<usize>| -> Result<()> {
            if v.len() != d || v.contains(&0) {
                return Err(Error::Config(format!("{name} needs {d} positive entries, got {v:?}")));
            }
            Ok(())
        };
        check("decomposition.counts", self.decomposition.counts.as_ref().unwrap())?;
        check("grids.collocation", self.grids.collocation.as_ref().unwrap())?;
        check("grids.test", self.grids.test.as_ref().unwrap())?;
        if !(self.decomposition.overlap > 1.0) {
            return Err(Error::Config(format!("overlap must exceed 1, got {}", self.decomposition.overlap)));
        }
        if self.basis.neurons == 0 {
            return Err(Error::Config("basis.neurons must be positive".into()));
        }
        if let Tau::Value(t) = self.basis.tau {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::Config(format!("tau must be nonnegative, got {t}")));
            }
        }
        if !(self.solver.rel_tol > 0.0) {
            return Err(Error::Config("solver.rel_tol must be positive".into()));
        }
        if self.solver.max_iter == Some(0) || self.solver.restart == Some(0) {
            return Err(Error::Config("solver.max_iter and solver.restart must be at least 1".into()));
        }
        if self.run.seeds == 0 {
            return Err(Error::Config("run.seeds must be at least 1".into()));
        }
        if self.grids.reference_resolution < 501 {
            return Err(Error::Config("grids.reference_resolution must be at least 501".into()));
        }
        if self.sweep.taus.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::Config("sweep.taus must be nonnegative".into()));
        }
        Ok(self)
    }

    pub fn counts(&self) -> &[usize] {
        self.decomposition.counts.as_deref().unwrap_or(&[])
    }

    pub fn collocation(&self) -> &[usize] {
        self.grids.collocation.as_deref().unwrap_or(&[])
    }

    pub fn test_grid(&self) -> &[usize] {
        self.grids.test.as_deref().unwrap_or(&[])
    }
}
