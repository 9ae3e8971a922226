use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{MajorantHint, ProblemParams, VectorFieldProblem};
use crate::majorant::Majorant;
use crate::solver::StepStrategy;

use super::CHECK_NAMES;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_id")]
    pub id: String,
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub majorant: MajorantSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub starts: StartSpec,
    #[serde(default)]
    pub samples: SampleSpec,
    #[serde(default = "default_checks")]
    pub checks: Vec<String>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_id() -> String {
    "experiment".into()
}

fn default_checks() -> Vec<String> {
    CHECK_NAMES.iter().map(|(n, _)| n.to_string()).filter(|n| n != "order").collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    #[serde(default)]
    pub params: ProblemParams,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MajorantSpec {
    #[default]
    FromHint,
    Lipschitz { l: f64 },
    Holder { l: f64, mu: f64 },
    Smale { gamma: f64 },
}

impl MajorantSpec {
    pub fn build(&self, problem: &VectorFieldProblem) -> Result<Majorant> {
        match *self {
            MajorantSpec::FromHint => {
                let hint = problem
                    .hint()
                    .ok_or_else(|| Error::Config(format!("problem `{}` has no majorant hint", problem.name())))?;
                Majorant::from_hint(hint)
            }
            MajorantSpec::Lipschitz { l } => Majorant::from_hint(&MajorantHint::Lipschitz { l }),
            MajorantSpec::Holder { l, mu } => Majorant::from_hint(&MajorantHint::Holder { l, mu }),
            MajorantSpec::Smale { gamma } => Majorant::from_hint(&MajorantHint::Smale { gamma }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxKeyword {
    #[serde(rename = "max")]
    Max,
}

/// A fixed tolerance or `"max"`, the largest admissible value for each start.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    Max(MaxKeyword),
    Value(f64),
}

impl Default for ThetaSpec {
    fn default() -> Self {
        ThetaSpec::Value(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default)]
    pub vartheta: f64,
    #[serde(default)]
    pub theta: ThetaSpec,
    #[serde(default = "default_strategy")]
    pub strategy: StepStrategy,
    #[serde(default = "default_stop_norm")]
    pub stop_norm: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_strategy() -> StepStrategy {
    StepStrategy::Exact
}

fn default_stop_norm() -> f64 {
    crate::solver::DEFAULT_STOP_NORM
}

fn default_max_iterations() -> usize {
    crate::solver::DEFAULT_MAX_ITERATIONS
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            vartheta: 0.0,
            theta: ThetaSpec::default(),
            strategy: default_strategy(),
            stop_norm: default_stop_norm(),
            max_iterations: default_max_iterations(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    /// Start distances as fractions of the convergence radius `r`.
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_per_fraction")]
    pub per_fraction: usize,
    /// Multiples of `r` probed without any assertion.
    #[serde(default)]
    pub outside: Vec<f64>,
    /// Explicit start points in ambient coordinates (row-major for matrices).
    #[serde(default)]
    pub explicit: Vec<Vec<f64>>,
}

fn default_fractions() -> Vec<f64> {
    vec![0.1, 0.5, 0.9, 0.99]
}

fn default_per_fraction() -> usize {
    1
}

impl Default for StartSpec {
    fn default() -> Self {
        StartSpec { fractions: default_fractions(), per_fraction: 1, outside: Vec::new(), explicit: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    #[serde(default = "default_sample_count")]
    pub count: usize,
    #[serde(default = "default_uniform_tau")]
    pub uniform_tau: usize,
    #[serde(default = "default_random_tau")]
    pub random_tau: usize,
    #[serde(default = "default_region_probes")]
    pub region_probes: usize,
    #[serde(default = "default_outside_probe")]
    pub outside_probe: f64,
}

fn default_sample_count() -> usize {
    500
}

fn default_uniform_tau() -> usize {
    21
}

fn default_random_tau() -> usize {
    10
}

fn default_region_probes() -> usize {
    200
}

fn default_outside_probe() -> f64 {
    1.5
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            count: default_sample_count(),
            uniform_tau: default_uniform_tau(),
            random_tau: default_random_tau(),
            region_probes: default_region_probes(),
            outside_probe: default_outside_probe(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: TraceFormat,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: default_out_dir(), format: TraceFormat::Csv }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// A config for `problem` with every default filled in.
    pub fn for_problem(name: &str) -> Self {
        ExperimentConfig {
            id: default_id(),
            seed: 0,
            problem: ProblemSpec { name: name.into(), params: ProblemParams::default() },
            majorant: MajorantSpec::FromHint,
            solver: SolverSpec::default(),
            starts: StartSpec::default(),
            samples: SampleSpec::default(),
            checks: default_checks(),
            output: OutputSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for f in self.starts.fractions.iter() {
            if !(*f > 0.0 && *f < 1.0) {
                return Err(Error::Config(format!("start fraction {f} must lie in (0, 1)")));
            }
        }
        for f in self.starts.outside.iter() {
            if !(*f > 0.0) {
                return Err(Error::Config(format!("outside multiple {f} must be positive")));
            }
        }
        if let ThetaSpec::Value(t) = self.solver.theta {
            if !(0.0..1.0).contains(&t) {
                return Err(Error::Config(format!("theta = {t} must lie in [0, 1)")));
            }
        }
        if !(self.solver.vartheta >= 0.0 && self.solver.vartheta < 1.0) {
            return Err(Error::Config(format!("vartheta = {} must lie in [0, 1)", self.solver.vartheta)));
        }
        if self.samples.uniform_tau == 1 {
            return Err(Error::Config("uniform_tau must be 0 or at least 2".into()));
        }
        for c in &self.checks {
            if !CHECK_NAMES.iter().any(|(n, _)| n == c) {
                return Err(Error::UnknownCheck(c.clone()));
            }
        }
        if !crate::fields::PROBLEM_NAMES.contains(&self.problem.name.as_str()) {
            return Err(Error::UnknownProblem(self.problem.name.clone()));
        }
        Ok(())
    }
}
