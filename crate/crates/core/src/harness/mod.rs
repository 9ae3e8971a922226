//! Configuration-driven experiments: assemble a problem, a majorant and the
//! radius query, run the solver from a sweep of start points, and check
//! every bound against the traces and against sampled points.

mod checks;
mod config;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{problem_by_name, VectorFieldProblem};
use crate::geometry::Point;
use crate::majorant::{Majorant, MajorantKind, RadiusQuery, RadiusRecord, RadiusReport};
use crate::solver::{iterate, IterationTrace, SolverConfig, Termination};

pub use checks::{
    aggregate, check_convergence, check_linearization_error, check_majorant_condition, check_majorant_h,
    check_operator_bound, check_order, check_qfactor, check_region, check_residual_invariant, check_step_bound,
    estimate_order, linearization_error_vector, operator_bound_matrix, rate_margins, sample_ball, CheckReport,
    RateMargins, Sample, Status, TauGrid, DISTANCE_SLACK, OPERATOR_SLACK, ORDER_FLOOR, REGION_TOL, RESIDUAL_SLACK,
};
pub use config::{
    ExperimentConfig, MajorantSpec, MaxKeyword, OutputSpec, ProblemSpec, SampleSpec, SolverSpec, StartSpec,
    ThetaSpec, TraceFormat,
};

/// Check names accepted in configs, with one-line descriptions.
pub const CHECK_NAMES: &[(&str, &str)] = &[
    ("majorant-h", "f(0) = 0, f'(0) = -1 and f' strictly increasing on a grid"),
    ("majorant-condition", "derivative variation bounded by f'(d) - f'(tau d) over sampled p and tau"),
    ("operator-bound", "||DX(p)^-1 P DX(p*)|| <= 1/|f'(d)| over sampled p"),
    ("step-bound", "||DX(p)^-1 X(p)|| <= f(d)/f'(d) over sampled p"),
    ("linearization-error", "||DX(p*)^-1 E_X(p*, p)|| <= e_f(d, 0) over sampled p"),
    ("residual-invariant", "every accepted step has residual ratio <= theta"),
    ("qfactor", "per-step Q-factor bound and, for convex f', both rate bounds along traces"),
    ("convergence", "traces started inside the radius converge"),
    ("region", "exact Newton from sampled starts in 0.99 r reaches p*"),
    ("order", "estimated convergence order of each trace lies in [1.9, 2.1]"),
];

/// Everything the checks need about one problem/majorant pairing.
#[derive(Clone, Debug)]
pub struct Setup {
    pub problem: VectorFieldProblem,
    pub majorant: Majorant,
    pub vartheta: f64,
    pub query: RadiusQuery,
    pub radius: RadiusReport,
    /// Condition number of `∇X(p_*)`.
    pub cond_star: f64,
}

impl Setup {
    /// Computes `r` with `K = 1`, sets `K` to the spreading bound on that
    /// ball and recomputes `r`.
    pub fn new(problem: VectorFieldProblem, majorant: Majorant, vartheta: f64) -> Result<Self> {
        let g = problem.geometry();
        let ps = problem.require_singularity()?.clone();
        let kappa = problem.domain_radius();
        let r_inj = g.injectivity_radius(&ps);
        let first = majorant.convergence_radius(&RadiusQuery::new(vartheta, 1.0, kappa, r_inj))?;
        let k = g.spreading_constant(&ps, first.r)?;
        let query = RadiusQuery::new(vartheta, k, kappa, r_inj);
        let radius = majorant.convergence_radius(&query)?;
        let cond_star = problem.covariant_derivative(&ps)?.condition_number()?;
        Ok(Setup { problem, majorant, vartheta, query, radius, cond_star })
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let problem = problem_by_name(&cfg.problem.name, &cfg.problem.params)?;
        let majorant = cfg.majorant.build(&problem)?;
        Self::new(problem, majorant, cfg.solver.vartheta)
    }

    pub fn r(&self) -> f64 {
        self.radius.r
    }

    pub fn k(&self) -> f64 {
        self.query.k
    }

    pub fn singularity(&self) -> &Point {
        self.problem.singularity().expect("setups require a singularity")
    }

    pub fn theta_max(&self, d0: f64) -> Result<f64> {
        self.majorant.theta_max(self.cond_star, self.vartheta, d0)
    }

    pub fn record(&self, d0: Option<f64>) -> Result<RadiusRecord> {
        let theta = match d0 {
            Some(d) => Some(self.theta_max(d)?),
            None => None,
        };
        self.majorant.record(&self.query, theta)
    }

    /// Tolerance bounds for a start at `d0`: the general one, the stricter
    /// contraction variant and, for Hölder majorants, the stated closed form.
    pub fn tolerance_variants(&self, d0: f64) -> Result<ToleranceVariants> {
        let general = self.theta_max(d0)?;
        let contraction = self.majorant.theta_contraction_variant(self.cond_star, self.vartheta, d0)?;
        let holder_stated = match *self.majorant.kind() {
            MajorantKind::Holder { l, mu } => {
                let s = l * d0.powf(mu);
                Some(self.vartheta * (1.0 + s) / (1.0 - s) / self.cond_star)
            }
            _ => None,
        };
        Ok(ToleranceVariants { general, contraction, holder_stated })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ToleranceVariants {
    pub general: f64,
    pub contraction: f64,
    pub holder_stated: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StartPoint {
    pub id: String,
    /// Multiple of `r`, or `None` for explicit starts.
    pub fraction: Option<f64>,
    pub inside: bool,
    pub coords: Vec<f64>,
}

/// One solver run of a sweep.
#[derive(Clone, Debug)]
pub struct RunTrace {
    pub start: StartPoint,
    pub d0: f64,
    pub theta: f64,
    pub config: SolverConfig,
    pub trace: IterationTrace,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceSummary {
    pub id: String,
    pub fraction: Option<f64>,
    pub inside: bool,
    pub d0: f64,
    pub theta: f64,
    pub tolerance_variants: Option<ToleranceVariants>,
    pub termination: Termination,
    pub steps: usize,
    pub final_field_norm: f64,
    pub final_distance: Option<f64>,
    pub order: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub radius: RadiusRecord,
    pub runs: Vec<RunTrace>,
    pub summaries: Vec<TraceSummary>,
    pub checks: Vec<CheckReport>,
}

impl RunOutcome {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckReport::passed)
    }
}

fn start_points(setup: &Setup, cfg: &ExperimentConfig) -> Result<Vec<StartPoint>> {
    let g = setup.problem.geometry();
    let ps = setup.singularity();
    let mut out = Vec::new();
    let push_fraction = |frac: f64, inside: bool, out: &mut Vec<StartPoint>| -> Result<()> {
        for rep in 0..cfg.starts.per_fraction {
            let seed = cfg.seed.wrapping_add(1000 * out.len() as u64 + rep as u64);
            let p = g.sample_at_distance(ps, frac * setup.r(), seed)?;
            out.push(StartPoint {
                id: format!("{:03}", out.len()),
                fraction: Some(frac),
                inside,
                coords: p.to_vec(),
            });
        }
        Ok(())
    };
    for &f in &cfg.starts.fractions {
        push_fraction(f, true, &mut out)?;
    }
    for &f in &cfg.starts.outside {
        push_fraction(f, false, &mut out)?;
    }
    for xs in &cfg.starts.explicit {
        let p = g.point_from_slice(xs)?;
        let inside = g.distance(ps, &p)? < setup.r();
        out.push(StartPoint { id: format!("{:03}", out.len()), fraction: None, inside, coords: p.to_vec() });
    }
    Ok(out)
}

/// Runs the solver from every configured start point.
pub fn run_sweep(setup: &Setup, cfg: &ExperimentConfig) -> Result<Vec<RunTrace>> {
    let g = setup.problem.geometry();
    let ps = setup.singularity();
    let starts = start_points(setup, cfg)?;
    starts
        .into_par_iter()
        .map(|start| -> Result<RunTrace> {
            let p0 = g.point_from_slice(&start.coords)?;
            let d0 = g.distance(ps, &p0)?;
            let theta = match cfg.solver.theta {
                ThetaSpec::Value(t) => t,
                ThetaSpec::Max(_) if d0 < setup.majorant.radius_nu() => setup.theta_max(d0)?,
                ThetaSpec::Max(_) => 0.0,
            };
            let config = SolverConfig {
                theta,
                strategy: cfg.solver.strategy,
                stop_norm: cfg.solver.stop_norm,
                max_iterations: cfg.solver.max_iterations,
                divergence_radius: None,
            };
            config.validate()?;
            let trace = iterate(&setup.problem, &p0, &config);
            Ok(RunTrace { start, d0, theta, config, trace })
        })
        .collect()
}

fn summarize(setup: &Setup, run: &RunTrace) -> TraceSummary {
    let last = run.trace.last();
    TraceSummary {
        id: run.start.id.clone(),
        fraction: run.start.fraction,
        inside: run.start.inside,
        d0: run.d0,
        theta: run.theta,
        tolerance_variants: setup.tolerance_variants(run.d0).ok(),
        termination: run.trace.termination,
        steps: run.trace.steps(),
        final_field_norm: last.field_norm,
        final_distance: last.dist_to_pstar,
        order: estimate_order(&run.trace.distances()).ok(),
    }
}

/// Runs one named check against a setup and the sweep's traces.
pub fn run_check(name: &str, setup: &Setup, runs: &[RunTrace], cfg: &ExperimentConfig) -> Result<CheckReport> {
    let pr = &setup.problem;
    let f = &setup.majorant;
    let s = &cfg.samples;
    let r = setup.r();
    let operator_radius = setup.query.kappa.min(f.radius_nu()).min(setup.query.r_inj * 0.999);
    let inside: Vec<&IterationTrace> = runs.iter().filter(|t| t.start.inside).map(|t| &t.trace).collect();
    let taus = TauGrid { uniform: s.uniform_tau, random: s.random_tau };
    match name {
        "majorant-h" => Ok(check_majorant_h(f)),
        "majorant-condition" => check_majorant_condition(pr, f, r, s.count, taus, cfg.seed),
        "operator-bound" => check_operator_bound(pr, f, operator_radius, s.count, cfg.seed),
        "step-bound" => check_step_bound(pr, f, r, s.count, cfg.seed),
        "linearization-error" => check_linearization_error(pr, f, operator_radius, s.count, cfg.seed),
        "residual-invariant" => Ok(check_residual_invariant(&runs.iter().map(|t| (&t.trace, t.theta)).collect::<Vec<_>>())),
        "qfactor" => check_qfactor(&inside, f, setup.vartheta, setup.k()),
        "convergence" => Ok(check_convergence(&inside, cfg.solver.stop_norm)),
        "region" => check_region(pr, 0.99 * r, s.region_probes, Some(s.outside_probe * r), cfg.seed),
        "order" => Ok(check_order(&inside, 1.9, 2.1)),
        other => Err(Error::UnknownCheck(other.to_string())),
    }
}

/// Executes an experiment and writes `trace_<id>.csv` (or `.json`),
/// `traces.json`, `radius_report.json` and `checks.json` into the output
/// directory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let setup = Setup::from_config(cfg)?;
    let runs = run_sweep(&setup, cfg)?;
    let checks = cfg.checks.iter().map(|c| run_check(c, &setup, &runs, cfg)).collect::<Result<Vec<_>>>()?;
    let summaries = runs.iter().map(|r| summarize(&setup, r)).collect();
    let outcome = RunOutcome { radius: setup.record(None)?, runs, summaries, checks };
    write_outputs(&outcome, cfg, &cfg.output.dir)?;
    Ok(outcome)
}

#[derive(Serialize)]
struct JsonRecord {
    k: usize,
    field_norm: f64,
    residual_ratio: Option<f64>,
    step_norm: Option<f64>,
    dist_to_pstar: Option<f64>,
}

pub fn write_outputs(outcome: &RunOutcome, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for run in &outcome.runs {
        let stem = format!("trace_{}", run.start.id);
        match cfg.output.format {
            TraceFormat::Csv => fs::write(dir.join(format!("{stem}.csv")), run.trace.to_csv_string()?)?,
            TraceFormat::Json => {
                let recs: Vec<JsonRecord> = run
                    .trace
                    .records
                    .iter()
                    .map(|r| JsonRecord {
                        k: r.k,
                        field_norm: r.field_norm,
                        residual_ratio: r.residual_ratio,
                        step_norm: r.step_norm,
                        dist_to_pstar: r.dist_to_pstar,
                    })
                    .collect();
                fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&recs)?)?;
            }
        }
        fs::write(dir.join(format!("{stem}.meta.json")), run.trace.sidecar_json(&cfg.problem.name, &run.config)?)?;
    }
    fs::write(dir.join("traces.json"), serde_json::to_string_pretty(&outcome.summaries)?)?;
    fs::write(dir.join("radius_report.json"), serde_json::to_string_pretty(&outcome.radius)?)?;
    fs::write(dir.join("checks.json"), serde_json::to_string_pretty(&outcome.checks)?)?;
    Ok(())
}
