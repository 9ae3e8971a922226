//! Sampled and trace-based checks of the quantitative bounds.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fields::VectorFieldProblem;
use crate::geometry::Point;
use crate::linalg;
use crate::majorant::Majorant;
use crate::solver::{exact_step, iterate, IterationTrace, SolverConfig};

/// Slack on operator-norm inequalities.
pub const OPERATOR_SLACK: f64 = 1e-8;
/// Slack on distance inequalities.
pub const DISTANCE_SLACK: f64 = 1e-10;
/// Slack on the accepted-step residual ratio.
pub const RESIDUAL_SLACK: f64 = 1e-12;
/// Distances at or below this are excluded from order estimates.
pub const ORDER_FLOOR: f64 = 1e-14;
/// Final distance accepted as convergence to `p_*` in region probes.
pub const REGION_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub status: Status,
    /// Smallest `rhs + slack − lhs` seen; `None` when nothing was checked.
    pub worst_margin: Option<f64>,
    pub checked: usize,
    pub skipped: usize,
    /// Inputs attaining the worst margin (always present on failure).
    pub witness: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// One evaluated inequality: `margin ≥ 0` means it holds.
#[derive(Clone, Debug)]
pub struct Sample {
    pub margin: f64,
    pub witness: Value,
}

/// Folds per-sample outcomes into a report. `Ok(None)` counts as skipped and
/// an error counts as a failure whose witness is the error message.
pub fn aggregate(name: &str, outcomes: Vec<Result<Option<Sample>>>) -> CheckReport {
    let mut worst: Option<Sample> = None;
    let (mut checked, mut skipped) = (0, 0);
    for o in outcomes {
        let s = match o {
            Ok(Some(s)) => s,
            Ok(None) => {
                skipped += 1;
                continue;
            }
            Err(e) => Sample { margin: f64::NEG_INFINITY, witness: json!({ "error": e.to_string() }) },
        };
        checked += 1;
        let margin = if s.margin.is_nan() { f64::NEG_INFINITY } else { s.margin };
        if worst.as_ref().is_none_or(|w| margin < w.margin) {
            worst = Some(Sample { margin, witness: s.witness });
        }
    }
    let status = match &worst {
        Some(w) if w.margin < 0.0 => Status::Fail,
        _ => Status::Pass,
    };
    CheckReport {
        name: name.to_string(),
        status,
        worst_margin: worst.as_ref().map(|w| w.margin).filter(|m| m.is_finite()),
        checked,
        skipped,
        witness: worst.map(|w| w.witness),
        note: None,
    }
}

fn mix(seed: u64, stream: u64, i: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03) ^ i.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `n` points drawn uniformly (in normal coordinates) from `B_radius(p_*)`.
pub fn sample_ball(problem: &VectorFieldProblem, radius: f64, n: usize, seed: u64, stream: u64) -> Result<Vec<Point>> {
    let g = problem.geometry();
    let ps = problem.require_singularity()?;
    (0..n).map(|i| g.sample_in_ball(ps, radius, mix(seed, stream, i as u64))).collect()
}

/// Parameters `τ` for the majorant-condition check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TauGrid {
    pub uniform: usize,
    pub random: usize,
}

impl Default for TauGrid {
    fn default() -> Self {
        TauGrid { uniform: 21, random: 10 }
    }
}

impl TauGrid {
    pub fn values(&self, seed: u64) -> Vec<f64> {
        let mut taus: Vec<f64> = (0..self.uniform).map(|i| i as f64 / (self.uniform - 1) as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        taus.extend((0..self.random).map(|_| rng.random::<f64>()));
        taus
    }
}

fn majorant_condition_at(problem: &VectorFieldProblem, f: &Majorant, p: &Point, taus: &[f64]) -> Result<Option<Sample>> {
    let d = problem.distance_to_singularity(p)?.unwrap_or(0.0);
    if d >= f.domain_end() {
        return Ok(None);
    }
    let mut worst: Option<Sample> = None;
    for &tau in taus {
        let lhs = linalg::spectral_norm(&problem.derivative_variation(p, tau)?);
        let rhs = f.f_prime(d)? - f.f_prime(tau * d)?;
        let margin = rhs + OPERATOR_SLACK - lhs;
        if worst.as_ref().is_none_or(|w| margin < w.margin) {
            worst = Some(Sample { margin, witness: json!({ "point": p.to_vec(), "d": d, "tau": tau, "lhs": lhs, "rhs": rhs }) });
        }
    }
    Ok(worst)
}

/// `‖∇X(p_*)⁻¹[P_{1,0}∇X(p) − P_{τ,0}∇X(ζ(τ))P_{1,τ}]‖ ≤ f'(d) − f'(τd)` over
/// sampled `p ∈ B_radius(p_*)` and the τ grid.
pub fn check_majorant_condition(
    problem: &VectorFieldProblem,
    f: &Majorant,
    radius: f64,
    samples: usize,
    taus: TauGrid,
    seed: u64,
) -> Result<CheckReport> {
    let points = sample_ball(problem, radius, samples, seed, 1)?;
    let outcomes = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| majorant_condition_at(problem, f, p, &taus.values(mix(seed, 2, i as u64))))
        .collect();
    Ok(aggregate("majorant-condition", outcomes))
}

/// `∇X(p)⁻¹ P_{0,1} ∇X(p_*)` as a matrix from the frame at `p_*` to the
/// frame at `p`.
pub fn operator_bound_matrix(problem: &VectorFieldProblem, p: &Point) -> Result<DMatrix<f64>> {
    let g = problem.geometry();
    let ps = problem.require_singularity()?;
    let d_star = problem.covariant_derivative(ps)?;
    let d_p = problem.covariant_derivative(p)?;
    let n = d_star.frame().len();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let w = d_star.apply(&d_star.frame().vector(j))?;
        let s = d_p.solve(&g.transport(ps, p, &w)?)?;
        m.set_column(j, &d_p.frame().coords(&s)?);
    }
    Ok(m)
}

/// `‖∇X(p)⁻¹ P_{0,1} ∇X(p_*)‖ ≤ 1/|f'(d)|`; samples at or beyond `ν` are
/// skipped.
pub fn check_operator_bound(
    problem: &VectorFieldProblem,
    f: &Majorant,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    let points = sample_ball(problem, radius, samples, seed, 3)?;
    let nu = f.radius_nu();
    let outcomes = points
        .par_iter()
        .map(|p| -> Result<Option<Sample>> {
            let d = problem.distance_to_singularity(p)?.unwrap_or(0.0);
            if d >= nu {
                return Ok(None);
            }
            let rhs = 1.0 / f.f_prime(d)?.abs();
            let lhs = match operator_bound_matrix(problem, p) {
                Ok(m) => linalg::spectral_norm(&m),
                Err(Error::Singular { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            Ok(Some(Sample { margin: rhs + OPERATOR_SLACK - lhs, witness: json!({ "point": p.to_vec(), "d": d, "lhs": lhs, "rhs": rhs }) }))
        })
        .collect();
    Ok(aggregate("operator-bound", outcomes))
}

/// `‖∇X(p)⁻¹X(p)‖ ≤ f(d)/f'(d)`; samples at or beyond `ν` are skipped.
pub fn check_step_bound(problem: &VectorFieldProblem, f: &Majorant, radius: f64, samples: usize, seed: u64) -> Result<CheckReport> {
    let points = sample_ball(problem, radius, samples, seed, 4)?;
    let nu = f.radius_nu();
    let g = problem.geometry();
    let outcomes = points
        .par_iter()
        .map(|p| -> Result<Option<Sample>> {
            let d = problem.distance_to_singularity(p)?.unwrap_or(0.0);
            if d >= nu {
                return Ok(None);
            }
            let rhs = f.f(d)? / f.f_prime(d)?;
            let lhs = match exact_step(problem, p) {
                Ok(s) => g.norm(&s)?,
                Err(Error::Singular { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            Ok(Some(Sample { margin: rhs + OPERATOR_SLACK - lhs, witness: json!({ "point": p.to_vec(), "d": d, "lhs": lhs, "rhs": rhs }) }))
        })
        .collect();
    Ok(aggregate("step-bound", outcomes))
}

/// `E_X(p_*, p) = X(p_*) − P_{α,0,1}[X(p) + ∇X(p) log_p(p_*)]` as a tangent
/// vector at `p_*`.
pub fn linearization_error_vector(problem: &VectorFieldProblem, p: &Point) -> Result<crate::geometry::Tangent> {
    let g = problem.geometry();
    let ps = problem.require_singularity()?;
    let v = g.log(p, ps)?;
    let local = problem.eval(p)?.add(&problem.derivative_apply(p, &v)?)?;
    problem.eval(ps)?.sub(&g.transport(p, ps, &local)?)
}

/// `‖∇X(p_*)⁻¹E_X(p_*, p)‖ ≤ e_f(d, 0)`.
pub fn check_linearization_error(
    problem: &VectorFieldProblem,
    f: &Majorant,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    let points = sample_ball(problem, radius, samples, seed, 5)?;
    let ps = problem.require_singularity()?;
    let d_star = problem.covariant_derivative(ps)?;
    let g = problem.geometry();
    let outcomes = points
        .par_iter()
        .map(|p| -> Result<Option<Sample>> {
            let d = problem.distance_to_singularity(p)?.unwrap_or(0.0);
            if d >= f.domain_end() {
                return Ok(None);
            }
            let e = linearization_error_vector(problem, p)?;
            let lhs = g.norm(&d_star.solve(&e)?)?;
            let rhs = f.linearization_error(d, 0.0)?;
            Ok(Some(Sample { margin: rhs + OPERATOR_SLACK - lhs, witness: json!({ "point": p.to_vec(), "d": d, "lhs": lhs, "rhs": rhs }) }))
        })
        .collect();
    Ok(aggregate("linearization-error", outcomes))
}

/// Worst margins of the rate bounds along one trace.
#[derive(Clone, Debug, Default)]
pub struct RateMargins {
    /// `d_{k+1} ≤ q_factor(d_k)·d_k`.
    pub per_step: Vec<Sample>,
    /// `d_{k+1} ≤ K[(1+ϑ)|n_f(d0)|/d0²·d_k + ϑ]·d_k`, only under h3.
    pub quadratic: Vec<Sample>,
    /// `d_{k+1} ≤ K[(1+ϑ)|n_f(d0)|/d0 + ϑ]·d_k`, only under h3.
    pub linear: Vec<Sample>,
    pub skipped: usize,
}

pub fn rate_margins(trace: &IterationTrace, f: &Majorant, vartheta: f64, k: f64, with_h3: bool) -> Result<RateMargins> {
    let d = trace.distances();
    let mut out = RateMargins::default();
    let Some(&d0) = d.first() else {
        return Ok(out);
    };
    let nu = f.radius_nu();
    for (i, w) in d.windows(2).enumerate() {
        let (dk, dn) = (w[0], w[1]);
        if dk == 0.0 {
            continue;
        }
        if dk >= nu {
            out.skipped += 1;
            continue;
        }
        let q = f.q_factor(vartheta, k, dk)?;
        let wit = |bound: f64| json!({ "k": i, "d_k": dk, "d_next": dn, "d0": d0, "bound": bound });
        out.per_step.push(Sample { margin: q * dk + DISTANCE_SLACK - dn, witness: wit(q * dk) });
        if with_h3 && d0 > 0.0 && d0 < nu {
            let quad = f.quadratic_rate_factor(vartheta, k, d0, dk)? * dk;
            out.quadratic.push(Sample { margin: quad + DISTANCE_SLACK - dn, witness: wit(quad) });
            let lin = f.linear_rate_factor(vartheta, k, d0)? * dk;
            out.linear.push(Sample { margin: lin + DISTANCE_SLACK - dn, witness: wit(lin) });
        }
    }
    Ok(out)
}

/// The per-step Q-factor bound and, when `f'` is convex, both rate bounds
/// measured from the start distance, over every consecutive pair.
pub fn check_qfactor(traces: &[&IterationTrace], f: &Majorant, vartheta: f64, k: f64) -> Result<CheckReport> {
    let h3 = f.check_h_conditions().h3.pass;
    let mut outcomes = Vec::new();
    let mut skipped = 0;
    for (t, tr) in traces.iter().enumerate() {
        let m = rate_margins(tr, f, vartheta, k, h3)?;
        skipped += m.skipped;
        for (label, samples) in [("per-step", m.per_step), ("quadratic", m.quadratic), ("linear", m.linear)] {
            for mut s in samples {
                s.witness["bound_kind"] = json!(label);
                s.witness["trace"] = json!(t);
                outcomes.push(Ok(Some(s)));
            }
        }
    }
    let mut rep = aggregate("qfactor", outcomes);
    rep.skipped += skipped;
    Ok(rep.with_note(if h3 { "per-step, quadratic and linear bounds" } else { "per-step bound only (f' not convex)" }))
}

/// Every accepted step satisfies `‖X + ∇X S‖ ≤ (θ + 1e-12)‖X‖`.
pub fn check_residual_invariant(traces: &[(&IterationTrace, f64)]) -> CheckReport {
    let mut outcomes = Vec::new();
    for (t, (tr, theta)) in traces.iter().enumerate() {
        for r in &tr.records {
            if let Some(ratio) = r.residual_ratio {
                outcomes.push(Ok(Some(Sample {
                    margin: theta + RESIDUAL_SLACK - ratio,
                    witness: json!({ "trace": t, "k": r.k, "ratio": ratio, "theta": theta }),
                })));
            }
        }
    }
    aggregate("residual-invariant", outcomes)
}

/// Traces started inside the radius end converged within the iteration
/// budget.
pub fn check_convergence(traces: &[&IterationTrace], stop_norm: f64) -> CheckReport {
    let outcomes = traces
        .iter()
        .enumerate()
        .map(|(t, tr)| {
            let last = tr.final_field_norm();
            let margin = if tr.converged() { stop_norm - last } else { f64::NEG_INFINITY };
            Ok(Some(Sample {
                margin,
                witness: json!({ "trace": t, "termination": tr.termination, "final_field_norm": last, "steps": tr.steps() }),
            }))
        })
        .collect();
    aggregate("convergence", outcomes)
}

/// Least-squares slope of `log d_{k+1}` against `log d_k` over the last
/// four distances above `1e-14`.
pub fn estimate_order(distances: &[f64]) -> Result<f64> {
    let usable: Vec<f64> = distances.iter().copied().filter(|&d| d > ORDER_FLOOR && d.is_finite()).collect();
    if usable.len() < 4 {
        return Err(Error::InsufficientData(format!("{} usable distances, need 4", usable.len())));
    }
    let tail = &usable[usable.len() - 4..];
    let xs: Vec<f64> = tail[..3].iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = tail[1..].iter().map(|d| d.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("distances do not vary".into()));
    }
    Ok(sxy / sxx)
}

/// Estimated order within `[lo, hi]` for every trace.
pub fn check_order(traces: &[&IterationTrace], lo: f64, hi: f64) -> CheckReport {
    let outcomes = traces
        .iter()
        .enumerate()
        .map(|(t, tr)| {
            let d = tr.distances();
            let order = estimate_order(&d)?;
            Ok(Some(Sample {
                margin: (order - lo).min(hi - order),
                witness: json!({ "trace": t, "order": order, "distances": d }),
            }))
        })
        .collect();
    aggregate("order", outcomes)
}

/// h1 and h2 on the majorant grid; h3 is reported in the note.
pub fn check_majorant_h(f: &Majorant) -> CheckReport {
    let h = f.check_h_conditions();
    let outcomes = [("h1", h.h1), ("h2", h.h2)]
        .into_iter()
        .map(|(name, v)| {
            Ok(Some(Sample {
                margin: if v.pass { 0.0 } else { -1.0 },
                witness: json!({ "condition": name, "t": v.witness }),
            }))
        })
        .collect();
    aggregate("majorant-h", outcomes).with_note(format!("h3 (convex derivative): {}", h.h3.pass))
}

/// Exact Newton from sampled starts in `B_radius(p_*)` must reach `p_*`;
/// starts at distance `outside` are only counted.
pub fn check_region(
    problem: &VectorFieldProblem,
    radius: f64,
    samples: usize,
    outside: Option<f64>,
    seed: u64,
) -> Result<CheckReport> {
    let cfg = SolverConfig::exact();
    let g = problem.geometry();
    let ps = problem.require_singularity()?;
    let probe = |p: &Point| -> Result<Option<Sample>> {
        let tr = iterate(problem, p, &cfg);
        let d_end = tr.last().dist_to_pstar.unwrap_or(f64::NAN);
        let margin = if tr.converged() { REGION_TOL - d_end } else { f64::NEG_INFINITY };
        Ok(Some(Sample {
            margin,
            witness: json!({ "start": p.to_vec(), "d0": g.distance(ps, p)?, "termination": tr.termination, "final_distance": d_end }),
        }))
    };
    let points = sample_ball(problem, radius, samples, seed, 6)?;
    let outcomes = points.par_iter().map(probe).collect();
    let mut rep = aggregate("region", outcomes);
    if let Some(out_r) = outside.filter(|&r| r < g.injectivity_radius(ps) && r < problem.domain_radius()) {
        let outer = (0..samples)
            .map(|i| g.sample_at_distance(ps, out_r, mix(seed, 7, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        let hits: usize = outer
            .par_iter()
            .map(|p| match probe(p) {
                Ok(Some(s)) if s.margin >= 0.0 => 1,
                _ => 0,
            })
            .sum();
        rep = rep.with_note(format!("outside probe radius {out_r:.6e}: {hits}/{samples} converged to p_* (not asserted)"));
    }
    Ok(rep)
}
