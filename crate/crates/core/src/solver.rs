//! Inexact Newton iteration `p_{k+1} = exp_{p_k}(S_k)` with the relative
//! residual test `‖X(p_k) + ∇X(p_k)S_k‖ ≤ θ‖X(p_k)‖`.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{TangentOperator, VectorFieldProblem};
use crate::geometry::{Point, Tangent};

pub const DEFAULT_STOP_NORM: f64 = 1e-13;
pub const DEFAULT_MAX_ITERATIONS: usize = 100;
/// Fraction of `θ‖X(p)‖` that the adversarial step's residual is placed at.
pub const ADVERSARIAL_FRACTION: f64 = 0.999;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerKind {
    /// Conjugate gradients on the normal equations.
    Cgne,
    /// Richardson iteration on the normal equations with step `1/‖M‖²`.
    Richardson,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepStrategy {
    Exact,
    Truncated { max_inner: usize, inner: InnerKind },
    Adversarial { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub theta: f64,
    pub strategy: StepStrategy,
    pub stop_norm: f64,
    pub max_iterations: usize,
    /// Abort once `d(p0, p_k)` exceeds this; defaults to `10κ`.
    pub divergence_radius: Option<f64>,
}

impl SolverConfig {
    pub fn new(theta: f64, strategy: StepStrategy) -> Result<Self> {
        let cfg = SolverConfig {
            theta,
            strategy,
            stop_norm: DEFAULT_STOP_NORM,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            divergence_radius: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn exact() -> Self {
        Self::new(0.0, StepStrategy::Exact).expect("valid default")
    }

    pub fn with_stop_norm(mut self, stop_norm: f64) -> Self {
        self.stop_norm = stop_norm;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn with_divergence_radius(mut self, r: f64) -> Self {
        self.divergence_radius = Some(r);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.theta) {
            return Err(Error::invalid(format!("theta = {} must lie in [0, 1)", self.theta)));
        }
        if !(self.stop_norm > 0.0) {
            return Err(Error::invalid("stop norm must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max iterations must be positive"));
        }
        if let Some(r) = self.divergence_radius {
            if !(r > 0.0) {
                return Err(Error::invalid("divergence radius must be positive"));
            }
        }
        if let StepStrategy::Truncated { max_inner: 0, .. } = self.strategy {
            return Err(Error::invalid("truncated strategy needs max_inner >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIterations,
    Diverged,
    SingularDerivative,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub step: Tangent,
    pub residual_ratio: f64,
    pub inner_iterations: usize,
    /// The inner solver broke down or ran out of iterations.
    pub fell_back: bool,
}

#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub k: usize,
    pub point: Point,
    pub field_norm: f64,
    /// `None` on the final record.
    pub step: Option<Tangent>,
    pub step_norm: Option<f64>,
    pub residual_ratio: Option<f64>,
    pub dist_to_pstar: Option<f64>,
    pub inner_iterations: usize,
    pub fell_back: bool,
}

#[derive(Clone, Debug)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
}

#[derive(Serialize)]
struct TraceSidecar<'a> {
    problem: &'a str,
    start: Vec<f64>,
    config: &'a SolverConfig,
    termination: Termination,
    iterations: usize,
    final_field_norm: f64,
    final_dist_to_pstar: Option<f64>,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

impl IterationTrace {
    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("traces are nonempty")
    }

    pub fn final_field_norm(&self) -> f64 {
        self.last().field_norm
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    /// Number of Newton steps taken.
    pub fn steps(&self) -> usize {
        self.records.iter().filter(|r| r.step.is_some()).count()
    }

    /// `d(p_*, p_k)` for every record; empty when the singularity is unknown.
    pub fn distances(&self) -> Vec<f64> {
        self.records.iter().map_while(|r| r.dist_to_pstar).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "field_norm", "residual_ratio", "step_norm", "dist_to_pstar"])?;
        for r in &self.records {
            w.write_record([
                r.k.to_string(),
                format!("{:e}", r.field_norm),
                fmt_opt(r.residual_ratio),
                fmt_opt(r.step_norm),
                fmt_opt(r.dist_to_pstar),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn sidecar_json(&self, problem: &str, config: &SolverConfig) -> Result<String> {
        let last = self.last();
        let side = TraceSidecar {
            problem,
            start: self.records[0].point.to_vec(),
            config,
            termination: self.termination,
            iterations: self.steps(),
            final_field_norm: last.field_norm,
            final_dist_to_pstar: last.dist_to_pstar,
        };
        Ok(serde_json::to_string_pretty(&side)?)
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str, problem: &str, config: &SolverConfig) -> Result<()> {
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv_string()?)?;
        std::fs::write(dir.join(format!("{stem}.json")), self.sidecar_json(problem, config)?)?;
        Ok(())
    }
}

/// `‖X(p) + ∇X(p)S‖` in the metric at `p`, evaluated in ambient coordinates.
pub fn residual(problem: &VectorFieldProblem, p: &Point, s: &Tangent) -> Result<f64> {
    let x = problem.eval(p)?;
    let js = problem.derivative_apply(p, s)?;
    problem.geometry().norm(&x.add(&js)?)
}

/// `S = −∇X(p)⁻¹X(p)`.
pub fn exact_step(problem: &VectorFieldProblem, p: &Point) -> Result<Tangent> {
    let op = problem.covariant_derivative(p)?;
    let x = problem.eval(p)?;
    op.solve(&x.scaled(-1.0))
}

fn coordinate_residual(m: &nalgebra::DMatrix<f64>, x: &DVector<f64>, s: &DVector<f64>) -> f64 {
    (x + m * s).norm()
}

/// Runs the inner solver on `M s = −x` until `‖x + M s‖ ≤ θ‖x‖`; `None` on
/// breakdown or exhaustion.
fn truncated_solve(
    m: &nalgebra::DMatrix<f64>,
    x: &DVector<f64>,
    theta: f64,
    max_inner: usize,
    inner: InnerKind,
) -> (Option<DVector<f64>>, usize) {
    let n = x.len();
    let target = theta * x.norm();
    let b = -x;
    let mut s = DVector::zeros(n);
    match inner {
        InnerKind::Cgne => {
            let mut r = b.clone();
            let mut z = m.transpose() * &r;
            let mut dir = z.clone();
            let mut zz = z.norm_squared();
            for it in 1..=max_inner {
                let q = m * &dir;
                let qq = q.norm_squared();
                if !(qq > 0.0) || !(zz > 0.0) {
                    return (None, it - 1);
                }
                let alpha = zz / qq;
                s += &dir * alpha;
                r -= &q * alpha;
                if r.norm() <= target {
                    return (Some(s), it);
                }
                z = m.transpose() * &r;
                let zz_new = z.norm_squared();
                dir = &z + &dir * (zz_new / zz);
                zz = zz_new;
            }
            (None, max_inner)
        }
        InnerKind::Richardson => {
            let norm = crate::linalg::spectral_norm(m);
            if !(norm > 0.0) {
                return (None, 0);
            }
            let omega = 1.0 / (norm * norm);
            for it in 1..=max_inner {
                let r = &b - m * &s;
                s += m.transpose() * r * omega;
                if coordinate_residual(m, x, &s) <= target {
                    return (Some(s), it);
                }
                if !s.iter().all(|v| v.is_finite()) {
                    return (None, it);
                }
            }
            (None, max_inner)
        }
    }
}

fn unit_direction(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let w = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let nw: f64 = w.norm();
        if nw > 1e-8 {
            return w / nw;
        }
    }
}

/// Adds `t·w` to the exact step so that the residual is `0.999·θ‖X(p)‖`.
fn adversarial_solve(
    op: &TangentOperator,
    x: &DVector<f64>,
    theta: f64,
    seed: u64,
) -> Result<DVector<f64>> {
    let m = op.matrix();
    let n = x.len();
    let exact = crate::linalg::solve_certified(m, &(-x))?;
    let r0 = x + m * &exact;
    let target = ADVERSARIAL_FRACTION * theta * x.norm() * (1.0 - 1e-12);
    if !(target > r0.norm()) {
        return Ok(exact);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..64 {
        let w = unit_direction(n, &mut rng);
        let u = m * &w;
        let uu = u.norm_squared();
        if uu.sqrt() < 1e-14 {
            continue;
        }
        // ‖r0 + t u‖² = target²
        let ru = r0.dot(&u);
        let disc = ru * ru - uu * (r0.norm_squared() - target * target);
        let t = (-ru + disc.max(0.0).sqrt()) / uu;
        return Ok(exact + w * t);
    }
    Err(Error::Singular { ratio: 0.0 })
}

/// A step in the admissible family for tolerance `θ`. With `θ = 0` every
/// strategy returns the exact Newton step.
pub fn inexact_step(
    problem: &VectorFieldProblem,
    p: &Point,
    theta: f64,
    strategy: &StepStrategy,
    seed: u64,
) -> Result<StepOutcome> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::invalid(format!("theta = {theta} must lie in [0, 1)")));
    }
    let op = problem.covariant_derivative(p)?;
    let frame = op.frame();
    let xt = problem.eval(p)?;
    let x = frame.coords(&xt)?;
    let xn = x.norm();
    let exact = |fell_back: bool, inner: usize| -> Result<(DVector<f64>, bool, usize)> {
        Ok((crate::linalg::solve_certified(op.matrix(), &(-&x))?, fell_back, inner))
    };
    let (s, fell_back, inner_iterations) = if theta == 0.0 || xn == 0.0 {
        exact(false, 0)?
    } else {
        match *strategy {
            StepStrategy::Exact => exact(false, 0)?,
            StepStrategy::Truncated { max_inner, inner } => match truncated_solve(op.matrix(), &x, theta, max_inner, inner) {
                (Some(s), it) => (s, false, it),
                (None, it) => exact(true, it)?,
            },
            StepStrategy::Adversarial { seed: direction_seed } => {
                (adversarial_solve(&op, &x, theta, direction_seed ^ seed)?, false, 0)
            }
        }
    };
    let step = frame.from_coords(&s);
    let residual_ratio = if xn == 0.0 { 0.0 } else { residual(problem, p, &step)? / problem.geometry().norm(&xt)? };
    Ok(StepOutcome { step, residual_ratio, inner_iterations, fell_back })
}

fn iteration_seed(k: usize) -> u64 {
    (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs the inexact Newton iteration from `p0`. Failure modes are reported
/// through [`Termination`].
pub fn iterate(problem: &VectorFieldProblem, p0: &Point, config: &SolverConfig) -> IterationTrace {
    let g = problem.geometry();
    let div_radius = config.divergence_radius.unwrap_or(10.0 * problem.domain_radius());
    let mut records = Vec::new();
    let mut p = p0.clone();
    let dist = |p: &Point| problem.distance_to_singularity(p).ok().flatten();
    let bare = |k: usize, p: &Point, field_norm: f64| IterationRecord {
        k,
        point: p.clone(),
        field_norm,
        step: None,
        step_norm: None,
        residual_ratio: None,
        dist_to_pstar: dist(p),
        inner_iterations: 0,
        fell_back: false,
    };
    for k in 0.. {
        let xn = match problem.eval(&p).and_then(|x| g.norm(&x)) {
            Ok(v) if v.is_finite() => v,
            _ => {
                records.push(bare(k, &p, f64::NAN));
                return IterationTrace { records, termination: Termination::Diverged };
            }
        };
        if xn <= config.stop_norm {
            records.push(bare(k, &p, xn));
            return IterationTrace { records, termination: Termination::Converged };
        }
        let escaped = g.distance(p0, &p).map_or(true, |d| !(d <= div_radius));
        if escaped {
            records.push(bare(k, &p, xn));
            return IterationTrace { records, termination: Termination::Diverged };
        }
        if k >= config.max_iterations {
            records.push(bare(k, &p, xn));
            return IterationTrace { records, termination: Termination::MaxIterations };
        }
        let out = match inexact_step(problem, &p, config.theta, &config.strategy, iteration_seed(k)) {
            Ok(o) => o,
            Err(Error::Singular { .. }) => {
                records.push(bare(k, &p, xn));
                return IterationTrace { records, termination: Termination::SingularDerivative };
            }
            Err(_) => {
                records.push(bare(k, &p, xn));
                return IterationTrace { records, termination: Termination::Diverged };
            }
        };
        let next = g.exp(&p, &out.step);
        let mut rec = bare(k, &p, xn);
        rec.step_norm = g.norm(&out.step).ok();
        rec.residual_ratio = Some(out.residual_ratio);
        rec.inner_iterations = out.inner_iterations;
        rec.fell_back = out.fell_back;
        rec.step = Some(out.step);
        records.push(rec);
        match next {
            Ok(q) if q.coords().iter().all(|v| v.is_finite()) => p = q,
            _ => {
                records.push(bare(k + 1, &p, f64::NAN));
                return IterationTrace { records, termination: Termination::Diverged };
            }
        }
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{linear_problem, problem_by_name, scalar_analytic_problem, ProblemParams, ScalarKind};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn rayleigh() -> VectorFieldProblem {
        problem_by_name("rayleigh-3d", &ProblemParams::default()).unwrap()
    }

    fn scalar_point(pr: &VectorFieldProblem, x: f64) -> Point {
        pr.geometry().point_from_slice(&[x]).unwrap()
    }

    #[test]
    fn residual_examples() {
        let pr = rayleigh();
        let p = pr.geometry().sample_at_distance(pr.singularity().unwrap(), 0.3, 3).unwrap();
        let xn = pr.geometry().norm(&pr.eval(&p).unwrap()).unwrap();
        let s = exact_step(&pr, &p).unwrap();
        assert!(residual(&pr, &p, &s).unwrap() <= 1e-10 * xn);
        let zero = pr.geometry().zero(&p);
        assert_relative_eq!(residual(&pr, &p, &zero).unwrap(), xn, epsilon = 1e-15);
    }

    #[test]
    fn residual_matches_coordinate_form() {
        let pr = rayleigh();
        let g = pr.geometry();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for seed in 0..50 {
            let p = g.sample_in_ball(pr.singularity().unwrap(), 1.0, seed).unwrap();
            let op = pr.covariant_derivative(&p).unwrap();
            let x = op.frame().coords(&pr.eval(&p).unwrap()).unwrap();
            let s = unit_direction(2, &mut rng) * 0.7;
            let direct = residual(&pr, &p, &op.frame().from_coords(&s)).unwrap();
            assert_relative_eq!(direct, coordinate_residual(op.matrix(), &x, &s), epsilon = 1e-13);
        }
    }

    #[test]
    fn exact_step_examples() {
        let pr = scalar_analytic_problem(ScalarKind::XMinusXSquared).unwrap();
        let s = exact_step(&pr, &scalar_point(&pr, 0.2)).unwrap();
        assert_relative_eq!(s.vector()[(0, 0)], -0.16 / 0.6, epsilon = 1e-15);
        let r = rayleigh();
        let s = exact_step(&r, r.singularity().unwrap()).unwrap();
        assert!(s.vector().norm() <= 1e-12);
        let p = r.geometry().sample_at_distance(r.singularity().unwrap(), 0.1, 2).unwrap();
        let s = exact_step(&r, &p).unwrap();
        assert!(s.vector().dot(p.coords()).abs() <= 1e-12);
    }

    #[test]
    fn theta_zero_matches_exact_for_every_strategy() {
        let pr = rayleigh();
        let p = pr.geometry().sample_at_distance(pr.singularity().unwrap(), 0.4, 9).unwrap();
        let exact = exact_step(&pr, &p).unwrap();
        for st in [
            StepStrategy::Exact,
            StepStrategy::Adversarial { seed: 4 },
            StepStrategy::Truncated { max_inner: 3, inner: InnerKind::Cgne },
        ] {
            let out = inexact_step(&pr, &p, 0.0, &st, 0).unwrap();
            assert_eq!(out.step, exact);
        }
    }

    #[test]
    fn adversarial_residual_lands_just_below_theta() {
        let pr = rayleigh();
        let g = pr.geometry();
        for seed in 0..20 {
            let p = g.sample_in_ball(pr.singularity().unwrap(), 0.5, seed).unwrap();
            let out = inexact_step(&pr, &p, 0.1, &StepStrategy::Adversarial { seed }, 0).unwrap();
            assert!((0.0989..=0.0999).contains(&out.residual_ratio), "{}", out.residual_ratio);
        }
    }

    #[test]
    fn truncated_cgne_one_inner_iteration_on_easy_system() {
        let pr = linear_problem(DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 2.0])).unwrap();
        let p = pr.geometry().point_from_slice(&[1.0, 1.0]).unwrap();
        let st = StepStrategy::Truncated { max_inner: 10, inner: InnerKind::Cgne };
        let out = inexact_step(&pr, &p, 0.5, &st, 0).unwrap();
        assert!(out.inner_iterations <= 1);
        assert!(!out.fell_back);
        assert!(out.residual_ratio <= 0.5);
    }

    #[test]
    fn truncated_strategies_satisfy_residual_test() {
        let pr = rayleigh();
        let g = pr.geometry();
        for inner in [InnerKind::Cgne, InnerKind::Richardson] {
            for seed in 0..20 {
                let p = g.sample_in_ball(pr.singularity().unwrap(), 0.6, seed).unwrap();
                let st = StepStrategy::Truncated { max_inner: 50, inner };
                let out = inexact_step(&pr, &p, 0.3, &st, 0).unwrap();
                assert!(out.residual_ratio <= 0.3 + 1e-12);
            }
        }
    }

    #[test]
    fn truncated_falls_back_when_inner_budget_is_exhausted() {
        let pr = linear_problem(DMatrix::from_row_slice(2, 2, &[100.0, 0.0, 0.0, 1.0])).unwrap();
        let p = pr.geometry().point_from_slice(&[0.0, 1.0]).unwrap();
        let st = StepStrategy::Truncated { max_inner: 1, inner: InnerKind::Richardson };
        let out = inexact_step(&pr, &p, 0.01, &st, 0).unwrap();
        assert!(out.fell_back);
        assert!(out.residual_ratio <= 1e-12);
    }

    #[test]
    fn iterate_from_singularity_returns_immediately() {
        let pr = rayleigh();
        let tr = iterate(&pr, pr.singularity().unwrap(), &SolverConfig::exact());
        assert_eq!(tr.termination, Termination::Converged);
        assert_eq!(tr.records.len(), 1);
        assert_eq!(tr.records[0].k, 0);
    }

    #[test]
    fn scalar_iteration_converges_quickly() {
        let pr = scalar_analytic_problem(ScalarKind::XMinusXSquared).unwrap();
        let tr = iterate(&pr, &scalar_point(&pr, 0.2), &SolverConfig::exact());
        assert_eq!(tr.termination, Termination::Converged);
        assert!(tr.final_field_norm() <= 1e-13);
        assert!(tr.last().point.coords()[(0, 0)].abs() <= 1e-13);
        assert!(tr.steps() <= 7);
        // brute-force scalar recursion
        let mut x: f64 = 0.2;
        for r in &tr.records {
            assert_relative_eq!(r.point.coords()[(0, 0)], x, epsilon = 1e-15);
            x -= (x - x * x) / (1.0 - 2.0 * x);
        }
    }

    #[test]
    fn rayleigh_iteration_converges_with_fast_decay() {
        let pr = rayleigh();
        let p0 = pr.geometry().sample_at_distance(pr.singularity().unwrap(), 0.2, 5).unwrap();
        let tr = iterate(&pr, &p0, &SolverConfig::exact());
        assert!(tr.converged());
        let d = tr.distances();
        assert!(d.last().unwrap() <= &1e-12);
        for w in d.windows(2).filter(|w| w[0] > 1e-8) {
            assert!(w[1] <= 2.0 * w[0] * w[0], "{w:?}");
        }
    }

    #[test]
    fn residual_invariant_holds_along_traces() {
        let pr = rayleigh();
        let g = pr.geometry();
        for st in [
            StepStrategy::Adversarial { seed: 7 },
            StepStrategy::Truncated { max_inner: 20, inner: InnerKind::Cgne },
            StepStrategy::Truncated { max_inner: 20, inner: InnerKind::Richardson },
        ] {
            let cfg = SolverConfig::new(0.2, st).unwrap();
            for seed in 0..10 {
                let p0 = g.sample_in_ball(pr.singularity().unwrap(), 0.4, seed).unwrap();
                let tr = iterate(&pr, &p0, &cfg);
                assert!(tr.converged(), "{st:?}");
                for (i, r) in tr.records.iter().enumerate() {
                    assert_eq!(r.k, i);
                    if let Some(ratio) = r.residual_ratio {
                        assert!(ratio <= 0.2 + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn exact_distances_decrease_monotonically_inside_radius() {
        let pr = rayleigh();
        let g = pr.geometry();
        for seed in 0..30 {
            let p0 = g.sample_in_ball(pr.singularity().unwrap(), 0.3, seed).unwrap();
            let d = iterate(&pr, &p0, &SolverConfig::exact()).distances();
            for w in d.windows(2).filter(|w| w[0] > 1e-15) {
                assert!(w[1] < w[0]);
            }
        }
    }

    #[test]
    fn singular_derivative_and_divergence_are_reported() {
        let pr = scalar_analytic_problem(ScalarKind::XMinusXSquared).unwrap();
        let tr = iterate(&pr, &scalar_point(&pr, 0.5), &SolverConfig::exact());
        assert_eq!(tr.termination, Termination::SingularDerivative);
        let cfg = SolverConfig::exact().with_divergence_radius(0.1);
        let tr = iterate(&pr, &scalar_point(&pr, 0.45), &cfg);
        assert_eq!(tr.termination, Termination::Diverged);
        let cfg = SolverConfig::exact().with_max_iterations(2);
        let tr = iterate(&pr, &scalar_point(&pr, 0.3), &cfg);
        assert_eq!(tr.termination, Termination::MaxIterations);
        assert_eq!(tr.records.len(), 3);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(1.0, StepStrategy::Exact).is_err());
        assert!(SolverConfig::new(-0.1, StepStrategy::Exact).is_err());
        assert!(SolverConfig::new(0.5, StepStrategy::Truncated { max_inner: 0, inner: InnerKind::Cgne }).is_err());
        let cfg = SolverConfig::new(0.5, StepStrategy::Adversarial { seed: 3 }).unwrap();
        let back: SolverConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn csv_layout_and_determinism() {
        let pr = rayleigh();
        let p0 = pr.geometry().sample_at_distance(pr.singularity().unwrap(), 0.3, 1).unwrap();
        let cfg = SolverConfig::new(0.3, StepStrategy::Adversarial { seed: 11 }).unwrap();
        let a = iterate(&pr, &p0, &cfg).to_csv_string().unwrap();
        let b = iterate(&pr, &p0, &cfg).to_csv_string().unwrap();
        assert_eq!(a, b);
        let mut lines = a.lines();
        assert_eq!(lines.next().unwrap(), "k,field_norm,residual_ratio,step_norm,dist_to_pstar");
        let last = a.lines().last().unwrap();
        assert_eq!(last.split(',').nth(2), Some(""));
        let json = iterate(&pr, &p0, &cfg).sidecar_json("rayleigh-3d", &cfg).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["termination"], "converged");
    }
}
