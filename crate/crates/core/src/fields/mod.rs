//! Vector-field problems: a field on a manifold together with its known
//! singularity `p_*`, the radius `κ` of the domain ball around it, and an
//! optional majorant hint.
//!
//! Covariant derivatives are materialized as dense matrices in the
//! orthonormal frame returned by [`Geometry::frame`].

mod problems;

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Frame, Geometry, Point, Tangent, INJECTIVITY_CAP};
use crate::linalg::{self, sym_exp, sym_log};

pub use problems::{KarcherField, LinearField, RayleighField, ScalarField, ScalarKind, VectorField};

/// Names accepted by [`problem_by_name`].
pub const PROBLEM_NAMES: &[&str] = &["rayleigh-3d", "exp-minus-one", "karcher-spd2", "x-minus-x-squared", "polynomial"];

/// Majorant constants attached to a problem. They are inputs to the theory
/// and are certified by the harness, not trusted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MajorantHint {
    Lipschitz { l: f64 },
    Holder { l: f64, mu: f64 },
    Smale { gamma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdScheme {
    Forward,
    Central,
}

#[derive(Clone)]
pub struct VectorFieldProblem {
    name: String,
    geometry: Geometry,
    field: Arc<dyn VectorField>,
    singularity: Option<Point>,
    domain_radius: f64,
    hint: Option<MajorantHint>,
    hint_source: Option<String>,
}

impl fmt::Debug for VectorFieldProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorFieldProblem")
            .field("name", &self.name)
            .field("geometry", &self.geometry)
            .field("field", &self.field)
            .field("domain_radius", &self.domain_radius)
            .field("hint", &self.hint)
            .finish()
    }
}

/// `∇X(p)` as a matrix in the orthonormal frame at `p`.
#[derive(Clone, Debug)]
pub struct TangentOperator {
    frame: Frame,
    matrix: DMatrix<f64>,
}

impl TangentOperator {
    pub fn new(frame: Frame, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != frame.len() || matrix.ncols() != frame.len() {
            return Err(Error::invalid("operator matrix does not match the frame dimension"));
        }
        if !matrix.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("non-finite operator entries"));
        }
        Ok(TangentOperator { frame, matrix })
    }

    pub fn base(&self) -> &Point {
        self.frame.base()
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn norm(&self) -> f64 {
        linalg::spectral_norm(&self.matrix)
    }

    pub fn condition_number(&self) -> Result<f64> {
        linalg::condition_number(&self.matrix)
    }

    pub fn apply(&self, v: &Tangent) -> Result<Tangent> {
        let c = self.frame.coords(v)?;
        Ok(self.frame.from_coords(&(&self.matrix * c)))
    }

    /// Solves `∇X(p) S = rhs` with a certified backward error.
    pub fn solve(&self, rhs: &Tangent) -> Result<Tangent> {
        let c = self.frame.coords(rhs)?;
        let s = linalg::solve_certified(&self.matrix, &c)?;
        Ok(self.frame.from_coords(&s))
    }
}

impl VectorFieldProblem {
    pub fn new(
        name: impl Into<String>,
        geometry: Geometry,
        field: Arc<dyn VectorField>,
        singularity: Option<Point>,
        domain_radius: f64,
    ) -> Result<Self> {
        if !(domain_radius > 0.0) || domain_radius > geometry.injectivity_cap() {
            return Err(Error::invalid(format!("domain radius {domain_radius} out of range")));
        }
        Ok(VectorFieldProblem {
            name: name.into(),
            geometry,
            field,
            singularity,
            domain_radius,
            hint: None,
            hint_source: None,
        })
    }

    pub fn with_hint(mut self, hint: MajorantHint, source: impl Into<String>) -> Self {
        self.hint = Some(hint);
        self.hint_source = Some(source.into());
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn field(&self) -> &dyn VectorField {
        self.field.as_ref()
    }

    pub fn singularity(&self) -> Option<&Point> {
        self.singularity.as_ref()
    }

    pub fn require_singularity(&self) -> Result<&Point> {
        self.singularity
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("problem `{}` has no known singularity", self.name)))
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    pub fn hint(&self) -> Option<&MajorantHint> {
        self.hint.as_ref()
    }

    /// How the hint was obtained (formula or sampling note).
    pub fn hint_source(&self) -> Option<&str> {
        self.hint_source.as_deref()
    }

    /// Distance to the known singularity, if any.
    pub fn distance_to_singularity(&self, p: &Point) -> Result<Option<f64>> {
        match &self.singularity {
            Some(ps) => Ok(Some(self.geometry.distance(ps, p)?)),
            None => Ok(None),
        }
    }

    fn check_domain(&self, p: &Point) -> Result<()> {
        if let Some(d) = self.distance_to_singularity(p)? {
            if !(d < self.domain_radius) {
                return Err(Error::Domain { distance: d, radius: self.domain_radius });
            }
        }
        Ok(())
    }

    pub fn eval(&self, p: &Point) -> Result<Tangent> {
        self.check_domain(p)?;
        let x = self.field.eval(&self.geometry, p)?;
        self.geometry.project(p, x)
    }

    /// `∇X(p) v`.
    pub fn derivative_apply(&self, p: &Point, v: &Tangent) -> Result<Tangent> {
        self.check_domain(p)?;
        if v.base() != p {
            return Err(Error::invalid("direction is not tangent at the evaluation point"));
        }
        let w = self.field.derivative(&self.geometry, p, v.vector())?;
        self.geometry.project(p, w)
    }

    pub fn covariant_derivative(&self, p: &Point) -> Result<TangentOperator> {
        self.check_domain(p)?;
        let frame = self.geometry.frame(p)?;
        self.derivative_in_frame(frame)
    }

    fn derivative_in_frame(&self, frame: Frame) -> Result<TangentOperator> {
        let n = frame.len();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let bj = frame.vector(j);
            let col = self.field.derivative(&self.geometry, frame.base(), bj.vector())?;
            m.set_column(j, &frame.coords_of(&col));
        }
        TangentOperator::new(frame, m)
    }

    /// Finite-difference approximation of `∇X(p)`: column `j` compares
    /// `X(exp_p(h bⱼ))`, transported back to `p`, with `X(p)`.
    pub fn fd_derivative(&self, p: &Point, h: f64, scheme: FdScheme) -> Result<TangentOperator> {
        if !(1e-9..=1e-3).contains(&h) {
            return Err(Error::invalid(format!("finite-difference step {h} outside [1e-9, 1e-3]")));
        }
        self.check_domain(p)?;
        let g = &self.geometry;
        let frame = g.frame(p)?;
        let n = frame.len();
        let pulled = |s: f64, j: usize| -> Result<DMatrix<f64>> {
            let q = g.exp(p, &frame.vector(j).scaled(s))?;
            let x = self.eval(&q)?;
            Ok(g.transport(&q, p, &x)?.vector().clone())
        };
        let x0 = self.eval(p)?.vector().clone();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let col = match scheme {
                FdScheme::Forward => (pulled(h, j)? - &x0) / h,
                FdScheme::Central => (pulled(h, j)? - pulled(-h, j)?) / (2.0 * h),
            };
            m.set_column(j, &frame.coords_of(&col));
        }
        TangentOperator::new(frame, m)
    }

    /// The operator `∇X(p_*)⁻¹[P_{ζ,1,0}∇X(p) − P_{ζ,τ,0}∇X(ζ(τ))P_{ζ,1,τ}]`
    /// from `T_p M` to `T_{p_*} M`, in orthonormal frames at both ends,
    /// where `ζ` is the minimizing geodesic from `p_*` to `p`.
    pub fn derivative_variation(&self, p: &Point, tau: f64) -> Result<DMatrix<f64>> {
        let g = &self.geometry;
        let ps = self.require_singularity()?;
        let d_star = self.covariant_derivative(ps)?;
        let frame_p = g.frame(p)?;
        let zeta = g.geodesic_point(ps, p, tau)?;
        let n = frame_p.len();
        let mut diff = DMatrix::zeros(n, n);
        for j in 0..n {
            let bj = frame_p.vector(j);
            let direct = g.transport(p, ps, &self.derivative_apply(p, &bj)?)?;
            let moved = g.transport(p, &zeta, &bj)?;
            let via = g.transport(&zeta, ps, &self.derivative_apply(&zeta, &moved)?)?;
            diff.set_column(j, &d_star.frame().coords(&direct.sub(&via)?)?);
        }
        solve_columns(d_star.matrix(), &diff)
    }
}

/// `A⁻¹ B`, column by column with certified solves.
pub(crate) fn solve_columns(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(a.ncols(), b.ncols());
    for j in 0..b.ncols() {
        let col: DVector<f64> = b.column(j).into_owned();
        out.set_column(j, &linalg::solve_certified(a, &col)?);
    }
    Ok(out)
}

/// Smale's `γ = sup_{n≥2} |cₙ / c₁|^{1/(n−1)}` for a scalar field with Taylor
/// coefficients `c` at its zero.
pub fn smale_gamma_from_taylor(coefficients: &[f64]) -> Result<f64> {
    let c1 = coefficients.get(1).copied().unwrap_or(0.0);
    if c1 == 0.0 {
        return Err(Error::invalid("derivative at the singularity vanishes"));
    }
    Ok(coefficients
        .iter()
        .enumerate()
        .skip(2)
        .map(|(n, &cn)| (cn / c1).abs().powf(1.0 / (n as f64 - 1.0)))
        .fold(0.0, f64::max))
}

/// Rayleigh-quotient gradient on the sphere with `p_*` the unit eigenvector
/// of `a` for its `which`-th smallest eigenvalue.
///
/// The Lipschitz hint is `L = 2(λ_max − λ_min)/gap`, where `gap` is the
/// distance from the chosen eigenvalue to the rest of the spectrum: the
/// second covariant derivative is bounded by `2(λ_max − λ_min)` and
/// `‖∇X(p_*)⁻¹‖ = 1/gap`.
pub fn rayleigh_problem(a: DMatrix<f64>, which: usize) -> Result<VectorFieldProblem> {
    let n = a.nrows();
    if n < 2 || a.ncols() != n {
        return Err(Error::invalid("Rayleigh matrix must be square of order >= 2"));
    }
    if (&a - a.transpose()).amax() > 1e-12 * a.amax().max(1.0) {
        return Err(Error::invalid("Rayleigh matrix must be symmetric"));
    }
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let &idx = order.get(which).ok_or_else(|| Error::invalid(format!("eigenvalue index {which} out of range")))?;
    let lambda = eig.eigenvalues[idx];
    let gap = order
        .iter()
        .filter(|&&i| i != idx)
        .map(|&i| (eig.eigenvalues[i] - lambda).abs())
        .fold(f64::INFINITY, f64::min);
    if !(gap > 1e-12 * lambda.abs().max(1.0)) {
        return Err(Error::invalid("chosen eigenvalue is not simple"));
    }
    let spread = eig.eigenvalues.max() - eig.eigenvalues.min();
    let mut v: DMatrix<f64> = eig.eigenvectors.column(idx).into_owned().reshape_generic(nalgebra::Dyn(n), nalgebra::Dyn(1));
    let lead = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if lead < 0.0 {
        v = -v;
    }
    v /= v.norm();
    let geometry = Geometry::sphere(n);
    let p_star = geometry.point(v)?;
    let l = 2.0 * spread / gap;
    let problem = VectorFieldProblem::new(
        if n == 3 { "rayleigh-3d".to_string() } else { format!("rayleigh-{n}d") },
        geometry,
        Arc::new(RayleighField { a }),
        Some(p_star),
        FRAC_PI_2,
    )?;
    Ok(problem.with_hint(
        MajorantHint::Lipschitz { l },
        format!("L = 2(lambda_max - lambda_min)/gap = 2*{spread}/{gap}"),
    ))
}

pub fn scalar_analytic_problem(kind: ScalarKind) -> Result<VectorFieldProblem> {
    let geometry = Geometry::euclidean(1);
    let p_star = geometry.point_from_slice(&[0.0])?;
    let (name, hint, source) = match &kind {
        ScalarKind::ExpMinusOne => (
            "exp-minus-one",
            Some(MajorantHint::Smale { gamma: 0.5 }),
            "gamma = sup_n (1/n!)^(1/(n-1)) = 1/2, attained at n = 2".to_string(),
        ),
        ScalarKind::XMinusXSquared => (
            "x-minus-x-squared",
            Some(MajorantHint::Lipschitz { l: 2.0 }),
            "|X'(x) - X'(y)| = 2|x - y| and X'(0) = 1".to_string(),
        ),
        ScalarKind::Polynomial(c) => {
            if c.is_empty() || c[0] != 0.0 {
                return Err(Error::invalid("polynomial problems need a zero constant term (p_* = 0)"));
            }
            let gamma = smale_gamma_from_taylor(c)?;
            let hint = (gamma > 0.0).then_some(MajorantHint::Smale { gamma });
            ("polynomial", hint, "gamma = max_n |c_n/c_1|^(1/(n-1))".to_string())
        }
    };
    let problem =
        VectorFieldProblem::new(name, geometry, Arc::new(ScalarField { kind }), Some(p_star), INJECTIVITY_CAP)?;
    Ok(match hint {
        Some(h) => problem.with_hint(h, source),
        None => problem,
    })
}

/// `X(x) = Bx` on `ℝⁿ`, singular at the origin.
pub fn linear_problem(b: DMatrix<f64>) -> Result<VectorFieldProblem> {
    let n = b.nrows();
    if b.ncols() != n {
        return Err(Error::invalid("linear field matrix must be square"));
    }
    let geometry = Geometry::euclidean(n);
    let origin = geometry.point(DMatrix::zeros(n, 1))?;
    VectorFieldProblem::new("linear", geometry, Arc::new(LinearField { b }), Some(origin), INJECTIVITY_CAP)
}

/// Weighted Karcher-mean field on `SPD(n)`. The singularity is found by
/// exact Newton from the log-Euclidean mean and stored; the Lipschitz hint
/// is twice the largest majorant-condition ratio seen over a sampled ball.
pub fn karcher_field_problem(data: Vec<DMatrix<f64>>, weights: Vec<f64>) -> Result<VectorFieldProblem> {
    if data.is_empty() || data.len() != weights.len() {
        return Err(Error::invalid("Karcher problem needs one positive weight per datum"));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::invalid("Karcher weights must be positive"));
    }
    let n = data[0].nrows();
    let geometry = Geometry::spd(n);
    let data: Vec<DMatrix<f64>> =
        data.into_iter().map(|a| geometry.point(a).map(|p| p.coords().clone())).collect::<Result<_>>()?;
    let field = KarcherField { data: data.clone(), weights: weights.clone() };

    let total: f64 = weights.iter().sum();
    let mut log_mean = DMatrix::zeros(n, n);
    for (a, w) in data.iter().zip(&weights) {
        log_mean += sym_log(a) * (w / total);
    }
    let mut p = geometry.point(sym_exp(&log_mean))?;
    let unbounded = VectorFieldProblem::new("karcher", geometry.clone(), Arc::new(field.clone()), None, INJECTIVITY_CAP)?;
    for _ in 0..100 {
        let x = unbounded.eval(&p)?;
        if geometry.norm(&x)? <= 1e-15 {
            break;
        }
        let step = unbounded.covariant_derivative(&p)?.solve(&x.scaled(-1.0))?;
        p = geometry.exp(&p, &step)?;
    }
    let residual = geometry.norm(&unbounded.eval(&p)?)?;
    if residual > 1e-14 {
        return Err(Error::invalid(format!("Karcher pre-solve stalled at |X| = {residual:e}")));
    }
    let spread = data
        .iter()
        .map(|a| geometry.distance(&p, &geometry.point(a.clone())?))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let name = format!("karcher-spd{n}");
    let problem = VectorFieldProblem::new(name, geometry, Arc::new(field), Some(p), 2.0 * spread.max(0.5))?;
    let probe = problem.domain_radius().min(1.0);
    let estimate = sampled_lipschitz(&problem, probe, 200, 0x6b61_7263)?;
    let l = 2.0 * estimate;
    Ok(problem.with_hint(
        MajorantHint::Lipschitz { l },
        format!("L = 2 x sampled sup {estimate:.6} of the derivative-variation ratio over B_{probe}(p_*)"),
    ))
}

/// Largest observed `‖∇X(p_*)⁻¹[…]‖ / ((1−τ)·d(p_*, p))` over random points
/// in the ball and `τ ∈ {0, ¼, ½, ¾}`.
pub fn sampled_lipschitz(problem: &VectorFieldProblem, radius: f64, samples: u64, seed: u64) -> Result<f64> {
    let g = problem.geometry();
    let ps = problem.require_singularity()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sup = 0.0f64;
    for _ in 0..samples {
        let p = g.sample_in_ball(ps, radius, rng.random())?;
        let d = g.distance(ps, &p)?;
        if d < 1e-6 {
            continue;
        }
        for tau in [0.0, 0.25, 0.5, 0.75] {
            let op = problem.derivative_variation(&p, tau)?;
            sup = sup.max(linalg::spectral_norm(&op) / ((1.0 - tau) * d));
        }
    }
    Ok(sup)
}

/// Parameters accepted by [`problem_by_name`]; all optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParams {
    /// Symmetric matrix for `rayleigh-3d` (row-major rows).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Index of the eigenvalue (ascending) whose eigenvector is `p_*`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen_index: Option<usize>,
    /// Polynomial coefficients in increasing degree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    /// SPD data matrices for `karcher-spd2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Error::invalid("matrix rows must be non-empty and of equal length"));
    }
    Ok(DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]))
}

pub fn default_karcher_data() -> Vec<DMatrix<f64>> {
    vec![
        DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, -0.3, -0.3, 1.5]),
        DMatrix::from_row_slice(2, 2, &[0.8, 0.1, 0.1, 2.5]),
    ]
}

pub fn problem_by_name(name: &str, params: &ProblemParams) -> Result<VectorFieldProblem> {
    match name {
        "rayleigh-3d" => {
            let a = match &params.matrix {
                Some(rows) => matrix_from_rows(rows)?,
                None => DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 4.0])),
            };
            if a.nrows() != 3 {
                return Err(Error::invalid("rayleigh-3d needs a 3x3 matrix"));
            }
            rayleigh_problem(a, params.eigen_index.unwrap_or(2))
        }
        "exp-minus-one" => scalar_analytic_problem(ScalarKind::ExpMinusOne),
        "x-minus-x-squared" => scalar_analytic_problem(ScalarKind::XMinusXSquared),
        "polynomial" => {
            let c = params.coefficients.clone().unwrap_or_else(|| vec![0.0, 2.0, -1.0, 0.5]);
            scalar_analytic_problem(ScalarKind::Polynomial(c))
        }
        "karcher-spd2" => {
            let data = match &params.data {
                Some(ms) => ms.iter().map(|rows| matrix_from_rows(rows)).collect::<Result<Vec<_>>>()?,
                None => default_karcher_data(),
            };
            if data.iter().any(|m| m.nrows() != 2 || m.ncols() != 2) {
                return Err(Error::invalid("karcher-spd2 needs 2x2 data matrices"));
            }
            let weights = params.weights.clone().unwrap_or_else(|| vec![1.0 / data.len() as f64; data.len()]);
            karcher_field_problem(data, weights)
        }
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}
