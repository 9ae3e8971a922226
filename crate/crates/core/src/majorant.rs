//! Majorant functions and the radii, tolerances and rate factors they
//! determine.
//!
//! A majorant `f: [0, R) → ℝ` satisfies `f(0) = 0`, `f'(0) = −1` and has a
//! strictly increasing derivative. From it we derive
//!
//! - `ν = sup{t : f'(t) < 0}`,
//! - `σ = sup{t < κ : f(t) < 0}`,
//! - `ρ = sup{δ < ν : (1+ϑ)|n_f(t)|/t + ϑ < 1/K for t ∈ (0, δ)}`,
//! - `r = min{κ, ρ, r_inj}`,
//!
//! where `n_f(t) = t − f(t)/f'(t)` is the scalar Newton map.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::MajorantHint;
use crate::geometry::INJECTIVITY_CAP;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const BISECTION_START: f64 = 1e-12;
const BISECTION_TOL: f64 = 1e-12;
const BISECTION_MAX_ITER: usize = 200;

#[derive(Clone)]
pub struct GenericMajorant {
    f: ScalarFn,
    df: ScalarFn,
    domain_end: f64,
    label: String,
}

impl fmt::Debug for GenericMajorant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericMajorant").field("label", &self.label).field("domain_end", &self.domain_end).finish()
    }
}

#[derive(Clone, Debug)]
pub enum MajorantKind {
    /// `f(t) = L t^{μ+1}/(μ+1) − t`
    Holder { l: f64, mu: f64 },
    /// `f(t) = t/(1 − γt) − 2t` on `[0, 1/γ)`
    Smale { gamma: f64 },
    Generic(GenericMajorant),
}

#[derive(Clone, Debug)]
pub struct Majorant {
    kind: MajorantKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusQuery {
    pub vartheta: f64,
    /// Spreading constant `K_{p_*}`.
    pub k: f64,
    /// Domain radius `κ`.
    pub kappa: f64,
    /// Injectivity radius at `p_*`.
    pub r_inj: f64,
}

impl RadiusQuery {
    pub fn new(vartheta: f64, k: f64, kappa: f64, r_inj: f64) -> Self {
        RadiusQuery { vartheta, k, kappa, r_inj }
    }

    fn validate(&self) -> Result<()> {
        if !(self.vartheta >= 0.0) || !(self.k >= 1.0) || !(self.vartheta * self.k < 1.0) {
            return Err(Error::InvalidQuery(format!(
                "need 0 <= vartheta and K >= 1 with vartheta*K < 1 (vartheta = {}, K = {})",
                self.vartheta, self.k
            )));
        }
        if !(self.kappa > 0.0) || !(self.r_inj > 0.0) {
            return Err(Error::InvalidQuery("kappa and the injectivity radius must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusMethod {
    ClosedForm,
    Bisection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusReport {
    pub nu: f64,
    pub sigma: f64,
    pub rho: f64,
    pub r: f64,
    pub method: RadiusMethod,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    /// A `t` at which the condition was seen to fail.
    pub witness: Option<f64>,
}

impl Verdict {
    fn pass() -> Self {
        Verdict { pass: true, witness: None }
    }

    fn fail(t: f64) -> Self {
        Verdict { pass: false, witness: Some(t) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HConditions {
    pub h1: Verdict,
    pub h2: Verdict,
    pub h3: Verdict,
}

/// Serializable summary of a majorant and everything derived from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusRecord {
    pub kind: String,
    pub parameters: Vec<(String, f64)>,
    pub vartheta: f64,
    pub k: f64,
    pub kappa: f64,
    pub r_inj: f64,
    pub nu: f64,
    pub sigma: f64,
    pub rho: f64,
    pub r: f64,
    pub method: RadiusMethod,
    pub theta_max: Option<f64>,
}

/// `sup` of the initial interval `(0, s)` on which `pred` holds, capped at
/// `upper`. Brackets by doubling from `1e-12`, then bisects.
fn bisect_sup(upper: f64, pred: impl Fn(f64) -> bool) -> f64 {
    let mut lo = 0.0;
    let mut t = BISECTION_START.min(upper * 0.5);
    let hi = loop {
        if t >= upper {
            break upper;
        }
        if pred(t) {
            lo = t;
            t *= 2.0;
        } else {
            break t;
        }
    };
    let mut hi = hi;
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo <= BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl Majorant {
    /// Hölder-type majorant; `μ = 1` is the Lipschitz case.
    pub fn holder(l: f64, mu: f64) -> Result<Self> {
        if !(l > 0.0) || !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::invalid(format!("Hölder majorant needs L > 0 and mu in (0, 1] (L = {l}, mu = {mu})")));
        }
        Ok(Majorant { kind: MajorantKind::Holder { l, mu } })
    }

    pub fn lipschitz(l: f64) -> Result<Self> {
        Self::holder(l, 1.0)
    }

    pub fn smale(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!("Smale majorant needs gamma > 0 (gamma = {gamma})")));
        }
        Ok(Majorant { kind: MajorantKind::Smale { gamma } })
    }

    /// A majorant given by callables `f`, `f'` on `[0, domain_end)`.
    pub fn generic(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain_end: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if !(domain_end > 0.0) {
            return Err(Error::invalid("generic majorant needs a positive domain end"));
        }
        Ok(Majorant {
            kind: MajorantKind::Generic(GenericMajorant {
                f: Arc::new(f),
                df: Arc::new(df),
                domain_end: domain_end.min(INJECTIVITY_CAP),
                label: label.into(),
            }),
        })
    }

    pub fn from_hint(hint: &MajorantHint) -> Result<Self> {
        match *hint {
            MajorantHint::Lipschitz { l } => Self::lipschitz(l),
            MajorantHint::Holder { l, mu } => Self::holder(l, mu),
            MajorantHint::Smale { gamma } => Self::smale(gamma),
        }
    }

    /// The same function seen only through its callables, so that every
    /// radius is computed by bisection.
    pub fn as_generic(&self) -> Majorant {
        let this = self.clone();
        let that = self.clone();
        Majorant {
            kind: MajorantKind::Generic(GenericMajorant {
                f: Arc::new(move |t| this.f_raw(t)),
                df: Arc::new(move |t| that.df_raw(t)),
                domain_end: self.domain_end(),
                label: format!("generic({})", self.kind_name()),
            }),
        }
    }

    pub fn kind(&self) -> &MajorantKind {
        &self.kind
    }

    pub fn kind_name(&self) -> String {
        match &self.kind {
            MajorantKind::Holder { mu, .. } if *mu == 1.0 => "lipschitz".into(),
            MajorantKind::Holder { .. } => "holder".into(),
            MajorantKind::Smale { .. } => "smale".into(),
            MajorantKind::Generic(g) => g.label.clone(),
        }
    }

    pub fn parameters(&self) -> Vec<(String, f64)> {
        match &self.kind {
            MajorantKind::Holder { l, mu } => vec![("l".into(), *l), ("mu".into(), *mu)],
            MajorantKind::Smale { gamma } => vec![("gamma".into(), *gamma)],
            MajorantKind::Generic(g) => vec![("domain_end".into(), g.domain_end)],
        }
    }

    /// Whether closed forms are available for the radii.
    pub fn has_closed_form(&self) -> bool {
        !matches!(self.kind, MajorantKind::Generic(_))
    }

    pub fn domain_end(&self) -> f64 {
        match &self.kind {
            MajorantKind::Holder { .. } => INJECTIVITY_CAP,
            MajorantKind::Smale { gamma } => 1.0 / gamma,
            MajorantKind::Generic(g) => g.domain_end,
        }
    }

    fn check_t(&self, t: f64) -> Result<()> {
        let end = self.domain_end();
        if !(t >= 0.0 && t < end) {
            return Err(Error::MajorantDomain { t, end });
        }
        Ok(())
    }

    fn f_raw(&self, t: f64) -> f64 {
        match &self.kind {
            MajorantKind::Holder { l, mu } => l * t.powf(mu + 1.0) / (mu + 1.0) - t,
            MajorantKind::Smale { gamma } => t / (1.0 - gamma * t) - 2.0 * t,
            MajorantKind::Generic(g) => (g.f)(t),
        }
    }

    fn df_raw(&self, t: f64) -> f64 {
        match &self.kind {
            MajorantKind::Holder { l, mu } => l * t.powf(*mu) - 1.0,
            MajorantKind::Smale { gamma } => {
                let u = 1.0 - gamma * t;
                1.0 / (u * u) - 2.0
            }
            MajorantKind::Generic(g) => (g.df)(t),
        }
    }

    pub fn f(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.f_raw(t))
    }

    pub fn f_prime(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.df_raw(t))
    }

    /// `|n_f(t)|/t` for `t ∈ (0, ν)`; closed forms for the Hölder and Smale
    /// kinds, `(f(t)/f'(t) − t)/t` otherwise.
    fn newton_ratio_raw(&self, t: f64) -> f64 {
        match &self.kind {
            MajorantKind::Holder { l, mu } => {
                let s = l * t.powf(*mu);
                mu * s / ((mu + 1.0) * (1.0 - s))
            }
            MajorantKind::Smale { gamma } => {
                let u = 1.0 - gamma * t;
                gamma * t / (2.0 * u * u - 1.0)
            }
            MajorantKind::Generic(_) => (self.f_raw(t) / self.df_raw(t) - t) / t,
        }
    }

    fn check_below_nu(&self, t: f64) -> Result<f64> {
        let nu = self.radius_nu();
        if !(t >= 0.0 && t < nu) {
            return Err(Error::MajorantDomain { t, end: nu });
        }
        Ok(nu)
    }

    /// Scalar Newton map `n_f(t) = t − f(t)/f'(t)` on `[0, ν)`.
    pub fn newton_map(&self, t: f64) -> Result<f64> {
        self.check_below_nu(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        Ok(match self.kind {
            MajorantKind::Generic(_) => t - self.f_raw(t) / self.df_raw(t),
            _ => -t * self.newton_ratio_raw(t),
        })
    }

    /// `|n_f(t)|/t` on `(0, ν)`.
    pub fn newton_ratio(&self, t: f64) -> Result<f64> {
        self.check_below_nu(t)?;
        if t == 0.0 {
            return Err(Error::MajorantDomain { t, end: self.radius_nu() });
        }
        Ok(self.newton_ratio_raw(t))
    }

    /// Linearization error `e_f(t, u) = f(u) − [f(t) + f'(t)(u − t)]`.
    pub fn linearization_error(&self, t: f64, u: f64) -> Result<f64> {
        self.check_t(t)?;
        self.check_t(u)?;
        Ok(self.f_raw(u) - (self.f_raw(t) + self.df_raw(t) * (u - t)))
    }

    pub fn radius_nu(&self) -> f64 {
        match &self.kind {
            MajorantKind::Holder { l, mu } => (1.0 / l).powf(1.0 / mu).min(INJECTIVITY_CAP),
            MajorantKind::Smale { gamma } => (2f64.sqrt() - 1.0) / (gamma * 2f64.sqrt()),
            MajorantKind::Generic(g) => bisect_sup(g.domain_end, |t| self.df_raw(t) < 0.0),
        }
    }

    pub fn radius_sigma(&self, kappa: f64) -> f64 {
        match &self.kind {
            MajorantKind::Holder { l, mu } => ((mu + 1.0) / l).powf(1.0 / mu).min(kappa),
            MajorantKind::Smale { gamma } => (0.5 / gamma).min(kappa),
            MajorantKind::Generic(g) => bisect_sup(g.domain_end.min(kappa), |t| self.f_raw(t) < 0.0),
        }
    }

    pub fn radius_rho(&self, query: &RadiusQuery) -> Result<f64> {
        query.validate()?;
        let (th, k) = (query.vartheta, query.k);
        Ok(match &self.kind {
            MajorantKind::Holder { l, mu } => {
                let denom = l * ((1.0 + k) / (1.0 - k * th) * mu + 1.0);
                ((mu + 1.0) / denom).powf(1.0 / mu)
            }
            MajorantKind::Smale { gamma } => {
                let disc = k * k * (1.0 - 6.0 * th + th * th) + 8.0 * k * (1.0 - th) + 8.0;
                (k * (1.0 - 3.0 * th) + 4.0 - disc.sqrt()) / (4.0 * gamma * (1.0 - k * th))
            }
            MajorantKind::Generic(_) => {
                let nu = self.radius_nu();
                bisect_sup(nu, |t| t < nu && self.df_raw(t) < 0.0 && (1.0 + th) * self.newton_ratio_raw(t) + th < 1.0 / k)
            }
        })
    }

    pub fn convergence_radius(&self, query: &RadiusQuery) -> Result<RadiusReport> {
        let rho = self.radius_rho(query)?;
        Ok(RadiusReport {
            nu: self.radius_nu(),
            sigma: self.radius_sigma(query.kappa),
            rho,
            r: query.kappa.min(rho).min(query.r_inj),
            method: if self.has_closed_form() { RadiusMethod::ClosedForm } else { RadiusMethod::Bisection },
        })
    }

    /// Largest admissible residual tolerance,
    /// `θ_max = ϑ / (cond · (2/|f'(d0)| − 1))`, for a start at distance `d0`.
    pub fn theta_max(&self, cond: f64, vartheta: f64, d0: f64) -> Result<f64> {
        if !(cond >= 1.0) {
            return Err(Error::invalid(format!("condition number {cond} must be >= 1")));
        }
        if !(vartheta >= 0.0) {
            return Err(Error::invalid(format!("vartheta {vartheta} must be >= 0")));
        }
        self.check_below_nu(d0)?;
        let slope = self.df_raw(d0).abs();
        Ok(vartheta / (cond * (2.0 / slope - 1.0)))
    }

    /// The stricter tolerance `ϑ / (cond · (1 + 2/|f'(d0)|))` that appears as
    /// the hypothesis of the one-step contraction estimate.
    pub fn theta_contraction_variant(&self, cond: f64, vartheta: f64, d0: f64) -> Result<f64> {
        self.theta_max(cond, vartheta, d0)?;
        let slope = self.df_raw(d0).abs();
        Ok(vartheta / (cond * (1.0 + 2.0 / slope)))
    }

    /// One-step contraction factor `K[(1+ϑ)|n_f(t)|/t + ϑ]` at error `t`.
    pub fn q_factor(&self, vartheta: f64, k: f64, t: f64) -> Result<f64> {
        let ratio = self.newton_ratio(t)?;
        Ok(k * ((1.0 + vartheta) * ratio + vartheta))
    }

    /// Factor of the quadratic-type bound `d_{k+1} ≤ factor · d_k` valid under
    /// h3: `K[(1+ϑ)|n_f(d0)|/d0² · d_k + ϑ]`.
    pub fn quadratic_rate_factor(&self, vartheta: f64, k: f64, d0: f64, dk: f64) -> Result<f64> {
        let ratio = self.newton_ratio(d0)?;
        Ok(k * ((1.0 + vartheta) * ratio / d0 * dk + vartheta))
    }

    /// Global linear factor under h3: `K[(1+ϑ)|n_f(d0)|/d0 + ϑ]`.
    pub fn linear_rate_factor(&self, vartheta: f64, k: f64, d0: f64) -> Result<f64> {
        let ratio = self.newton_ratio(d0)?;
        Ok(k * ((1.0 + vartheta) * ratio + vartheta))
    }

    /// Grid span used by [`Majorant::check_h_conditions`].
    fn grid_span(&self) -> f64 {
        let end = self.domain_end();
        if end < INJECTIVITY_CAP {
            end * (1.0 - 1e-6)
        } else {
            4.0 * self.radius_nu().clamp(1.0, 1e6)
        }
    }

    /// Grid check of h1 (`f(0)=0`, `f'(0)=−1`), h2 (`f'` strictly
    /// increasing) and h3 (`f'` convex): 1000 uniform points plus log-spaced
    /// points near zero.
    pub fn check_h_conditions(&self) -> HConditions {
        let span = self.grid_span();
        let h1 = {
            let f0 = self.f_raw(0.0);
            let d0 = self.df_raw(0.0);
            if f0.abs() <= 1e-14 && (d0 + 1.0).abs() <= 1e-12 {
                Verdict::pass()
            } else {
                Verdict::fail(0.0)
            }
        };

        let uniform: Vec<f64> = (0..1000).map(|i| span * i as f64 / 999.0).collect();
        let mut grid: Vec<f64> = (0..50).map(|i| 1e-10 * (span * 1e-3 / 1e-10).powf(i as f64 / 49.0)).collect();
        grid.extend(uniform.iter().copied());
        grid.sort_by(f64::total_cmp);
        grid.dedup();

        let h2 = grid
            .windows(2)
            .find(|w| !(self.df_raw(w[1]) > self.df_raw(w[0])))
            .map_or_else(Verdict::pass, |w| Verdict::fail(w[0]));

        let slopes: Vec<(f64, f64)> = uniform
            .windows(2)
            .map(|w| (w[0], (self.df_raw(w[1]) - self.df_raw(w[0])) / (w[1] - w[0])))
            .collect();
        let h3 = slopes
            .windows(2)
            .find(|s| s[1].1 < s[0].1 - 1e-8 * (1.0 + s[0].1.abs()))
            .map_or_else(Verdict::pass, |s| Verdict::fail(s[1].0));

        HConditions { h1, h2, h3 }
    }

    pub fn record(&self, query: &RadiusQuery, theta_max: Option<f64>) -> Result<RadiusRecord> {
        let rep = self.convergence_radius(query)?;
        Ok(RadiusRecord {
            kind: self.kind_name(),
            parameters: self.parameters(),
            vartheta: query.vartheta,
            k: query.k,
            kappa: query.kappa,
            r_inj: query.r_inj,
            nu: rep.nu,
            sigma: rep.sigma,
            rho: rep.rho,
            r: rep.r,
            method: rep.method,
            theta_max,
        })
    }
}
