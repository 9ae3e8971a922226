//! Concrete vector fields with closed-form covariant derivatives.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::Result;
use crate::geometry::{Geometry, Point};
use crate::linalg::{sym_inv_sqrt, sym_log, sym_sqrt, symmetrize};

/// A smooth vector field given in ambient coordinates, together with its
/// covariant derivative `v ↦ ∇X(p) v`.
pub trait VectorField: Send + Sync + std::fmt::Debug {
    fn eval(&self, g: &Geometry, p: &Point) -> Result<DMatrix<f64>>;

    fn derivative(&self, g: &Geometry, p: &Point, v: &DMatrix<f64>) -> Result<DMatrix<f64>>;
}

/// Riemannian gradient of `½ pᵀAp` on the unit sphere: `X(p) = Ap − (pᵀAp)p`.
#[derive(Clone, Debug)]
pub struct RayleighField {
    pub a: DMatrix<f64>,
}

impl VectorField for RayleighField {
    fn eval(&self, _g: &Geometry, p: &Point) -> Result<DMatrix<f64>> {
        let x = p.coords();
        let ax = &self.a * x;
        let rq = x.dot(&ax);
        Ok(ax - x * rq)
    }

    fn derivative(&self, _g: &Geometry, p: &Point, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let x = p.coords();
        let rq = x.dot(&(&self.a * x));
        let av = &self.a * v;
        let proj = &av - x * x.dot(&av);
        Ok(proj - v * rq)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScalarKind {
    /// `eˣ − 1`
    ExpMinusOne,
    /// `x − x²`
    XMinusXSquared,
    /// `Σ cₖ xᵏ`, coefficients in increasing degree.
    Polynomial(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct ScalarField {
    pub kind: ScalarKind,
}

impl ScalarField {
    pub fn value(&self, x: f64) -> f64 {
        match &self.kind {
            ScalarKind::ExpMinusOne => x.exp_m1(),
            ScalarKind::XMinusXSquared => x - x * x,
            ScalarKind::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        match &self.kind {
            ScalarKind::ExpMinusOne => x.exp(),
            ScalarKind::XMinusXSquared => 1.0 - 2.0 * x,
            ScalarKind::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * x + k as f64 * ck),
        }
    }
}

impl VectorField for ScalarField {
    fn eval(&self, _g: &Geometry, p: &Point) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_element(1, 1, self.value(p.coords()[(0, 0)])))
    }

    fn derivative(&self, _g: &Geometry, p: &Point, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(v * self.slope(p.coords()[(0, 0)]))
    }
}

/// `X(x) = Bx` on `ℝⁿ`.
#[derive(Clone, Debug)]
pub struct LinearField {
    pub b: DMatrix<f64>,
}

impl VectorField for LinearField {
    fn eval(&self, _g: &Geometry, p: &Point) -> Result<DMatrix<f64>> {
        Ok(&self.b * p.coords())
    }

    fn derivative(&self, _g: &Geometry, _p: &Point, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(&self.b * v)
    }
}

/// Gradient of the weighted Karcher cost `½ Σ wᵢ d²(p, aᵢ)` on `SPD(n)`:
/// `X(p) = −Σ wᵢ log_p(aᵢ)`.
#[derive(Clone, Debug)]
pub struct KarcherField {
    pub data: Vec<DMatrix<f64>>,
    pub weights: Vec<f64>,
}

/// `(δ/2)·coth(δ/2)`, the Jacobi-field factor of the Hessian of `½d²` along
/// a direction whose curvature scale is `δ/2`.
fn jacobi_factor(delta: f64) -> f64 {
    let h = 0.5 * delta;
    if h.abs() < 1e-4 {
        1.0 + h * h / 3.0
    } else {
        h / h.tanh()
    }
}

impl VectorField for KarcherField {
    fn eval(&self, _g: &Geometry, p: &Point) -> Result<DMatrix<f64>> {
        let s = sym_sqrt(p.coords());
        let is = sym_inv_sqrt(p.coords());
        let n = p.coords().nrows();
        let mut acc = DMatrix::zeros(n, n);
        for (a, &w) in self.data.iter().zip(&self.weights) {
            acc -= sym_log(&(&is * a * &is)) * w;
        }
        Ok(symmetrize(&(&s * acc * &s)))
    }

    /// Whitens at `p` (an isometry taking `p` to `I`), applies the Hessian of
    /// `½d²(·, a)` at the identity in the eigenbasis of the whitened datum, and
    /// maps back.
    fn derivative(&self, _g: &Geometry, p: &Point, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let s = sym_sqrt(p.coords());
        let is = sym_inv_sqrt(p.coords());
        let n = p.coords().nrows();
        let xi = &is * v * &is;
        let mut acc = DMatrix::zeros(n, n);
        for (a, &w) in self.data.iter().zip(&self.weights) {
            let eig = SymmetricEigen::new(symmetrize(&(&is * a * &is)));
            let mu = eig.eigenvalues.map(f64::ln);
            let u = &eig.eigenvectors;
            let mut local = u.transpose() * &xi * u;
            for i in 0..n {
                for j in 0..n {
                    local[(i, j)] *= jacobi_factor(mu[i] - mu[j]);
                }
            }
            acc += u * local * u.transpose() * w;
        }
        Ok(symmetrize(&(&s * acc * &s)))
    }
}
