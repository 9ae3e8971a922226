//! Symmetric positive-definite matrices with the affine-invariant metric
//! `⟨U, V⟩_P = tr(P⁻¹ U P⁻¹ V)`. Every matrix function goes through a
//! symmetric eigendecomposition.

use nalgebra::DMatrix;

use crate::linalg::{sym_exp, sym_inv, sym_inv_sqrt, sym_log, sym_sqrt, symmetrize};

/// Magnitude bound on the sectional curvature scale used by the spreading
/// constant (curvatures lie in `[−1/2, 0]`).
pub const CURVATURE_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub(super) fn exp(p: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let s = sym_sqrt(p);
    let is = sym_inv_sqrt(p);
    symmetrize(&(&s * sym_exp(&(&is * v * &is)) * &s))
}

pub(super) fn log(p: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let s = sym_sqrt(p);
    let is = sym_inv_sqrt(p);
    symmetrize(&(&s * sym_log(&(&is * q * &is)) * &s))
}

pub(super) fn distance(p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    let is = sym_inv_sqrt(p);
    sym_log(&(&is * q * &is)).norm()
}

pub(super) fn inner(p: &DMatrix<f64>, u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let pi = sym_inv(p);
    (&pi * u * &pi * v).trace()
}

/// `E V Eᵀ` with `E = P^{1/2} (P^{-1/2} Q P^{-1/2})^{1/2} P^{-1/2}`.
pub(super) fn transport(p: &DMatrix<f64>, q: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let s = sym_sqrt(p);
    let is = sym_inv_sqrt(p);
    let e = &s * sym_sqrt(&(&is * q * &is)) * &is;
    symmetrize(&(&e * v * e.transpose()))
}

/// Comparison bound `sinh(c·2R)/(c·2R)` for the spreading constant over a
/// ball of radius `R`.
pub(super) fn spreading_bound(radius: f64) -> f64 {
    let x = CURVATURE_SCALE * 2.0 * radius;
    if x < 1e-8 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}
