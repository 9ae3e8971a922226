//! Dense helpers shared by the geometry and the solver: symmetric matrix
//! functions via eigendecomposition, spectral norms, and certified solves.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative threshold below which an operator is treated as singular.
pub const SINGULAR_RATIO: f64 = 1e-12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Applies a scalar function to a symmetric matrix through its eigenvalues.
pub fn sym_apply(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mapped = eig.eigenvalues.map(f);
    let u = &eig.eigenvectors;
    symmetrize(&(u * DMatrix::from_diagonal(&mapped) * u.transpose()))
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    SymmetricEigen::new(symmetrize(m)).eigenvalues
}

pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(m, f64::sqrt)
}

pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(m, |x| 1.0 / x.sqrt())
}

pub fn sym_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(m, f64::exp)
}

pub fn sym_log(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(m, f64::ln)
}

pub fn sym_inv(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_apply(m, |x| 1.0 / x)
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Spectral condition number `σ_max / σ_min`.
pub fn condition_number(m: &DMatrix<f64>) -> Result<f64> {
    let sv = singular_values(m);
    let (max, min) = match (sv.first(), sv.last()) {
        (Some(&max), Some(&min)) => (max, min),
        _ => return Err(Error::invalid("empty operator")),
    };
    if !(max > 0.0) || min <= SINGULAR_RATIO * max {
        return Err(Error::Singular { ratio: if max > 0.0 { min / max } else { 0.0 } });
    }
    Ok(max / min)
}

/// Solves `m x = rhs` by LU with one step of iterative refinement, and
/// certifies the backward error `‖m x − rhs‖ ≤ 1e-12 (‖rhs‖ + ‖m‖ ‖x‖)`.
pub fn solve_certified(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if m.nrows() != m.ncols() || m.nrows() != rhs.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {}x{} operator, rhs of length {}",
            m.nrows(),
            m.ncols(),
            rhs.len()
        )));
    }
    if !m.iter().all(|x| x.is_finite()) || !rhs.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid("non-finite entries in linear system"));
    }
    let sv = singular_values(m);
    let max = sv.first().copied().unwrap_or(0.0);
    let min = sv.last().copied().unwrap_or(0.0);
    if !(max > 0.0) || min <= SINGULAR_RATIO * max {
        return Err(Error::Singular { ratio: if max > 0.0 { min / max } else { 0.0 } });
    }
    let lu = m.clone().lu();
    let mut x = lu.solve(rhs).ok_or(Error::Singular { ratio: min / max })?;
    let r = rhs - m * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let resid = (m * &x - rhs).norm();
    let scale = rhs.norm() + max * x.norm();
    if resid > 1e-12 * scale {
        return Err(Error::Singular { ratio: min / max });
    }
    Ok(x)
}
