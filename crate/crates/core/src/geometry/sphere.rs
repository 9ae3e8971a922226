//! Unit sphere `S^{n-1} ⊂ ℝⁿ` with the round metric, in ambient coordinates.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `⟨p, q⟩ ≤ −1 + ANTIPODE_TOL` is treated as antipodal.
pub(super) const ANTIPODE_TOL: f64 = 1e-12;

fn dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

pub(super) fn project(p: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    v - p * dot(p, v)
}

pub(super) fn normalize(x: DMatrix<f64>) -> DMatrix<f64> {
    let n = x.norm();
    x / n
}

pub(super) fn exp(p: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let nv = v.norm();
    if nv == 0.0 {
        return p.clone();
    }
    normalize(p * nv.cos() + v * (nv.sin() / nv))
}

/// Geodesic distance, `2·atan2(‖p−q‖, ‖p+q‖)`: equal to `arccos⟨p,q⟩` but
/// accurate for nearby and for nearly antipodal points alike.
pub(super) fn distance(p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    2.0 * (p - q).norm().atan2((p + q).norm())
}

pub(super) fn log(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let c = dot(p, q);
    if c <= -1.0 + ANTIPODE_TOL {
        return Err(Error::BeyondInjectivity(format!(
            "sphere points are (nearly) antipodal: <p,q> = {c}"
        )));
    }
    let w = project(p, q);
    let nw = w.norm();
    if nw == 0.0 {
        return Ok(DMatrix::zeros(p.nrows(), 1));
    }
    Ok(w * (distance(p, q) / nw))
}

/// Parallel transport along the minimizing great circle from `p` to `q`:
/// the component of `v` in the plane of the geodesic is rotated with it,
/// the orthogonal complement is left unchanged.
pub(super) fn transport(p: &DMatrix<f64>, q: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dir = log(p, q)?;
    let theta = dir.norm();
    if theta == 0.0 {
        return Ok(project(q, v));
    }
    let u = dir / theta;
    let a = dot(&u, v);
    let moved = v - &u * a + (&u * theta.cos() - p * theta.sin()) * a;
    Ok(project(q, &moved))
}
