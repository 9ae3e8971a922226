//! Riemannian primitives for Euclidean space, the unit sphere, and SPD
//! matrices with the affine-invariant metric.
//!
//! Points and tangent vectors are stored in ambient coordinates: column
//! vectors for `ℝⁿ` and `S^{n-1}`, symmetric matrices for `SPD(n)`. Every
//! operation is a pure function of its arguments.

mod spd;
mod sphere;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigenvalues, symmetrize};

pub use spd::CURVATURE_SCALE as SPD_CURVATURE_SCALE;

/// Stand-in for an infinite injectivity radius.
pub const INJECTIVITY_CAP: f64 = 1e12;

const POINT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    Euclidean,
    Sphere,
    Spd,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    kind: ManifoldKind,
    coords: DMatrix<f64>,
}

impl Point {
    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    /// Flattened ambient coordinates (column-major for matrices).
    pub fn to_vec(&self) -> Vec<f64> {
        self.coords.as_slice().to_vec()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tangent {
    base: Point,
    vector: DMatrix<f64>,
}

impl Tangent {
    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn vector(&self) -> &DMatrix<f64> {
        &self.vector
    }

    pub fn scaled(&self, s: f64) -> Tangent {
        Tangent { base: self.base.clone(), vector: &self.vector * s }
    }

    pub fn add(&self, other: &Tangent) -> Result<Tangent> {
        same_base(self, other)?;
        Ok(Tangent { base: self.base.clone(), vector: &self.vector + &other.vector })
    }

    pub fn sub(&self, other: &Tangent) -> Result<Tangent> {
        same_base(self, other)?;
        Ok(Tangent { base: self.base.clone(), vector: &self.vector - &other.vector })
    }
}

fn same_base(u: &Tangent, v: &Tangent) -> Result<()> {
    if u.base != v.base {
        return Err(Error::invalid("tangent vectors live at different base points"));
    }
    Ok(())
}

/// A manifold together with its metric and geodesic toolkit.
///
/// `size` is the ambient size: the vector length for `ℝⁿ` and `S^{n-1}`,
/// the matrix order for `SPD(n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    kind: ManifoldKind,
    size: usize,
    injectivity_cap: f64,
}

impl Geometry {
    pub fn euclidean(n: usize) -> Self {
        Self::new(ManifoldKind::Euclidean, n)
    }

    /// The unit sphere `S^{n-1}` embedded in `ℝⁿ`.
    pub fn sphere(n: usize) -> Self {
        Self::new(ManifoldKind::Sphere, n)
    }

    pub fn spd(n: usize) -> Self {
        Self::new(ManifoldKind::Spd, n)
    }

    fn new(kind: ManifoldKind, size: usize) -> Self {
        assert!(size >= 1, "ambient size must be positive");
        if kind == ManifoldKind::Sphere {
            assert!(size >= 2, "the sphere needs an ambient dimension of at least 2");
        }
        Geometry { kind, size, injectivity_cap: INJECTIVITY_CAP }
    }

    pub fn with_injectivity_cap(mut self, cap: f64) -> Self {
        self.injectivity_cap = cap;
        self
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn ambient_size(&self) -> usize {
        self.size
    }

    pub fn injectivity_cap(&self) -> f64 {
        self.injectivity_cap
    }

    /// Intrinsic dimension.
    pub fn dimension(&self) -> usize {
        match self.kind {
            ManifoldKind::Euclidean => self.size,
            ManifoldKind::Sphere => self.size - 1,
            ManifoldKind::Spd => self.size * (self.size + 1) / 2,
        }
    }

    fn ambient_shape(&self) -> (usize, usize) {
        match self.kind {
            ManifoldKind::Euclidean | ManifoldKind::Sphere => (self.size, 1),
            ManifoldKind::Spd => (self.size, self.size),
        }
    }

    /// Validates ambient coordinates and wraps them as a point.
    pub fn point(&self, coords: DMatrix<f64>) -> Result<Point> {
        if coords.shape() != self.ambient_shape() {
            return Err(Error::invalid(format!(
                "expected ambient shape {:?}, got {:?}",
                self.ambient_shape(),
                coords.shape()
            )));
        }
        if !coords.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("non-finite point coordinates"));
        }
        match self.kind {
            ManifoldKind::Euclidean => {}
            ManifoldKind::Sphere => {
                let n = coords.norm();
                if (n - 1.0).abs() > POINT_TOL {
                    return Err(Error::invalid(format!("sphere point has norm {n}")));
                }
            }
            ManifoldKind::Spd => {
                let asym = (&coords - coords.transpose()).amax();
                if asym > POINT_TOL * coords.amax().max(1.0) {
                    return Err(Error::invalid(format!("SPD point is not symmetric ({asym:e})")));
                }
                let min_eig = sym_eigenvalues(&coords).min();
                if !(min_eig > 0.0) {
                    return Err(Error::invalid(format!("SPD point has eigenvalue {min_eig}")));
                }
            }
        }
        Ok(Point { kind: self.kind, coords })
    }

    /// Convenience constructor for vector manifolds.
    pub fn point_from_slice(&self, xs: &[f64]) -> Result<Point> {
        match self.kind {
            ManifoldKind::Spd => {
                if xs.len() != self.size * self.size {
                    return Err(Error::invalid("SPD point needs n*n entries"));
                }
                self.point(DMatrix::from_row_slice(self.size, self.size, xs))
            }
            _ => self.point(DMatrix::from_column_slice(xs.len(), 1, xs)),
        }
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        if p.kind != self.kind || p.coords.shape() != self.ambient_shape() {
            return Err(Error::invalid(format!(
                "point of kind {:?} {:?} does not belong to {:?}({})",
                p.kind,
                p.coords.shape(),
                self.kind,
                self.size
            )));
        }
        if !p.coords.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("non-finite point coordinates"));
        }
        Ok(())
    }

    fn check_tangent(&self, p: &Point, v: &Tangent) -> Result<()> {
        self.check_point(p)?;
        if &v.base != p {
            return Err(Error::invalid("tangent vector is not based at the given point"));
        }
        if !v.vector.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("non-finite tangent coordinates"));
        }
        Ok(())
    }

    /// Projects an ambient array onto `T_p M`.
    pub fn project(&self, p: &Point, ambient: DMatrix<f64>) -> Result<Tangent> {
        self.check_point(p)?;
        if ambient.shape() != self.ambient_shape() {
            return Err(Error::invalid("ambient tangent has the wrong shape"));
        }
        let vector = match self.kind {
            ManifoldKind::Euclidean => ambient,
            ManifoldKind::Sphere => sphere::project(&p.coords, &ambient),
            ManifoldKind::Spd => symmetrize(&ambient),
        };
        Ok(Tangent { base: p.clone(), vector })
    }

    /// Wraps an ambient array as a tangent vector, rejecting non-tangent input.
    pub fn tangent(&self, p: &Point, ambient: DMatrix<f64>) -> Result<Tangent> {
        let t = self.project(p, ambient.clone())?;
        let scale = ambient.amax().max(1.0);
        if (&t.vector - &ambient).amax() > POINT_TOL * scale {
            return Err(Error::invalid("vector is not tangent at the base point"));
        }
        Ok(t)
    }

    pub fn zero(&self, p: &Point) -> Tangent {
        let (r, c) = self.ambient_shape();
        Tangent { base: p.clone(), vector: DMatrix::zeros(r, c) }
    }

    pub fn exp(&self, p: &Point, v: &Tangent) -> Result<Point> {
        self.check_tangent(p, v)?;
        let coords = match self.kind {
            ManifoldKind::Euclidean => &p.coords + &v.vector,
            ManifoldKind::Sphere => sphere::exp(&p.coords, &v.vector),
            ManifoldKind::Spd => spd::exp(&p.coords, &v.vector),
        };
        if !coords.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("exponential map overflowed"));
        }
        Ok(Point { kind: self.kind, coords })
    }

    pub fn log(&self, p: &Point, q: &Point) -> Result<Tangent> {
        self.check_point(p)?;
        self.check_point(q)?;
        let vector = match self.kind {
            ManifoldKind::Euclidean => &q.coords - &p.coords,
            ManifoldKind::Sphere => sphere::log(&p.coords, &q.coords)?,
            ManifoldKind::Spd => spd::log(&p.coords, &q.coords),
        };
        let t = Tangent { base: p.clone(), vector };
        if self.kind != ManifoldKind::Sphere {
            let len = self.norm(&t)?;
            if len >= self.injectivity_radius(p) {
                return Err(Error::BeyondInjectivity(format!(
                    "distance {len} exceeds the injectivity radius"
                )));
            }
        }
        Ok(t)
    }

    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        Ok(match self.kind {
            ManifoldKind::Euclidean => (&p.coords - &q.coords).norm(),
            ManifoldKind::Sphere => sphere::distance(&p.coords, &q.coords),
            ManifoldKind::Spd => spd::distance(&p.coords, &q.coords),
        })
    }

    /// Parallel transport of `v ∈ T_p M` to `T_q M` along the minimizing
    /// geodesic from `p` to `q`.
    pub fn transport(&self, p: &Point, q: &Point, v: &Tangent) -> Result<Tangent> {
        self.check_tangent(p, v)?;
        self.check_point(q)?;
        let vector = match self.kind {
            ManifoldKind::Euclidean => v.vector.clone(),
            ManifoldKind::Sphere => sphere::transport(&p.coords, &q.coords, &v.vector)?,
            ManifoldKind::Spd => {
                let d = spd::distance(&p.coords, &q.coords);
                if d >= self.injectivity_radius(p) {
                    return Err(Error::BeyondInjectivity(format!("distance {d} exceeds the injectivity radius")));
                }
                spd::transport(&p.coords, &q.coords, &v.vector)
            }
        };
        Ok(Tangent { base: q.clone(), vector })
    }

    pub fn inner(&self, u: &Tangent, v: &Tangent) -> Result<f64> {
        same_base(u, v)?;
        self.check_point(&u.base)?;
        Ok(self.inner_raw(&u.base, &u.vector, &v.vector))
    }

    fn inner_raw(&self, p: &Point, u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
        match self.kind {
            ManifoldKind::Euclidean | ManifoldKind::Sphere => u.dot(v),
            ManifoldKind::Spd => spd::inner(&p.coords, u, v),
        }
    }

    pub fn norm(&self, v: &Tangent) -> Result<f64> {
        Ok(self.inner(v, v)?.max(0.0).sqrt())
    }

    pub fn injectivity_radius(&self, _p: &Point) -> f64 {
        match self.kind {
            ManifoldKind::Sphere => std::f64::consts::PI,
            ManifoldKind::Euclidean | ManifoldKind::Spd => self.injectivity_cap,
        }
    }

    /// Upper bound on `d(exp_q u, exp_q v) / ‖u − v‖` over the ball of the
    /// given radius around `p`. Exactly 1 on the non-negatively curved
    /// manifolds; the curvature-comparison bound on `SPD(n)`.
    pub fn spreading_constant(&self, p: &Point, radius: f64) -> Result<f64> {
        self.check_point(p)?;
        if !(radius > 0.0) || radius > self.injectivity_radius(p) {
            return Err(Error::invalid(format!(
                "spreading radius {radius} must lie in (0, {}]",
                self.injectivity_radius(p)
            )));
        }
        Ok(match self.kind {
            ManifoldKind::Euclidean | ManifoldKind::Sphere => 1.0,
            ManifoldKind::Spd => spd::spreading_bound(radius),
        })
    }

    /// Orthonormal frame of `T_p M`.
    pub fn frame(&self, p: &Point) -> Result<Frame> {
        self.check_point(p)?;
        let seeds: Vec<DMatrix<f64>> = match self.kind {
            ManifoldKind::Euclidean | ManifoldKind::Sphere => (0..self.size)
                .map(|i| {
                    let mut e = DMatrix::zeros(self.size, 1);
                    e[(i, 0)] = 1.0;
                    e
                })
                .collect(),
            ManifoldKind::Spd => {
                let n = self.size;
                let mut s = Vec::with_capacity(self.dimension());
                for i in 0..n {
                    let mut e = DMatrix::zeros(n, n);
                    e[(i, i)] = 1.0;
                    s.push(e);
                }
                for i in 0..n {
                    for j in i + 1..n {
                        let mut e = DMatrix::zeros(n, n);
                        e[(i, j)] = 1.0;
                        e[(j, i)] = 1.0;
                        s.push(e);
                    }
                }
                s
            }
        };
        let metric = match self.kind {
            ManifoldKind::Spd => Some(crate::linalg::sym_inv(&p.coords)),
            _ => None,
        };
        let ip = |u: &DMatrix<f64>, v: &DMatrix<f64>| metric_inner(metric.as_ref(), u, v);
        let dim = self.dimension();
        let mut basis: Vec<DMatrix<f64>> = Vec::with_capacity(dim);
        for seed in seeds {
            if basis.len() == dim {
                break;
            }
            let mut v = self.project(p, seed)?.vector;
            // Two passes of modified Gram–Schmidt.
            for _ in 0..2 {
                for b in &basis {
                    let c = ip(b, &v);
                    v -= b * c;
                }
            }
            let n = ip(&v, &v).max(0.0).sqrt();
            if n > 1e-6 {
                basis.push(v / n);
            }
        }
        debug_assert_eq!(basis.len(), dim);
        Ok(Frame { base: p.clone(), metric, basis })
    }

    pub fn tangent_basis(&self, p: &Point) -> Result<Vec<Tangent>> {
        Ok(self.frame(p)?.tangents())
    }

    /// Unit tangent vector at `p` with a uniformly distributed direction.
    pub fn random_unit_tangent<R: Rng>(&self, p: &Point, rng: &mut R) -> Result<Tangent> {
        let frame = self.frame(p)?;
        loop {
            let c = DVector::from_iterator(frame.len(), (0..frame.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let n = c.norm();
            if n > 1e-12 {
                return Ok(frame.from_coords(&(c / n)));
            }
        }
    }

    /// `exp_p(v)` with `v` uniform in the tangent ball of the given radius.
    pub fn sample_in_ball(&self, p: &Point, radius: f64, seed: u64) -> Result<Point> {
        if !(radius > 0.0) || radius >= self.injectivity_radius(p) {
            return Err(Error::invalid(format!(
                "sampling radius {radius} must lie in (0, {})",
                self.injectivity_radius(p)
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dir = self.random_unit_tangent(p, &mut rng)?;
        let u: f64 = rng.random();
        let len = radius * u.powf(1.0 / self.dimension() as f64);
        self.exp(p, &dir.scaled(len))
    }

    /// `exp_p(d·u)` with `u` a uniformly random unit direction.
    pub fn sample_at_distance(&self, p: &Point, d: f64, seed: u64) -> Result<Point> {
        if !(d >= 0.0) || d >= self.injectivity_radius(p) {
            return Err(Error::invalid(format!("distance {d} outside the injectivity ball")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dir = self.random_unit_tangent(p, &mut rng)?;
        self.exp(p, &dir.scaled(d))
    }

    /// Point `ζ(τ) = exp_p(τ·log_p q)` on the minimizing geodesic.
    pub fn geodesic_point(&self, p: &Point, q: &Point, tau: f64) -> Result<Point> {
        let v = self.log(p, q)?;
        self.exp(p, &v.scaled(tau))
    }
}

/// An orthonormal basis of one tangent space, used to express tangent
/// vectors and operators in coordinates.
#[derive(Clone, Debug)]
pub struct Frame {
    base: Point,
    /// `P⁻¹` for SPD frames; `None` means the ambient dot product.
    metric: Option<DMatrix<f64>>,
    basis: Vec<DMatrix<f64>>,
}

fn metric_inner(metric: Option<&DMatrix<f64>>, u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    match metric {
        None => u.dot(v),
        Some(pi) => (pi * u * pi * v).trace(),
    }
}

impl Frame {
    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn vector(&self, i: usize) -> Tangent {
        Tangent { base: self.base.clone(), vector: self.basis[i].clone() }
    }

    pub fn tangents(&self) -> Vec<Tangent> {
        (0..self.len()).map(|i| self.vector(i)).collect()
    }

    fn inner(&self, u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
        metric_inner(self.metric.as_ref(), u, v)
    }

    /// Metric norm of an ambient tangent array at the frame's point.
    pub fn norm_of(&self, v: &DMatrix<f64>) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    pub fn coords(&self, v: &Tangent) -> Result<DVector<f64>> {
        if v.base != self.base {
            return Err(Error::invalid("tangent vector is not based at the frame's point"));
        }
        Ok(self.coords_of(&v.vector))
    }

    /// Coordinates of an ambient tangent array (no base check).
    pub fn coords_of(&self, v: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.basis.iter().map(|b| self.inner(b, v)))
    }

    pub fn from_coords(&self, c: &DVector<f64>) -> Tangent {
        let mut v = self.basis[0].clone() * c[0];
        for (b, ci) in self.basis.iter().zip(c.iter()).skip(1) {
            v += b * *ci;
        }
        Tangent { base: self.base.clone(), vector: v }
    }
}
