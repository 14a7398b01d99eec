//! Riemannian primitives for the two supported manifolds: the unit sphere and
//! the rotation group SO(3).
//!
//! Points and tangents are newtypes that validate their defining constraints
//! on construction and re-project away numerical drift. Tangents store only
//! the vector data; operations take the base point explicitly, as the maps do.

use std::fmt::Debug;

use thiserror::Error;

pub mod rotation;
pub mod sphere;

pub use rotation::{RotationPoint, RotationTangent, So3};
pub use sphere::{Sphere, SpherePoint, SphereTangent};

/// Logs refuse inputs beyond this angular distance from the base point.
pub const CUT_LOCUS_MARGIN: f64 = 1e-6;

/// Default step for the central-difference transport of derivatives; balances
/// truncation and roundoff for unit-scale data.
pub const DEFAULT_TRANSPORT_STEP: f64 = 1e-5;

/// Constraint violations accepted from outside before re-projection kicks in.
pub const INPUT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("vector has norm {norm}, too far from unit length")]
    NotUnit { norm: f64 },
    #[error("matrix is not orthogonal: max |R^T R - I| = {defect:e}")]
    NotOrthogonal { defect: f64 },
    #[error("matrix has determinant {det}, not a proper rotation")]
    NotARotation { det: f64 },
    #[error("vector is not tangent at the base point: |<q, v>| = {defect:e}")]
    NotTangent { defect: f64 },
    #[error("matrix is not skew-symmetric: max |S + S^T| = {defect:e}")]
    NotSkew { defect: f64 },
    #[error(
        "log map undefined: angle {angle} is within {CUT_LOCUS_MARGIN:e} of the cut locus at pi"
    )]
    CutLocus { angle: f64 },
    #[error("expected {expected} coordinates, got {got}")]
    CoordinateLength { expected: usize, got: usize },
}

/// A Riemannian manifold with closed-form exponential and logarithm maps.
///
/// Tangent coordinates returned by [`Manifold::frame`] are orthonormal with
/// respect to [`Manifold::inner`], and distances agree with tangent norms:
/// `distance(q, exp(q, v)) = norm(v)` inside the injectivity radius.
pub trait Manifold {
    const NAME: &'static str;
    /// Intrinsic dimension of the tangent space.
    const TANGENT_DIM: usize;

    type Point: Clone + Debug + PartialEq + Send + Sync;
    type Tangent: Clone + Debug + Send + Sync;

    fn exp(base: &Self::Point, v: &Self::Tangent) -> Self::Point;
    fn log(base: &Self::Point, target: &Self::Point) -> Result<Self::Tangent, GeometryError>;
    fn distance(a: &Self::Point, b: &Self::Point) -> f64;

    fn inner(u: &Self::Tangent, v: &Self::Tangent) -> f64;
    fn zero_tangent() -> Self::Tangent;
    fn scale(v: &Self::Tangent, s: f64) -> Self::Tangent;
    fn axpy(acc: &mut Self::Tangent, s: f64, v: &Self::Tangent);

    /// Deterministic orthonormal basis of the tangent space at `base`.
    fn frame(base: &Self::Point) -> Vec<Self::Tangent>;

    fn point_coords(p: &Self::Point) -> Vec<f64>;
    fn point_from_coords(coords: &[f64]) -> Result<Self::Point, GeometryError>;
    fn tangent_coords(v: &Self::Tangent) -> Vec<f64>;
    fn tangent_from_coords(
        base: &Self::Point,
        coords: &[f64],
    ) -> Result<Self::Tangent, GeometryError>;

    fn norm(v: &Self::Tangent) -> f64 {
        Self::inner(v, v).sqrt()
    }
}

/// Geodesic distance between two points.
pub fn geodesic_distance<M: Manifold>(a: &M::Point, b: &M::Point) -> f64 {
    M::distance(a, b)
}

#[derive(Debug, Error)]
pub enum KarcherError<P: Debug> {
    #[error("cannot average an empty point set")]
    Empty,
    #[error("log map failed while averaging: {0}")]
    Geometry(#[from] GeometryError),
    #[error("no convergence after {iterations} iterations: gradient norm {residual:e}")]
    NonConvergence {
        last_iterate: P,
        residual: f64,
        iterations: usize,
    },
}

const KARCHER_MAX_ITERATIONS: usize = 200;
const KARCHER_TOLERANCE: f64 = 1e-12;

/// Riemannian barycenter by fixed-point iteration `q <- exp_q(mean log_q(p_j))`
/// with unit step. Converges for point sets clustered in a geodesically convex
/// region; the caller is responsible for that clustering.
pub fn karcher_mean<M: Manifold>(points: &[M::Point]) -> Result<M::Point, KarcherError<M::Point>> {
    if points.is_empty() {
        return Err(KarcherError::Empty);
    }
    let weight = 1.0 / points.len() as f64;
    let mut q = points[0].clone();
    for _ in 0..KARCHER_MAX_ITERATIONS {
        let mut grad = M::zero_tangent();
        for p in points {
            let log = M::log(&q, p)?;
            M::axpy(&mut grad, weight, &log);
        }
        let residual = M::norm(&grad);
        if residual <= KARCHER_TOLERANCE {
            return Ok(q);
        }
        q = M::exp(&q, &grad);
    }
    let mut grad = M::zero_tangent();
    for p in points {
        let log = M::log(&q, p)?;
        M::axpy(&mut grad, weight, &log);
    }
    Err(KarcherError::NonConvergence {
        residual: M::norm(&grad),
        last_iterate: q,
        iterations: KARCHER_MAX_ITERATIONS,
    })
}

/// Transport a tangent vector `v` at `at` into the tangent space at `base` by
/// differentiating the log map with central differences:
/// `(log_base(exp_at(dt v)) - log_base(exp_at(-dt v))) / (2 dt)`.
/// Truncation error is O(dt^2).
pub fn transport_derivative<M: Manifold>(
    base: &M::Point,
    at: &M::Point,
    v: &M::Tangent,
    dt: f64,
) -> Result<M::Tangent, GeometryError> {
    assert!(dt > 0.0, "transport step must be positive");
    let plus = M::exp(at, &M::scale(v, dt));
    let minus = M::exp(at, &M::scale(v, -dt));
    let log_plus = M::log(base, &plus)?;
    let log_minus = M::log(base, &minus)?;
    let half = 1.0 / (2.0 * dt);
    let mut out = M::scale(&log_plus, half);
    M::axpy(&mut out, -half, &log_minus);
    Ok(out)
}
