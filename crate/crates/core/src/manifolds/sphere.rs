//! The unit sphere S^2 embedded in R^3.
//!
//! Exponential map: `exp_q(v) = cos(|v|) q + sin(|v|) v/|v|`.
//! Logarithm: the angle between the points times the unit tangent direction
//! of the connecting great circle. Both are evaluated through `atan2` so that
//! small and large angles stay accurate.

use nalgebra::Vector3;

use super::{GeometryError, Manifold, CUT_LOCUS_MARGIN, INPUT_TOLERANCE};

/// Unit-norm (or tangency) drift beyond this triggers re-projection; cleaner
/// inputs are stored bit-identically.
const DRIFT_TOLERANCE: f64 = 1e-12;

/// A point on the unit sphere. Stored normalized to machine precision.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    coords: Vector3<f64>,
}

impl SpherePoint {
    /// Accepts vectors within [`INPUT_TOLERANCE`] of unit length and
    /// renormalizes the ones that have measurably drifted.
    pub fn new(coords: Vector3<f64>) -> Result<Self, GeometryError> {
        let norm = coords.norm();
        if (norm - 1.0).abs() > INPUT_TOLERANCE {
            return Err(GeometryError::NotUnit { norm });
        }
        let coords = if (norm - 1.0).abs() > DRIFT_TOLERANCE {
            coords / norm
        } else {
            coords
        };
        Ok(Self { coords })
    }

    pub fn coords(&self) -> Vector3<f64> {
        self.coords
    }

    /// Unit-length defect, for constraint checks.
    pub fn unit_defect(&self) -> f64 {
        (self.coords.norm() - 1.0).abs()
    }
}

/// A tangent vector to the sphere, stored as the ambient 3-vector orthogonal
/// to its base point. The base is passed to the operations, not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereTangent {
    vec: Vector3<f64>,
}

impl SphereTangent {
    /// Validates tangency at `base` (inner product below [`INPUT_TOLERANCE`],
    /// relative to the vector length) and projects measurable drift out.
    pub fn at(base: &SpherePoint, vec: Vector3<f64>) -> Result<Self, GeometryError> {
        let defect = base.coords.dot(&vec).abs();
        if defect > INPUT_TOLERANCE * vec.norm().max(1.0) {
            return Err(GeometryError::NotTangent { defect });
        }
        let vec = if defect > DRIFT_TOLERANCE * vec.norm().max(1.0) {
            vec - base.coords * base.coords.dot(&vec)
        } else {
            vec
        };
        Ok(Self { vec })
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.vec
    }
}

/// Zero-sized tag implementing [`Manifold`] for the unit sphere.
#[derive(Debug, Clone, Copy)]
pub struct Sphere;

/// `exp_q(v)`; the zero tangent returns `q` (the removable singularity of the
/// closed form). The result is renormalized.
pub fn exp(base: &SpherePoint, v: &SphereTangent) -> SpherePoint {
    let theta = v.vec.norm();
    if theta == 0.0 {
        return base.clone();
    }
    let out = base.coords * theta.cos() + v.vec * (theta.sin() / theta);
    SpherePoint {
        coords: out.normalize(),
    }
}

/// `log_q(p)`: tangent at `q` pointing to `p` with norm equal to the angle
/// between them. Errors within [`CUT_LOCUS_MARGIN`] of the antipode.
pub fn log(base: &SpherePoint, target: &SpherePoint) -> Result<SphereTangent, GeometryError> {
    let cos = base.coords.dot(&target.coords).clamp(-1.0, 1.0);
    let perp = target.coords - base.coords * cos;
    let sin = perp.norm();
    let angle = sin.atan2(cos);
    if angle > std::f64::consts::PI - CUT_LOCUS_MARGIN {
        return Err(GeometryError::CutLocus { angle });
    }
    if sin == 0.0 {
        return Ok(SphereTangent {
            vec: Vector3::zeros(),
        });
    }
    Ok(SphereTangent {
        vec: perp * (angle / sin),
    })
}

/// Great-circle distance, `atan2` of the cross and dot products.
pub fn distance(a: &SpherePoint, b: &SpherePoint) -> f64 {
    let cross = a.coords.cross(&b.coords).norm();
    let dot = a.coords.dot(&b.coords);
    cross.atan2(dot)
}

/// Orthonormal tangent pair at `base`, built deterministically: the standard
/// axis following the largest-magnitude coordinate is projected onto the
/// tangent plane, the second vector completes it by a cross product.
pub fn frame(base: &SpherePoint) -> [SphereTangent; 2] {
    let q = base.coords;
    let largest = (0..3)
        .max_by(|&i, &j| q[i].abs().partial_cmp(&q[j].abs()).unwrap())
        .unwrap();
    let mut axis = Vector3::zeros();
    axis[(largest + 1) % 3] = 1.0;
    let e1 = (axis - q * q.dot(&axis)).normalize();
    let e2 = q.cross(&e1);
    [SphereTangent { vec: e1 }, SphereTangent { vec: e2 }]
}

impl Manifold for Sphere {
    const NAME: &'static str = "s2";
    const TANGENT_DIM: usize = 2;

    type Point = SpherePoint;
    type Tangent = SphereTangent;

    fn exp(base: &SpherePoint, v: &SphereTangent) -> SpherePoint {
        exp(base, v)
    }

    fn log(base: &SpherePoint, target: &SpherePoint) -> Result<SphereTangent, GeometryError> {
        log(base, target)
    }

    fn distance(a: &SpherePoint, b: &SpherePoint) -> f64 {
        distance(a, b)
    }

    fn inner(u: &SphereTangent, v: &SphereTangent) -> f64 {
        u.vec.dot(&v.vec)
    }

    fn zero_tangent() -> SphereTangent {
        SphereTangent {
            vec: Vector3::zeros(),
        }
    }

    fn scale(v: &SphereTangent, s: f64) -> SphereTangent {
        SphereTangent { vec: v.vec * s }
    }

    fn axpy(acc: &mut SphereTangent, s: f64, v: &SphereTangent) {
        acc.vec += v.vec * s;
    }

    fn frame(base: &SpherePoint) -> Vec<SphereTangent> {
        frame(base).to_vec()
    }

    fn point_coords(p: &SpherePoint) -> Vec<f64> {
        p.coords.iter().copied().collect()
    }

    fn point_from_coords(coords: &[f64]) -> Result<SpherePoint, GeometryError> {
        if coords.len() != 3 {
            return Err(GeometryError::CoordinateLength {
                expected: 3,
                got: coords.len(),
            });
        }
        SpherePoint::new(Vector3::new(coords[0], coords[1], coords[2]))
    }

    fn tangent_coords(v: &SphereTangent) -> Vec<f64> {
        v.vec.iter().copied().collect()
    }

    fn tangent_from_coords(
        base: &SpherePoint,
        coords: &[f64],
    ) -> Result<SphereTangent, GeometryError> {
        if coords.len() != 3 {
            return Err(GeometryError::CoordinateLength {
                expected: 3,
                got: coords.len(),
            });
        }
        SphereTangent::at(base, Vector3::new(coords[0], coords[1], coords[2]))
    }
}
