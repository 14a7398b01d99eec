//! The rotation group SO(3).
//!
//! Points are 3x3 rotation matrices; tangents are stored base-relative as the
//! skew-symmetric matrix `W = q^T v` of an ambient tangent `v` at `q`. The
//! metric is `<A, B> = tr(A^T B) / 2`, under which the three raw skew
//! generators are orthonormal and tangent norms equal rotation angles, so
//! `distance(q, exp_q(W)) = |W|`.

use nalgebra::{Matrix3, Matrix6, Vector3};

use super::{GeometryError, Manifold, CUT_LOCUS_MARGIN, INPUT_TOLERANCE};

/// Orthogonality drift beyond this triggers re-projection onto SO(3).
const DRIFT_TOLERANCE: f64 = 1e-12;

/// A rotation matrix, kept orthogonal by polar projection.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationPoint {
    mat: Matrix3<f64>,
}

impl RotationPoint {
    /// Accepts matrices within [`INPUT_TOLERANCE`] of orthogonality (and with
    /// positive determinant) and projects them onto the group.
    pub fn new(mat: Matrix3<f64>) -> Result<Self, GeometryError> {
        let defect = orthogonality_defect(&mat);
        if defect > INPUT_TOLERANCE {
            return Err(GeometryError::NotOrthogonal { defect });
        }
        let det = mat.determinant();
        if det <= 0.0 {
            return Err(GeometryError::NotARotation { det });
        }
        Ok(Self {
            mat: reproject_if_drifted(mat),
        })
    }

    pub fn identity() -> Self {
        Self {
            mat: Matrix3::identity(),
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        self.mat
    }

    /// `max |R^T R - I|`, for constraint checks.
    pub fn orthogonality_defect(&self) -> f64 {
        orthogonality_defect(&self.mat)
    }
}

/// A tangent vector in base-relative form: the skew-symmetric matrix
/// `W = q^T v`. The base is passed to the operations, not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationTangent {
    skew: Matrix3<f64>,
}

impl RotationTangent {
    /// Accepts matrices within [`INPUT_TOLERANCE`] of skew symmetry and
    /// projects the symmetric part away.
    pub fn new(skew: Matrix3<f64>) -> Result<Self, GeometryError> {
        let defect = (skew + skew.transpose()).abs().max();
        if defect > INPUT_TOLERANCE {
            return Err(GeometryError::NotSkew { defect });
        }
        Ok(Self {
            skew: (skew - skew.transpose()) * 0.5,
        })
    }

    /// Base-relative form of an ambient tangent matrix `v` at `base`:
    /// `W = base^T v`, which must be skew.
    pub fn from_ambient(base: &RotationPoint, v: &Matrix3<f64>) -> Result<Self, GeometryError> {
        Self::new(base.mat.transpose() * v)
    }

    pub fn from_vector(w: Vector3<f64>) -> Self {
        Self { skew: hat(&w) }
    }

    pub fn skew(&self) -> Matrix3<f64> {
        self.skew
    }

    /// Axis-times-angle vector of the skew matrix.
    pub fn vector(&self) -> Vector3<f64> {
        vee(&self.skew)
    }

    /// The ambient tangent matrix `v = base * W` at `base`.
    pub fn ambient(&self, base: &RotationPoint) -> Matrix3<f64> {
        base.mat * self.skew
    }
}

/// Zero-sized tag implementing [`Manifold`] for SO(3).
#[derive(Debug, Clone, Copy)]
pub struct So3;

pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

fn orthogonality_defect(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).abs().max()
}

/// Polar projection onto SO(3): the orthogonal factor of the SVD.
fn polar_project(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let vt = svd.v_t.expect("svd requested v_t");
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        // flip the weakest direction to stay in the proper rotations
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * vt;
    }
    r
}

fn reproject_if_drifted(m: Matrix3<f64>) -> Matrix3<f64> {
    if orthogonality_defect(&m) > DRIFT_TOLERANCE {
        polar_project(&m)
    } else {
        m
    }
}

/// Closed-form exponential of a skew matrix with axis-angle vector `w`.
pub fn rodrigues(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let k = hat(w);
    let (a, b) = if theta < 1e-4 {
        let t2 = theta * theta;
        (
            1.0 - t2 / 6.0 + t2 * t2 / 120.0,
            0.5 - t2 / 24.0 + t2 * t2 / 720.0,
        )
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    };
    Matrix3::identity() + k * a + k * k * b
}

/// General 3x3 matrix exponential (scaling and squaring with Pade
/// approximation). Agrees with [`rodrigues`] on skew input.
pub fn matrix_exp(x: &Matrix3<f64>) -> Matrix3<f64> {
    x.exp()
}

/// Directional derivative of the matrix exponential at `x` along `e`: the
/// top-right block of the exponential of the 6x6 block matrix
/// `[[x, e], [0, x]]`.
pub fn dexp_mathias(x: &Matrix3<f64>, e: &Matrix3<f64>) -> Matrix3<f64> {
    let mut block = Matrix6::<f64>::zeros();
    block.fixed_view_mut::<3, 3>(0, 0).copy_from(x);
    block.fixed_view_mut::<3, 3>(0, 3).copy_from(e);
    block.fixed_view_mut::<3, 3>(3, 3).copy_from(x);
    let full = block.exp();
    full.fixed_view::<3, 3>(0, 3).into_owned()
}

/// `exp_q(W) = q expm(W)`, via the Rodrigues closed form.
pub fn exp(base: &RotationPoint, v: &RotationTangent) -> RotationPoint {
    let rot = rodrigues(&v.vector());
    RotationPoint {
        mat: reproject_if_drifted(base.mat * rot),
    }
}

/// Principal logarithm `logm(q^T p)` as a base-relative skew matrix. Errors
/// within [`CUT_LOCUS_MARGIN`] of rotation angle pi.
pub fn log(base: &RotationPoint, target: &RotationPoint) -> Result<RotationTangent, GeometryError> {
    let rel = base.mat.transpose() * target.mat;
    let cos = ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let anti = (rel - rel.transpose()) * 0.5;
    let w = vee(&anti);
    let sin = w.norm();
    let angle = sin.atan2(cos);
    if angle > std::f64::consts::PI - CUT_LOCUS_MARGIN {
        return Err(GeometryError::CutLocus { angle });
    }
    if angle < 1e-10 {
        // logm(R) = antisymmetric part to third order in the angle
        return Ok(RotationTangent { skew: anti });
    }
    if angle < 3.0 {
        return Ok(RotationTangent {
            skew: anti * (angle / sin),
        });
    }
    // Near pi the antisymmetric part degrades; recover the axis from the
    // symmetric part, using the antisymmetric part only for the signs.
    let outer = Matrix3::identity()
        + (rel + rel.transpose() - Matrix3::identity() * (1.0 + cos))
            * (1.0 / (1.0 - cos) * 0.5)
            * 2.0;
    // outer == axis * axis^T; take the strongest column and fix the sign
    let diag = Vector3::new(outer[(0, 0)], outer[(1, 1)], outer[(2, 2)]);
    let lead = (0..3)
        .max_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap())
        .unwrap();
    let mut axis = Vector3::new(outer[(0, lead)], outer[(1, lead)], outer[(2, lead)]);
    axis /= axis.norm();
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    Ok(RotationTangent {
        skew: hat(&(axis * angle)),
    })
}

/// Geodesic distance: the rotation angle of `a^T b`.
pub fn distance(a: &RotationPoint, b: &RotationPoint) -> f64 {
    let rel = a.mat.transpose() * b.mat;
    let cos = ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let sin = vee(&((rel - rel.transpose()) * 0.5)).norm();
    sin.atan2(cos)
}

/// Chordal alternative to the angle metric: `|a - b|_F`.
pub fn frobenius_distance(a: &RotationPoint, b: &RotationPoint) -> f64 {
    (a.mat - b.mat).norm()
}

impl Manifold for So3 {
    const NAME: &'static str = "so3";
    const TANGENT_DIM: usize = 3;

    type Point = RotationPoint;
    type Tangent = RotationTangent;

    fn exp(base: &RotationPoint, v: &RotationTangent) -> RotationPoint {
        exp(base, v)
    }

    fn log(base: &RotationPoint, target: &RotationPoint) -> Result<RotationTangent, GeometryError> {
        log(base, target)
    }

    fn distance(a: &RotationPoint, b: &RotationPoint) -> f64 {
        distance(a, b)
    }

    fn inner(u: &RotationTangent, v: &RotationTangent) -> f64 {
        (u.skew.transpose() * v.skew).trace() * 0.5
    }

    fn zero_tangent() -> RotationTangent {
        RotationTangent {
            skew: Matrix3::zeros(),
        }
    }

    fn scale(v: &RotationTangent, s: f64) -> RotationTangent {
        RotationTangent { skew: v.skew * s }
    }

    fn axpy(acc: &mut RotationTangent, s: f64, v: &RotationTangent) {
        acc.skew += v.skew * s;
    }

    /// The three skew generators, orthonormal under the chosen metric. They
    /// are base-relative, so the same frame serves every base point.
    fn frame(_base: &RotationPoint) -> Vec<RotationTangent> {
        vec![
            RotationTangent::from_vector(Vector3::x()),
            RotationTangent::from_vector(Vector3::y()),
            RotationTangent::from_vector(Vector3::z()),
        ]
    }

    fn point_coords(p: &RotationPoint) -> Vec<f64> {
        // row-major
        (0..3)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .map(|(r, c)| p.mat[(r, c)])
            .collect()
    }

    fn point_from_coords(coords: &[f64]) -> Result<RotationPoint, GeometryError> {
        if coords.len() != 9 {
            return Err(GeometryError::CoordinateLength {
                expected: 9,
                got: coords.len(),
            });
        }
        RotationPoint::new(Matrix3::from_row_slice(coords))
    }

    fn tangent_coords(v: &RotationTangent) -> Vec<f64> {
        (0..3)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .map(|(r, c)| v.skew[(r, c)])
            .collect()
    }

    fn tangent_from_coords(
        _base: &RotationPoint,
        coords: &[f64],
    ) -> Result<RotationTangent, GeometryError> {
        if coords.len() != 9 {
            return Err(GeometryError::CoordinateLength {
                expected: 9,
                got: coords.len(),
            });
        }
        RotationTangent::new(Matrix3::from_row_slice(coords))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_vector(rng: &mut StdRng, scale: f64) -> Vector3<f64> {
        Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalize()
            * rng.gen_range(0.0..scale)
    }

    #[test]
    fn zero_tangent_returns_base() {
        let q = RotationPoint::new(rodrigues(&Vector3::new(0.3, -0.2, 0.8))).unwrap();
        let p = exp(&q, &So3::zero_tangent());
        assert!((p.matrix() - q.matrix()).abs().max() < 1e-15);
    }

    #[test]
    fn quarter_turn_about_z() {
        let q = RotationPoint::identity();
        let v = RotationTangent::from_vector(Vector3::new(0.0, 0.0, FRAC_PI_2));
        let p = exp(&q, &v);
        let first_column = p.matrix().column(0).into_owned();
        assert!((first_column - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn rodrigues_agrees_with_general_exponential() {
        // the two exponential routes must agree on skew input
        let mut rng = StdRng::seed_from_u64(21);
        for _ in 0..50 {
            let w = random_vector(&mut rng, PI);
            let closed = rodrigues(&w);
            let general = matrix_exp(&hat(&w));
            assert!((closed - general).abs().max() < 1e-12);
        }
    }

    #[test]
    fn exp_log_round_trip_moderate_angle() {
        let mut rng = StdRng::seed_from_u64(4);
        for _ in 0..50 {
            let q = RotationPoint::new(rodrigues(&random_vector(&mut rng, PI))).unwrap();
            let w = random_vector(&mut rng, 0.4);
            let v = RotationTangent::from_vector(w);
            let p = exp(&q, &v);
            let back = log(&q, &p).unwrap();
            assert!((back.vector() - w).norm() < 1e-12);
            assert!((distance(&q, &p) - w.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn log_branch_near_pi() {
        let mut rng = StdRng::seed_from_u64(6);
        for _ in 0..20 {
            let q = RotationPoint::identity();
            let axis = random_vector(&mut rng, 1.0).normalize();
            let w = axis * 3.1; // beyond the antisymmetric-part branch
            let p = exp(&q, &RotationTangent::from_vector(w));
            let back = log(&q, &p).unwrap();
            assert!((back.vector() - w).norm() < 1e-10);
        }
    }

    #[test]
    fn log_at_cut_locus_fails() {
        let q = RotationPoint::identity();
        let p = exp(
            &q,
            &RotationTangent::from_vector(Vector3::new(PI, 0.0, 0.0)),
        );
        assert!(matches!(log(&q, &p), Err(GeometryError::CutLocus { .. })));
    }

    #[test]
    fn distance_of_quarter_turn() {
        let q = RotationPoint::identity();
        let p = exp(
            &q,
            &RotationTangent::from_vector(Vector3::new(0.0, 0.0, FRAC_PI_2)),
        );
        assert!((distance(&q, &p) - FRAC_PI_2).abs() < 1e-14);
        assert_eq!(distance(&q, &q), 0.0);
    }

    #[test]
    fn mathias_at_zero_is_identity_map() {
        let e = Matrix3::new(0.1, -0.4, 0.2, 0.3, 0.0, -0.6, 0.5, 0.2, -0.1);
        let out = dexp_mathias(&Matrix3::zeros(), &e);
        assert!((out - e).abs().max() < 1e-14);
    }

    #[test]
    fn mathias_commuting_case() {
        let x = hat(&Vector3::new(0.4, -0.2, 0.7));
        let out = dexp_mathias(&x, &x);
        let expected = matrix_exp(&x) * x;
        assert!((out - expected).abs().max() < 1e-12);
    }

    #[test]
    fn mathias_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(8);
        let h = 1e-5;
        for _ in 0..10 {
            let x = hat(&random_vector(&mut rng, 1.2));
            let e = hat(&random_vector(&mut rng, 1.0));
            let out = dexp_mathias(&x, &e);
            let fd = (matrix_exp(&(x + e * h)) - matrix_exp(&(x - e * h))) / (2.0 * h);
            assert!((out - fd).abs().max() < 1e-6);
        }
    }

    #[test]
    fn constructors_enforce_constraints() {
        // defect beyond the input tolerance
        let bad = Matrix3::identity() * 1.001;
        assert!(matches!(
            RotationPoint::new(bad),
            Err(GeometryError::NotOrthogonal { .. })
        ));
        // reflections are rejected
        let mut reflect = Matrix3::identity();
        reflect[(2, 2)] = -1.0;
        assert!(matches!(
            RotationPoint::new(reflect),
            Err(GeometryError::NotARotation { .. })
        ));
        // mild drift is projected back onto the group
        let drifted = rodrigues(&Vector3::new(0.2, 0.1, -0.3)) * (1.0 + 1e-9);
        let p = RotationPoint::new(drifted).unwrap();
        assert!(p.orthogonality_defect() < 1e-12);

        let skewish = Matrix3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.5, 0.0);
        assert!(matches!(
            RotationTangent::new(skewish),
            Err(GeometryError::NotSkew { .. })
        ));
    }

    #[test]
    fn ambient_conversion_round_trips() {
        let q = RotationPoint::new(rodrigues(&Vector3::new(0.5, 0.1, -0.2))).unwrap();
        let w = RotationTangent::from_vector(Vector3::new(-0.3, 0.8, 0.4));
        let ambient = w.ambient(&q);
        let back = RotationTangent::from_ambient(&q, &ambient).unwrap();
        assert!((back.skew() - w.skew()).abs().max() < 1e-14);
    }

    #[test]
    fn frame_is_orthonormal() {
        let frame = So3::frame(&RotationPoint::identity());
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((So3::inner(&frame[i], &frame[j]) - target).abs() < 1e-15);
            }
        }
    }
}
