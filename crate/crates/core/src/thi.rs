//! Tangent-space Hermite interpolation: pull manifold samples (and their
//! derivatives) back through the log map at the Karcher mean of the data, fit
//! every tangent coordinate with a shared G-Arnoldi polynomial basis, and push
//! query evaluations forward through the exponential map.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::garnoldi::{self, FitError, GArnoldiModel, SelectionSpec};
use crate::manifolds::{
    karcher_mean, transport_derivative, GeometryError, KarcherError, Manifold,
    DEFAULT_TRANSPORT_STEP,
};
use crate::polybasis::{enumerate_basis, BasisError, DerivOrder};

/// Serialized model format version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Queries per work item when evaluation is spread over threads.
const EVAL_CHUNK: usize = 256;

/// Environment variable overriding the evaluation thread count.
pub const EVAL_THREADS_ENV: &str = "MHERMITE_EVAL_THREADS";

#[derive(Debug, Error)]
pub enum ThiError {
    #[error("no samples provided")]
    EmptySamples,
    #[error("sample {index} has {got} parameter coordinates, expected {expected}")]
    ParamDimension {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("sample {index} is missing the derivative data requested by the fit")]
    MissingDerivatives { index: usize },
    #[error("sample {index} has {got} tangent vectors, expected {expected}")]
    DerivCount {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("frame has {got} vectors, expected {expected}")]
    FrameSize { got: usize, expected: usize },
    #[error("query {index} has {got} coordinates, expected {expected}")]
    QueryDimension {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("base point iteration did not converge: gradient norm {residual:e} after {iterations} iterations")]
    BaseNonConvergence { residual: f64, iterations: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("model file: {0}")]
    Format(String),
}

impl<P: std::fmt::Debug> From<KarcherError<P>> for ThiError {
    fn from(err: KarcherError<P>) -> Self {
        match err {
            KarcherError::Empty => ThiError::EmptySamples,
            KarcherError::Geometry(g) => ThiError::Geometry(g),
            KarcherError::NonConvergence {
                residual,
                iterations,
                ..
            } => ThiError::BaseNonConvergence {
                residual,
                iterations,
            },
        }
    }
}

/// One observation: parameter location, manifold value, and optionally the
/// partial derivative tangents in every parameter direction.
#[derive(Debug, Clone)]
pub struct ManifoldSample<M: Manifold> {
    pub omega: Vec<f64>,
    pub point: M::Point,
    pub derivs: Option<Vec<M::Tangent>>,
}

/// A predicted manifold point together with its first-derivative tangents,
/// one per parameter direction.
pub type PointWithDerivatives<M> = (<M as Manifold>::Point, Vec<<M as Manifold>::Tangent>);

/// A fitted interpolant: base point, tangent frame, the shared polynomial
/// basis model and one coefficient vector per tangent coordinate.
#[derive(Debug, Clone)]
pub struct ThiModel<M: Manifold> {
    base: M::Point,
    frame: Vec<M::Tangent>,
    garnoldi: GArnoldiModel,
    coeffs: Vec<DVector<f64>>,
}

impl<M: Manifold> ThiModel<M> {
    pub fn base(&self) -> &M::Point {
        &self.base
    }

    pub fn frame(&self) -> &[M::Tangent] {
        &self.frame
    }

    pub fn garnoldi(&self) -> &GArnoldiModel {
        &self.garnoldi
    }

    pub fn coefficients(&self) -> &[DVector<f64>] {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.garnoldi.basis().dim()
    }

    pub fn degree(&self) -> u32 {
        self.garnoldi.basis().degree()
    }
}

/// Fit a tangent-space Hermite model to the samples. The base point is the
/// Karcher mean of the sample locations and the frame is the manifold's
/// deterministic orthonormal frame there.
pub fn fit<M: Manifold>(
    samples: &[ManifoldSample<M>],
    degree: u32,
    use_derivatives: bool,
) -> Result<ThiModel<M>, ThiError> {
    if samples.is_empty() {
        return Err(ThiError::EmptySamples);
    }
    let points: Vec<M::Point> = samples.iter().map(|s| s.point.clone()).collect();
    let base = karcher_mean::<M>(&points)?;
    let frame = M::frame(&base);
    fit_with_frame(samples, degree, use_derivatives, base, frame)
}

/// Fit against a caller-supplied base point and orthonormal tangent frame.
/// The fit is componentwise linear in the frame, so any orthonormal frame
/// yields the same predictions.
pub fn fit_with_frame<M: Manifold>(
    samples: &[ManifoldSample<M>],
    degree: u32,
    use_derivatives: bool,
    base: M::Point,
    frame: Vec<M::Tangent>,
) -> Result<ThiModel<M>, ThiError> {
    if samples.is_empty() {
        return Err(ThiError::EmptySamples);
    }
    let tangent_dim = M::TANGENT_DIM;
    if frame.len() != tangent_dim {
        return Err(ThiError::FrameSize {
            got: frame.len(),
            expected: tangent_dim,
        });
    }
    let dim = samples[0].omega.len();
    for (index, sample) in samples.iter().enumerate() {
        if sample.omega.len() != dim {
            return Err(ThiError::ParamDimension {
                index,
                got: sample.omega.len(),
                expected: dim,
            });
        }
        if use_derivatives {
            match &sample.derivs {
                None => return Err(ThiError::MissingDerivatives { index }),
                Some(d) if d.len() != dim => {
                    return Err(ThiError::DerivCount {
                        index,
                        got: d.len(),
                        expected: dim,
                    })
                }
                Some(_) => {}
            }
        }
    }

    let m = samples.len();

    // Pull every sample back to the tangent space at the base point and
    // express it in the frame.
    let mut value_coords = vec![vec![0.0; tangent_dim]; m];
    for (j, sample) in samples.iter().enumerate() {
        let w = M::log(&base, &sample.point)?;
        for (c, axis) in frame.iter().enumerate() {
            value_coords[j][c] = M::inner(axis, &w);
        }
    }
    // Derivatives travel through the differential of the log map.
    let mut deriv_coords = vec![vec![vec![0.0; tangent_dim]; dim]; m];
    if use_derivatives {
        for (j, sample) in samples.iter().enumerate() {
            let derivs = sample.derivs.as_ref().expect("validated above");
            for (i, v) in derivs.iter().enumerate() {
                let transported =
                    transport_derivative::<M>(&base, &sample.point, v, DEFAULT_TRANSPORT_STEP)?;
                for (c, axis) in frame.iter().enumerate() {
                    deriv_coords[j][i][c] = M::inner(axis, &transported);
                }
            }
        }
    }

    let basis = enumerate_basis(dim, degree)?;
    let selection = if use_derivatives {
        SelectionSpec::full(m, dim, DerivOrder::First)
    } else {
        SelectionSpec::values_only(m, dim, DerivOrder::First)
    };
    let nodes: Vec<Vec<f64>> = samples.iter().map(|s| s.omega.clone()).collect();
    let garnoldi = garnoldi::fit(&nodes, &basis, &selection)?;

    let mut coeffs = Vec::with_capacity(tangent_dim);
    for c in 0..tangent_dim {
        let mut b = DVector::<f64>::zeros(selection.observed_len());
        for (pos, &(node, slot)) in selection.observed().iter().enumerate() {
            b[pos] = if slot == 0 {
                value_coords[node][c]
            } else {
                deriv_coords[node][slot - 1][c]
            };
        }
        coeffs.push(garnoldi::solve_coefficients(&garnoldi, &b)?);
    }

    Ok(ThiModel {
        base,
        frame,
        garnoldi,
        coeffs,
    })
}

fn eval_thread_count(queries: usize) -> usize {
    let configured = std::env::var(EVAL_THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
    configured.min(queries.div_ceil(EVAL_CHUNK)).max(1)
}

/// Evaluate the model at `queries`, returning one manifold point each.
pub fn eval<M: Manifold>(
    model: &ThiModel<M>,
    queries: &[Vec<f64>],
) -> Result<Vec<M::Point>, ThiError> {
    let with_derivs = eval_impl(model, queries, false, eval_thread_count(queries.len()))?;
    Ok(with_derivs.into_iter().map(|(p, _)| p).collect())
}

/// Evaluate the model and its first derivatives: the polynomial Jacobian in
/// the tangent space, pushed forward through the exponential map by the same
/// central-difference construction used for the input transport. Each
/// returned tangent lives at the returned point.
pub fn eval_with_derivatives<M: Manifold>(
    model: &ThiModel<M>,
    queries: &[Vec<f64>],
) -> Result<Vec<PointWithDerivatives<M>>, ThiError> {
    eval_impl(model, queries, true, eval_thread_count(queries.len()))
}

pub(crate) fn eval_impl<M: Manifold>(
    model: &ThiModel<M>,
    queries: &[Vec<f64>],
    want_derivs: bool,
    threads: usize,
) -> Result<Vec<PointWithDerivatives<M>>, ThiError> {
    let dim = model.dim();
    for (index, q) in queries.iter().enumerate() {
        if q.len() != dim {
            return Err(ThiError::QueryDimension {
                index,
                got: q.len(),
                expected: dim,
            });
        }
    }
    if queries.is_empty() {
        return Ok(Vec::new());
    }
    if threads <= 1 {
        return queries
            .chunks(EVAL_CHUNK)
            .map(|chunk| eval_chunk(model, chunk, want_derivs))
            .collect::<Result<Vec<_>, _>>()
            .map(|parts| parts.into_iter().flatten().collect());
    }

    let per_thread = queries.len().div_ceil(threads);
    let slices: Vec<&[Vec<f64>]> = queries.chunks(per_thread).collect();
    let results = std::thread::scope(|scope| {
        let handles: Vec<_> = slices
            .iter()
            .map(|slice| {
                scope.spawn(move || {
                    slice
                        .chunks(EVAL_CHUNK)
                        .map(|chunk| eval_chunk(model, chunk, want_derivs))
                        .collect::<Result<Vec<_>, _>>()
                        .map(|parts| parts.into_iter().flatten().collect::<Vec<_>>())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation worker panicked"))
            .collect::<Vec<_>>()
    });
    let mut out = Vec::with_capacity(queries.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn eval_chunk<M: Manifold>(
    model: &ThiModel<M>,
    chunk: &[Vec<f64>],
    want_derivs: bool,
) -> Result<Vec<PointWithDerivatives<M>>, ThiError> {
    let dim = model.dim();
    let basis_eval = garnoldi::evaluate_basis(&model.garnoldi, chunk)?;
    let m = chunk.len();
    // One stacked prediction column per tangent coordinate.
    let predictions: Vec<DVector<f64>> =
        model.coeffs.iter().map(|c| basis_eval.data() * c).collect();

    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        let mut w = M::zero_tangent();
        for (c, axis) in model.frame.iter().enumerate() {
            M::axpy(&mut w, predictions[c][j], axis);
        }
        let point = M::exp(&model.base, &w);
        let mut tangents = Vec::new();
        if want_derivs {
            let dt = DEFAULT_TRANSPORT_STEP;
            for i in 0..dim {
                let mut jac = M::zero_tangent();
                for (c, axis) in model.frame.iter().enumerate() {
                    M::axpy(&mut jac, predictions[c][(1 + i) * m + j], axis);
                }
                let mut forward = w.clone();
                M::axpy(&mut forward, dt, &jac);
                let mut backward = w.clone();
                M::axpy(&mut backward, -dt, &jac);
                let plus = M::exp(&model.base, &forward);
                let minus = M::exp(&model.base, &backward);
                let log_plus = M::log(&point, &plus)?;
                let log_minus = M::log(&point, &minus)?;
                let half = 1.0 / (2.0 * dt);
                let mut deriv = M::scale(&log_plus, half);
                M::axpy(&mut deriv, -half, &log_minus);
                tangents.push(deriv);
            }
        }
        out.push((point, tangents));
    }
    Ok(out)
}

/// Accuracy metrics of a fitted model against a ground-truth map.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorMetrics {
    /// Mean geodesic distance between truth and prediction over the grid.
    pub avg_err: f64,
    /// Largest geodesic distance over the grid.
    pub max_err: f64,
    /// Per parameter direction: the largest entrywise difference between
    /// central finite differences of the truth and of the model, in ambient
    /// coordinates.
    pub fd_errs: Vec<f64>,
}

/// Compare the model against `truth` on `test_grid`: geodesic errors of the
/// values, and finite-difference errors of the first derivatives at step
/// `fd_step`.
pub fn error_report<M: Manifold>(
    model: &ThiModel<M>,
    truth: impl Fn(&[f64]) -> M::Point,
    test_grid: &[Vec<f64>],
    fd_step: f64,
) -> Result<ErrorMetrics, ThiError> {
    assert!(fd_step > 0.0, "finite-difference step must be positive");
    let dim = model.dim();
    let n = test_grid.len();

    // One evaluation batch: the grid itself, then +/- shifts per direction.
    let mut queries = Vec::with_capacity(n * (1 + 2 * dim));
    queries.extend(test_grid.iter().cloned());
    for i in 0..dim {
        for sign in [1.0, -1.0] {
            for point in test_grid {
                let mut shifted = point.clone();
                shifted[i] += sign * fd_step;
                queries.push(shifted);
            }
        }
    }
    let predicted = eval(model, &queries)?;

    let mut avg = 0.0;
    let mut max: f64 = 0.0;
    for (j, omega) in test_grid.iter().enumerate() {
        let d = M::distance(&truth(omega), &predicted[j]);
        avg += d;
        max = max.max(d);
    }
    if n > 0 {
        avg /= n as f64;
    }

    let mut fd_errs = vec![0.0f64; dim];
    for (i, fd_err) in fd_errs.iter_mut().enumerate() {
        let plus_offset = n * (1 + 2 * i);
        let minus_offset = n * (2 + 2 * i);
        let mut worst = 0.0f64;
        for (j, _) in test_grid.iter().enumerate() {
            let model_plus = M::point_coords(&predicted[plus_offset + j]);
            let model_minus = M::point_coords(&predicted[minus_offset + j]);
            let truth_plus = M::point_coords(&truth(&queries[plus_offset + j]));
            let truth_minus = M::point_coords(&truth(&queries[minus_offset + j]));
            for k in 0..model_plus.len() {
                let fd_model = (model_plus[k] - model_minus[k]) / (2.0 * fd_step);
                let fd_truth = (truth_plus[k] - truth_minus[k]) / (2.0 * fd_step);
                worst = worst.max((fd_model - fd_truth).abs());
            }
        }
        *fd_err = worst;
    }

    Ok(ErrorMetrics {
        avg_err: avg,
        max_err: max,
        fd_errs,
    })
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// On-disk model layout: everything evaluation needs, nothing more. Loading
/// re-enumerates the basis from `(dim, degree)` and cross-checks the stored
/// parent links.
#[derive(Debug, Serialize, Deserialize)]
struct SavedModel {
    format_version: u32,
    manifold: String,
    dim: usize,
    degree: u32,
    deriv_order: u8,
    parents: Vec<[usize; 2]>,
    rank: usize,
    rmat: Vec<f64>,
    base: Vec<f64>,
    frame: Vec<Vec<f64>>,
    coeffs: Vec<Vec<f64>>,
}

fn to_saved<M: Manifold>(model: &ThiModel<M>) -> SavedModel {
    let basis = model.garnoldi.basis();
    let rank = model.garnoldi.rank();
    let rmat = model.garnoldi.rmat();
    SavedModel {
        format_version: MODEL_FORMAT_VERSION,
        manifold: M::NAME.to_string(),
        dim: basis.dim(),
        degree: basis.degree(),
        deriv_order: model.garnoldi.deriv().order(),
        parents: (1..basis.len())
            .map(|i| {
                let (s, u) = basis.parent(i);
                [s, u]
            })
            .collect(),
        rank,
        rmat: (0..rank)
            .flat_map(|r| (0..rank).map(move |c| rmat[(r, c)]))
            .collect(),
        base: M::point_coords(&model.base),
        frame: model.frame.iter().map(M::tangent_coords).collect(),
        coeffs: model
            .coeffs
            .iter()
            .map(|c| c.iter().copied().collect())
            .collect(),
    }
}

fn from_saved<M: Manifold>(saved: &SavedModel) -> Result<ThiModel<M>, ThiError> {
    if saved.format_version != MODEL_FORMAT_VERSION {
        return Err(ThiError::Format(format!(
            "unsupported format version {} (expected {MODEL_FORMAT_VERSION})",
            saved.format_version
        )));
    }
    let basis = enumerate_basis(saved.dim, saved.degree)?;
    if saved.parents.len() + 1 != basis.len() {
        return Err(ThiError::Format(format!(
            "parent table has {} entries, basis needs {}",
            saved.parents.len(),
            basis.len() - 1
        )));
    }
    for (i, stored) in saved.parents.iter().enumerate() {
        let (s, u) = basis.parent(i + 1);
        if stored[0] != s || stored[1] != u {
            return Err(ThiError::Format(format!(
                "parent link {} is ({}, {}), expected ({s}, {u})",
                i + 1,
                stored[0],
                stored[1]
            )));
        }
    }
    let deriv = DerivOrder::from_order(saved.deriv_order)
        .ok_or_else(|| ThiError::Format(format!("bad derivative order {}", saved.deriv_order)))?;
    if saved.rank == 0 || saved.rank > basis.len() {
        return Err(ThiError::Format(format!(
            "rank {} out of range",
            saved.rank
        )));
    }
    if saved.rmat.len() != saved.rank * saved.rank {
        return Err(ThiError::Format(format!(
            "recurrence matrix has {} entries, expected {}",
            saved.rmat.len(),
            saved.rank * saved.rank
        )));
    }
    let rmat = DMatrix::from_row_slice(saved.rank, saved.rank, &saved.rmat);
    for i in 0..saved.rank {
        if rmat[(i, i)] <= 0.0 {
            return Err(ThiError::Format(format!(
                "non-positive recurrence diagonal at {i}"
            )));
        }
    }
    let base = M::point_from_coords(&saved.base)?;
    if saved.frame.len() != M::TANGENT_DIM {
        return Err(ThiError::Format(format!(
            "frame has {} vectors, expected {}",
            saved.frame.len(),
            M::TANGENT_DIM
        )));
    }
    let frame = saved
        .frame
        .iter()
        .map(|coords| M::tangent_from_coords(&base, coords))
        .collect::<Result<Vec<_>, _>>()?;
    if saved.coeffs.len() != M::TANGENT_DIM {
        return Err(ThiError::Format(format!(
            "{} coefficient vectors, expected {}",
            saved.coeffs.len(),
            M::TANGENT_DIM
        )));
    }
    let coeffs = saved
        .coeffs
        .iter()
        .map(|c| {
            if c.len() != saved.rank {
                Err(ThiError::Format(format!(
                    "coefficient vector has {} entries, expected rank {}",
                    c.len(),
                    saved.rank
                )))
            } else {
                Ok(DVector::from_column_slice(c))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(ThiModel {
        base,
        frame,
        garnoldi: GArnoldiModel::from_parts(basis, deriv, saved.rank, rmat),
        coeffs,
    })
}

/// A fitted model tagged by its manifold, for file round trips.
#[derive(Debug, Clone)]
pub enum AnyModel {
    So3(ThiModel<crate::manifolds::So3>),
    Sphere(ThiModel<crate::manifolds::Sphere>),
}

impl AnyModel {
    pub fn manifold(&self) -> &'static str {
        match self {
            AnyModel::So3(_) => crate::manifolds::So3::NAME,
            AnyModel::Sphere(_) => crate::manifolds::Sphere::NAME,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            AnyModel::So3(m) => m.dim(),
            AnyModel::Sphere(m) => m.dim(),
        }
    }

    pub fn to_json(&self) -> String {
        let saved = match self {
            AnyModel::So3(m) => to_saved(m),
            AnyModel::Sphere(m) => to_saved(m),
        };
        serde_json::to_string_pretty(&saved).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, ThiError> {
        let saved: SavedModel =
            serde_json::from_str(text).map_err(|e| ThiError::Format(e.to_string()))?;
        match saved.manifold.as_str() {
            "so3" => Ok(AnyModel::So3(from_saved(&saved)?)),
            "s2" => Ok(AnyModel::Sphere(from_saved(&saved)?)),
            other => Err(ThiError::Format(format!("unknown manifold tag {other:?}"))),
        }
    }
}

impl From<ThiModel<crate::manifolds::So3>> for AnyModel {
    fn from(m: ThiModel<crate::manifolds::So3>) -> Self {
        AnyModel::So3(m)
    }
}

impl From<ThiModel<crate::manifolds::Sphere>> for AnyModel {
    fn from(m: ThiModel<crate::manifolds::Sphere>) -> Self {
        AnyModel::Sphere(m)
    }
}
