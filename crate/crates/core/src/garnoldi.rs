//! Polynomial least squares on derivative-stacked data without forming the
//! confluent Vandermonde matrix.
//!
//! The fitting stage runs a Gram-Schmidt recurrence over the parent links of a
//! grevlex [`MonomialBasis`]: each new column is the coordinate-shift operator
//! [`XOperator`] applied to an earlier orthonormal column, then orthogonalized
//! (twice) in the G-inner product induced by a [`SelectionSpec`]. The upper
//! triangular recurrence matrix it produces is all the evaluation stage needs
//! to regenerate the orthogonal basis, with derivatives, at arbitrary points.
//!
//! Stacked data is laid out slot-major: the first `m` rows of a column hold
//! function values at the `m` points, the next `m * d` rows hold first
//! partials (all points per coordinate), and the remainder holds the upper
//! triangle of second partials in row-major pair order.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::polybasis::{DerivOrder, MonomialBasis};

/// Relative breakdown threshold: a column whose G-norm falls below this
/// fraction of its pre-orthogonalization G-norm is treated as dependent.
/// Floating point never produces the exact zero the textbook test asks for.
pub const BREAKDOWN_RTOL: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("selection entry (node {node}, slot {slot}) out of bounds: {nodes} nodes, stacked dimension {stacked}")]
    SelectionOutOfBounds {
        node: usize,
        slot: usize,
        nodes: usize,
        stacked: usize,
    },
    #[error(
        "degenerate input: the constant column has zero G-norm (no function-value rows observed)"
    )]
    DegenerateInput,
    #[error("point {index} has dimension {got}, expected {expected}")]
    PointDimension {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("selection covers {got} nodes but {expected} were supplied")]
    NodeCount { got: usize, expected: usize },
    #[error("selection dimension {got} does not match basis dimension {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("observation vector has length {got}, expected {expected} observed rows")]
    ObservationLength { got: usize, expected: usize },
    #[error("coefficient vector has length {got}, expected model rank {rank}")]
    CoefficientLength { got: usize, rank: usize },
    #[error("model carries no fitting artifacts (loaded from a serialized dump); coefficient solves need the training-stage basis matrix")]
    MissingFitArtifacts,
}

/// Which rows of the stacked evaluation are observed.
///
/// A pair `(node, slot)` marks the row of derivative slot `slot` at point
/// `node` as measured. The induced selection matrix L extracts exactly those
/// rows and the fitting stage orthogonalizes in `<y, z>_G = (Ly)^T (Lz)`; the
/// matrix `G = L^T L` is never materialized. Observing every row makes L the
/// identity and G the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionSpec {
    node_count: usize,
    dim: usize,
    deriv: DerivOrder,
    observed: Vec<(usize, usize)>,
    rows: Vec<usize>,
}

impl SelectionSpec {
    pub fn new(
        node_count: usize,
        dim: usize,
        deriv: DerivOrder,
        mut observed: Vec<(usize, usize)>,
    ) -> Result<Self, FitError> {
        let stacked = deriv.stacked_dim(dim);
        for &(node, slot) in &observed {
            if node >= node_count || slot >= stacked {
                return Err(FitError::SelectionOutOfBounds {
                    node,
                    slot,
                    nodes: node_count,
                    stacked,
                });
            }
        }
        observed.sort_by_key(|&(node, slot)| slot * node_count + node);
        observed.dedup();
        let rows = observed
            .iter()
            .map(|&(node, slot)| slot * node_count + node)
            .collect();
        Ok(Self {
            node_count,
            dim,
            deriv,
            observed,
            rows,
        })
    }

    /// Observe every row: L = I, G = I.
    pub fn full(node_count: usize, dim: usize, deriv: DerivOrder) -> Self {
        let stacked = deriv.stacked_dim(dim);
        let observed = (0..stacked)
            .flat_map(|slot| (0..node_count).map(move |node| (node, slot)))
            .collect();
        Self::new(node_count, dim, deriv, observed).expect("full selection is in bounds")
    }

    /// Observe only the function-value rows.
    pub fn values_only(node_count: usize, dim: usize, deriv: DerivOrder) -> Self {
        let observed = (0..node_count).map(|node| (node, 0)).collect();
        Self::new(node_count, dim, deriv, observed).expect("value rows are in bounds")
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn deriv(&self) -> DerivOrder {
        self.deriv
    }

    pub fn observed(&self) -> &[(usize, usize)] {
        &self.observed
    }

    /// Observed row indices in the stacked layout, ascending.
    pub fn observed_rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn observed_len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_full(&self) -> bool {
        self.rows.len() == self.node_count * self.deriv.stacked_dim(self.dim)
    }

    fn g_dot(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        if self.is_full() {
            return a.dot(b);
        }
        self.rows.iter().map(|&r| a[r] * b[r]).sum()
    }

    fn g_dot_col(&self, q: &DMatrix<f64>, col: usize, v: &DVector<f64>) -> f64 {
        self.rows.iter().map(|&r| q[(r, col)] * v[r]).sum()
    }

    fn g_norm(&self, a: &DVector<f64>) -> f64 {
        self.g_dot(a, a).sqrt()
    }
}

/// Row index of derivative slot `slot` at point `node` when `node_count`
/// points are stacked slot-major.
pub fn stacked_row(node_count: usize, node: usize, slot: usize) -> usize {
    slot * node_count + node
}

/// Slot of the second partial `d_{r,c}` (`r <= c`) in the per-point layout.
pub fn second_deriv_slot(dim: usize, r: usize, c: usize) -> usize {
    assert!(r <= c && c < dim);
    1 + dim + r * dim - r * (r + 1) / 2 + c
}

/// Values (and derivatives) of a set of basis columns at a set of points.
#[derive(Debug, Clone)]
pub struct StackedEvaluation {
    node_count: usize,
    dim: usize,
    deriv: DerivOrder,
    data: DMatrix<f64>,
}

impl StackedEvaluation {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn deriv(&self) -> DerivOrder {
        self.deriv
    }

    pub fn columns(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn value(&self, node: usize, col: usize) -> f64 {
        self.data[(stacked_row(self.node_count, node, 0), col)]
    }

    pub fn first_deriv(&self, node: usize, coord: usize, col: usize) -> f64 {
        assert!(coord < self.dim);
        self.data[(stacked_row(self.node_count, node, 1 + coord), col)]
    }

    pub fn second_deriv(&self, node: usize, r: usize, c: usize, col: usize) -> f64 {
        let slot = second_deriv_slot(self.dim, r.min(c), r.max(c));
        self.data[(stacked_row(self.node_count, node, slot), col)]
    }

    /// The per-point stacked vector `[value, d_1.., d_{1,1}..]` of one column.
    pub fn stacked_at(&self, node: usize, col: usize) -> Vec<f64> {
        let stacked = self.deriv.stacked_dim(self.dim);
        (0..stacked)
            .map(|slot| self.data[(stacked_row(self.node_count, node, slot), col)])
            .collect()
    }
}

/// The coordinate-shift operator at one point: multiplication of a polynomial
/// by `x_u`, acting on the stacked vector of its value and partial
/// derivatives. The action is lower triangular with the point's `u`-th
/// coordinate on the diagonal; by the product rule each first partial picks up
/// the value once and a second partial `d_{r,c}` picks up `d_c` and/or `d_r`
/// whenever `u` hits one of its indices.
#[derive(Debug, Clone)]
pub struct XOperator {
    coord: usize,
    point: Vec<f64>,
    deriv: DerivOrder,
}

impl XOperator {
    pub fn new(coord: usize, point: Vec<f64>, deriv: DerivOrder) -> Self {
        assert!(
            coord < point.len(),
            "coordinate {coord} out of bounds for point of dimension {}",
            point.len()
        );
        Self {
            coord,
            point,
            deriv,
        }
    }

    /// Apply to a per-point stacked vector without materializing the matrix.
    pub fn apply(&self, stacked: &[f64]) -> Vec<f64> {
        let dim = self.point.len();
        let u = self.coord;
        let a = self.point[u];
        assert_eq!(stacked.len(), self.deriv.stacked_dim(dim));
        let mut out = vec![0.0; stacked.len()];
        out[0] = a * stacked[0];
        if self.deriv.order() >= 1 {
            for c in 0..dim {
                out[1 + c] = a * stacked[1 + c] + if c == u { stacked[0] } else { 0.0 };
            }
        }
        if self.deriv.order() >= 2 {
            for r in 0..dim {
                for c in r..dim {
                    let slot = second_deriv_slot(dim, r, c);
                    let mut v = a * stacked[slot];
                    if u == r {
                        v += stacked[1 + c];
                    }
                    if u == c {
                        v += stacked[1 + r];
                    }
                    out[slot] = v;
                }
            }
        }
        out
    }
}

/// Batch form of the shift operator: applies `X_u` at every point to a
/// slot-major stacked column. Block diagonal over points, applied per point.
fn apply_shift_batch(
    u: usize,
    points: &[Vec<f64>],
    dim: usize,
    deriv: DerivOrder,
    src: impl Fn(usize) -> f64,
    dst: &mut DVector<f64>,
) {
    let m = points.len();
    for (j, point) in points.iter().enumerate() {
        let a = point[u];
        let value = src(j);
        dst[j] = a * value;
        if deriv.order() >= 1 {
            for c in 0..dim {
                let row = stacked_row(m, j, 1 + c);
                dst[row] = a * src(row) + if c == u { value } else { 0.0 };
            }
        }
        if deriv.order() >= 2 {
            for r in 0..dim {
                for c in r..dim {
                    let slot = second_deriv_slot(dim, r, c);
                    let row = stacked_row(m, j, slot);
                    let mut v = a * src(row);
                    if u == r {
                        v += src(stacked_row(m, j, 1 + c));
                    }
                    if u == c {
                        v += src(stacked_row(m, j, 1 + r));
                    }
                    dst[row] = v;
                }
            }
        }
    }
}

/// Result of the fitting stage: the recurrence matrix, the retained
/// G-orthonormal columns and everything needed to evaluate the basis
/// elsewhere. Models loaded from a serialized dump carry no `qmat`/`selection`
/// and support evaluation but not further coefficient solves.
#[derive(Debug, Clone)]
pub struct GArnoldiModel {
    basis: MonomialBasis,
    deriv: DerivOrder,
    rank: usize,
    rmat: DMatrix<f64>,
    qmat: Option<DMatrix<f64>>,
    selection: Option<SelectionSpec>,
}

impl GArnoldiModel {
    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn deriv(&self) -> DerivOrder {
        self.deriv
    }

    /// Effective rank `t`: number of retained orthonormal columns.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Upper-triangular recurrence matrix, `rank x rank`.
    pub fn rmat(&self) -> &DMatrix<f64> {
        &self.rmat
    }

    pub fn qmat(&self) -> Option<&DMatrix<f64>> {
        self.qmat.as_ref()
    }

    pub fn selection(&self) -> Option<&SelectionSpec> {
        self.selection.as_ref()
    }

    /// `max |(LQ)^T (LQ) - I|` over the retained columns, or `None` for a
    /// model without fitting artifacts.
    pub fn orthogonality_error(&self) -> Option<f64> {
        let q = self.qmat.as_ref()?;
        let sel = self.selection.as_ref()?;
        let mut worst = 0.0f64;
        let mut qi = DVector::<f64>::zeros(q.nrows());
        for i in 0..self.rank {
            qi.copy_from(&q.column(i));
            for j in i..self.rank {
                let dot = sel.g_dot_col(q, j, &qi);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        Some(worst)
    }

    pub(crate) fn from_parts(
        basis: MonomialBasis,
        deriv: DerivOrder,
        rank: usize,
        rmat: DMatrix<f64>,
    ) -> Self {
        Self {
            basis,
            deriv,
            rank,
            rmat,
            qmat: None,
            selection: None,
        }
    }
}

/// Fitting stage: build the G-orthonormal stacked basis over `nodes`.
///
/// Each column is re-orthogonalized exactly twice. A column whose residual
/// G-norm falls below [`BREAKDOWN_RTOL`] times its initial G-norm truncates
/// the model to the columns already built. Breakdown on the constant column
/// itself reports [`FitError::DegenerateInput`].
pub fn fit(
    nodes: &[Vec<f64>],
    basis: &MonomialBasis,
    selection: &SelectionSpec,
) -> Result<GArnoldiModel, FitError> {
    let dim = basis.dim();
    if selection.dim() != dim {
        return Err(FitError::DimensionMismatch {
            got: selection.dim(),
            expected: dim,
        });
    }
    if selection.node_count() != nodes.len() {
        return Err(FitError::NodeCount {
            got: selection.node_count(),
            expected: nodes.len(),
        });
    }
    for (index, node) in nodes.iter().enumerate() {
        if node.len() != dim {
            return Err(FitError::PointDimension {
                index,
                got: node.len(),
                expected: dim,
            });
        }
    }

    let deriv = selection.deriv();
    let m = nodes.len();
    let rows = m * deriv.stacked_dim(dim);
    let g = basis.len();

    let mut q = DMatrix::<f64>::zeros(rows, g);
    let mut rmat = DMatrix::<f64>::zeros(g, g);

    // Constant column: value rows one, derivative rows zero.
    let mut k = DVector::<f64>::zeros(rows);
    for j in 0..m {
        k[j] = 1.0;
    }
    let e_norm = selection.g_norm(&k);
    if e_norm == 0.0 {
        return Err(FitError::DegenerateInput);
    }
    rmat[(0, 0)] = e_norm;
    for r in 0..rows {
        q[(r, 0)] = k[r] / e_norm;
    }

    let mut rank = g;
    for i in 1..g {
        let (s, u) = basis.parent(i);
        {
            let qs = q.column(s).clone_owned();
            apply_shift_batch(u, nodes, dim, deriv, |r| qs[r], &mut k);
        }
        let initial_norm = selection.g_norm(&k);

        for _pass in 0..2 {
            for prev in 0..i {
                let proj = selection.g_dot_col(&q, prev, &k);
                if proj != 0.0 {
                    for r in 0..rows {
                        k[r] -= proj * q[(r, prev)];
                    }
                }
                rmat[(prev, i)] += proj;
            }
        }

        let residual_norm = selection.g_norm(&k);
        if residual_norm <= BREAKDOWN_RTOL * initial_norm {
            rank = i;
            break;
        }
        rmat[(i, i)] = residual_norm;
        for r in 0..rows {
            q[(r, i)] = k[r] / residual_norm;
        }
    }

    Ok(GArnoldiModel {
        basis: basis.clone(),
        deriv,
        rank,
        rmat: rmat.view((0, 0), (rank, rank)).into_owned(),
        qmat: Some(q.columns(0, rank).into_owned()),
        selection: Some(selection.clone()),
    })
}

/// Evaluation stage: regenerate the orthogonal basis, with derivatives, at
/// `queries` from the recurrence matrix alone.
pub fn evaluate_basis(
    model: &GArnoldiModel,
    queries: &[Vec<f64>],
) -> Result<StackedEvaluation, FitError> {
    let dim = model.basis.dim();
    for (index, point) in queries.iter().enumerate() {
        if point.len() != dim {
            return Err(FitError::PointDimension {
                index,
                got: point.len(),
                expected: dim,
            });
        }
    }
    let deriv = model.deriv;
    let m = queries.len();
    let rows = m * deriv.stacked_dim(dim);
    let t = model.rank;
    let rmat = &model.rmat;

    let mut e = DMatrix::<f64>::zeros(rows, t);
    let c0 = 1.0 / rmat[(0, 0)];
    for j in 0..m {
        e[(j, 0)] = c0;
    }

    let mut w = DVector::<f64>::zeros(rows);
    for i in 1..t {
        let (s, u) = model.basis.parent(i);
        {
            let es = e.column(s).clone_owned();
            apply_shift_batch(u, queries, dim, deriv, |r| es[r], &mut w);
        }
        for prev in 0..i {
            let coeff = rmat[(prev, i)];
            if coeff != 0.0 {
                for r in 0..rows {
                    w[r] -= coeff * e[(r, prev)];
                }
            }
        }
        let scale = 1.0 / rmat[(i, i)];
        for r in 0..rows {
            e[(r, i)] = w[r] * scale;
        }
    }

    Ok(StackedEvaluation {
        node_count: m,
        dim,
        deriv,
        data: e,
    })
}

/// Coefficients of the least-squares fit to `observations`, which lists the
/// observed values and derivatives in the selection's row order. Because the
/// selected basis matrix has orthonormal columns this is a single
/// matrix-vector product `c = (LQ)^T b`.
pub fn solve_coefficients(
    model: &GArnoldiModel,
    observations: &DVector<f64>,
) -> Result<DVector<f64>, FitError> {
    let q = model.qmat.as_ref().ok_or(FitError::MissingFitArtifacts)?;
    let sel = model
        .selection
        .as_ref()
        .ok_or(FitError::MissingFitArtifacts)?;
    if observations.len() != sel.observed_len() {
        return Err(FitError::ObservationLength {
            got: observations.len(),
            expected: sel.observed_len(),
        });
    }
    let mut c = DVector::<f64>::zeros(model.rank);
    for i in 0..model.rank {
        let mut acc = 0.0;
        for (pos, &row) in sel.observed_rows().iter().enumerate() {
            acc += q[(row, i)] * observations[pos];
        }
        c[i] = acc;
    }
    Ok(c)
}

/// Fitted polynomial (and its derivatives) at `queries`: the single-column
/// stacked evaluation `E c`.
pub fn predict(
    model: &GArnoldiModel,
    coefficients: &DVector<f64>,
    queries: &[Vec<f64>],
) -> Result<StackedEvaluation, FitError> {
    if coefficients.len() != model.rank {
        return Err(FitError::CoefficientLength {
            got: coefficients.len(),
            rank: model.rank,
        });
    }
    let basis_eval = evaluate_basis(model, queries)?;
    let data = &basis_eval.data * coefficients;
    Ok(StackedEvaluation {
        node_count: basis_eval.node_count,
        dim: basis_eval.dim,
        deriv: basis_eval.deriv,
        data: DMatrix::from_column_slice(data.len(), 1, data.as_slice()),
    })
}
