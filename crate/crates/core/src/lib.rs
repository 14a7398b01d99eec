//! Tangent-space Hermite interpolation of manifold-valued data, with a
//! G-Arnoldi polynomial least-squares core.
//!
//! A smooth map `f: R^d -> M` (with `M` either the rotation group SO(3) or the
//! unit sphere S^2) is sampled at parameter locations, optionally together with
//! its partial derivatives. The data is pulled back to the tangent space at the
//! Riemannian barycenter of the samples, fitted there by a multivariate
//! polynomial whose basis is built by a Gram-Schmidt recurrence on the
//! derivative-stacked (confluent) Vandermonde structure, and pushed back to the
//! manifold through the exponential map.
//!
//! Module map:
//! - [`polybasis`]: grevlex monomial enumeration and parent links.
//! - [`garnoldi`]: the orthogonal-basis fitting/evaluation engine.
//! - [`manifolds`]: exp/log maps, barycenters and derivative transport on
//!   SO(3) and S^2.
//! - [`thi`]: the end-to-end pull-back / fit / push-forward pipeline.
//! - [`experiments`]: benchmark test functions, sampling plans and reports.

pub mod experiments;
pub mod garnoldi;
pub mod manifolds;
pub mod polybasis;
pub mod thi;

pub use garnoldi::{GArnoldiModel, SelectionSpec, StackedEvaluation, XOperator};
pub use manifolds::{Manifold, So3, Sphere};
pub use polybasis::{enumerate_basis, DerivOrder, MonomialBasis, MultiIndex};
pub use thi::{AnyModel, ManifoldSample, ThiModel};
