//! Line-oriented sample, query and prediction files.
//!
//! Sample records hold, per line: the parameter coordinates (2 floats), the
//! manifold point (3 floats for the sphere, 9 row-major floats for a rotation
//! matrix), and optionally one ambient tangent block per parameter direction
//! (3 or 9 floats each). `#` starts a comment; blank lines are skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use manifold_hermite::manifolds::{
    GeometryError, Manifold, RotationTangent, So3, Sphere, SphereTangent,
};
use manifold_hermite::thi::{AnyModel, ManifoldSample, ThiModel};

use crate::CliError;

/// Manifold hooks the file formats need beyond the core trait: ambient
/// tangent encoding and the tagged-model wrappers.
pub trait CliManifold: Manifold + Sized {
    const POINT_LEN: usize;
    fn tangent_from_ambient(
        point: &Self::Point,
        coords: &[f64],
    ) -> Result<Self::Tangent, GeometryError>;
    fn tangent_to_ambient(point: &Self::Point, tangent: &Self::Tangent) -> Vec<f64>;
    fn into_any(model: ThiModel<Self>) -> AnyModel;
}

impl CliManifold for Sphere {
    const POINT_LEN: usize = 3;

    fn tangent_from_ambient(
        point: &Self::Point,
        coords: &[f64],
    ) -> Result<Self::Tangent, GeometryError> {
        SphereTangent::at(point, Vector3::new(coords[0], coords[1], coords[2]))
    }

    fn tangent_to_ambient(_point: &Self::Point, tangent: &Self::Tangent) -> Vec<f64> {
        tangent.vector().iter().copied().collect()
    }

    fn into_any(model: ThiModel<Self>) -> AnyModel {
        AnyModel::Sphere(model)
    }
}

impl CliManifold for So3 {
    const POINT_LEN: usize = 9;

    fn tangent_from_ambient(
        point: &Self::Point,
        coords: &[f64],
    ) -> Result<Self::Tangent, GeometryError> {
        RotationTangent::from_ambient(point, &Matrix3::from_row_slice(coords))
    }

    fn tangent_to_ambient(point: &Self::Point, tangent: &Self::Tangent) -> Vec<f64> {
        let ambient = tangent.ambient(point);
        (0..3)
            .flat_map(|r| (0..3).map(move |c| ambient[(r, c)]))
            .collect()
    }

    fn into_any(model: ThiModel<Self>) -> AnyModel {
        AnyModel::So3(model)
    }
}

/// Parameter dimension of the sample files.
pub const PARAM_DIM: usize = 2;

fn read_lines(path: &Path) -> Result<Vec<(usize, Vec<f64>)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut values = Vec::new();
        for token in content.split_whitespace() {
            let v: f64 = token.parse().map_err(|_| CliError::Parse {
                path: path.display().to_string(),
                line,
                message: format!("not a number: {token:?}"),
            })?;
            values.push(v);
        }
        rows.push((line, values));
    }
    Ok(rows)
}

/// Parse a sample file for manifold `M`. With `with_derivatives` every record
/// must carry the two ambient tangent blocks; without it they are optional
/// and ignored.
pub fn read_samples<M: CliManifold>(
    path: &Path,
    with_derivatives: bool,
) -> Result<Vec<ManifoldSample<M>>, CliError> {
    let base_len = PARAM_DIM + M::POINT_LEN;
    let full_len = base_len + PARAM_DIM * M::POINT_LEN;
    let mut samples = Vec::new();
    for (line, values) in read_lines(path)? {
        let parse_err = |message: String| CliError::Parse {
            path: path.display().to_string(),
            line,
            message,
        };
        if with_derivatives && values.len() != full_len {
            return Err(parse_err(format!(
                "expected {full_len} values (omega, point, {PARAM_DIM} tangent blocks), found {}; pass --no-derivatives to fit from values only",
                values.len()
            )));
        }
        if !with_derivatives && values.len() != base_len && values.len() != full_len {
            return Err(parse_err(format!(
                "expected {base_len} or {full_len} values, found {}",
                values.len()
            )));
        }
        let omega = values[..PARAM_DIM].to_vec();
        let point = M::point_from_coords(&values[PARAM_DIM..base_len])
            .map_err(|e| parse_err(format!("manifold point rejected: {e}")))?;
        let derivs = if with_derivatives {
            let mut tangents = Vec::with_capacity(PARAM_DIM);
            for i in 0..PARAM_DIM {
                let start = base_len + i * M::POINT_LEN;
                let tangent = M::tangent_from_ambient(&point, &values[start..start + M::POINT_LEN])
                    .map_err(|e| parse_err(format!("tangent block {} rejected: {e}", i + 1)))?;
                tangents.push(tangent);
            }
            Some(tangents)
        } else {
            None
        };
        samples.push(ManifoldSample {
            omega,
            point,
            derivs,
        });
    }
    Ok(samples)
}

/// Parse a query file: one parameter point per line.
pub fn read_queries(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut queries = Vec::new();
    for (line, values) in read_lines(path)? {
        if values.len() != PARAM_DIM {
            return Err(CliError::Parse {
                path: path.display().to_string(),
                line,
                message: format!("expected {PARAM_DIM} coordinates, found {}", values.len()),
            });
        }
        queries.push(values);
    }
    Ok(queries)
}

/// Render one prediction per line with round-trip float precision.
pub fn format_predictions(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
    }
    out
}
