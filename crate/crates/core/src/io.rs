//! JSON persistence for spaces, manifold descriptions and results.
//!
//! Floats are written in the shortest decimal form that parses back to the
//! same `f64`, so a save/load round trip is bit-exact.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{FiniteMetricSpace, MetricError, Tolerance};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid metric space: {0}")]
    Validation(#[from] MetricError),
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        IoError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// On-disk layout of a metric space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    pub dist: Vec<Vec<f64>>,
}

impl From<&FiniteMetricSpace> for SpaceFile {
    fn from(x: &FiniteMetricSpace) -> Self {
        Self {
            name: x.name().to_string(),
            labels: Some(x.labels().to_vec()),
            dist: x.rows(),
        }
    }
}

impl SpaceFile {
    pub fn into_space(self, tol: Tolerance) -> Result<FiniteMetricSpace, MetricError> {
        let x = FiniteMetricSpace::validate_with(&self.dist, tol)?.with_name(self.name);
        match self.labels {
            Some(labels) => x.with_labels(labels),
            None => Ok(x),
        }
    }
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, IoError> {
    Ok(serde_json::from_str(text)?)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    parse_json(&read_text(path)?)
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    write_text(path, &to_json(value))
}

pub fn parse_space(text: &str) -> Result<FiniteMetricSpace, IoError> {
    let file: SpaceFile = parse_json(text)?;
    Ok(file.into_space(Tolerance::default())?)
}

pub fn space_to_json(x: &FiniteMetricSpace) -> String {
    to_json(&SpaceFile::from(x))
}

pub fn load_space(path: &Path) -> Result<FiniteMetricSpace, IoError> {
    parse_space(&read_text(path)?)
}

pub fn save_space(path: &Path, x: &FiniteMetricSpace) -> Result<(), IoError> {
    write_text(path, &space_to_json(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let x = FiniteMetricSpace::validate(&[
            vec![0.0, 0.1, 0.30000000000000004],
            vec![0.1, 0.0, 1.0 / 3.0],
            vec![0.30000000000000004, 1.0 / 3.0, 0.0],
        ])
        .unwrap()
        .with_name("tri")
        .rescale(std::f64::consts::PI)
        .unwrap();
        let text = space_to_json(&x);
        let back = parse_space(&text).unwrap();
        assert_eq!(back, x);
        assert_eq!(back.name(), "tri");
        assert_eq!(space_to_json(&back), text);
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse_space("{\n  \"dist\": [[0, 1],\n  [1, 0]\n").unwrap_err();
        match err {
            IoError::Parse { line, column, .. } => assert_eq!((line, column), (4, 0)),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_space("{\"dist\": [[0, x]]}").unwrap_err();
        assert!(
            matches!(
                err,
                IoError::Parse {
                    line: 1,
                    column: 15,
                    ..
                }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn triangle_violation_is_a_validation_error() {
        let err = parse_space(r#"{"dist": [[0,1,5],[1,0,1],[5,1,0]]}"#).unwrap_err();
        assert!(matches!(
            err,
            IoError::Validation(MetricError::TriangleViolation { i: 0, j: 2, via: 1 })
        ));
    }

    #[test]
    fn labels_default_to_indices() {
        let x = parse_space(r#"{"dist": [[0, 2], [2, 0]]}"#).unwrap();
        assert_eq!(x.labels(), ["0", "1"]);
        let err = parse_space(r#"{"labels": ["a"], "dist": [[0, 2], [2, 0]]}"#).unwrap_err();
        assert!(matches!(
            err,
            IoError::Validation(MetricError::LabelCount { .. })
        ));
    }
}
