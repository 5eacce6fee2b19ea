//! CSV dataset ingestion: numeric feature parsing, optional standardization,
//! optional intercept column, and binary label mapping.

use crate::linalg::{DesignMatrix, LinalgError};
use crate::logreg::ResponseVector;
use ndarray::Array1;
use std::collections::BTreeSet;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read dataset: {0}")]
    Io(#[from] csv::Error),
    #[error("row {row}, column '{column}': cannot parse '{token}' as a number")]
    Parse {
        row: usize,
        column: String,
        token: String,
    },
    #[error("label column '{0}' not found in header")]
    MissingLabelColumn(String),
    #[error("label column index {got} out of range for {columns} columns")]
    LabelIndexOutOfRange { got: usize, columns: usize },
    #[error("expected exactly two distinct labels including '{positive}', found {found:?}")]
    Label {
        positive: String,
        found: Vec<String>,
    },
    #[error("dataset has no data rows")]
    EmptyDataset,
    #[error("column '{0}' is constant and cannot be standardized")]
    ConstantColumn(String),
    #[error(transparent)]
    Shape(#[from] LinalgError),
}

/// How the label column is identified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

/// Where and how to read a dataset.
#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub label_column: LabelColumn,
    /// Token mapped to class 1; the single other token maps to 0.
    pub positive_label: String,
    /// Scale every feature column to mean 0, variance 1.
    pub standardize: bool,
    /// Prepend a column of ones.
    pub add_intercept: bool,
}

/// Reads an RFC-4180 CSV with a header row into a design matrix and response
/// vector. Feature columns are all non-label columns; standardization (when
/// on) uses the population variance and rejects constant columns.
pub fn load_dataset(spec: &DatasetSpec) -> Result<(DesignMatrix, ResponseVector), DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&spec.path)?;
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let label_idx = match &spec.label_column {
        LabelColumn::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingLabelColumn(name.clone()))?,
        LabelColumn::Index(idx) => {
            if *idx >= headers.len() {
                return Err(DatasetError::LabelIndexOutOfRange {
                    got: *idx,
                    columns: headers.len(),
                });
            }
            *idx
        }
    };
    let feature_columns: Vec<usize> = (0..headers.len()).filter(|&j| j != label_idx).collect();

    let mut features: Vec<f64> = Vec::new();
    let mut label_tokens: Vec<String> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        for &j in &feature_columns {
            let token = record.get(j).unwrap_or("").trim();
            let value: f64 = token.parse().map_err(|_| DatasetError::Parse {
                row: row_idx + 1,
                column: headers[j].clone(),
                token: token.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DatasetError::Parse {
                    row: row_idx + 1,
                    column: headers[j].clone(),
                    token: token.to_string(),
                });
            }
            features.push(value);
        }
        label_tokens.push(record.get(label_idx).unwrap_or("").trim().to_string());
    }

    let n = label_tokens.len();
    if n == 0 {
        return Err(DatasetError::EmptyDataset);
    }
    let n_features = feature_columns.len();

    let distinct: BTreeSet<&String> = label_tokens.iter().collect();
    if distinct.len() != 2 || !distinct.contains(&spec.positive_label) {
        return Err(DatasetError::Label {
            positive: spec.positive_label.clone(),
            found: distinct.into_iter().cloned().collect(),
        });
    }
    let labels: Array1<f64> = label_tokens
        .iter()
        .map(|t| if *t == spec.positive_label { 1.0 } else { 0.0 })
        .collect();
    let y = ResponseVector::new(labels).expect("labels mapped to 0/1");

    if spec.standardize {
        for (col_pos, &j) in feature_columns.iter().enumerate() {
            let mut mean = 0.0;
            for row in 0..n {
                mean += features[row * n_features + col_pos];
            }
            mean /= n as f64;
            let mut var = 0.0;
            for row in 0..n {
                let dev = features[row * n_features + col_pos] - mean;
                var += dev * dev;
            }
            var /= n as f64;
            if var == 0.0 {
                return Err(DatasetError::ConstantColumn(headers[j].clone()));
            }
            let sd = var.sqrt();
            for row in 0..n {
                let v = &mut features[row * n_features + col_pos];
                *v = (*v - mean) / sd;
            }
        }
    }

    let d = n_features + usize::from(spec.add_intercept);
    let mut data = Vec::with_capacity(n * d);
    for row in 0..n {
        if spec.add_intercept {
            data.push(1.0);
        }
        data.extend_from_slice(&features[row * n_features..(row + 1) * n_features]);
    }
    let x = DesignMatrix::from_shape_vec(n, d, data)?;
    Ok((x, y))
}
