//! Classifier API: label mapping, standardization, fitting, prediction and
//! model persistence.

use std::cmp::Ordering;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::descent::{self, CoefficientSet, DescentConfig, FitResult, Standardization};
use crate::error::{Result, VdaError};
use crate::loss::{Polynomial, SmoothingConfig};
use crate::penalty::PenaltyConfig;
use crate::simplex::{default_epsilon, SimplexCode};

pub const MODEL_VERSION: &str = "vda-model/1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    /// Dead-zone radius; defaults to half the simplex edge length.
    pub epsilon: Option<f64>,
    /// Smoothing half-width; defaults to `epsilon / 4`.
    pub delta: Option<f64>,
    pub polynomial: Polynomial,
    pub penalties: PenaltyConfig,
    pub max_sweeps: usize,
    pub tol: f64,
    pub max_halvings: usize,
    pub standardize: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epsilon: None,
            delta: None,
            polynomial: Polynomial::Quartic,
            penalties: PenaltyConfig::default(),
            max_sweeps: 1000,
            tol: 1e-6,
            max_halvings: 30,
            standardize: true,
        }
    }
}

impl TrainOptions {
    pub fn with_penalties(lambda_l: f64, lambda_e: f64) -> Result<Self> {
        Ok(TrainOptions {
            penalties: PenaltyConfig::new(lambda_l, lambda_e)?,
            ..Default::default()
        })
    }

    /// Resolve the descent configuration for `k` classes.
    pub fn descent_config(&self, k: usize) -> Result<DescentConfig> {
        let epsilon = match self.epsilon {
            Some(e) => e,
            None => default_epsilon(k)?,
        };
        let delta = self.delta.unwrap_or(epsilon / 4.0);
        let smoothing = SmoothingConfig::new(epsilon, delta, self.polynomial)?;
        let mut cfg = DescentConfig::new(smoothing, self.penalties);
        cfg.max_sweeps = self.max_sweeps;
        cfg.tol = self.tol;
        cfg.max_halvings = self.max_halvings;
        cfg.standardize = self.standardize;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VdaModel {
    pub code: SimplexCode,
    /// Slopes on the standardized scale.
    pub coefficients: CoefficientSet,
    /// Original label of class index `c` is `labels[c]`.
    pub labels: Vec<String>,
    pub standardization: Standardization,
    pub smoothing: SmoothingConfig,
    pub penalties: PenaltyConfig,
}

/// Sorted distinct labels: numerically when every label parses as a number,
/// lexicographically otherwise.
pub fn sorted_labels<S: AsRef<str>>(labels: &[S]) -> Vec<String> {
    let mut distinct: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
    distinct.sort();
    distinct.dedup();
    let numeric: Option<Vec<f64>> = distinct.iter().map(|s| s.trim().parse::<f64>().ok()).collect();
    if let Some(values) = numeric {
        let mut pairs: Vec<(f64, String)> = values.into_iter().zip(distinct).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
        pairs.into_iter().map(|(_, s)| s).collect()
    } else {
        distinct
    }
}

/// Map labels to 0-based class indices through `label_map`.
pub fn encode_labels<S: AsRef<str>>(labels: &[S], label_map: &[String]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|s| {
            label_map
                .iter()
                .position(|l| l == s.as_ref())
                .ok_or_else(|| VdaError::data(format!("unknown label '{}'", s.as_ref())))
        })
        .collect()
}

pub fn train<S: AsRef<str>>(
    x: ArrayView2<'_, f64>,
    labels: &[S],
    opts: &TrainOptions,
) -> Result<VdaModel> {
    train_detailed(x, labels, opts).map(|(m, _)| m)
}

/// Train and also return the solver diagnostics.
pub fn train_detailed<S: AsRef<str>>(
    x: ArrayView2<'_, f64>,
    labels: &[S],
    opts: &TrainOptions,
) -> Result<(VdaModel, FitResult)> {
    if labels.len() != x.nrows() {
        return Err(VdaError::arg(format!(
            "{} labels for {} rows",
            labels.len(),
            x.nrows()
        )));
    }
    let label_map = sorted_labels(labels);
    if label_map.len() < 2 {
        return Err(VdaError::data("training data must contain at least two distinct labels"));
    }
    let classes = encode_labels(labels, &label_map)?;
    let k = label_map.len();
    let cfg = opts.descent_config(k)?;
    let fit = descent::fit(x, &classes, k, &cfg)?;
    let model = VdaModel {
        code: SimplexCode::new(k)?,
        coefficients: fit.coefficients.clone(),
        labels: label_map,
        standardization: fit.standardization.clone(),
        smoothing: cfg.smoothing,
        penalties: cfg.penalties,
    };
    Ok((model, fit))
}

impl VdaModel {
    pub fn k(&self) -> usize {
        self.code.k()
    }

    pub fn n_predictors(&self) -> usize {
        self.coefficients.n_predictors()
    }

    /// Fitted points `Â z + b̂` in code space for standardized rows `z`.
    pub fn decision(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_predictors() {
            return Err(VdaError::arg(format!(
                "model expects {} predictors, got {}",
                self.n_predictors(),
                x.ncols()
            )));
        }
        let z = self.standardization.apply(x);
        let mut out = z.dot(&self.coefficients.a.t());
        out += &self.coefficients.b;
        Ok(out)
    }

    /// 0-based predicted class indices.
    pub fn predict_classes(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let fitted = self.decision(x)?;
        Ok(fitted
            .rows()
            .into_iter()
            .map(|r| self.code.nearest(&r.to_vec()))
            .collect())
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<String>> {
        Ok(self
            .predict_classes(x)?
            .into_iter()
            .map(|c| self.labels[c].clone())
            .collect())
    }

    /// Original column indices of predictors with a nonzero slope column.
    pub fn active_predictors(&self) -> Vec<usize> {
        self.coefficients.active_set()
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            version: MODEL_VERSION.to_string(),
            k: self.k(),
            labels: self.labels.clone(),
            epsilon: self.smoothing.epsilon,
            delta: self.smoothing.delta,
            polynomial: self.smoothing.polynomial,
            lambda_l: self.penalties.lambda_l,
            lambda_e: self.penalties.lambda_e,
            means: self.standardization.means.clone(),
            scales: self.standardization.scales.clone(),
            a: self.coefficients.a.iter().copied().collect(),
            b: self.coefficients.b.to_vec(),
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.version != MODEL_VERSION {
            return Err(VdaError::data(format!(
                "unsupported model version '{}', expected '{MODEL_VERSION}'",
                doc.version
            )));
        }
        let code = SimplexCode::new(doc.k)?;
        let p = doc.means.len();
        let m = doc.k - 1;
        if doc.labels.len() != doc.k
            || doc.scales.len() != p
            || doc.a.len() != m * p
            || doc.b.len() != m
        {
            return Err(VdaError::data("model document has inconsistent dimensions"));
        }
        if doc.scales.iter().any(|&s| !(s > 0.0)) {
            return Err(VdaError::data("model scales must be positive"));
        }
        let mut distinct = doc.labels.clone();
        distinct.sort();
        distinct.dedup();
        if distinct.len() != doc.k {
            return Err(VdaError::data("model labels are not distinct"));
        }
        let a = Array2::from_shape_vec((m, p), doc.a)
            .map_err(|e| VdaError::data(format!("slope matrix: {e}")))?;
        Ok(VdaModel {
            code,
            coefficients: CoefficientSet {
                a,
                b: Array1::from(doc.b),
            },
            labels: doc.labels,
            standardization: Standardization {
                means: doc.means,
                scales: doc.scales,
            },
            smoothing: SmoothingConfig::new(doc.epsilon, doc.delta, doc.polynomial)?,
            penalties: PenaltyConfig::new(doc.lambda_l, doc.lambda_e)?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk model layout. `A` is the `(k-1) × p` slope matrix in row-major
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub version: String,
    pub k: usize,
    pub labels: Vec<String>,
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default)]
    pub polynomial: Polynomial,
    #[serde(rename = "lambda_L")]
    pub lambda_l: f64,
    #[serde(rename = "lambda_E")]
    pub lambda_e: f64,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// `k × k` counts, rows indexed by true class and columns by prediction.
pub fn confusion_matrix(truth: &[usize], predicted: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        m[t][p] += 1;
    }
    m
}

pub fn error_rate<T: PartialEq>(truth: &[T], predicted: &[T]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let wrong = truth.iter().zip(predicted).filter(|(a, b)| a != b).count();
    wrong as f64 / truth.len() as f64
}
