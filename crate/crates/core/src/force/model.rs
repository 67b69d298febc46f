use std::path::Path;

use serde::{Deserialize, Serialize};

use super::feature::{FeatureSet, ForceFeature};
use crate::error::{Error, Result};

pub const MODEL_VERSION: u32 = 1;

/// Trained RBF kernel regressor.
///
/// `predict(v) = max(0, bias + Σ_j coef_j · exp(−γ‖v − sv_j‖²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceModel {
    pub feature_set: FeatureSet,
    pub gamma: f64,
    pub c: f64,
    pub epsilon: f64,
    pub bias: f64,
    dim: usize,
    /// Row-major support vectors, `n_sv × dim`.
    sv: Vec<f64>,
    coef: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    feature_ordering_tag: String,
    gamma: f64,
    #[serde(rename = "C")]
    c: f64,
    epsilon: f64,
    bias: f64,
    n_sv: usize,
    support_vectors: Vec<Vec<f64>>,
    coefficients: Vec<f64>,
}

impl ForceModel {
    pub fn new(
        feature_set: FeatureSet,
        gamma: f64,
        c: f64,
        epsilon: f64,
        bias: f64,
        support_vectors: Vec<f64>,
        coefficients: Vec<f64>,
    ) -> Result<Self> {
        let dim = feature_set.dim();
        if support_vectors.len() != coefficients.len() * dim {
            return Err(Error::InvalidArgument(format!(
                "{} support vector values for {} coefficients of dimension {dim}",
                support_vectors.len(),
                coefficients.len()
            )));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self {
            feature_set,
            gamma,
            c,
            epsilon,
            bias,
            dim,
            sv: support_vectors,
            coef: coefficients,
        })
    }

    /// Model that predicts a constant.
    pub fn constant(feature_set: FeatureSet, value: f64) -> Self {
        Self {
            feature_set,
            gamma: 1.0,
            c: 0.0,
            epsilon: 0.0,
            bias: value,
            dim: feature_set.dim(),
            sv: Vec::new(),
            coef: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_sv(&self) -> usize {
        self.coef.len()
    }

    pub fn support_vector(&self, j: usize) -> &[f64] {
        &self.sv[j * self.dim..(j + 1) * self.dim]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    /// Kernel expansion without the non-negativity clamp.
    pub fn predict_raw(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.dim);
        let mut acc = self.bias;
        for (sv, &a) in self.sv.chunks_exact(self.dim).zip(&self.coef) {
            let d2: f64 = sv.iter().zip(v).map(|(s, x)| (s - x) * (s - x)).sum();
            acc += a * (-self.gamma * d2).exp();
        }
        acc
    }

    /// Estimated force in newtons, clamped at zero.
    pub fn predict(&self, v: &[f64]) -> f64 {
        self.predict_raw(v).max(0.0)
    }

    pub fn predict_feature(&self, f: &ForceFeature) -> f64 {
        self.predict(f.select(self.feature_set))
    }

    /// Lipschitz constant of the raw expansion, `Σ|coef|·√(2γ/e)`.
    pub fn lipschitz_bound(&self) -> f64 {
        let l1: f64 = self.coef.iter().map(|a| a.abs()).sum();
        l1 * (2.0 * self.gamma / std::f64::consts::E).sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_VERSION,
            feature_ordering_tag: self.feature_set.tag().to_string(),
            gamma: self.gamma,
            c: self.c,
            epsilon: self.epsilon,
            bias: self.bias,
            n_sv: self.n_sv(),
            support_vectors: self.sv.chunks_exact(self.dim).map(<[f64]>::to_vec).collect(),
            coefficients: self.coef.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.version != MODEL_VERSION {
            return Err(Error::Config(format!("unsupported model version {}", file.version)));
        }
        let set = FeatureSet::from_tag(&file.feature_ordering_tag).ok_or_else(|| {
            Error::Config(format!("unknown feature ordering `{}`", file.feature_ordering_tag))
        })?;
        if file.n_sv != file.support_vectors.len() || file.n_sv != file.coefficients.len() {
            return Err(Error::Config(format!(
                "n_sv = {} but {} support vectors and {} coefficients",
                file.n_sv,
                file.support_vectors.len(),
                file.coefficients.len()
            )));
        }
        if let Some(bad) = file.support_vectors.iter().find(|r| r.len() != set.dim()) {
            return Err(Error::Config(format!(
                "support vector of length {} for feature set `{}`",
                bad.len(),
                set.tag()
            )));
        }
        Self::new(
            set,
            file.gamma,
            file.c,
            file.epsilon,
            file.bias,
            file.support_vectors.concat(),
            file.coefficients,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
