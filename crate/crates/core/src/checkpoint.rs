//! Versioned JSON checkpoints for trained models.
//!
//! Tensors are stored row-major as `{rows, cols, data}`. Floats round-trip
//! bit-exactly.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::denoiser::{Model, Normalization};
use crate::network::{BatchNorm, Dense, HiddenLayer, NetworkParams, BN_EPS, BN_MOMENTUM};
use crate::wavelet::{parse_wavelet_name, Boundary, WaveletConfig};
use crate::{Error, Result};

pub const FORMAT: &str = "wavegate-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    fn matrix(a: &Array2<f64>) -> Self {
        Self {
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.iter().copied().collect(),
        }
    }

    fn vector(a: &Array1<f64>) -> Self {
        Self {
            rows: 1,
            cols: a.len(),
            data: a.to_vec(),
        }
    }

    fn to_matrix(&self, name: &str) -> Result<Array2<f64>> {
        Array2::from_shape_vec((self.rows, self.cols), self.data.clone())
            .map_err(|_| Error::Checkpoint(format!("{name}: {} values for shape {}x{}", self.data.len(), self.rows, self.cols)))
    }

    fn to_vector(&self, name: &str) -> Result<Array1<f64>> {
        if self.rows != 1 || self.data.len() != self.cols {
            return Err(Error::Checkpoint(format!("{name}: expected a 1x{} vector", self.data.len())));
        }
        Ok(Array1::from(self.data.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub weight: Tensor,
    pub bias: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletRecord {
    pub name: String,
    pub level: usize,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub widths: Vec<usize>,
    pub wavelet: WaveletRecord,
    pub normalization: Normalization,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    pub hidden: Vec<LayerRecord>,
    pub output_weight: Tensor,
    pub output_bias: Tensor,
}

impl Checkpoint {
    pub fn from_model(model: &Model) -> Result<Self> {
        for (name, t) in model.params.trainables() {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::Checkpoint(format!("{name} contains non-finite values")));
            }
        }
        let p = &model.params;
        Ok(Self {
            format: FORMAT.to_string(),
            version: VERSION,
            widths: p.widths().to_vec(),
            wavelet: WaveletRecord {
                name: model.wavelet.name(),
                level: model.wavelet.level,
                boundary: model.wavelet.boundary,
            },
            normalization: model.normalization,
            bn_momentum: BN_MOMENTUM,
            bn_eps: BN_EPS,
            hidden: p
                .hidden
                .iter()
                .map(|l| LayerRecord {
                    weight: Tensor::matrix(&l.dense.weight),
                    bias: Tensor::vector(&l.dense.bias),
                    gamma: Tensor::vector(&l.norm.gamma),
                    beta: Tensor::vector(&l.norm.beta),
                    running_mean: Tensor::vector(&l.norm.running_mean),
                    running_var: Tensor::vector(&l.norm.running_var),
                })
                .collect(),
            output_weight: Tensor::matrix(&p.output.weight),
            output_bias: Tensor::vector(&p.output.bias),
        })
    }

    pub fn into_model(self) -> Result<Model> {
        if self.format != FORMAT {
            return Err(Error::Checkpoint(format!("unknown format {:?}", self.format)));
        }
        if self.version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {} (expected {VERSION})", self.version)));
        }
        if self.bn_momentum != BN_MOMENTUM || self.bn_eps != BN_EPS {
            return Err(Error::Checkpoint(format!(
                "batch-norm settings momentum={} eps={} differ from this build",
                self.bn_momentum, self.bn_eps
            )));
        }
        let order = parse_wavelet_name(&self.wavelet.name).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let wavelet =
            WaveletConfig::new(order, self.wavelet.level, self.wavelet.boundary).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let hidden = self
            .hidden
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let n = |s: &str| format!("hidden{i}.{s}");
                Ok(HiddenLayer {
                    dense: Dense {
                        weight: l.weight.to_matrix(&n("weight"))?,
                        bias: l.bias.to_vector(&n("bias"))?,
                    },
                    norm: BatchNorm {
                        gamma: l.gamma.to_vector(&n("gamma"))?,
                        beta: l.beta.to_vector(&n("beta"))?,
                        running_mean: l.running_mean.to_vector(&n("running_mean"))?,
                        running_var: l.running_var.to_vector(&n("running_var"))?,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let output = Dense {
            weight: self.output_weight.to_matrix("output.weight")?,
            bias: self.output_bias.to_vector("output.bias")?,
        };
        let params = NetworkParams::from_parts(hidden, output).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if params.widths() != self.widths.as_slice() {
            return Err(Error::Checkpoint(format!(
                "declared widths {:?} do not match tensors {:?}",
                self.widths,
                params.widths()
            )));
        }
        let mut model = Model::new(params, wavelet).map_err(|e| Error::Checkpoint(e.to_string()))?;
        model.normalization = self.normalization;
        Ok(model)
    }
}

pub fn to_string(model: &Model) -> Result<String> {
    serde_json::to_string_pretty(&Checkpoint::from_model(model)?).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn from_str(text: &str) -> Result<Model> {
    let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))?;
    ck.into_model()
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, to_string(model)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path)?;
    from_str(&text).map_err(|e| match e {
        Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
        other => other,
    })
}
