//! The hybrid pipeline: sub-signals `S` from the wavelet bank, gates `a`
//! from the network, output `x̂ = S a`.

mod oracle;
mod train;

pub use oracle::{binary_oracle, relaxed_oracle, BinarySolution, RelaxedSolution, MAX_ORACLE_BANDS};
pub use train::{batch_gradients, train, EpochRecord, TrainConfig, TrainReport};

use std::ops::Deref;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::metrics::Denoise;
use crate::network::NetworkParams;
use crate::wavelet::{SubsignalMatrix, WaveletConfig};
use crate::{Error, Result};

/// Per-sub-signal gates, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("gate {bad} outside [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![1.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for WeightVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// `x̂ = Σ a_i s_i`.
pub fn reconstruct(s: &SubsignalMatrix, a: &[f64]) -> Result<Vec<f64>> {
    if a.len() != s.bands() {
        return Err(Error::invalid(format!(
            "{} weights for {} sub-signals",
            a.len(),
            s.bands()
        )));
    }
    let mut out = vec![0.0; s.len];
    for (col, &w) in s.columns.iter().zip(a) {
        for (o, v) in out.iter_mut().zip(col) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// Mean of squared differences over all `M * N` entries.
pub fn mse_loss(xhat: ArrayView2<f64>, x: ArrayView2<f64>) -> Result<f64> {
    if xhat.dim() != x.dim() {
        return Err(Error::invalid(format!("mse_loss: shapes {:?} and {:?} differ", xhat.dim(), x.dim())));
    }
    if x.is_empty() {
        return Err(Error::invalid("mse_loss: empty batch"));
    }
    let sum: f64 = ndarray::Zip::from(&xhat).and(&x).fold(0.0, |acc, &p, &q| acc + (p - q) * (p - q));
    Ok(sum / x.len() as f64)
}

/// Gradient of `||S a - x||² / N` with respect to `a`: `(2/N) Sᵀ (S a - x)`.
pub fn loss_grad_wrt_a(s: &SubsignalMatrix, a: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != s.len {
        return Err(Error::invalid(format!("target has {} samples, sub-signals have {}", x.len(), s.len)));
    }
    let xhat = reconstruct(s, a)?;
    let scale = 2.0 / s.len as f64;
    Ok(s.columns
        .iter()
        .map(|col| scale * col.iter().zip(xhat.iter().zip(x)).map(|(c, (p, q))| c * (p - q)).sum::<f64>())
        .collect())
}

/// Per-window min-max scaling applied to every input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    PerWindowMinMax,
}

/// Trained network plus the wavelet configuration it gates.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: NetworkParams,
    pub wavelet: WaveletConfig,
    pub normalization: Normalization,
}

impl Model {
    pub fn new(params: NetworkParams, wavelet: WaveletConfig) -> Result<Self> {
        if params.output_width() != wavelet.bands() {
            return Err(Error::invalid(format!(
                "network emits {} gates, level {} needs {}",
                params.output_width(),
                wavelet.level,
                wavelet.bands()
            )));
        }
        Ok(Self {
            params,
            wavelet,
            normalization: Normalization::PerWindowMinMax,
        })
    }

    pub fn window_len(&self) -> usize {
        self.params.input_width()
    }

    /// Gates for a batch of windows (one per row), inference mode.
    pub fn gates(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.params.infer(batch)
    }

    pub fn denoise(&self, y: &[f64]) -> Result<(Vec<f64>, WeightVector)> {
        denoise(self, y)
    }
}

impl Denoise for Model {
    fn denoise_window(&self, noisy: &[f64]) -> Result<Vec<f64>> {
        denoise(self, noisy).map(|(x, _)| x)
    }
}

/// Inference on one window: gates from the network, then `S a`.
pub fn denoise(model: &Model, y: &[f64]) -> Result<(Vec<f64>, WeightVector)> {
    if y.len() != model.window_len() {
        return Err(Error::invalid(format!(
            "window has {} samples, model expects {}",
            y.len(),
            model.window_len()
        )));
    }
    let s = model.wavelet.subsignals(y)?;
    let row = ArrayView2::from_shape((1, y.len()), y).expect("contiguous slice");
    let gates = model.params.infer(row)?;
    let a = WeightVector(gates.row(0).to_vec());
    Ok((reconstruct(&s, &a)?, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_network;
    use crate::wavelet::{Boundary, FilterBank};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn bank_s(y: &[f64], order: usize, level: usize) -> SubsignalMatrix {
        crate::wavelet::subsignal_matrix(y, &FilterBank::daubechies(order).unwrap(), level, Boundary::Symmetric).unwrap()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn reconstruct_cases() {
        let y = random(100, 1);
        let s = bank_s(&y, 4, 4);
        assert!(max_abs_diff(&reconstruct(&s, &[1.0; 5]).unwrap(), &y) < 1e-8);
        assert!(reconstruct(&s, &[0.0; 5]).unwrap().iter().all(|&v| v == 0.0));
        let mut e = [0.0; 5];
        e[2] = 1.0;
        assert_eq!(reconstruct(&s, &e).unwrap(), s.columns[2]);
        assert!(reconstruct(&s, &[1.0; 4]).is_err());
    }

    #[test]
    fn mse_loss_cases() {
        let x = Array2::from_shape_vec((3, 5), random(15, 2)).unwrap();
        assert_eq!(mse_loss(x.view(), x.view()).unwrap(), 0.0);
        let shifted = &x + 0.1;
        assert!((mse_loss(shifted.view(), x.view()).unwrap() - 0.01).abs() < 1e-15);
        let y = Array2::from_shape_vec((3, 5), random(15, 3)).unwrap();
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..5 {
                acc += (y[[i, j]] - x[[i, j]]).powi(2);
            }
        }
        assert!((mse_loss(y.view(), x.view()).unwrap() - acc / 15.0).abs() < 1e-15);
        assert!(mse_loss(y.view(), x.slice(ndarray::s![..2, ..]).view()).is_err());
    }

    fn objective(s: &SubsignalMatrix, a: &[f64], x: &[f64]) -> f64 {
        crate::metrics::mse(&reconstruct(s, a).unwrap(), x).unwrap()
    }

    #[test]
    fn grad_matches_finite_differences() {
        let y = random(120, 4);
        let x = random(120, 5);
        let s = bank_s(&y, 3, 4);
        let a = [0.2, 0.9, 0.5, 0.1, 0.7];
        let g = loss_grad_wrt_a(&s, &a, &x).unwrap();
        let h = 1e-6;
        for i in 0..a.len() {
            let mut up = a;
            up[i] += h;
            let mut down = a;
            down[i] -= h;
            let fd = (objective(&s, &up, &x) - objective(&s, &down, &x)) / (2.0 * h);
            assert!((g[i] - fd).abs() <= 1e-6 * fd.abs().max(1e-3), "{i}: {} vs {fd}", g[i]);
        }
    }

    #[test]
    fn grad_vanishes_at_exact_fit_and_least_squares_optimum() {
        let y = random(64, 6);
        let s = bank_s(&y, 2, 3);
        let a = [0.3, 0.6, 0.2, 0.8];
        let x = reconstruct(&s, &a).unwrap();
        assert!(loss_grad_wrt_a(&s, &a, &x).unwrap().iter().all(|g| g.abs() < 1e-14));

        // Unconstrained optimum from the normal equations.
        let target = random(64, 7);
        let sm = s.to_array();
        let gram = sm.t().dot(&sm);
        let rhs = sm.t().dot(&ndarray::Array1::from(target.clone()));
        let opt = solve(gram, rhs);
        let g = loss_grad_wrt_a(&s, opt.as_slice().unwrap(), &target).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-8), "{g:?}");
    }

    // Gaussian elimination with partial pivoting, test-only.
    fn solve(mut a: Array2<f64>, mut b: ndarray::Array1<f64>) -> ndarray::Array1<f64> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[[i, c]].abs().total_cmp(&a[[j, c]].abs())).unwrap();
            for k in 0..n {
                a.swap([c, k], [p, k]);
            }
            b.swap(c, p);
            for r in c + 1..n {
                let f = a[[r, c]] / a[[c, c]];
                for k in c..n {
                    a[[r, k]] -= f * a[[c, k]];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = ndarray::Array1::zeros(n);
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| a[[r, k]] * x[k]).sum();
            x[r] = (b[r] - s) / a[[r, r]];
        }
        x
    }

    #[test]
    fn weight_vector_bounds() {
        assert!(WeightVector::new(vec![0.0, 0.5, 1.0]).is_ok());
        assert!(WeightVector::new(vec![1.01]).is_err());
        assert!(WeightVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn denoise_is_compositional_and_deterministic() {
        let wavelet = WaveletConfig::new(4, 4, Boundary::Symmetric).unwrap();
        let model = Model::new(init_network(64, 5, 3).unwrap(), wavelet).unwrap();
        let y = random(64, 8);
        let (xhat, a) = denoise(&model, &y).unwrap();
        assert_eq!(a.len(), 5);
        assert!(a.iter().all(|&v| v > 0.0 && v < 1.0));
        let s = wavelet.subsignals(&y).unwrap();
        assert_eq!(xhat, reconstruct(&s, &a).unwrap());
        assert_eq!(denoise(&model, &y).unwrap(), (xhat, a));
        assert!(denoise(&model, &y[..63]).is_err());
    }

    #[test]
    fn model_rejects_band_mismatch() {
        let wavelet = WaveletConfig::new(4, 4, Boundary::Symmetric).unwrap();
        assert!(Model::new(init_network(64, 6, 3).unwrap(), wavelet).is_err());
    }
}
