//! Hybrid wavelet / neural-network denoiser for quasi-periodic pulse waveforms.
//!
//! A noisy window `y` is decomposed with a multi-level fast wavelet transform
//! into `L + 1` sub-signals `s_1 … s_{L+1}` that sum back to `y`. A small
//! feedforward network looks at the same window and emits one gate in `(0, 1)`
//! per sub-signal; the denoised window is the gated sum `x̂ = S a`. Training
//! backpropagates the reconstruction MSE through the gates into the network.
//!
//! Module map:
//!
//! - [`wavelet`]: Daubechies filter banks, single-level and multi-level
//!   transforms, and the sub-signal matrix `S`.
//! - [`network`]: the gating network (dense, batch norm, ReLU, sigmoid head),
//!   its backward pass and the Adam optimizer.
//! - [`denoiser`]: reconstruction, loss and gradient, training with early
//!   stopping, inference, and the exhaustive/relaxed selection oracles.
//! - [`noise`]: Gaussian, Poisson, uniform and salt-and-pepper corruption.
//! - [`dataset`]: record loading, windowing, normalization, a synthetic pulse
//!   generator and corpus splitting.
//! - [`metrics`]: MSE, PSNR and evaluation summaries.
//! - [`checkpoint`]: the versioned JSON model file.

pub mod checkpoint;
pub mod dataset;
pub mod denoiser;
mod error;
pub mod metrics;
pub mod network;
pub mod noise;
pub mod wavelet;


pub use denoiser::{denoise, train, Model, TrainConfig, TrainReport, WeightVector};
pub use error::{Error, Result};
pub use wavelet::{Boundary, FilterBank, WaveletConfig};
