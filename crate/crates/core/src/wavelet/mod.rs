//! Daubechies fast wavelet transform and the sub-signal bank.

mod filters;
mod subsignal;
mod transform;

pub use filters::{
    daubechies_filters, parse_wavelet_name, valid_wavelet_names, Boundary, FilterBank, MAX_ORDER, MIN_ORDER,
};
pub use subsignal::{subsignal_matrix, SubsignalMatrix};
pub use transform::{coeff_len, dwt_step, idwt_step, max_level, waverec, wavedec, CoefficientSet};

use serde::{Deserialize, Serialize};

use crate::Result;

/// Wavelet family member, decomposition depth and boundary handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveletConfig {
    pub order: usize,
    pub level: usize,
    pub boundary: Boundary,
}

impl WaveletConfig {
    pub fn new(order: usize, level: usize, boundary: Boundary) -> Result<Self> {
        FilterBank::daubechies(order)?;
        if level == 0 {
            return Err(crate::Error::invalid("decomposition level must be at least 1"));
        }
        Ok(Self { order, level, boundary })
    }

    pub fn bank(&self) -> Result<FilterBank> {
        FilterBank::daubechies(self.order)
    }

    pub fn name(&self) -> String {
        format!("db{}", self.order)
    }

    /// Number of sub-signals, `L + 1`.
    pub fn bands(&self) -> usize {
        self.level + 1
    }

    /// True when `level` is above the conservative bound for windows of `n` samples.
    pub fn exceeds_max_level(&self, n: usize) -> bool {
        self.level > max_level(n, self.order)
    }

    pub fn subsignals(&self, signal: &[f64]) -> Result<SubsignalMatrix> {
        subsignal_matrix(signal, &self.bank()?, self.level, self.boundary)
    }
}
