use ndarray::Array2;

use super::transform::{waverec_with, wavedec};
use super::{Boundary, FilterBank};
use crate::Result;

/// The `N x (L + 1)` matrix `S` whose columns sum to the decomposed signal.
///
/// Column `i < L` is the reconstruction from detail band `cD_{i+1}` alone
/// (finest band first); the last column is the reconstruction from the
/// approximation `cA_L` alone.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsignalMatrix {
    pub columns: Vec<Vec<f64>>,
    pub len: usize,
    pub level: usize,
    pub order: usize,
    pub boundary: Boundary,
    pub exceeds_max_level: bool,
}

impl SubsignalMatrix {
    pub fn bands(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    /// Row-wise sum of the columns.
    pub fn sum(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        for col in &self.columns {
            for (o, v) in out.iter_mut().zip(col) {
                *o += v;
            }
        }
        out
    }

    /// Dense `N x (L + 1)` copy.
    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.len, self.bands()), |(r, c)| self.columns[c][r])
    }
}

pub fn subsignal_matrix(signal: &[f64], bank: &FilterBank, level: usize, boundary: Boundary) -> Result<SubsignalMatrix> {
    let coeffs = wavedec(signal, bank, level, boundary)?;
    let zero = coeffs.zeros_like();
    let mut columns = Vec::with_capacity(level + 1);
    for j in 1..=level {
        let mut isolated = zero.clone();
        *isolated.detail_mut(j).expect("band index within level") = coeffs.detail(j).expect("band").to_vec();
        columns.push(waverec_with(&isolated, bank)?);
    }
    let mut isolated = zero;
    isolated.approx = coeffs.approx.clone();
    columns.push(waverec_with(&isolated, bank)?);
    Ok(SubsignalMatrix {
        columns,
        len: signal.len(),
        level,
        order: bank.order(),
        boundary,
        exceeds_max_level: coeffs.exceeds_max_level,
    })
}
