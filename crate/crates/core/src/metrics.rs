//! MSE, PSNR and evaluation summaries.
//!
//! PSNR uses a unit peak, `10 log10(1 / mse)`, which is only meaningful for
//! signals scaled to `[0, 1]`. Every window produced by [`crate::dataset`]
//! is.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::SignalPair;
use crate::{Error, Result};

/// Mean squared difference.
pub fn mse(x: &[f64], xhat: &[f64]) -> Result<f64> {
    if x.len() != xhat.len() {
        return Err(Error::invalid(format!("mse: lengths {} and {} differ", x.len(), xhat.len())));
    }
    if x.is_empty() {
        return Err(Error::invalid("mse: empty input"));
    }
    Ok(x.iter().zip(xhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64)
}

/// `10 log10(1 / mse)` in dB; `+inf` for a zero error.
pub fn psnr(mse: f64) -> Result<f64> {
    if mse.is_nan() || mse < 0.0 {
        return Err(Error::invalid(format!("psnr: mse must be non-negative, got {mse}")));
    }
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Anything that maps a noisy window to a denoised one.
pub trait Denoise {
    fn denoise_window(&self, noisy: &[f64]) -> Result<Vec<f64>>;
}

impl<F> Denoise for F
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    fn denoise_window(&self, noisy: &[f64]) -> Result<Vec<f64>> {
        self(noisy)
    }
}

/// Error before and after denoising over a set of windows.
///
/// `mse_noisy` is the all-ones baseline: gating every sub-signal with 1
/// reproduces the noisy input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub scope: String,
    pub count: usize,
    pub mse_noisy: f64,
    pub mse_denoised: f64,
    pub psnr_noisy: f64,
    pub psnr_denoised: f64,
    pub reduction_percent: f64,
}

impl MetricRow {
    pub fn from_mses(scope: impl Into<String>, count: usize, mse_noisy: f64, mse_denoised: f64) -> Result<Self> {
        Ok(Self {
            scope: scope.into(),
            count,
            mse_noisy,
            mse_denoised,
            psnr_noisy: psnr(mse_noisy)?,
            psnr_denoised: psnr(mse_denoised)?,
            reduction_percent: reduction_percent(mse_noisy, mse_denoised),
        })
    }

    pub fn check_consistency(&self) -> Result<()> {
        let close = |a: f64, b: f64| a == b || (a - b).abs() <= 1e-9 * a.abs().max(1.0);
        let ok = close(self.psnr_noisy, psnr(self.mse_noisy)?)
            && close(self.psnr_denoised, psnr(self.mse_denoised)?)
            && close(self.reduction_percent, reduction_percent(self.mse_noisy, self.mse_denoised));
        if ok {
            Ok(())
        } else {
            Err(Error::numeric(format!("inconsistent metrics for '{}'", self.scope)))
        }
    }
}

/// `100 (1 - denoised / noisy)`; 0 when both errors are zero.
pub fn reduction_percent(mse_noisy: f64, mse_denoised: f64) -> f64 {
    if mse_noisy == 0.0 {
        if mse_denoised == 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        100.0 * (1.0 - mse_denoised / mse_noisy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub overall: MetricRow,
    /// One row per noise kind, sorted by kind.
    pub breakdown: Vec<MetricRow>,
}

impl EvalSummary {
    pub fn check_consistency(&self) -> Result<()> {
        self.overall.check_consistency()?;
        self.breakdown.iter().try_for_each(MetricRow::check_consistency)
    }

    pub fn rows(&self) -> impl Iterator<Item = &MetricRow> {
        std::iter::once(&self.overall).chain(&self.breakdown)
    }
}

/// Runs `model` over every pair and aggregates per-window MSEs in input
/// order.
pub fn evaluate<D: Denoise + ?Sized>(model: &D, test_set: &[SignalPair]) -> Result<EvalSummary> {
    if test_set.is_empty() {
        return Err(Error::invalid("evaluate: empty test set"));
    }
    // (count, sum noisy mse, sum denoised mse)
    let mut per_kind: BTreeMap<_, (usize, f64, f64)> = BTreeMap::new();
    let mut total = (0usize, 0.0, 0.0);
    for pair in test_set {
        let out = model.denoise_window(&pair.noisy)?;
        let noisy = mse(&pair.clean, &pair.noisy)?;
        let denoised = mse(&pair.clean, &out)?;
        let entry = per_kind.entry(pair.kind()).or_insert((0, 0.0, 0.0));
        for acc in [entry, &mut total] {
            acc.0 += 1;
            acc.1 += noisy;
            acc.2 += denoised;
        }
    }
    let row = |scope: &str, (n, a, b): (usize, f64, f64)| MetricRow::from_mses(scope, n, a / n as f64, b / n as f64);
    let summary = EvalSummary {
        overall: row("all", total)?,
        breakdown: per_kind
            .into_iter()
            .map(|(kind, acc)| row(kind.as_str(), acc))
            .collect::<Result<_>>()?,
    };
    summary.check_consistency()?;
    Ok(summary)
}
