//! Single- and multi-level fast wavelet transform (Mallat cascade).

use super::{Boundary, FilterBank};
use crate::{Error, Result};

/// Number of coefficients produced from `n` samples.
pub fn coeff_len(n: usize, filter_len: usize, boundary: Boundary) -> usize {
    match boundary {
        Boundary::Symmetric => (n + filter_len - 1) / 2,
        Boundary::Periodic => n.div_ceil(2),
    }
}

/// Conservative decomposition depth `floor(log2(n / (filter_len - 1)))`.
///
/// Returns 0 when `n` is shorter than the filter.
pub fn max_level(n: usize, order: usize) -> usize {
    let filter_len = 2 * order;
    if order == 0 || n < filter_len {
        return 0;
    }
    let span = filter_len - 1;
    let mut level = 0;
    while span << (level + 1) <= n {
        level += 1;
    }
    level
}

// Half-sample symmetric reflection: ... x1 x0 | x0 x1 ... x(n-1) | x(n-1) x(n-2) ...
#[inline]
fn reflect(idx: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = idx.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

/// One analysis stage: filter with `lo_dec`/`hi_dec` and keep odd-indexed
/// outputs of the full convolution.
pub fn dwt_step(signal: &[f64], bank: &FilterBank, boundary: Boundary) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = signal.len();
    if n == 0 {
        return Err(Error::invalid("dwt_step: empty signal"));
    }
    let flen = bank.len();
    let out_len = coeff_len(n, flen, boundary);
    let mut approx = vec![0.0; out_len];
    let mut detail = vec![0.0; out_len];
    match boundary {
        Boundary::Symmetric => {
            for i in 0..out_len {
                let centre = 2 * i as isize + 1;
                let (mut a, mut d) = (0.0, 0.0);
                for j in 0..flen {
                    let x = signal[reflect(centre - j as isize, n)];
                    a += bank.lo_dec[j] * x;
                    d += bank.hi_dec[j] * x;
                }
                approx[i] = a;
                detail[i] = d;
            }
        }
        Boundary::Periodic => {
            let padded = 2 * out_len;
            let sample = |k: usize| if k < n { signal[k] } else { signal[n - 1] };
            for i in 0..out_len {
                let centre = (2 * i + flen / 2) as isize;
                let (mut a, mut d) = (0.0, 0.0);
                for j in 0..flen {
                    let x = sample((centre - j as isize).rem_euclid(padded as isize) as usize);
                    a += bank.lo_dec[j] * x;
                    d += bank.hi_dec[j] * x;
                }
                approx[i] = a;
                detail[i] = d;
            }
        }
    }
    Ok((approx, detail))
}

/// One synthesis stage: upsample, filter with `lo_rec`/`hi_rec`, sum and
/// trim to `target_len` samples.
pub fn idwt_step(
    approx: &[f64],
    detail: &[f64],
    bank: &FilterBank,
    boundary: Boundary,
    target_len: usize,
) -> Result<Vec<f64>> {
    if approx.len() != detail.len() {
        return Err(Error::invalid(format!(
            "idwt_step: approximation has {} coefficients, detail has {}",
            approx.len(),
            detail.len()
        )));
    }
    let flen = bank.len();
    let len = approx.len();
    if target_len == 0 || coeff_len(target_len, flen, boundary) != len {
        return Err(Error::invalid(format!(
            "idwt_step: {len} coefficients cannot reconstruct {target_len} samples with db{} ({boundary})",
            bank.order()
        )));
    }
    match boundary {
        Boundary::Symmetric => {
            let mut out = vec![0.0; target_len];
            for (m, out_m) in out.iter_mut().enumerate() {
                // Coefficients i with 0 <= 2i + 1 - m < flen touch sample m.
                let lo = m / 2;
                let hi = ((m + flen - 2) / 2).min(len - 1);
                let mut acc = 0.0;
                for i in lo..=hi {
                    let tap = flen - 1 - (2 * i + 1 - m);
                    acc += bank.lo_rec[tap] * approx[i] + bank.hi_rec[tap] * detail[i];
                }
                *out_m = acc;
            }
            Ok(out)
        }
        Boundary::Periodic => {
            let padded = 2 * len;
            let mut out = vec![0.0; padded];
            for i in 0..len {
                let centre = (2 * i + flen / 2) as isize;
                for j in 0..flen {
                    let m = (centre - j as isize).rem_euclid(padded as isize) as usize;
                    let tap = flen - 1 - j;
                    out[m] += bank.lo_rec[tap] * approx[i] + bank.hi_rec[tap] * detail[i];
                }
            }
            out.truncate(target_len);
            Ok(out)
        }
    }
}

/// Output of a multi-level decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    /// `cA_L`.
    pub approx: Vec<f64>,
    /// `cD_L, …, cD_1`, coarsest first.
    pub details: Vec<Vec<f64>>,
    pub level: usize,
    pub original_len: usize,
    /// Input length at each stage: `lengths[k]` is the length fed to stage
    /// `k + 1`, so `lengths[0] == original_len`.
    pub lengths: Vec<usize>,
    pub order: usize,
    pub boundary: Boundary,
    /// Set when `level` exceeds [`max_level`] for this length and filter.
    pub exceeds_max_level: bool,
}

impl CoefficientSet {
    /// Detail band `cD_j`, `j = 1` being the finest.
    pub fn detail(&self, j: usize) -> Option<&[f64]> {
        if j == 0 || j > self.level {
            return None;
        }
        self.details.get(self.level - j).map(Vec::as_slice)
    }

    pub fn detail_mut(&mut self, j: usize) -> Option<&mut Vec<f64>> {
        if j == 0 || j > self.level {
            return None;
        }
        let idx = self.level - j;
        self.details.get_mut(idx)
    }

    /// Same layout with every coefficient set to zero.
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.approx.iter_mut().for_each(|c| *c = 0.0);
        for d in &mut out.details {
            d.iter_mut().for_each(|c| *c = 0.0);
        }
        out
    }

    pub fn scale(&mut self, alpha: f64) {
        self.approx.iter_mut().for_each(|c| *c *= alpha);
        for d in &mut self.details {
            d.iter_mut().for_each(|c| *c *= alpha);
        }
    }

    /// Sum of squares over every band.
    pub fn energy(&self) -> f64 {
        let sq = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>();
        sq(&self.approx) + self.details.iter().map(|d| sq(d)).sum::<f64>()
    }
}

pub fn wavedec(signal: &[f64], bank: &FilterBank, level: usize, boundary: Boundary) -> Result<CoefficientSet> {
    if level == 0 {
        return Err(Error::invalid("wavedec: level must be at least 1"));
    }
    if signal.is_empty() {
        return Err(Error::invalid("wavedec: empty signal"));
    }
    let n = signal.len();
    let bound = max_level(n, bank.order());
    let exceeds_max_level = level > bound;
    if exceeds_max_level {
        log::warn!(
            "decomposition level {level} exceeds the conservative bound {bound} for n={n} and {}",
            bank.name()
        );
    }

    let mut lengths = Vec::with_capacity(level);
    let mut details = Vec::with_capacity(level);
    let mut approx = signal.to_vec();
    for stage in 0..level {
        if approx.is_empty() {
            return Err(Error::invalid(format!("wavedec: stage {stage} would receive an empty array")));
        }
        lengths.push(approx.len());
        let (a, d) = dwt_step(&approx, bank, boundary)?;
        details.push(d);
        approx = a;
    }
    details.reverse();
    Ok(CoefficientSet {
        approx,
        details,
        level,
        original_len: n,
        lengths,
        order: bank.order(),
        boundary,
        exceeds_max_level,
    })
}

pub fn waverec(coeffs: &CoefficientSet) -> Result<Vec<f64>> {
    let bank = FilterBank::daubechies(coeffs.order)?;
    waverec_with(coeffs, &bank)
}

pub(crate) fn waverec_with(coeffs: &CoefficientSet, bank: &FilterBank) -> Result<Vec<f64>> {
    validate(coeffs, bank)?;
    let mut approx = coeffs.approx.clone();
    for (k, detail) in coeffs.details.iter().enumerate() {
        let target = coeffs.lengths[coeffs.level - 1 - k];
        approx = idwt_step(&approx, detail, bank, coeffs.boundary, target)?;
    }
    Ok(approx)
}

fn validate(coeffs: &CoefficientSet, bank: &FilterBank) -> Result<()> {
    let bad = |msg: String| Err(Error::invalid(format!("waverec: {msg}")));
    if coeffs.level == 0 {
        return bad("level must be at least 1".into());
    }
    if coeffs.details.len() != coeffs.level || coeffs.lengths.len() != coeffs.level {
        return bad(format!(
            "level {} but {} detail bands and {} recorded lengths",
            coeffs.level,
            coeffs.details.len(),
            coeffs.lengths.len()
        ));
    }
    if coeffs.lengths[0] != coeffs.original_len {
        return bad("first recorded length differs from original length".into());
    }
    for stage in 0..coeffs.level {
        let expect = coeff_len(coeffs.lengths[stage], bank.len(), coeffs.boundary);
        let detail = &coeffs.details[coeffs.level - 1 - stage];
        if detail.len() != expect {
            return bad(format!("detail band {} has {} coefficients, expected {expect}", stage + 1, detail.len()));
        }
        let next = coeffs.lengths.get(stage + 1).copied().unwrap_or(coeffs.approx.len());
        if next != expect {
            return bad(format!("stage {} output length {next} inconsistent with {expect}", stage + 1));
        }
    }
    Ok(())
}
