//! Reference solutions of the band-selection problem: exhaustive search over
//! binary gates and projected gradient descent over the `[0, 1]` box.

use ndarray::{Array1, Array2};

use super::{reconstruct, WeightVector};
use crate::metrics::mse;
use crate::wavelet::SubsignalMatrix;
use crate::{Error, Result};

/// Largest band count the exhaustive search accepts (`2^20` subsets).
pub const MAX_ORACLE_BANDS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    pub weights: Vec<u8>,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    pub weights: WeightVector,
    pub mse: f64,
    /// Objective after every accepted or rejected iteration; non-increasing.
    pub history: Vec<f64>,
}

/// `G = SᵀS / N`, `c = Sᵀx / N`, `‖x‖² / N`, so that `mse(a) = aᵀGa - 2cᵀa + x2`.
struct Quadratic {
    gram: Array2<f64>,
    lin: Array1<f64>,
    x2: f64,
}

impl Quadratic {
    fn new(s: &SubsignalMatrix, x: &[f64]) -> Result<Self> {
        if x.len() != s.len {
            return Err(Error::invalid(format!("target has {} samples, sub-signals have {}", x.len(), s.len)));
        }
        if x.iter().chain(s.columns.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::numeric("oracle input contains non-finite values"));
        }
        let k = s.bands();
        let n = s.len as f64;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        let mut gram = Array2::zeros((k, k));
        for i in 0..k {
            for j in i..k {
                let v = dot(&s.columns[i], &s.columns[j]) / n;
                gram[[i, j]] = v;
                gram[[j, i]] = v;
            }
        }
        let lin = s.columns.iter().map(|c| dot(c, x) / n).collect();
        Ok(Self { gram, lin, x2: dot(x, x) / n })
    }

    fn value(&self, a: &Array1<f64>) -> f64 {
        (a.dot(&self.gram.dot(a)) - 2.0 * self.lin.dot(a) + self.x2).max(0.0)
    }

    fn grad(&self, a: &Array1<f64>) -> Array1<f64> {
        2.0 * (self.gram.dot(a) - &self.lin)
    }

    /// Gershgorin bound on the largest eigenvalue of the Hessian `2G`.
    fn lipschitz(&self) -> f64 {
        2.0 * self
            .gram
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Exhaustive search over `a ∈ {0,1}^(L+1)`. Ties (within rounding) go to
/// fewer ones, then to the lexicographically smallest vector.
pub fn binary_oracle(s: &SubsignalMatrix, x: &[f64]) -> Result<BinarySolution> {
    let k = s.bands();
    if k > MAX_ORACLE_BANDS {
        return Err(Error::invalid(format!(
            "binary oracle needs at most {MAX_ORACLE_BANDS} sub-signals, got {k}"
        )));
    }
    let q = Quadratic::new(s, x)?;
    let scale = q.x2.max(q.gram.diag().iter().cloned().fold(0.0, f64::max)).max(1e-300);
    let tol = 1e-12 * scale;

    let to_vec = |mask: u32| -> Vec<u8> { (0..k).map(|i| ((mask >> i) & 1) as u8).collect() };
    let mut best: Option<(f64, Vec<u8>)> = None;
    for mask in 0..(1u32 << k) {
        let bits = to_vec(mask);
        let a: Array1<f64> = bits.iter().map(|&b| b as f64).collect();
        let f = q.value(&a);
        let better = match &best {
            None => true,
            Some((bf, bb)) => {
                if f < bf - tol {
                    true
                } else if f <= bf + tol {
                    let ones = |v: &[u8]| v.iter().filter(|&&b| b == 1).count();
                    (ones(&bits), &bits) < (ones(bb), bb)
                } else {
                    false
                }
            }
        };
        if better {
            best = Some((f, bits));
        }
    }
    let (_, weights) = best.expect("at least one subset");
    let a: Vec<f64> = weights.iter().map(|&b| b as f64).collect();
    let mse = mse(&reconstruct(s, &a)?, x)?;
    Ok(BinarySolution { weights, mse })
}

/// Projected gradient descent on `‖S a - x‖² / N` over `[0, 1]^(L+1)`,
/// starting from `a = 1`. A step that would raise the objective is rejected
/// and the step size halved. `step = None` uses `1 / Lipschitz`.
pub fn relaxed_oracle(s: &SubsignalMatrix, x: &[f64], iters: usize, step: Option<f64>) -> Result<RelaxedSolution> {
    let q = Quadratic::new(s, x)?;
    let mut eta = match step {
        Some(v) if v.is_finite() && v > 0.0 => v,
        Some(v) => return Err(Error::invalid(format!("step must be positive and finite, got {v}"))),
        None => {
            let l = q.lipschitz();
            if l > 0.0 {
                1.0 / l
            } else {
                1.0
            }
        }
    };
    let mut a = Array1::from_elem(s.bands(), 1.0);
    let mut f = q.value(&a);
    let mut history = vec![f];
    for _ in 0..iters {
        let g = q.grad(&a);
        let cand = (&a - &(eta * &g)).mapv(|v| v.clamp(0.0, 1.0));
        let fc = q.value(&cand);
        if !fc.is_finite() {
            return Err(Error::numeric("relaxed oracle objective became non-finite"));
        }
        if fc <= f {
            let moved = cand.iter().zip(&a).any(|(p, r)| p != r);
            a = cand;
            f = fc;
            if !moved {
                history.push(f);
                break;
            }
        } else {
            eta *= 0.5;
        }
        history.push(f);
    }
    let weights = WeightVector::new(a.to_vec())?;
    let mse = mse(&reconstruct(s, &weights)?, x)?;
    Ok(RelaxedSolution { weights, mse, history })
}
