//! Mini-batch training with Adam and early stopping on validation MSE.

use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{reconstruct, Model};
use crate::dataset::{mix_seed, SignalPair, WindowedDataset};
use crate::network::{adam_step, init_network, AdamState, Gradients, NetworkParams};
use crate::wavelet::{Boundary, SubsignalMatrix, WaveletConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub wavelet: WaveletConfig,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub val_batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            wavelet: WaveletConfig {
                order: 10,
                level: 8,
                boundary: Boundary::Symmetric,
            },
            learning_rate: 1e-3,
            batch_size: 100,
            val_batch_size: 100,
            max_epochs: 500,
            patience: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        WaveletConfig::new(self.wavelet.order, self.wavelet.level, self.wavelet.boundary)?;
        if self.batch_size < 2 || self.val_batch_size < 2 {
            return Err(Error::invalid(format!(
                "batch sizes must be at least 2, got {} and {}",
                self.batch_size, self.val_batch_size
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs must be at least 1"));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub stopped_epoch: usize,
    pub early_stopped: bool,
    pub wall_time_secs: f64,
    /// Validation MSE of the all-ones gates (`x̂ = y`).
    pub baseline_val_mse: f64,
    /// Batch sizes actually used after clamping to the split sizes.
    pub effective_batch_size: usize,
    pub effective_val_batch_size: usize,
}

struct Prepared<'a> {
    pairs: &'a [SignalPair],
    subsignals: Vec<SubsignalMatrix>,
}

fn prepare<'a>(data: &'a WindowedDataset, wavelet: &WaveletConfig) -> Result<Prepared<'a>> {
    let subsignals = data
        .pairs
        .par_iter()
        .map(|p| wavelet.subsignals(&p.noisy))
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared {
        pairs: &data.pairs,
        subsignals,
    })
}

fn stack(pairs: &[SignalPair], idx: &[usize], n: usize) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), n));
    for (mut row, &i) in out.rows_mut().into_iter().zip(idx) {
        row.assign(&ArrayView2::from_shape((1, n), &pairs[i].noisy).expect("window length").row(0));
    }
    out
}

/// Total squared error of `S a` against the clean windows, over `idx`.
fn batch_sse(set: &Prepared, idx: &[usize], gates: &Array2<f64>) -> Result<f64> {
    let mut sse = 0.0;
    for (row, &i) in idx.iter().enumerate() {
        let a = gates.row(row).to_vec();
        let xhat = reconstruct(&set.subsignals[i], &a)?;
        sse += xhat.iter().zip(&set.pairs[i].clean).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    }
    Ok(sse)
}

/// Train-mode loss `Σ‖S_m a_m - x_m‖² / (M N)` for one batch and its
/// gradient with respect to every trainable tensor.
pub fn batch_gradients(
    params: &mut NetworkParams,
    noisy: ArrayView2<f64>,
    subsignals: &[&SubsignalMatrix],
    clean: &[&[f64]],
) -> Result<(f64, Gradients)> {
    let (m, n) = noisy.dim();
    if subsignals.len() != m || clean.len() != m {
        return Err(Error::invalid(format!(
            "batch of {m} windows with {} sub-signal sets and {} targets",
            subsignals.len(),
            clean.len()
        )));
    }
    let (gates, cache) = params.forward_train(noisy)?;
    let scale = 2.0 / (m * n) as f64;
    let mut upstream = Array2::zeros(gates.dim());
    let mut sse = 0.0;
    for row in 0..m {
        let s = subsignals[row];
        if s.len != n || clean[row].len() != n {
            return Err(Error::invalid(format!("window {row} does not have {n} samples")));
        }
        let a = gates.row(row).to_vec();
        let resid: Vec<f64> = reconstruct(s, &a)?.iter().zip(clean[row]).map(|(p, q)| p - q).collect();
        sse += resid.iter().map(|r| r * r).sum::<f64>();
        for (k, col) in s.columns.iter().enumerate() {
            upstream[[row, k]] = scale * col.iter().zip(&resid).map(|(c, r)| c * r).sum::<f64>();
        }
    }
    let loss = sse / (m * n) as f64;
    if !loss.is_finite() {
        return Ok((loss, Gradients::zeros_like(params)));
    }
    let grads = params.backward(&cache, upstream.view())?;
    Ok((loss, grads))
}

fn evaluate(params: &NetworkParams, set: &Prepared, chunk: usize, n: usize) -> Result<f64> {
    let idx: Vec<usize> = (0..set.pairs.len()).collect();
    let mut sse = 0.0;
    for part in idx.chunks(chunk) {
        let gates = params.infer(stack(set.pairs, part, n).view())?;
        sse += batch_sse(set, part, &gates)?;
    }
    Ok(sse / (set.pairs.len() * n) as f64)
}

/// Trains a fresh network and returns the parameters from the epoch with the
/// lowest validation MSE.
pub fn train(train_set: &WindowedDataset, val_set: &WindowedDataset, cfg: &TrainConfig) -> Result<(Model, TrainReport)> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::invalid("training and validation sets must be non-empty"));
    }
    train_set.validate()?;
    val_set.validate()?;
    let n = train_set.window_len().expect("non-empty");
    if val_set.window_len() != Some(n) {
        return Err(Error::invalid(format!(
            "validation windows have {} samples, training windows {n}",
            val_set.window_len().unwrap_or(0)
        )));
    }
    let batch = cfg.batch_size.min(train_set.len());
    if batch < 2 {
        return Err(Error::invalid("training set needs at least 2 windows"));
    }
    let val_batch = cfg.val_batch_size.min(val_set.len());
    if batch < cfg.batch_size || val_batch < cfg.val_batch_size {
        log::warn!(
            "batch sizes clamped to split sizes: train {} -> {batch}, val {} -> {val_batch}",
            cfg.batch_size,
            cfg.val_batch_size
        );
    }
    if cfg.wavelet.exceeds_max_level(n) {
        log::warn!(
            "level {} exceeds the recommended maximum for {} at N={n}",
            cfg.wavelet.level,
            cfg.wavelet.name()
        );
    }

    let start = Instant::now();
    let tr = prepare(train_set, &cfg.wavelet)?;
    let va = prepare(val_set, &cfg.wavelet)?;
    let baseline_val_mse = val_set
        .pairs
        .iter()
        .map(|p| p.noisy.iter().zip(&p.clean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum::<f64>()
        / (val_set.len() * n) as f64;

    let mut params = init_network(n, cfg.wavelet.bands(), cfg.seed)?;
    let mut adam = AdamState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x0074_7261_696e));
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut best = (params.clone(), f64::INFINITY, 0usize);
    let mut history = Vec::new();
    let mut stale = 0;
    let mut early_stopped = false;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut sse = 0.0;
        let mut seen = 0usize;
        for part in order.chunks(batch) {
            // A single leftover window cannot form batch statistics.
            if part.len() < 2 {
                continue;
            }
            let m = part.len();
            let subs: Vec<&SubsignalMatrix> = part.iter().map(|&i| &tr.subsignals[i]).collect();
            let clean: Vec<&[f64]> = part.iter().map(|&i| tr.pairs[i].clean.as_slice()).collect();
            let (loss, grads) = batch_gradients(&mut params, stack(tr.pairs, part, n).view(), &subs, &clean)?;
            if !loss.is_finite() {
                return Err(Error::numeric(format!("non-finite training loss in epoch {epoch}")));
            }
            adam_step(&mut params, &grads, &mut adam, cfg.learning_rate)?;
            sse += loss * (m * n) as f64;
            seen += m;
        }
        let train_mse = sse / (seen * n) as f64;
        let val_mse = evaluate(&params, &va, val_batch, n)?;
        if !val_mse.is_finite() {
            return Err(Error::numeric(format!("non-finite validation loss in epoch {epoch}")));
        }
        log::debug!("epoch {epoch}: train_mse={train_mse:.6e} val_mse={val_mse:.6e}");
        history.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
        });
        if val_mse < best.1 {
            best = (params.clone(), val_mse, epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                early_stopped = true;
                break;
            }
        }
    }

    let stopped_epoch = history.len();
    let (best_params, best_val_mse, best_epoch) = best;
    let model = Model::new(best_params, cfg.wavelet)?;
    let report = TrainReport {
        history,
        best_epoch,
        best_val_mse,
        stopped_epoch,
        early_stopped,
        wall_time_secs: start.elapsed().as_secs_f64(),
        baseline_val_mse,
        effective_batch_size: batch,
        effective_val_batch_size: val_batch,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_corpus, synth_windows, PulseConfig, Split};
    use crate::noise::{NoiseModel, NoiseSpec};

    fn identity_set(count: usize, n: usize, seed: u64) -> WindowedDataset {
        let cfg = PulseConfig {
            duration_s: n as f64 / 125.0,
            ..PulseConfig::default()
        };
        let clean = synth_windows(count, &cfg, (60.0, 90.0), seed).unwrap();
        let pairs = clean
            .into_iter()
            .map(|w| SignalPair {
                noisy: w.values.clone(),
                clean: w.values,
                noise: NoiseSpec::new(NoiseModel::Gaussian { variance: 0.0 }, 0),
                source: w.source,
                offset: w.offset,
                clean_min: w.min,
                clean_max: w.max,
            })
            .collect();
        WindowedDataset { pairs }
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            wavelet: WaveletConfig::new(4, 3, Boundary::Symmetric).unwrap(),
            learning_rate: 1e-2,
            batch_size: 16,
            val_batch_size: 16,
            max_epochs: 60,
            patience: 60,
            seed: 7,
        }
    }

    #[test]
    fn identity_data_learns_all_ones() {
        let tr = identity_set(48, 128, 1);
        let va = identity_set(16, 128, 2);
        let (model, report) = train(&tr, &va, &small_cfg()).unwrap();
        let last = report.history.last().unwrap();
        assert!(last.train_mse <= 1e-3, "{}", last.train_mse);
        assert!(report.best_val_mse <= 1e-3);
        assert_eq!(report.baseline_val_mse, 0.0);
        assert_eq!(model.window_len(), 128);
    }

    #[test]
    fn report_invariants() {
        let clean = synth_windows(60, &PulseConfig { duration_s: 1.024, ..Default::default() }, (60.0, 90.0), 3).unwrap();
        let corpus = make_corpus(&clean, &[NoiseModel::Gaussian { variance: 0.05 }], Split { train: 40, val: 10, test: 10 }, 4).unwrap();
        let cfg = TrainConfig {
            max_epochs: 30,
            patience: 3,
            ..small_cfg()
        };
        let (_, r) = train(&corpus.train, &corpus.val, &cfg).unwrap();
        assert!(r.stopped_epoch <= cfg.max_epochs);
        assert_eq!(r.stopped_epoch, r.history.len());
        let min = r.history.iter().map(|e| e.val_mse).fold(f64::INFINITY, f64::min);
        assert_eq!(r.best_val_mse, min);
        assert_eq!(r.history[r.best_epoch - 1].val_mse, min);
        assert_eq!(r.effective_val_batch_size, 10);
        if r.early_stopped {
            assert_eq!(r.stopped_epoch, r.best_epoch + cfg.patience);
        }
    }

    #[test]
    fn deterministic_for_same_seed() {
        let tr = identity_set(20, 64, 5);
        let va = identity_set(6, 64, 6);
        let cfg = TrainConfig {
            max_epochs: 1,
            ..small_cfg()
        };
        let (a, _) = train(&tr, &va, &cfg).unwrap();
        let (b, _) = train(&tr, &va, &cfg).unwrap();
        assert_eq!(a.params.trainables(), b.params.trainables());
        assert_eq!(a.params.hidden[0].norm.running_var, b.params.hidden[0].norm.running_var);
    }

    #[test]
    fn rejects_bad_config_and_data() {
        let tr = identity_set(8, 64, 7);
        let va = identity_set(4, 64, 8);
        for cfg in [
            TrainConfig { batch_size: 1, ..small_cfg() },
            TrainConfig { val_batch_size: 0, ..small_cfg() },
            TrainConfig { learning_rate: f64::NAN, ..small_cfg() },
        ] {
            assert!(train(&tr, &va, &cfg).is_err());
        }
        assert!(train(&WindowedDataset::default(), &va, &small_cfg()).is_err());
        let other = identity_set(4, 128, 9);
        assert!(train(&tr, &other, &small_cfg()).is_err());
    }
}
