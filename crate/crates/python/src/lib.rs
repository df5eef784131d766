//! Python bindings for `wavegate`.
//!
//! Signals cross the boundary as lists (any float sequence is accepted on
//! input). Wavelets are named `"db1"`..`"db10"`.

use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wavegate::checkpoint;
use wavegate::dataset::{self, read_pairs, PulseConfig};
use wavegate::denoiser;
use wavegate::metrics;
use wavegate::noise::{self, NoiseModel, NoiseSpec};
use wavegate::wavelet::{self, parse_wavelet_name, CoefficientSet, FilterBank};
use wavegate::{Boundary, Error, TrainConfig, WaveletConfig};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Numeric(m) => PyArithmeticError::new_err(m),
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn boundary(name: &str) -> PyResult<Boundary> {
    name.parse().map_err(to_py)
}

fn wavelet_config(name: &str, level: usize, mode: &str) -> PyResult<WaveletConfig> {
    WaveletConfig::new(parse_wavelet_name(name).map_err(to_py)?, level, boundary(mode)?).map_err(to_py)
}

/// Analysis and synthesis filters of a Daubechies wavelet.
#[pyfunction]
fn filters<'py>(py: Python<'py>, wavelet: &str) -> PyResult<Bound<'py, PyDict>> {
    let bank = FilterBank::from_name(wavelet).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("lo_dec", bank.lo_dec.clone())?;
    d.set_item("hi_dec", bank.hi_dec.clone())?;
    d.set_item("lo_rec", bank.lo_rec.clone())?;
    d.set_item("hi_rec", bank.hi_rec.clone())?;
    Ok(d)
}

/// Largest recommended decomposition level for `n` samples.
#[pyfunction]
fn max_level(n: usize, wavelet: &str) -> PyResult<usize> {
    Ok(wavelet::max_level(n, parse_wavelet_name(wavelet).map_err(to_py)?))
}

/// Multilevel decomposition result.
#[pyclass(name = "Coefficients", module = "pywavegate", from_py_object)]
#[derive(Clone)]
struct PyCoefficients {
    inner: CoefficientSet,
}

#[pymethods]
impl PyCoefficients {
    /// `cA_L`.
    #[getter]
    fn approx(&self) -> Vec<f64> {
        self.inner.approx.clone()
    }

    /// `[cD_L, ..., cD_1]`, coarsest first.
    #[getter]
    fn details(&self) -> Vec<Vec<f64>> {
        self.inner.details.clone()
    }

    #[getter]
    fn level(&self) -> usize {
        self.inner.level
    }

    #[getter]
    fn original_len(&self) -> usize {
        self.inner.original_len
    }

    #[getter]
    fn exceeds_max_level(&self) -> bool {
        self.inner.exceeds_max_level
    }

    fn __repr__(&self) -> String {
        format!(
            "Coefficients(db{}, level={}, n={}, mode={})",
            self.inner.order, self.inner.level, self.inner.original_len, self.inner.boundary
        )
    }
}

#[pyfunction]
#[pyo3(signature = (x, wavelet = "db4", level = 1, mode = "symmetric"))]
fn wavedec(x: Vec<f64>, wavelet: &str, level: usize, mode: &str) -> PyResult<PyCoefficients> {
    let bank = FilterBank::from_name(wavelet).map_err(to_py)?;
    let inner = wavelet::wavedec(&x, &bank, level, boundary(mode)?).map_err(to_py)?;
    Ok(PyCoefficients { inner })
}

#[pyfunction]
fn waverec(coeffs: &PyCoefficients) -> PyResult<Vec<f64>> {
    wavelet::waverec(&coeffs.inner).map_err(to_py)
}

/// Sub-signals as a list of `L + 1` columns: cD1 (finest) .. cDL, then cA_L.
#[pyfunction]
#[pyo3(signature = (y, wavelet = "db4", level = 1, mode = "symmetric"))]
fn subsignal_matrix(y: Vec<f64>, wavelet: &str, level: usize, mode: &str) -> PyResult<Vec<Vec<f64>>> {
    let s = wavelet_config(wavelet, level, mode)?.subsignals(&y).map_err(to_py)?;
    Ok(s.columns)
}

/// Corrupts `x` with a noise model such as `"salt_pepper:p=0.05"`.
#[pyfunction]
#[pyo3(signature = (x, model, seed = 0))]
fn corrupt(x: Vec<f64>, model: &str, seed: u64) -> PyResult<Vec<f64>> {
    let model: NoiseModel = model.parse().map_err(to_py)?;
    noise::corrupt(&x, &NoiseSpec::new(model, seed)).map_err(to_py)
}

/// Synthetic pulse waveform scaled to `[0, 1]`.
#[pyfunction]
#[pyo3(signature = (seed = 0, bpm = 75.0, duration_s = 8.0, sample_rate = 125.0))]
fn synth_pulse(seed: u64, bpm: f64, duration_s: f64, sample_rate: f64) -> PyResult<Vec<f64>> {
    let cfg = PulseConfig {
        bpm,
        duration_s,
        sample_rate,
        ..PulseConfig::default()
    };
    dataset::synth_pulse(&cfg, seed).map_err(to_py)
}

/// Min-max scaling; returns `(values, min, max)`.
#[pyfunction]
fn normalize(x: Vec<f64>) -> PyResult<(Vec<f64>, f64, f64)> {
    let n = dataset::normalize(&x).map_err(to_py)?;
    Ok((n.values, n.min, n.max))
}

#[pyfunction]
fn mse(x: Vec<f64>, xhat: Vec<f64>) -> PyResult<f64> {
    metrics::mse(&x, &xhat).map_err(to_py)
}

#[pyfunction]
fn psnr(mse: f64) -> PyResult<f64> {
    metrics::psnr(mse).map_err(to_py)
}

/// Best 0/1 gates for reconstructing `x` from the sub-signals of `y`.
#[pyfunction]
#[pyo3(signature = (y, x, wavelet = "db4", level = 1, mode = "symmetric"))]
fn binary_oracle(y: Vec<f64>, x: Vec<f64>, wavelet: &str, level: usize, mode: &str) -> PyResult<(Vec<u8>, f64)> {
    let s = wavelet_config(wavelet, level, mode)?.subsignals(&y).map_err(to_py)?;
    let sol = denoiser::binary_oracle(&s, &x).map_err(to_py)?;
    Ok((sol.weights, sol.mse))
}

/// Best gates in `[0, 1]` by projected gradient descent.
#[pyfunction]
#[pyo3(signature = (y, x, wavelet = "db4", level = 1, mode = "symmetric", iters = 2000, step = None))]
fn relaxed_oracle(
    y: Vec<f64>,
    x: Vec<f64>,
    wavelet: &str,
    level: usize,
    mode: &str,
    iters: usize,
    step: Option<f64>,
) -> PyResult<(Vec<f64>, f64)> {
    let s = wavelet_config(wavelet, level, mode)?.subsignals(&y).map_err(to_py)?;
    let sol = denoiser::relaxed_oracle(&s, &x, iters, step).map_err(to_py)?;
    Ok((sol.weights.into_inner(), sol.mse))
}

/// A trained denoiser.
#[pyclass(name = "Model", module = "pywavegate")]
struct PyModel {
    inner: denoiser::Model,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: checkpoint::load(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        checkpoint::save(&self.inner, &path).map_err(to_py)
    }

    /// Trains on the `train.csv` / `val.csv` tables written by `wavegate prepare`.
    /// Returns `(model, report)` where `report` is a dict.
    #[staticmethod]
    #[pyo3(signature = (data_dir, wavelet = "db10", level = 8, mode = "symmetric", lr = 0.001, batch = 100,
                        val_batch = 100, epochs = 500, patience = 20, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn train<'py>(
        py: Python<'py>,
        data_dir: PathBuf,
        wavelet: &str,
        level: usize,
        mode: &str,
        lr: f64,
        batch: usize,
        val_batch: usize,
        epochs: usize,
        patience: usize,
        seed: u64,
    ) -> PyResult<(Self, Bound<'py, PyDict>)> {
        let cfg = TrainConfig {
            wavelet: wavelet_config(wavelet, level, mode)?,
            learning_rate: lr,
            batch_size: batch,
            val_batch_size: val_batch,
            max_epochs: epochs,
            patience,
            seed,
        };
        let train_set = read_pairs(&data_dir.join("train.csv")).map_err(to_py)?;
        let val_set = read_pairs(&data_dir.join("val.csv")).map_err(to_py)?;
        let (model, report) = py
            .detach(|| wavegate::train(&train_set, &val_set, &cfg))
            .map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("best_epoch", report.best_epoch)?;
        d.set_item("best_val_mse", report.best_val_mse)?;
        d.set_item("stopped_epoch", report.stopped_epoch)?;
        d.set_item("early_stopped", report.early_stopped)?;
        d.set_item("baseline_val_mse", report.baseline_val_mse)?;
        d.set_item("wall_time_secs", report.wall_time_secs)?;
        d.set_item("train_mse", report.history.iter().map(|e| e.train_mse).collect::<Vec<_>>())?;
        d.set_item("val_mse", report.history.iter().map(|e| e.val_mse).collect::<Vec<_>>())?;
        Ok((Self { inner: model }, d))
    }

    /// Returns `(denoised, gates)` for one window of `window_len` samples.
    fn denoise(&self, y: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let (x, a) = self.inner.denoise(&y).map_err(to_py)?;
        Ok((x, a.into_inner()))
    }

    /// Test-set MSE summary for a window-pair table.
    fn evaluate<'py>(&self, py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyDict>> {
        let data = read_pairs(&path).map_err(to_py)?;
        let summary = metrics::evaluate(&self.inner, &data.pairs).map_err(to_py)?;
        let d = PyDict::new(py);
        for row in summary.rows() {
            let r = PyDict::new(py);
            r.set_item("count", row.count)?;
            r.set_item("mse_noisy", row.mse_noisy)?;
            r.set_item("mse_denoised", row.mse_denoised)?;
            r.set_item("reduction_percent", row.reduction_percent)?;
            d.set_item(&row.scope, r)?;
        }
        Ok(d)
    }

    #[getter]
    fn window_len(&self) -> usize {
        self.inner.window_len()
    }

    #[getter]
    fn wavelet(&self) -> String {
        self.inner.wavelet.name()
    }

    #[getter]
    fn level(&self) -> usize {
        self.inner.wavelet.level
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(window_len={}, wavelet={}, level={})",
            self.window_len(),
            self.wavelet(),
            self.level()
        )
    }
}

#[pymodule]
pub fn pywavegate(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyCoefficients>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(filters, m)?)?;
    m.add_function(wrap_pyfunction!(max_level, m)?)?;
    m.add_function(wrap_pyfunction!(wavedec, m)?)?;
    m.add_function(wrap_pyfunction!(waverec, m)?)?;
    m.add_function(wrap_pyfunction!(subsignal_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(corrupt, m)?)?;
    m.add_function(wrap_pyfunction!(synth_pulse, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(binary_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(relaxed_oracle, m)?)?;
    Ok(())
}
