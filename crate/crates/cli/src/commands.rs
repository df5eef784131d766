use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use wavegate::checkpoint;
use wavegate::dataset::{
    load_record, make_corpus, normalize, read_pairs, read_signal, record_windows, synth_windows, write_pairs,
    write_signal, CleanWindow, PulseConfig, WindowedDataset,
};
use wavegate::metrics::{evaluate, EvalSummary};
use wavegate::noise::NoiseModel;
use wavegate::wavelet::{max_level, parse_wavelet_name, valid_wavelet_names};
use wavegate::{Error, TrainConfig, TrainReport, WaveletConfig};

use crate::manifest::ManifestBuilder;
use crate::output::Staged;
use crate::{Axis, CliError, DenoiseArgs, EvalArgs, ModelArgs, PrepareArgs, SweepArgs, TrainArgs};

type CmdResult = Result<PathBuf, CliError>;

fn ensure_writable(target: &Path, force: bool) -> Result<(), CliError> {
    if target.exists() && !force {
        return Err(CliError::Usage(format!(
            "{} already exists; pass --force to overwrite",
            target.display()
        )));
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    fs::write(path, text + "\n").map_err(Error::from)?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::Core(Error::Io(e.into())))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Core(Error::Io(e.into()))
}

fn finish(staged: Staged, manifest: ManifestBuilder) -> CmdResult {
    write_json(&staged.path("manifest.json"), &manifest.finish())?;
    staged.commit()
}

fn require_dir(dir: &Path) -> Result<(), CliError> {
    if !dir.is_dir() {
        return Err(Error::InvalidArgument(format!("{} is not a directory", dir.display())).into());
    }
    Ok(())
}

#[derive(Serialize)]
struct PrepareConfig<'a> {
    source: String,
    windows: Option<usize>,
    bpm_range: Option<(f64, f64)>,
    channel: Option<&'a str>,
    sample_rate: f64,
    window_seconds: f64,
    stride_seconds: f64,
    noise: Vec<NoiseModel>,
    noise_text: Vec<String>,
    split: wavegate::dataset::Split,
    seed: u64,
}

pub fn prepare(a: &PrepareArgs) -> CmdResult {
    let target = a.output.resolve("prepare");
    ensure_writable(&target, a.output.force)?;
    let stride = a.stride_seconds.unwrap_or(a.window_seconds);
    let noise = if a.noise.is_empty() {
        NoiseModel::standard_set().to_vec()
    } else {
        a.noise.clone()
    };
    let mut inputs = Vec::new();
    let clean: Vec<CleanWindow> = if let Some(dir) = &a.input_dir {
        require_dir(dir)?;
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(Error::from)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::InvalidArgument(format!("no .csv records in {}", dir.display())).into());
        }
        let mut windows = Vec::new();
        for f in &files {
            let record = load_record(f, &a.channel, a.sample_rate)?;
            windows.extend(record_windows(&record, a.window_seconds, stride));
        }
        inputs = files;
        windows
    } else {
        let base = PulseConfig {
            duration_s: a.window_seconds,
            sample_rate: a.sample_rate,
            ..PulseConfig::default()
        };
        synth_windows(a.windows, &base, (a.bpm_min, a.bpm_max), a.seed)?
    };
    let corpus = make_corpus(&clean, &noise, a.split, a.seed)?;

    let config = PrepareConfig {
        source: match &a.input_dir {
            Some(d) => d.display().to_string(),
            None => "synthetic".into(),
        },
        windows: a.input_dir.is_none().then_some(a.windows),
        bpm_range: a.input_dir.is_none().then_some((a.bpm_min, a.bpm_max)),
        channel: a.input_dir.as_ref().map(|_| a.channel.as_str()),
        sample_rate: a.sample_rate,
        window_seconds: a.window_seconds,
        stride_seconds: stride,
        noise_text: noise.iter().map(|n| n.to_string()).collect(),
        noise,
        split: a.split,
        seed: a.seed,
    };
    let mut manifest = ManifestBuilder::new("prepare", &config);
    manifest.seed(a.seed);
    for f in &inputs {
        manifest.input(f)?;
    }
    let staged = Staged::new(&target, a.output.force)?;
    for (name, set) in [("train.csv", &corpus.train), ("val.csv", &corpus.val), ("test.csv", &corpus.test)] {
        write_pairs(&staged.path(name), set)?;
        manifest.output(name);
    }
    log::info!(
        "{} windows -> train {}, val {}, test {}",
        clean.len(),
        corpus.train.len(),
        corpus.val.len(),
        corpus.test.len()
    );
    finish(staged, manifest)
}

fn train_config(m: &ModelArgs) -> Result<TrainConfig, CliError> {
    let cfg = TrainConfig {
        wavelet: WaveletConfig::new(m.wavelet, m.level, m.boundary)?,
        learning_rate: m.lr,
        batch_size: m.batch,
        val_batch_size: m.val_batch,
        max_epochs: m.epochs,
        patience: m.patience,
        seed: m.seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_split(dir: &Path, name: &str, manifest: &mut ManifestBuilder) -> Result<WindowedDataset, CliError> {
    let path = dir.join(name);
    let data = read_pairs(&path)?;
    manifest.input(&path)?;
    Ok(data)
}

fn write_metrics(path: &Path, report: &TrainReport) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["epoch", "train_mse", "val_mse"]).map_err(csv_err)?;
    for e in &report.history {
        w.serialize((e.epoch, e.train_mse, e.val_mse)).map_err(csv_err)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn warn_level(cfg: &TrainConfig, n: usize) {
    if cfg.wavelet.exceeds_max_level(n) {
        log::warn!(
            "level {} exceeds the maximum useful level {} for {} at N={n}",
            cfg.wavelet.level,
            max_level(n, cfg.wavelet.order),
            cfg.wavelet.name()
        );
    }
}

pub fn train(a: &TrainArgs) -> CmdResult {
    let target = a.output.resolve("train");
    ensure_writable(&target, a.output.force)?;
    require_dir(&a.data)?;
    let cfg = train_config(&a.model)?;
    let mut manifest = ManifestBuilder::new("train", cfg);
    manifest.seed(cfg.seed);
    let train_set = load_split(&a.data, "train.csv", &mut manifest)?;
    let val_set = load_split(&a.data, "val.csv", &mut manifest)?;
    warn_level(&cfg, train_set.window_len().unwrap_or(0));

    let (model, report) = wavegate::train(&train_set, &val_set, &cfg)?;
    log::info!(
        "best val mse {:.4e} at epoch {} of {}",
        report.best_val_mse,
        report.best_epoch,
        report.stopped_epoch
    );
    let staged = Staged::new(&target, a.output.force)?;
    checkpoint::save(&model, &staged.path("model.json"))?;
    write_metrics(&staged.path("metrics.csv"), &report)?;
    write_json(&staged.path("report.json"), &report)?;
    manifest.output("model.json").output("metrics.csv").output("report.json");
    finish(staged, manifest)
}

/// Band labels in sub-signal order: finest detail first, approximation last.
fn band_names(level: usize) -> Vec<String> {
    (1..=level)
        .map(|j| format!("cD{j}"))
        .chain(std::iter::once(format!("cA{level}")))
        .collect()
}

#[derive(Serialize)]
struct DenoiseConfig<'a> {
    checkpoint: &'a Path,
    input: &'a Path,
    normalize: bool,
}

pub fn denoise(a: &DenoiseArgs) -> CmdResult {
    let target = a.output.resolve("denoise");
    ensure_writable(&target, a.output.force)?;
    let mut manifest = ManifestBuilder::new(
        "denoise",
        DenoiseConfig {
            checkpoint: &a.checkpoint,
            input: &a.input,
            normalize: !a.no_normalize,
        },
    );
    let model = checkpoint::load(&a.checkpoint)?;
    manifest.input(&a.checkpoint)?;
    let signal = read_signal(&a.input)?;
    manifest.input(&a.input)?;
    if signal.len() != model.window_len() {
        return Err(Error::InvalidArgument(format!(
            "{} has {} samples, model expects {}",
            a.input.display(),
            signal.len(),
            model.window_len()
        ))
        .into());
    }
    let denoised = if a.no_normalize {
        model.denoise(&signal)?
    } else {
        let norm = normalize(&signal)?;
        let (x, w) = model.denoise(&norm.values)?;
        (norm.denormalize(&x), w)
    };
    let staged = Staged::new(&target, a.output.force)?;
    write_signal(&staged.path("denoised.csv"), "denoised", &denoised.0)?;
    let mut w = csv_writer(&staged.path("weights.csv"))?;
    w.write_record(["band", "weight"]).map_err(csv_err)?;
    for (name, v) in band_names(model.wavelet.level).iter().zip(denoised.1.iter()) {
        w.serialize((name, v)).map_err(csv_err)?;
    }
    w.flush().map_err(Error::from)?;
    manifest.output("denoised.csv").output("weights.csv");
    finish(staged, manifest)
}

fn write_summary(path: &Path, summary: &EvalSummary) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["method", "scope", "count", "mse", "psnr_db", "reduction_percent"])
        .map_err(csv_err)?;
    // All-ones gates reproduce the noisy input, so its error is the baseline.
    for r in summary.rows() {
        w.serialize(("baseline", &r.scope, r.count, r.mse_noisy, r.psnr_noisy, 0.0))
            .map_err(csv_err)?;
    }
    for r in summary.rows() {
        w.serialize(("model", &r.scope, r.count, r.mse_denoised, r.psnr_denoised, r.reduction_percent))
            .map_err(csv_err)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

pub fn eval(a: &EvalArgs) -> CmdResult {
    let target = a.output.resolve("eval");
    ensure_writable(&target, a.output.force)?;
    let data_path = if a.data.is_dir() { a.data.join("test.csv") } else { a.data.clone() };
    let mut manifest = ManifestBuilder::new(
        "eval",
        serde_json::json!({ "checkpoint": a.checkpoint, "data": data_path }),
    );
    let model = checkpoint::load(&a.checkpoint)?;
    manifest.input(&a.checkpoint)?;
    let test = read_pairs(&data_path)?;
    manifest.input(&data_path)?;
    let summary = evaluate(&model, &test.pairs)?;
    summary.check_consistency()?;
    let staged = Staged::new(&target, a.output.force)?;
    write_summary(&staged.path("summary.csv"), &summary)?;
    write_json(&staged.path("summary.json"), &summary)?;
    manifest.output("summary.csv").output("summary.json");
    finish(staged, manifest)
}

#[derive(Serialize)]
struct SweepConfig {
    axis: Axis,
    values: Vec<String>,
    base: TrainConfig,
    jobs: usize,
}

#[derive(Serialize)]
struct SweepRun {
    value: String,
    config: TrainConfig,
    best_epoch: usize,
    stopped_epoch: usize,
    best_val_mse: f64,
    summary: EvalSummary,
}

fn sweep_values(a: &SweepArgs) -> Result<Vec<String>, CliError> {
    if !a.values.is_empty() {
        return Ok(a.values.iter().map(|v| v.trim().to_string()).collect());
    }
    Ok(match a.axis {
        Axis::Level => (1..=8).map(|l| l.to_string()).collect(),
        Axis::Wavelet => valid_wavelet_names(),
    })
}

fn sweep_config(axis: Axis, value: &str, base: &TrainConfig) -> Result<TrainConfig, CliError> {
    let mut cfg = *base;
    match axis {
        Axis::Level => {
            let level = value
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid level '{value}'")))?;
            cfg.wavelet = WaveletConfig::new(base.wavelet.order, level, base.wavelet.boundary)
                .map_err(|e| CliError::Usage(e.to_string()))?;
        }
        Axis::Wavelet => {
            let order = parse_wavelet_name(value).map_err(|e| CliError::Usage(e.to_string()))?;
            cfg.wavelet = WaveletConfig::new(order, base.wavelet.level, base.wavelet.boundary)?;
        }
    }
    Ok(cfg)
}

pub fn sweep(a: &SweepArgs) -> CmdResult {
    let target = a.output.resolve("sweep");
    ensure_writable(&target, a.output.force)?;
    if a.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    require_dir(&a.data)?;
    let base = train_config(&a.model)?;
    let values = sweep_values(a)?;
    let configs = values
        .iter()
        .map(|v| sweep_config(a.axis, v, &base).map(|c| (v.clone(), c)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut manifest = ManifestBuilder::new(
        "sweep",
        SweepConfig {
            axis: a.axis,
            values: values.clone(),
            base,
            jobs: a.jobs,
        },
    );
    manifest.seed(base.seed);
    let train_set = load_split(&a.data, "train.csv", &mut manifest)?;
    let val_set = load_split(&a.data, "val.csv", &mut manifest)?;
    let test_set = load_split(&a.data, "test.csv", &mut manifest)?;
    let n = train_set.window_len().unwrap_or(0);
    for (_, cfg) in &configs {
        warn_level(cfg, n);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let runs: Vec<SweepRun> = pool.install(|| {
        configs
            .par_iter()
            .map(|(value, cfg)| -> Result<SweepRun, Error> {
                let (model, report) = wavegate::train(&train_set, &val_set, cfg)?;
                let summary = evaluate(&model, &test_set.pairs)?;
                summary.check_consistency()?;
                log::info!("{value}: test mse {:.4e}", summary.overall.mse_denoised);
                Ok(SweepRun {
                    value: value.clone(),
                    config: *cfg,
                    best_epoch: report.best_epoch,
                    stopped_epoch: report.stopped_epoch,
                    best_val_mse: report.best_val_mse,
                    summary,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    let staged = Staged::new(&target, a.output.force)?;
    let axis = match a.axis {
        Axis::Level => "level",
        Axis::Wavelet => "wavelet",
    };
    let mut w = csv_writer(&staged.path("sweep.csv"))?;
    w.write_record(["axis", "value", "noise_kind", "mse_noisy", "mse_denoised", "reduction_percent"])
        .map_err(csv_err)?;
    for run in &runs {
        for r in &run.summary.breakdown {
            w.serialize((axis, &run.value, &r.scope, r.mse_noisy, r.mse_denoised, r.reduction_percent))
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(Error::from)?;
    write_json(&staged.path("runs.json"), &runs)?;
    manifest.output("sweep.csv").output("runs.json");
    finish(staged, manifest)
}
