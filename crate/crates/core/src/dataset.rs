//! Record ingestion, windowing, normalization, synthetic pulse waveforms and
//! train/validation/test corpora of (clean, noisy) window pairs.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::noise::{corrupt, NoiseKind, NoiseModel, NoiseSpec};
use crate::{Error, Result};

/// One channel of a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub subject: String,
    pub channel: String,
}

/// Reads column `channel` from a comma-separated table with a header row.
///
/// Header names are matched after trimming, case-insensitively. The subject
/// id is the file stem.
pub fn load_record(path: &Path, channel: &str, sample_rate: f64) -> Result<Record> {
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::invalid(format!("sample rate must be positive, got {sample_rate}")));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::parse(path, e.to_string()))?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::parse(path, "empty file: no header row"));
    }
    let col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case(channel.trim()))
        .ok_or_else(|| {
            Error::parse(
                path,
                format!(
                    "no column named '{channel}'; available columns: {}",
                    headers.iter().collect::<Vec<_>>().join(", ")
                ),
            )
        })?;
    let mut samples = Vec::new();
    for (i, row) in reader.records().enumerate() {
        // Row numbers are 1-based and count the header.
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(path, format!("row {line}: {e}")))?;
        let cell = row
            .get(col)
            .ok_or_else(|| Error::parse(path, format!("row {line}: missing column '{channel}'")))?;
        let value: f64 = cell
            .parse()
            .map_err(|_| Error::parse(path, format!("row {line}: '{cell}' is not a number")))?;
        if !value.is_finite() {
            return Err(Error::parse(path, format!("row {line}: non-finite value")));
        }
        samples.push(value);
    }
    if samples.is_empty() {
        return Err(Error::parse(path, "no data rows"));
    }
    let subject = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Record {
        samples,
        sample_rate,
        subject,
        channel: headers[col].to_string(),
    })
}

/// Reads a single-channel signal: one value per line, or one column with a
/// non-numeric header line.
pub fn read_signal(path: &Path) -> Result<Vec<f64>> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let cell = text.split(',').next().unwrap_or("").trim();
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => return Err(Error::parse(path, format!("line {}: non-finite value", i + 1))),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(Error::parse(path, format!("line {}: '{cell}' is not a number", i + 1))),
        }
    }
    if out.is_empty() {
        return Err(Error::parse(path, "no samples"));
    }
    Ok(out)
}

/// Writes one value per line below a header.
pub fn write_signal(path: &Path, header: &str, values: &[f64]) -> Result<()> {
    let mut w = std::io::BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for v in values {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Samples per window, `round(window_seconds * sample_rate)`.
pub fn window_len(window_seconds: f64, sample_rate: f64) -> usize {
    (window_seconds * sample_rate).round() as usize
}

/// Consecutive non-overlapping windows; a trailing remainder is dropped.
pub fn window(record: &Record, window_seconds: f64) -> Vec<Vec<f64>> {
    window_with_stride(record, window_seconds, window_seconds)
}

/// Windows starting every `stride_seconds`.
pub fn window_with_stride(record: &Record, window_seconds: f64, stride_seconds: f64) -> Vec<Vec<f64>> {
    window_offsets(record, window_seconds, stride_seconds)
        .into_iter()
        .map(|(_, w)| w)
        .collect()
}

fn window_offsets(record: &Record, window_seconds: f64, stride_seconds: f64) -> Vec<(usize, Vec<f64>)> {
    let len = window_len(window_seconds, record.sample_rate);
    let stride = window_len(stride_seconds, record.sample_rate).max(1);
    if len == 0 || record.samples.len() < len {
        return Vec::new();
    }
    (0..=record.samples.len() - len)
        .step_by(stride)
        .map(|start| (start, record.samples[start..start + len].to_vec()))
        .collect()
}

/// Min-max scaled window with the bounds needed to undo the scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

impl Normalized {
    pub fn denormalize(&self, values: &[f64]) -> Vec<f64> {
        let span = self.max - self.min;
        values.iter().map(|v| v * span + self.min).collect()
    }
}

pub fn normalize(x: &[f64]) -> Result<Normalized> {
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if x.is_empty() || !min.is_finite() || !max.is_finite() || max <= min {
        return Err(Error::invalid("cannot normalize an empty, constant or non-finite signal"));
    }
    let span = max - min;
    let values = x.iter().map(|v| ((v - min) / span).clamp(0.0, 1.0)).collect();
    Ok(Normalized { values, min, max })
}

/// A Gaussian bump placed at a fraction of the beat period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    /// Centre, as a fraction of the beat period after onset.
    pub phase: f64,
    /// Standard deviation, as a fraction of the beat period.
    pub width: f64,
    pub amplitude: f64,
}

/// Parameters of the synthetic pulse waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseConfig {
    pub duration_s: f64,
    pub bpm: f64,
    pub sample_rate: f64,
    pub systolic: Bump,
    pub dicrotic: Bump,
    /// Relative standard deviation of each beat's period.
    pub period_jitter: f64,
    /// Relative standard deviation of each beat's amplitude.
    pub amplitude_jitter: f64,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self {
            duration_s: 8.0,
            bpm: 75.0,
            sample_rate: 125.0,
            systolic: Bump {
                phase: 0.18,
                width: 0.06,
                amplitude: 1.0,
            },
            dicrotic: Bump {
                phase: 0.46,
                width: 0.09,
                amplitude: 0.45,
            },
            period_jitter: 0.03,
            amplitude_jitter: 0.05,
        }
    }
}

/// Synthetic pulse train normalized to `[0, 1]`.
///
/// Each beat is a systolic bump plus a smaller dicrotic bump. With zero
/// jitter the output is exactly periodic.
pub fn synth_pulse(config: &PulseConfig, seed: u64) -> Result<Vec<f64>> {
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if !positive(config.bpm) || !positive(config.sample_rate) || !positive(config.duration_s) {
        return Err(Error::invalid("pulse config needs positive bpm, sample rate and duration"));
    }
    if config.period_jitter < 0.0 || config.amplitude_jitter < 0.0 {
        return Err(Error::invalid("jitter must be non-negative"));
    }
    let n = window_len(config.duration_s, config.sample_rate);
    if n < 2 {
        return Err(Error::invalid("pulse duration too short"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let period = 60.0 / config.bpm;
    let offset = rng.random_range(0.0..period);

    // Beats from two periods before the window to two after it, so edges
    // see the tails of neighbouring beats.
    let mut beats = Vec::new();
    let mut onset = offset - 2.0 * period;
    while onset < config.duration_s + 2.0 * period {
        let jitter = |rng: &mut ChaCha8Rng, s: f64| -> f64 {
            if s == 0.0 {
                1.0
            } else {
                let z: f64 = StandardNormal.sample(rng);
                (1.0 + s * z).clamp(0.5, 1.5)
            }
        };
        let this_period = period * jitter(&mut rng, config.period_jitter);
        let amp = jitter(&mut rng, config.amplitude_jitter);
        beats.push((onset, this_period, amp));
        onset += this_period;
    }

    let bump = |t: f64, b: &Bump, start: f64, p: f64| {
        let d = (t - start - b.phase * p) / (b.width * p);
        b.amplitude * (-0.5 * d * d).exp()
    };
    let raw: Vec<f64> = (0..n)
        .map(|k| {
            let t = k as f64 / config.sample_rate;
            beats
                .iter()
                .map(|&(start, p, amp)| amp * (bump(t, &config.systolic, start, p) + bump(t, &config.dicrotic, start, p)))
                .sum()
        })
        .collect();
    Ok(normalize(&raw)?.values)
}

/// A normalized clean window and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanWindow {
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub source: String,
    pub offset: usize,
}

/// Normalized windows of a record; constant windows are skipped.
pub fn record_windows(record: &Record, window_seconds: f64, stride_seconds: f64) -> Vec<CleanWindow> {
    window_offsets(record, window_seconds, stride_seconds)
        .into_iter()
        .filter_map(|(offset, w)| {
            let norm = normalize(&w).ok()?;
            Some(CleanWindow {
                values: norm.values,
                min: norm.min,
                max: norm.max,
                source: record.subject.clone(),
                offset,
            })
        })
        .collect()
}

/// `count` synthetic windows with heart rates drawn from `bpm_range`.
pub fn synth_windows(count: usize, base: &PulseConfig, bpm_range: (f64, f64), seed: u64) -> Result<Vec<CleanWindow>> {
    if !(bpm_range.0 > 0.0 && bpm_range.0 <= bpm_range.1) {
        return Err(Error::invalid(format!("invalid bpm range {bpm_range:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let mut cfg = base.clone();
            cfg.bpm = if bpm_range.0 == bpm_range.1 {
                bpm_range.0
            } else {
                rng.random_range(bpm_range.0..bpm_range.1)
            };
            cfg.dicrotic.amplitude *= rng.random_range(0.7..1.3);
            cfg.dicrotic.phase += rng.random_range(-0.04..0.04);
            let values = synth_pulse(&cfg, rng.random())?;
            Ok(CleanWindow {
                values,
                min: 0.0,
                max: 1.0,
                source: format!("synthetic-{i}"),
                offset: 0,
            })
        })
        .collect()
}

/// A clean window, its corrupted copy and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalPair {
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
    pub noise: NoiseSpec,
    pub source: String,
    pub offset: usize,
    /// Bounds of the raw window before normalization.
    pub clean_min: f64,
    pub clean_max: f64,
}

impl SignalPair {
    pub fn kind(&self) -> NoiseKind {
        self.noise.kind()
    }
}

/// Equal-length pairs forming one split.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowedDataset {
    pub pairs: Vec<SignalPair>,
}

impl WindowedDataset {
    pub fn new(pairs: Vec<SignalPair>) -> Result<Self> {
        let ds = Self { pairs };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn window_len(&self) -> Option<usize> {
        self.pairs.first().map(|p| p.clean.len())
    }

    pub fn kinds(&self) -> BTreeSet<NoiseKind> {
        self.pairs.iter().map(SignalPair::kind).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let Some(n) = self.window_len() else { return Ok(()) };
        for (i, p) in self.pairs.iter().enumerate() {
            if p.clean.len() != n || p.noisy.len() != n {
                return Err(Error::invalid(format!(
                    "pair {i} has lengths {}/{}, expected {n}",
                    p.clean.len(),
                    p.noisy.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Split {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    /// Full-corpus sizes: 3873 training, 240 validation and 240 test windows.
    pub fn full() -> Self {
        Self {
            train: 3873,
            val: 240,
            test: 240,
        }
    }

    pub fn desk() -> Self {
        Self {
            train: 512,
            val: 64,
            test: 64,
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let nums: Option<Vec<usize>> = parts.iter().map(|p| p.parse().ok()).collect();
        match nums.as_deref() {
            Some(&[train, val, test]) => Ok(Split { train, val, test }),
            _ => Err(Error::invalid(format!("split must be 'train,val,test', got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub train: WindowedDataset,
    pub val: WindowedDataset,
    pub test: WindowedDataset,
}

pub(crate) fn mix_seed(a: u64, b: u64) -> u64 {
    // SplitMix64 finalizer over the combined words.
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Shuffles windows, corrupts each with the noise models in rotation and
/// cuts disjoint splits.
///
/// Window `p` of the shuffled order gets `models[p % models.len()]`, so
/// every split sees the models in equal proportion.
pub fn make_corpus(clean: &[CleanWindow], models: &[NoiseModel], split: Split, seed: u64) -> Result<Corpus> {
    if models.is_empty() {
        return Err(Error::invalid("at least one noise model is required"));
    }
    for m in models {
        m.validate()?;
    }
    if split.total() > clean.len() {
        return Err(Error::invalid(format!(
            "split {}+{}+{} needs {} windows, only {} available",
            split.train,
            split.val,
            split.test,
            split.total(),
            clean.len()
        )));
    }
    if let Some(first) = clean.first() {
        if clean.iter().any(|w| w.values.len() != first.values.len()) {
            return Err(Error::invalid("clean windows differ in length"));
        }
    }
    let mut order: Vec<usize> = (0..clean.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut pairs: Vec<SignalPair> = order[..split.total()]
        .iter()
        .enumerate()
        .map(|(pos, &idx)| {
            let w = &clean[idx];
            let spec = NoiseSpec::new(models[pos % models.len()], mix_seed(seed, idx as u64));
            Ok(SignalPair {
                noisy: corrupt(&w.values, &spec)?,
                clean: w.values.clone(),
                noise: spec,
                source: w.source.clone(),
                offset: w.offset,
                clean_min: w.min,
                clean_max: w.max,
            })
        })
        .collect::<Result<_>>()?;
    let test = pairs.split_off(split.train + split.val);
    let val = pairs.split_off(split.train);
    Ok(Corpus {
        train: WindowedDataset { pairs },
        val: WindowedDataset { pairs: val },
        test: WindowedDataset { pairs: test },
    })
}

const PAIR_META: [&str; 6] = ["source", "offset", "clean_min", "clean_max", "noise", "noise_seed"];

/// Writes pairs as one CSV row each: provenance, noise, then `clean_*`
/// and `noisy_*` sample columns.
pub fn write_pairs(path: &Path, data: &WindowedDataset) -> Result<()> {
    data.validate()?;
    let n = data.window_len().unwrap_or(0);
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    let mut header: Vec<String> = PAIR_META.iter().map(|s| s.to_string()).collect();
    header.extend((0..n).map(|k| format!("clean_{k}")));
    header.extend((0..n).map(|k| format!("noisy_{k}")));
    w.write_record(&header).map_err(|e| Error::parse(path, e.to_string()))?;
    for p in &data.pairs {
        let mut row = vec![
            p.source.clone(),
            p.offset.to_string(),
            p.clean_min.to_string(),
            p.clean_max.to_string(),
            p.noise.model.to_string(),
            p.noise.seed.to_string(),
        ];
        row.extend(p.clean.iter().map(f64::to_string));
        row.extend(p.noisy.iter().map(f64::to_string));
        w.write_record(&row).map_err(|e| Error::parse(path, e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pairs(path: &Path) -> Result<WindowedDataset> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    let headers = r.headers().map_err(|e| Error::parse(path, e.to_string()))?.clone();
    let meta = PAIR_META.len();
    if headers.len() < meta || headers.iter().take(meta).ne(PAIR_META.iter().copied()) {
        return Err(Error::parse(path, "not a window-pair table (unexpected header)"));
    }
    let samples = headers.len() - meta;
    if samples == 0 || !samples.is_multiple_of(2) {
        return Err(Error::parse(path, "sample columns must split evenly into clean and noisy"));
    }
    let n = samples / 2;
    let mut pairs = Vec::new();
    for (i, row) in r.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(path, format!("row {line}: {e}")))?;
        let num = |k: usize| -> Result<f64> {
            row[k]
                .parse()
                .map_err(|_| Error::parse(path, format!("row {line}: '{}' is not a number", &row[k])))
        };
        let model: NoiseModel = row[4]
            .parse()
            .map_err(|e: Error| Error::parse(path, format!("row {line}: {e}")))?;
        let seed: u64 = row[5]
            .parse()
            .map_err(|_| Error::parse(path, format!("row {line}: bad noise seed")))?;
        let offset: usize = row[1]
            .parse()
            .map_err(|_| Error::parse(path, format!("row {line}: bad offset")))?;
        let clean = (meta..meta + n).map(num).collect::<Result<Vec<_>>>()?;
        let noisy = (meta + n..meta + 2 * n).map(num).collect::<Result<Vec<_>>>()?;
        pairs.push(SignalPair {
            clean,
            noisy,
            noise: NoiseSpec::new(model, seed),
            source: row[0].to_string(),
            offset,
            clean_min: num(2)?,
            clean_max: num(3)?,
        });
    }
    WindowedDataset::new(pairs)
}
