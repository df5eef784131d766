use wavegate::checkpoint;
use wavegate::dataset::{make_corpus, read_pairs, synth_windows, write_pairs, PulseConfig, Split};
use wavegate::metrics::evaluate;
use wavegate::noise::NoiseModel;
use wavegate::{denoise, train, Boundary, TrainConfig, WaveletConfig};

#[test]
fn corpus_to_checkpoint_to_evaluation() {
    let base = PulseConfig {
        duration_s: 2.048,
        ..PulseConfig::default()
    };
    let clean = synth_windows(120, &base, (60.0, 100.0), 11).unwrap();
    let models = [
        NoiseModel::Gaussian { variance: 0.05 },
        NoiseModel::SaltPepper { density: 0.05 },
    ];
    let corpus = make_corpus(&clean, &models, Split { train: 80, val: 20, test: 20 }, 12).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let test_path = dir.path().join("test.csv");
    write_pairs(&test_path, &corpus.test).unwrap();
    let test = read_pairs(&test_path).unwrap();
    assert_eq!(test, corpus.test);

    let cfg = TrainConfig {
        wavelet: WaveletConfig::new(4, 4, Boundary::Symmetric).unwrap(),
        learning_rate: 3e-3,
        batch_size: 16,
        val_batch_size: 16,
        max_epochs: 80,
        patience: 15,
        seed: 5,
    };
    let (model, report) = train(&corpus.train, &corpus.val, &cfg).unwrap();
    assert!(report.best_val_mse < report.baseline_val_mse);

    let path = dir.path().join("model.json");
    checkpoint::save(&model, &path).unwrap();
    let loaded = checkpoint::load(&path).unwrap();

    let summary = evaluate(&loaded, &test.pairs).unwrap();
    summary.check_consistency().unwrap();
    assert_eq!(summary.overall.count, 20);
    assert_eq!(summary.breakdown.len(), 2);
    // Baseline sanity: the trained model beats the all-ones gates.
    assert!(summary.overall.mse_denoised < summary.overall.mse_noisy);

    let y = &test.pairs[0].noisy;
    assert_eq!(denoise(&loaded, y).unwrap(), denoise(&model, y).unwrap());
}
