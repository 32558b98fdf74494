use lrdetect::baselines::{ssa_fit, ssa_forecast, ssa_reconstruct, SsaRank};
use lrdetect::change::{
    generate_artificial_with, seasonal_component, GenerateOptions, Profile, NOISE_HURST, PATH_LEN,
};
use lrdetect::evalkit::rrmse;
use lrdetect::fgn::{FgnGenerator, HurstExponent};
use lrdetect::harness::{evaluate_accuracy, AccuracyOptions};
use lrdetect::rng::mix_seed;
use lrdetect::series::TimeSeries;
use rayon::prelude::*;

fn pca_sweep(reps: usize, scale: f64) {
    let dataset = generate_artificial_with(
        Profile::Easy,
        reps,
        1,
        &GenerateOptions { noise_scale: scale },
    )
    .unwrap();
    let hurst = HurstExponent::new(NOISE_HURST).unwrap();
    let generator = FgnGenerator::new(PATH_LEN, hurst).unwrap();
    let true_trend: Vec<f64> = (0..PATH_LEN).map(|k| seasonal_component(k as f64)).collect();
    let history_root = mix_seed(1, u64::MAX);
    println!("scale={scale} reps={reps}");
    println!("L rank | pca_t pca_f | pre_t pre_f");
    for l in [24usize, 48, 96, 144, 288] {
        for (rule_name, rule) in [
            ("mass90", SsaRank::MassFraction { fraction: 0.9, cap: 10 }),
            ("fixed10", SsaRank::Fixed(10)),
            ("mass99", SsaRank::MassFraction { fraction: 0.99, cap: 10 }),
        ] {
            let rows: Vec<[f64; 4]> = dataset
                .paths
                .par_iter()
                .enumerate()
                .map(|(i, path)| {
                    let noise = generator.sample(mix_seed(history_root, i as u64));
                    let hist_values: Vec<f64> = noise
                        .values
                        .iter()
                        .enumerate()
                        .map(|(k, &z)| seasonal_component(k as f64) + scale * z)
                        .collect();
                    let history = TimeSeries::from_values(hist_values, 1.0).unwrap();
                    let series = &path.series;
                    let values = series.values();
                    let m = ssa_fit(series, l, rule).unwrap();
                    let recon = ssa_reconstruct(&m, series).unwrap();
                    let fore = ssa_forecast(&m, series).unwrap();
                    let mp = ssa_fit(&history, l, rule).unwrap();
                    let recon_p = ssa_reconstruct(&mp, series).unwrap();
                    let fore_p = ssa_forecast(&mp, series).unwrap();
                    [
                        rrmse(&true_trend, &recon).unwrap().value,
                        rrmse(&values[fore.offset..], &fore.values).unwrap().value,
                        rrmse(&true_trend, &recon_p).unwrap().value,
                        rrmse(&values[fore_p.offset..], &fore_p.values).unwrap().value,
                    ]
                })
                .collect();
            let n = rows.len() as f64;
            let mean =
                |j: usize| 100.0 * rows.iter().map(|r| r[j]).sum::<f64>() / n;
            println!(
                "{l} {rule_name} | {:.2} {:.2} | {:.2} {:.2}",
                mean(0),
                mean(1),
                mean(2),
                mean(3)
            );
        }
    }
}

fn recurrence(model: &lrdetect::baselines::SsaModel) -> Option<Vec<f64>> {
    let l = model.embedding_length;
    let last_row = model.basis.row(l - 1).transpose();
    let verticality = last_row.norm_squared();
    if verticality >= 1.0 - 1e-10 {
        return None;
    }
    let head = model.basis.rows(0, l - 1);
    let coefficients = (head * &last_row) / (1.0 - verticality);
    Some(coefficients.iter().copied().collect())
}

fn last_coord_projection(model: &lrdetect::baselines::SsaModel, window: &[f64]) -> f64 {
    let l = model.embedding_length;
    let mut out = 0.0;
    for j in 0..model.rank {
        let col = model.basis.column(j);
        let mut dot = 0.0;
        for i in 0..l {
            dot += col[i] * window[i];
        }
        out += model.basis[(l - 1, j)] * dot;
    }
    out
}

struct OnlineTrack {
    trend: Vec<f64>,
    forecast: Vec<f64>,
}

fn online_eval(
    values: &[f64],
    l: usize,
    rank: SsaRank,
    refit_every: usize,
    trailing: Option<usize>,
    pretrained: Option<&lrdetect::baselines::SsaModel>,
) -> OnlineTrack {
    let mut model: Option<lrdetect::baselines::SsaModel> = pretrained.cloned();
    let mut coeffs: Option<Vec<f64>> = model.as_ref().and_then(recurrence);
    let mut last_fit = 0usize;
    let mut trend = Vec::with_capacity(values.len());
    let mut forecast = Vec::with_capacity(values.len().saturating_sub(1));
    for t in 0..values.len() {
        if pretrained.is_none()
            && t >= 2 * l
            && (model.is_none() || t - last_fit >= refit_every)
        {
            let lo = trailing.map_or(0, |w| t.saturating_sub(w));
            let prefix = TimeSeries::from_values(values[lo..t].to_vec(), 1.0).unwrap();
            if let Ok(m) = ssa_fit(&prefix, l, rank) {
                coeffs = recurrence(&m);
                model = Some(m);
                last_fit = t;
            }
        }
        if t >= 1 {
            let mut pred = values[t - 1];
            if t >= l - 1 {
                if let Some(c) = &coeffs {
                    let window = &values[t - (l - 1)..t];
                    let mut p = 0.0;
                    for (ci, &x) in c.iter().zip(window) {
                        p += ci * x;
                    }
                    if p.is_finite() {
                        pred = p;
                    }
                }
            }
            forecast.push(pred);
        }
        let mut estimate = values[t];
        if t + 1 >= l {
            if let Some(m) = &model {
                let e = last_coord_projection(m, &values[t + 1 - l..=t]);
                if e.is_finite() {
                    estimate = e;
                }
            }
        }
        trend.push(estimate);
    }
    OnlineTrack { trend, forecast }
}

fn pca_online_sweep(reps: usize, scale: f64) {
    let dataset = generate_artificial_with(
        Profile::Easy,
        reps,
        1,
        &GenerateOptions { noise_scale: scale },
    )
    .unwrap();
    let hurst = HurstExponent::new(NOISE_HURST).unwrap();
    let generator = FgnGenerator::new(PATH_LEN, hurst).unwrap();
    let true_trend: Vec<f64> = (0..PATH_LEN).map(|k| seasonal_component(k as f64)).collect();
    let history_root = mix_seed(1, u64::MAX);
    println!("scale={scale} reps={reps}");
    println!("variant | trend fore");
    let score = |rows: &[(f64, f64)]| {
        let n = rows.len() as f64;
        (
            100.0 * rows.iter().map(|r| r.0).sum::<f64>() / n,
            100.0 * rows.iter().map(|r| r.1).sum::<f64>() / n,
        )
    };
    let eval = |pre_l: Option<(usize, SsaRank)>,
                l: usize,
                rank: SsaRank,
                cadence: usize,
                trailing: Option<usize>| {
        let rows: Vec<(f64, f64)> = dataset
            .paths
            .par_iter()
            .enumerate()
            .map(|(i, path)| {
                let values = path.series.values();
                let pre_model = pre_l.map(|(pl, pr)| {
                    let noise = generator.sample(mix_seed(history_root, i as u64));
                    let hist_values: Vec<f64> = noise
                        .values
                        .iter()
                        .enumerate()
                        .map(|(k, &z)| seasonal_component(k as f64) + scale * z)
                        .collect();
                    let history = TimeSeries::from_values(hist_values, 1.0).unwrap();
                    ssa_fit(&history, pl, pr).unwrap()
                });
                let track = online_eval(values, l, rank, cadence, trailing, pre_model.as_ref());
                (
                    rrmse(&true_trend, &track.trend).unwrap().value,
                    rrmse(&values[1..], &track.forecast).unwrap().value,
                )
            })
            .collect();
        score(&rows)
    };
    let rank = SsaRank::MassFraction { fraction: 0.9, cap: 10 };
    for l in [96usize, 120] {
        for cadence in [48usize, 96, 144] {
            for trail_mult in [2usize] {
                let trail = trail_mult * l;
                let (t, f) = eval(None, l, rank, cadence, Some(trail));
                println!("online L={l} every={cadence} trail={trail} | {t:.2} {f:.2}");
            }
        }
        let (t, f) = eval(Some((l, rank)), l, rank, 0, None);
        println!("pretrained L={l} | {t:.2} {f:.2}");
    }
    for (l, trail) in [(96usize, 168usize), (96, 216), (120, 216), (120, 264)] {
        let (t, f) = eval(None, l, rank, 48, Some(trail));
        println!("online L={l} every=48 trail={trail} | {t:.2} {f:.2}");
    }
}

fn detection_probe(paths: usize, seed: u64) {
    use lrdetect::harness::{evaluate_detection, DetectionOptions};
    let mut options = DetectionOptions {
        train_paths: paths,
        test_paths: paths,
        seed,
        ..DetectionOptions::default()
    };
    if let Ok(q) = std::env::var("PROBE_Q") {
        options.calibration_quantile = q.parse().unwrap();
    }
    if let Ok(e) = std::env::var("PROBE_EPOCHS") {
        options.train.epochs = e.parse().unwrap();
    }
    println!(
        "q={} epochs={}",
        options.calibration_quantile, options.train.epochs
    );
    let start = std::time::Instant::now();
    match evaluate_detection(&options) {
        Ok(r) => {
            println!(
                "paths={paths} seed={seed} | ensemble {:.4} | ewma-cusum {:.4} (a={} d={}) | ewma-threshold {:.4} (a={} h={} w={}) | epochs {} loss {:.5}->{:.5} ({:.1}s)",
                r.ensemble.auc,
                r.ewma_cusum.auc,
                r.cusum_params.smoothing,
                r.cusum_params.delta,
                r.ewma_threshold.auc,
                r.threshold_params.smoothing,
                r.threshold_params.point_threshold,
                r.threshold_params.window,
                r.training.epochs_run,
                r.training.losses.first().copied().unwrap_or(f64::NAN),
                r.training.losses.last().copied().unwrap_or(f64::NAN),
                start.elapsed().as_secs_f64(),
            );
            if std::env::var("PROBE_CURVES").is_ok() {
                dump_curve("ensemble", &r.ensemble.curve);
                dump_curve("ewma-cusum", &r.ewma_cusum.curve);
                dump_curve("ewma-threshold", &r.ewma_threshold.curve);
            }
            if std::env::var("PROBE_MODEL").is_ok() {
                use lrdetect::detectors::BANK;
                println!("bias {:+.5}", r.detector.model.bias);
                for (k, row) in r.detector.model.weights.iter().enumerate() {
                    let lags: Vec<String> =
                        row.iter().map(|w| format!("{w:+.6}")).collect();
                    println!(
                        "  {:<12} ref_th={:>14.4} lags=[{}]",
                        format!("{:?}", BANK[k]),
                        r.detector.bank.thresholds[k],
                        lags.join(", ")
                    );
                }
            }
        }
        Err(e) => println!("paths={paths} seed={seed} | error: {e}"),
    }
}

fn detector_breakdown(paths: usize, seed: u64) {
    use lrdetect::change::{generate_artificial_with, GenerateOptions, Profile};
    use lrdetect::detectors::{DetectorBank, DetectorConfig, BANK};
    use lrdetect::evalkit::{observed_grid, pr_auc, pr_curve, StatisticPath};
    use lrdetect::trend::forecast_residuals;

    let q: f64 = std::env::var("PROBE_Q")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.999);
    let delta: f64 = std::env::var("PROBE_DELTA")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(3.0);
    let window: usize = std::env::var("PROBE_W")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(20);
    let generate = GenerateOptions { noise_scale: 1.0 };
    let train = generate_artificial_with(Profile::Hard, paths, seed, &generate).unwrap();
    let test =
        generate_artificial_with(Profile::Hard, paths, lrdetect::rng::mix_seed(seed, 1), &generate)
            .unwrap();
    let config = DetectorConfig {
        delta,
        window,
        ..DetectorConfig::default()
    };

    let prep = |set: &lrdetect::change::LabeledDataset| -> Vec<(usize, Vec<f64>, Vec<bool>, (usize, usize))> {
        set.paths
            .iter()
            .map(|p| {
                let fr = forecast_residuals(&p.series, 96).unwrap();
                let labels: Vec<bool> = p.labels[fr.offset..].to_vec();
                let a = p.labels.iter().position(|&l| l).unwrap();
                let b = p.labels.iter().rposition(|&l| l).unwrap();
                (fr.offset, fr.values, labels, (a, b))
            })
            .collect()
    };
    let train_prep = prep(&train);
    let test_prep = prep(&test);
    let bank = DetectorBank::calibrate(
        &config,
        &train_prep.iter().map(|p| p.1.clone()).collect::<Vec<_>>(),
        &train_prep
            .iter()
            .map(|p| p.2.iter().map(|&l| !l).collect())
            .collect::<Vec<_>>(),
        q,
    )
    .unwrap();
    println!("q={q} delta={delta} w={window} | per-detector test AUC at {paths} paths:");
    for (k, kind) in BANK.iter().enumerate() {
        let stat_paths: Vec<StatisticPath> = test_prep
            .iter()
            .map(|(offset, residuals, _, change)| {
                let signals = bank.signals(residuals).unwrap();
                StatisticPath {
                    offset: *offset,
                    values: signals[k].normalized.clone(),
                    change: *change,
                }
            })
            .collect();
        let grid = observed_grid(&stat_paths).unwrap();
        let curve = pr_curve(&stat_paths, &grid).unwrap();
        println!(
            "  {:<22} ref_th={:>14.4} auc={:.4}",
            format!("{kind:?}"),
            bank.thresholds[k],
            pr_auc(&curve)
        );
    }
}

fn dump_curve(name: &str, curve: &[lrdetect::evalkit::PrPoint]) {
    let mut pts: Vec<&lrdetect::evalkit::PrPoint> = curve.iter().collect();
    pts.sort_by(|a, b| b.threshold.partial_cmp(&a.threshold).unwrap());
    println!("{name}: {} points (sweep order)", pts.len());
    let n = pts.len();
    let picks: Vec<usize> = if n <= 12 {
        (0..n).collect()
    } else {
        (0..12).map(|i| i * (n - 1) / 11).collect()
    };
    for i in picks {
        let p = pts[i];
        println!(
            "  th={:>10.4} recall={:.3} precision={:.3}",
            p.threshold, p.recall, p.precision
        );
    }
}

fn main() {
    if std::env::args().nth(1).as_deref() == Some("detect") {
        let paths = std::env::args()
            .nth(2)
            .and_then(|s| s.parse().ok())
            .unwrap_or(50);
        let seed = std::env::args()
            .nth(3)
            .and_then(|s| s.parse().ok())
            .unwrap_or(1);
        detection_probe(paths, seed);
        return;
    }
    if std::env::args().nth(1).as_deref() == Some("bank") {
        let paths = std::env::args()
            .nth(2)
            .and_then(|s| s.parse().ok())
            .unwrap_or(20);
        let seed = std::env::args()
            .nth(3)
            .and_then(|s| s.parse().ok())
            .unwrap_or(1);
        detector_breakdown(paths, seed);
        return;
    }
    if std::env::args().nth(1).as_deref() == Some("pca2") {
        let reps = std::env::args()
            .nth(2)
            .and_then(|s| s.parse().ok())
            .unwrap_or(20);
        let scale = std::env::args()
            .nth(3)
            .and_then(|s| s.parse().ok())
            .unwrap_or(0.05);
        pca_online_sweep(reps, scale);
        return;
    }
    if std::env::args().nth(1).as_deref() == Some("pca") {
        let reps = std::env::args()
            .nth(2)
            .and_then(|s| s.parse().ok())
            .unwrap_or(20);
        let scale = std::env::args()
            .nth(3)
            .and_then(|s| s.parse().ok())
            .unwrap_or(0.05);
        pca_sweep(reps, scale);
        return;
    }
    let reps: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(30);
    let scales: Vec<f64> = std::env::args()
        .skip(2)
        .filter_map(|s| s.parse().ok())
        .collect();
    let scales = if scales.is_empty() {
        vec![0.05, 0.08, 0.12]
    } else {
        scales
    };
    let seed: u64 = std::env::var("PROBE_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    println!("reps={reps} seed={seed}");
    println!("scale | ewma_t ewma_f | pca_t pca_f | pre_t pre_f | ours_t ours_f | a_t a_f");
    for scale in scales {
        let options = AccuracyOptions {
            replications: reps,
            seed,
            noise_scale: scale,
            ..AccuracyOptions::default()
        };
        let start = std::time::Instant::now();
        match evaluate_accuracy(&options) {
            Ok(r) => println!(
                "{scale:.3} | {:.2} {:.2} | {:.2} {:.2} | {:.2} {:.2} | {:.2} {:.2} | {} {} ({:.1}s)",
                100.0 * r.ewma.trend,
                100.0 * r.ewma.forecast,
                100.0 * r.pca.trend,
                100.0 * r.pca.forecast,
                100.0 * r.pca_pretraining.trend,
                100.0 * r.pca_pretraining.forecast,
                100.0 * r.ours.trend,
                100.0 * r.ours.forecast,
                r.ewma_trend_smoothing,
                r.ewma_forecast_smoothing,
                start.elapsed().as_secs_f64(),
            ),
            Err(e) => println!("{scale:.3} | error: {e}"),
        }
    }
}
