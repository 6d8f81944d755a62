//! Acceptance suite. Prints one line per criterion and exits non-zero if
//! any criterion fails.
//!
//! Set `PULSELAB_UBFC_DIR` to a corpus directory of UBFC-format recordings
//! to run the dataset check; it is skipped otherwise.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use pulselab::biometrics::{
    baevsky_si, heart_rate_bpm, hr_from_fft, sdnn_ms, BiometricReading, MAX_IBI_S, MIN_IBI_S,
};
use pulselab::eval::{
    evaluate_corpus, CorpusEntry, EvalConfig, GroundTruth, GroundTruthProtocol, Recording,
};
use pulselab::extract::ExtractorId;
use pulselab::metrics::{mae, mape, pearson, rmse};
use pulselab::monitor::{process_recording, MonitorConfig, MonitorSession};
use pulselab::signal::{design_butterworth_bandpass, filter_zero_phase, BandpassSpec, UniformSignal};
use pulselab::synth::{synth_trace, IbiModel, SynthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

// Reference formulas written from their definitions, sharing no code with
// the library.

fn oracle_hr(ibis: &[f64]) -> f64 {
    let mut total = 0.0;
    for x in ibis {
        total += x;
    }
    60.0 * ibis.len() as f64 / total
}

/// Population variance from all pairwise differences.
fn oracle_sdnn_s(ibis: &[f64]) -> f64 {
    let n = ibis.len() as f64;
    let mut acc = 0.0;
    for i in 0..ibis.len() {
        for j in i + 1..ibis.len() {
            acc += (ibis[i] - ibis[j]).powi(2);
        }
    }
    (acc / (n * n)).sqrt()
}

fn oracle_si(ibis: &[f64]) -> f64 {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for x in ibis {
        *counts.entry((x * 20.0).floor() as i64).or_default() += 1;
    }
    let (mut bin, mut best) = (0, 0);
    for (b, c) in counts {
        if c > best {
            bin = b;
            best = c;
        }
    }
    let mo = (bin as f64 + 0.5) * 0.05;
    let amo = best as f64 / ibis.len() as f64;
    amo / (2.0 * mo * 3.92 * oracle_sdnn_s(ibis))
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(5..=120);
        let centre: f64 = rng.random_range(0.4..1.3);
        let spread: f64 = rng.random_range(0.005..0.15);
        let ibis: Vec<f64> = (0..n)
            .map(|_| (centre + rng.random_range(-spread..spread)).clamp(MIN_IBI_S, MAX_IBI_S))
            .collect();
        let pairs = [
            (heart_rate_bpm(&ibis).unwrap(), oracle_hr(&ibis)),
            (sdnn_ms(&ibis).unwrap(), oracle_sdnn_s(&ibis) * 1000.0),
            (baevsky_si(&ibis).unwrap(), oracle_si(&ibis)),
        ];
        for (got, want) in pairs {
            worst = worst.max((got - want).abs() / want.abs());
        }
    }
    check(worst <= 1e-9, format!("1000 sets, worst relative error {worst:.2e}"))
}

fn analog_magnitude(f: f64, fs: f64, lo: f64, hi: f64) -> f64 {
    let warp = |x: f64| 2.0 * fs * (PI * x / fs).tan();
    let (w, wl, wh) = (warp(f), warp(lo), warp(hi));
    let q = (w * w - wl * wh) / (w * (wh - wl));
    1.0 / (1.0 + q.powi(4)).sqrt()
}

fn local_maxima(x: &[f64], margin: usize) -> Vec<usize> {
    (margin.max(1)..x.len() - margin.max(1))
        .filter(|&i| x[i] > x[i - 1] && x[i] > x[i + 1])
        .collect()
}

fn criterion_2() -> Outcome {
    let fs = 30.0;
    let band = BandpassSpec::GROUND_TRUTH;
    let coeffs = design_butterworth_bandpass(&band, fs).unwrap();
    let db = |f: f64| 20.0 * coeffs.magnitude(f, fs).log10();
    let (lo_db, hi_db) = (db(band.low_hz), db(band.high_hz));
    let dc = coeffs.magnitude(0.0, fs);
    let mut max_dev: f64 = 0.0;
    for k in 1..1500 {
        let f = k as f64 * 0.01;
        let d = coeffs.magnitude(f, fs) - analog_magnitude(f, fs, band.low_hz, band.high_hz);
        max_dev = max_dev.max(d.abs());
    }
    let mut peaks_equal = true;
    for f in [0.8, 1.0, 1.3, 1.7, 2.2] {
        let x: Vec<f64> = (0..1800).map(|k| (2.0 * PI * f * k as f64 / fs + 0.3).sin()).collect();
        let y = filter_zero_phase(&UniformSignal::new(x.clone(), fs, 0.0), &coeffs).unwrap();
        peaks_equal &= local_maxima(&x, 90) == local_maxima(&y.samples, 90);
    }
    let ok = (lo_db + 3.0).abs() <= 0.5 && (hi_db + 3.0).abs() <= 0.5 && dc < 1e-3 && max_dev < 1e-9 && peaks_equal;
    check(
        ok,
        format!(
            "edges {lo_db:.3}/{hi_db:.3} dB, dc {dc:.1e}, max deviation from analytic {max_dev:.1e}, peaks preserved {peaks_equal}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut worst: f64 = 0.0;
    for f in [0.8, 1.0, 1.5, 2.0] {
        let x: Vec<f64> = (0..1800).map(|k| (2.0 * PI * f * k as f64 / 30.0).sin()).collect();
        let hr = hr_from_fft(&UniformSignal::new(x, 30.0, 0.0), &BandpassSpec::GROUND_TRUTH).unwrap();
        worst = worst.max((hr - f * 60.0).abs());
    }
    check(worst <= 0.6, format!("worst error {worst:.3} bpm"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let corpus: Vec<CorpusEntry> = (0..20)
        .map(|i| {
            let spec = SynthSpec {
                duration_s: 180.0,
                fps: 30.0,
                base_hr_bpm: rng.random_range(50.0..=150.0),
                hrv_sdnn_ms: rng.random_range(20.0..=80.0),
                ibi_model: IbiModel::Jittered,
                noise_std: 0.02,
                drift_amplitude: 1.0,
                drift_hz: 0.05,
                seed: 100 + i,
                ..SynthSpec::default()
            };
            let out = synth_trace(&spec).unwrap();
            CorpusEntry::Loaded(Recording {
                id: format!("synth{i:02}"),
                trace: out.trace,
                truth: GroundTruth {
                    pulse: Some(out.truth.pulse),
                    verified_peaks: Some(out.truth.beats),
                },
            })
        })
        .collect();
    // embedded beat times are the reference; predictions run extraction,
    // detection and correction
    let report = evaluate_corpus(
        &corpus,
        ExtractorId::Pos,
        GroundTruthProtocol::VerifiedPeaks,
        &EvalConfig::default(),
    )
    .unwrap();
    let (Some(hr), Some(sdnn), Some(si)) = (report.hr, report.sdnn, report.stress) else {
        return Outcome::Fail("metrics undefined".into());
    };
    let (rs, rsi) = (sdnn.pearson.unwrap_or(f64::NAN), si.pearson.unwrap_or(f64::NAN));
    check(
        report.failures() == 0 && hr.n == 20 && hr.mae <= 1.0 && rs >= 0.8 && rsi >= 0.7,
        format!(
            "hr mae {:.3} bpm, sdnn r {rs:.3}, stress r {rsi:.3}, {} failures",
            hr.mae,
            report.failures()
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut mismatches = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let spec = SynthSpec {
            duration_s: 40.0,
            base_hr_bpm: rng.random_range(50.0..=150.0),
            hrv_sdnn_ms: rng.random_range(10.0..=80.0),
            ibi_model: IbiModel::Jittered,
            noise_std: rng.random_range(0.0..1.0),
            drift_amplitude: 1.0,
            seed,
            ..SynthSpec::default()
        };
        let frames = synth_trace(&spec).unwrap().trace.samples;
        let config = MonitorConfig {
            extractor: ExtractorId::ALL[seed as usize % 3],
            ..MonitorConfig::default()
        };
        let run = |chunk: usize| -> (Vec<BiometricReading>, Vec<f64>) {
            let mut s = MonitorSession::new(config.clone()).unwrap();
            let (mut readings, mut peaks) = (Vec::new(), Vec::new());
            for c in frames.chunks(chunk) {
                readings.extend(s.push_frames(c).unwrap());
                peaks.extend(s.drain_peaks());
            }
            (readings, peaks)
        };
        let reference = run(1);
        for chunk in [7, 30, frames.len()] {
            if run(chunk) != reference {
                mismatches += 1;
            }
        }
    }
    check(mismatches == 0, format!("50 traces x chunk sizes 1/7/30/whole, {mismatches} mismatches"))
}

fn criterion_6() -> Outcome {
    let trace = synth_trace(&SynthSpec {
        duration_s: 120.5,
        base_hr_bpm: 70.0,
        noise_std: 0.05,
        seed: 6,
        ..SynthSpec::default()
    })
    .unwrap()
    .trace;
    let readings = process_recording(&trace, &MonitorConfig::default()).unwrap();
    let mut problems = Vec::new();
    if readings.iter().any(|r| r.window.1 < 10.0) {
        problems.push("reading before 10 s".to_string());
    }
    for (k, r) in readings.iter().enumerate() {
        let t = 10.0 + k as f64;
        let want = (if t >= 60.0 { t - 60.0 } else { 0.0 }, t);
        if r.window != want {
            problems.push(format!("reading {k}: {:?} != {want:?}", r.window));
            break;
        }
    }
    if readings.len() != 111 {
        problems.push(format!("{} readings, expected 111", readings.len()));
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            "first at 10 s, [0, 35] at 35 s, trailing 60 s from 60 s".into()
        } else {
            problems.join("; ")
        },
    )
}

fn criterion_7() -> Outcome {
    let trace = synth_trace(&SynthSpec {
        duration_s: 60.0,
        base_hr_bpm: 72.0,
        hrv_sdnn_ms: 40.0,
        ibi_model: IbiModel::Jittered,
        noise_std: 0.5,
        seed: 7,
        ..SynthSpec::default()
    })
    .unwrap()
    .trace;
    let mut s = MonitorSession::new(MonitorConfig::default()).unwrap();
    s.push_frames(&trace.samples).unwrap();
    let t = s.per_frame_budget_check().unwrap();
    check(
        t.mean_s <= 1e-3,
        format!(
            "mean {:.1} us, p95 {:.1} us over {} frames (environment-sensitive)",
            t.mean_s * 1e6,
            t.p95_s * 1e6,
            t.frames
        ),
    )
}

fn criterion_8() -> Outcome {
    let (p, t) = ([72.0, 80.0], [70.0, 84.0]);
    let examples = (mae(&p, &t).unwrap() - 3.0).abs() < 1e-12
        && (mape(&p, &t).unwrap() - 3.809_523_809_5).abs() < 1e-6
        && (rmse(&p, &t).unwrap() - 3.162_277_660_2).abs() < 1e-6
        && rmse(&[5.0], &[1.0]).unwrap() == 4.0
        && (pearson(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0]).unwrap().unwrap() - 1.0).abs() < 1e-12
        && (pearson(&[-1.0, -2.0, -4.0], &[1.0, 2.0, 4.0]).unwrap().unwrap() + 1.0).abs() < 1e-12
        && pearson(&[1.0, 2.0], &[3.0, 3.0]).unwrap().is_none();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..50);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        if rmse(&a, &b).unwrap() < mae(&a, &b).unwrap() * (1.0 - 1e-12) {
            violations += 1;
        }
    }
    check(
        examples && violations == 0,
        format!("worked examples {examples}, rmse < mae in {violations} of 1000 random pairs"),
    )
}

fn criterion_9() -> Outcome {
    let Ok(dir) = std::env::var("PULSELAB_UBFC_DIR") else {
        return Outcome::Skip("PULSELAB_UBFC_DIR not set".into());
    };
    let corpus = match pulselab::io::load_corpus(Path::new(&dir)) {
        Ok(c) if !c.is_empty() => c,
        Ok(_) => return Outcome::Fail(format!("no recordings under {dir}")),
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let report = match evaluate_corpus(&corpus, ExtractorId::Pos, GroundTruthProtocol::Peaks, &EvalConfig::default()) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    match report.hr {
        Some(hr) => check(
            hr.mae <= 5.0,
            format!("{} recordings, {} failed, hr mae {:.3} bpm", report.results.len(), report.failures(), hr.mae),
        ),
        None => Outcome::Fail("no recording produced a heart rate".into()),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("biometric formulas match reference implementations", criterion_1),
        ("bandpass design and zero-phase filtering", criterion_2),
        ("spectral heart rate on pure tones", criterion_3),
        ("end-to-end recovery on synthetic recordings", criterion_4),
        ("streaming results independent of chunking", criterion_5),
        ("warm-up and window semantics", criterion_6),
        ("per-frame compute budget", criterion_7),
        ("metric definitions", criterion_8),
        ("dataset heart rate error", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let outcome = run();
        let secs = clock.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] criterion {}: {name}: {detail} ({secs:.2} s)", i + 1);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
