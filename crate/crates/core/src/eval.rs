//! Corpus evaluation: reference biometrics from a ground-truth source,
//! predictions from the camera trace, and agreement metrics per biometric.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::biometrics::{hr_from_fft, BiometricReading, Estimate, UndefinedReason};
use crate::error::{Error, Result};
use crate::extract::{extract, ExtractorId, RgbTrace, DEFAULT_WINDOW_S};
use crate::ibi::{correct_ibis, peaks_to_ibis, IbiSeries};
use crate::metrics::MetricSet;
use crate::peaks::{detect_peaks, PeakDetectorConfig};
use crate::signal::{design_butterworth_bandpass, filter_zero_phase, BandpassSpec, UniformSignal};

/// How reference values are derived from the ground-truth source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroundTruthProtocol {
    /// Bandpass the reference pulse, detect and correct peaks.
    Peaks,
    /// Dominant frequency of the bandpassed reference pulse; heart rate only.
    Fft,
    /// Peak times supplied with the recording, used as given.
    VerifiedPeaks,
}

impl GroundTruthProtocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            GroundTruthProtocol::Peaks => "peaks",
            GroundTruthProtocol::Fft => "fft",
            GroundTruthProtocol::VerifiedPeaks => "verified",
        }
    }
}

impl fmt::Display for GroundTruthProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroundTruthProtocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "peaks" => Ok(GroundTruthProtocol::Peaks),
            "fft" => Ok(GroundTruthProtocol::Fft),
            "verified" | "verified_peaks" | "verified-peaks" => Ok(GroundTruthProtocol::VerifiedPeaks),
            other => Err(Error::InvalidConfig(format!("unknown protocol '{other}'"))),
        }
    }
}

fn hr_only(window: (f64, f64), hr: f64) -> BiometricReading {
    let na = Estimate::Undefined(UndefinedReason::NotApplicable);
    BiometricReading {
        window,
        hr_bpm: Estimate::Value(hr),
        sdnn_ms: na,
        stress_si: na,
        n_ibis: 0,
    }
}

fn span(signal: &UniformSignal) -> (f64, f64) {
    (signal.t0, signal.t0 + signal.duration())
}

fn reading_from_peaks(window: (f64, f64), series: &IbiSeries) -> BiometricReading {
    BiometricReading::from_ibis(window, &correct_ibis(series).valid_ibis())
}

/// Reference biometrics for one recording.
pub fn ground_truth_readings(
    pulse: Option<&UniformSignal>,
    protocol: GroundTruthProtocol,
    verified_peaks: Option<&[f64]>,
) -> Result<BiometricReading> {
    let band = BandpassSpec::GROUND_TRUTH;
    match protocol {
        GroundTruthProtocol::Peaks => {
            let pulse = pulse.ok_or(Error::MissingGroundTruthPulse)?;
            let coeffs = design_butterworth_bandpass(&band, pulse.sample_rate)?;
            let filtered = filter_zero_phase(pulse, &coeffs)?;
            let peaks = detect_peaks(&filtered, &PeakDetectorConfig::default())?;
            Ok(reading_from_peaks(span(pulse), &peaks_to_ibis(&peaks)))
        }
        GroundTruthProtocol::Fft => {
            let pulse = pulse.ok_or(Error::MissingGroundTruthPulse)?;
            Ok(hr_only(span(pulse), hr_from_fft(pulse, &band)?))
        }
        GroundTruthProtocol::VerifiedPeaks => {
            let peaks = verified_peaks.ok_or(Error::MissingVerifiedPeaks)?;
            if let Some(index) = crate::signal::first_non_increasing(peaks.iter().copied()) {
                return Err(Error::NonMonotonicTimestamps { index });
            }
            let window = match (peaks.first(), peaks.last()) {
                (Some(a), Some(b)) => (*a, *b),
                _ => (0.0, 0.0),
            };
            let ibis = IbiSeries::from_peak_times(peaks).valid_ibis();
            Ok(BiometricReading::from_ibis(window, &ibis))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub pulse: Option<UniformSignal>,
    pub verified_peaks: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub id: String,
    pub trace: RgbTrace,
    pub truth: GroundTruth,
}

/// One corpus member, possibly one that could not be loaded.
#[derive(Debug, Clone, PartialEq)]
pub enum CorpusEntry {
    Loaded(Recording),
    Unreadable { id: String, error: String },
}

impl CorpusEntry {
    pub fn id(&self) -> &str {
        match self {
            CorpusEntry::Loaded(r) => &r.id,
            CorpusEntry::Unreadable { id, .. } => id,
        }
    }
}

impl From<Recording> for CorpusEntry {
    fn from(r: Recording) -> Self {
        CorpusEntry::Loaded(r)
    }
}

/// Settings for the prediction side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Processing rate; the trace's own rate when `None`.
    pub rate: Option<f64>,
    pub band: BandpassSpec,
    pub extractor_window_s: f64,
    pub detector: PeakDetectorConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            rate: None,
            band: BandpassSpec::OPERATING,
            extractor_window_s: DEFAULT_WINDOW_S,
            detector: PeakDetectorConfig::default(),
        }
    }
}

/// Whole-recording biometrics from the camera trace alone.
pub fn predict(
    trace: &RgbTrace,
    extractor: ExtractorId,
    protocol: GroundTruthProtocol,
    config: &EvalConfig,
) -> Result<BiometricReading> {
    let rate = config.rate.unwrap_or(trace.nominal_rate);
    let wave = extract(extractor, trace, rate, &config.band, config.extractor_window_s)?;
    let window = span(&wave.signal);
    if protocol == GroundTruthProtocol::Fft {
        return Ok(hr_only(window, hr_from_fft(&wave.signal, &config.band)?));
    }
    let peaks = detect_peaks(&wave.signal, &config.detector)?;
    Ok(reading_from_peaks(window, &peaks_to_ibis(&peaks)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordingScores {
    pub predicted: BiometricReading,
    pub target: BiometricReading,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordingResult {
    pub id: String,
    /// Scores, or the message of the error that stopped this recording.
    pub outcome: std::result::Result<RecordingScores, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub extractor: ExtractorId,
    pub protocol: GroundTruthProtocol,
    pub results: Vec<RecordingResult>,
    pub hr: Option<MetricSet>,
    pub sdnn: Option<MetricSet>,
    pub stress: Option<MetricSet>,
}

impl EvalReport {
    pub fn successes(&self) -> usize {
        self.results.iter().filter(|r| r.outcome.is_ok()).count()
    }

    pub fn failures(&self) -> usize {
        self.results.len() - self.successes()
    }

    /// Defined (predicted, target) pairs for one biometric.
    pub fn pairs(&self, field: fn(&BiometricReading) -> Estimate) -> (Vec<f64>, Vec<f64>) {
        pairs(&self.results, field)
    }
}

fn pairs(
    results: &[RecordingResult],
    field: fn(&BiometricReading) -> Estimate,
) -> (Vec<f64>, Vec<f64>) {
    results
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .filter_map(|s| Some((field(&s.predicted).value()?, field(&s.target).value()?)))
        .unzip()
}

fn metric(results: &[RecordingResult], field: fn(&BiometricReading) -> Estimate) -> Option<MetricSet> {
    let (p, t) = pairs(results, field);
    MetricSet::compute(&p, &t).ok()
}

fn score(
    rec: &Recording,
    extractor: ExtractorId,
    protocol: GroundTruthProtocol,
    config: &EvalConfig,
) -> Result<RecordingScores> {
    let target = ground_truth_readings(
        rec.truth.pulse.as_ref(),
        protocol,
        rec.truth.verified_peaks.as_deref(),
    )?;
    let predicted = predict(&rec.trace, extractor, protocol, config)?;
    Ok(RecordingScores { predicted, target })
}

/// Score every recording independently; failures are recorded, not fatal.
pub fn evaluate_corpus(
    corpus: &[CorpusEntry],
    extractor: ExtractorId,
    protocol: GroundTruthProtocol,
    config: &EvalConfig,
) -> Result<EvalReport> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput);
    }
    let results: Vec<RecordingResult> = corpus
        .par_iter()
        .map(|entry| RecordingResult {
            id: entry.id().to_string(),
            outcome: match entry {
                CorpusEntry::Loaded(rec) => {
                    score(rec, extractor, protocol, config).map_err(|e| e.to_string())
                }
                CorpusEntry::Unreadable { error, .. } => Err(error.clone()),
            },
        })
        .collect();
    Ok(EvalReport {
        extractor,
        protocol,
        hr: metric(&results, |r| r.hr_bpm),
        sdnn: metric(&results, |r| r.sdnn_ms),
        stress: metric(&results, |r| r.stress_si),
        results,
    })
}
