//! Heart rate, SDNN and Baevsky stress index from inter-beat intervals, and
//! spectral heart rate from a pulse wave.
//!
//! All interval inputs are in seconds. The stress index uses the 95%-range
//! form `AMo / (2 * Mo * 3.92 * SDNN)` with `AMo` as a fraction and `Mo`,
//! `SDNN` in seconds.

use std::fmt;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::ibi::IbiSeries;
use crate::signal::{design_butterworth_bandpass, filter_zero_phase, BandpassSpec, UniformSignal};

pub const MIN_HR_BPM: f64 = 39.0;
pub const MAX_HR_BPM: f64 = 210.0;
/// Shortest valid interval, 60 / 210 s.
pub const MIN_IBI_S: f64 = 60.0 / MAX_HR_BPM;
/// Longest valid interval, 60 / 39 s.
pub const MAX_IBI_S: f64 = 60.0 / MIN_HR_BPM;

pub const HISTOGRAM_BIN_S: f64 = 0.050;
/// Width of the central 95% of a normal distribution, in standard deviations.
pub const SPREAD_95: f64 = 3.92;

/// Finest spectral grid `hr_from_fft` may use, in Hz.
pub const FFT_RESOLUTION_HZ: f64 = 0.01;
pub const MIN_FFT_DURATION_S: f64 = 10.0;

pub fn is_valid_ibi(ibi: f64) -> bool {
    (MIN_IBI_S..=MAX_IBI_S).contains(&ibi)
}

pub fn ibis_from_ms(ms: &[f64]) -> Vec<f64> {
    ms.iter().map(|v| v / 1000.0).collect()
}

pub fn ibis_to_ms(seconds: &[f64]) -> Vec<f64> {
    seconds.iter().map(|v| v * 1000.0).collect()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Beats per minute from the mean interval.
pub fn heart_rate_bpm(ibis: &[f64]) -> Result<f64> {
    if ibis.is_empty() {
        return Err(Error::NoValidIbis);
    }
    Ok(60.0 / mean(ibis))
}

/// Population standard deviation of the intervals, in milliseconds.
pub fn sdnn_ms(ibis: &[f64]) -> Result<f64> {
    Ok(sdnn_s(ibis)? * 1000.0)
}

fn sdnn_s(ibis: &[f64]) -> Result<f64> {
    if ibis.len() < 2 {
        return Err(Error::TooFewIbis {
            needed: 2,
            got: ibis.len(),
        });
    }
    // exact zero for identical intervals, which the mean would not give
    if ibis.iter().all(|&v| v == ibis[0]) {
        return Ok(0.0);
    }
    let m = mean(ibis);
    let var = ibis.iter().map(|v| (v - m).powi(2)).sum::<f64>() / ibis.len() as f64;
    Ok(var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramMode {
    /// Left edge of the modal bin, seconds.
    pub mode_bin_start: f64,
    /// Centre of the modal bin, seconds.
    pub mo: f64,
    /// Fraction of intervals in the modal bin.
    pub amo: f64,
}

/// Bin index on the 50 ms grid anchored at zero. The small offset keeps
/// values that sit on a bin edge (0.80 s, 850 ms / 1000) in the upper bin
/// despite binary rounding.
fn bin_index(ibi: f64) -> i64 {
    (ibi * 1000.0 / (HISTOGRAM_BIN_S * 1000.0) + 1e-9).floor() as i64
}

/// Most populated 50 ms bin; ties go to the lower bin.
pub fn ibi_histogram_mode(ibis: &[f64]) -> Result<HistogramMode> {
    if ibis.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut bins: Vec<i64> = ibis.iter().map(|&v| bin_index(v)).collect();
    bins.sort_unstable();
    let (mut best_bin, mut best_count) = (bins[0], 0usize);
    let mut i = 0;
    while i < bins.len() {
        let j = bins[i..].iter().take_while(|&&b| b == bins[i]).count();
        if j > best_count {
            best_bin = bins[i];
            best_count = j;
        }
        i += j;
    }
    let start = best_bin as f64 * HISTOGRAM_BIN_S;
    Ok(HistogramMode {
        mode_bin_start: start,
        mo: start + HISTOGRAM_BIN_S / 2.0,
        amo: best_count as f64 / ibis.len() as f64,
    })
}

/// Baevsky stress index with `3.92 * SDNN` standing in for the interval range.
pub fn baevsky_si(ibis: &[f64]) -> Result<f64> {
    let sdnn = sdnn_s(ibis)?;
    if sdnn <= 0.0 {
        return Err(Error::DegenerateWindow);
    }
    let mode = ibi_histogram_mode(ibis)?;
    Ok(mode.amo / (2.0 * mode.mo * SPREAD_95 * sdnn))
}

/// Heart rate from the dominant frequency of `wave` after bandpassing it to
/// `band`. The spectrum is zero-padded to a grid no coarser than 0.01 Hz and
/// searched only inside the band.
pub fn hr_from_fft(wave: &UniformSignal, band: &BandpassSpec) -> Result<f64> {
    let fs = wave.sample_rate;
    let min_len = (MIN_FFT_DURATION_S * fs - 1e-9).ceil() as usize;
    if wave.len() < min_len {
        return Err(Error::SignalTooShort {
            needed: min_len,
            got: wave.len(),
        });
    }
    let coeffs = design_butterworth_bandpass(band, fs)?;
    let filtered = filter_zero_phase(wave, &coeffs)?;

    let n_fft = wave
        .len()
        .max((fs / FFT_RESOLUTION_HZ).ceil() as usize)
        .next_power_of_two();
    let mut buf: Vec<Complex64> = filtered
        .samples
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n_fft)
        .collect();
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);

    let df = fs / n_fft as f64;
    let lo = (band.low_hz / df).ceil() as usize;
    let hi = ((band.high_hz / df).floor() as usize).min(n_fft / 2);
    let best = (lo..=hi)
        .max_by(|&a, &b| buf[a].norm_sqr().total_cmp(&buf[b].norm_sqr()))
        .ok_or(Error::SignalTooShort {
            needed: min_len,
            got: wave.len(),
        })?;
    Ok(best as f64 * df * 60.0)
}

/// Why a reading field has no value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UndefinedReason {
    NoValidIbis,
    TooFewIbis,
    DegenerateWindow,
    /// The protocol does not produce this quantity.
    NotApplicable,
    /// The computation failed for another reason.
    Failed,
}

impl UndefinedReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            UndefinedReason::NoValidIbis => "no_valid_ibis",
            UndefinedReason::TooFewIbis => "too_few_ibis",
            UndefinedReason::DegenerateWindow => "degenerate",
            UndefinedReason::NotApplicable => "not_applicable",
            UndefinedReason::Failed => "failed",
        }
    }
}

impl fmt::Display for UndefinedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A biometric value, or the reason it could not be computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimate {
    Value(f64),
    Undefined(UndefinedReason),
}

impl Estimate {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Estimate::Value(v) => Some(v),
            Estimate::Undefined(_) => None,
        }
    }

    pub fn reason(&self) -> Option<UndefinedReason> {
        match *self {
            Estimate::Value(_) => None,
            Estimate::Undefined(r) => Some(r),
        }
    }

    pub fn is_defined(&self) -> bool {
        matches!(self, Estimate::Value(_))
    }
}

impl From<Result<f64>> for Estimate {
    fn from(r: Result<f64>) -> Self {
        match r {
            Ok(v) => Estimate::Value(v),
            Err(Error::NoValidIbis | Error::EmptyInput) => {
                Estimate::Undefined(UndefinedReason::NoValidIbis)
            }
            Err(Error::TooFewIbis { .. }) => Estimate::Undefined(UndefinedReason::TooFewIbis),
            Err(Error::DegenerateWindow) => Estimate::Undefined(UndefinedReason::DegenerateWindow),
            Err(_) => Estimate::Undefined(UndefinedReason::Failed),
        }
    }
}

/// Heart rate, SDNN and stress index over one window of intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiometricReading {
    pub window: (f64, f64),
    pub hr_bpm: Estimate,
    pub sdnn_ms: Estimate,
    pub stress_si: Estimate,
    pub n_ibis: usize,
}

impl BiometricReading {
    /// All three biometrics from a set of valid intervals. Every field needs
    /// at least two intervals.
    pub fn from_ibis(window: (f64, f64), ibis: &[f64]) -> Self {
        let n = ibis.len();
        let too_few = match n {
            0 => Some(UndefinedReason::NoValidIbis),
            1 => Some(UndefinedReason::TooFewIbis),
            _ => None,
        };
        if let Some(reason) = too_few {
            let u = Estimate::Undefined(reason);
            return Self {
                window,
                hr_bpm: u,
                sdnn_ms: u,
                stress_si: u,
                n_ibis: n,
            };
        }
        Self {
            window,
            hr_bpm: heart_rate_bpm(ibis).into(),
            sdnn_ms: sdnn_ms(ibis).into(),
            stress_si: baevsky_si(ibis).into(),
            n_ibis: n,
        }
    }

    /// First undefined reason among the fields, if any.
    pub fn status(&self) -> Option<UndefinedReason> {
        self.hr_bpm
            .reason()
            .or(self.sdnn_ms.reason())
            .or(self.stress_si.reason())
    }
}

/// Reading over the valid entries whose closing peak falls in
/// `[t_start, t_end]`.
pub fn reading_for_window(series: &IbiSeries, t_start: f64, t_end: f64) -> BiometricReading {
    let ibis = series.slice_time(t_start, t_end).valid_ibis();
    BiometricReading::from_ibis((t_start, t_end), &ibis)
}
