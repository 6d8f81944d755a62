//! Pulse-wave extraction from per-frame mean skin RGB.
//!
//! Three extractors share one interface: the raw green channel, the
//! chrominance method (CHROM) and the plane-orthogonal-to-skin method (POS).
//! CHROM and POS work on short windows with 50% overlap; each window is
//! normalised by its channel means, projected, mean-centred and added back
//! with a periodic Hann taper, which sums to one at this overlap.
//!
//! All outputs are oriented so that heartbeats (blood-volume maxima, i.e.
//! dips in reflected intensity) are local maxima.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::signal::{
    design_butterworth_bandpass, detrend_moving_mean, filter_zero_phase, resample_uniform,
    BandpassSpec, Sample, SosState, UniformSignal,
};

/// POS window length recommended for 20-30 fps video.
pub const DEFAULT_WINDOW_S: f64 = 1.6;
/// Moving-mean span removed from the green channel before filtering.
pub const GREEN_DETREND_S: f64 = 2.0;
/// Below this a projected component is treated as flat.
const FLAT_STD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RgbSample {
    pub t: f64,
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl RgbSample {
    pub fn new(t: f64, r: f64, g: f64, b: f64) -> Self {
        Self { t, r, g, b }
    }

    fn rgb(&self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }
}

/// Timestamped mean skin-region colour, one sample per camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbTrace {
    pub samples: Vec<RgbSample>,
    pub nominal_rate: f64,
}

impl RgbTrace {
    pub fn new(samples: Vec<RgbSample>, nominal_rate: f64) -> Result<Self> {
        if !(nominal_rate > 0.0 && nominal_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "nominal rate must be positive, got {nominal_rate}"
            )));
        }
        if let Some(index) = crate::signal::first_non_increasing(samples.iter().map(|s| s.t)) {
            return Err(Error::NonMonotonicTimestamps { index });
        }
        if let Some(i) = samples
            .iter()
            .position(|s| s.rgb().iter().any(|v| !v.is_finite() || *v < 0.0))
        {
            return Err(Error::InvalidConfig(format!(
                "frame {i}: colour values must be finite and non-negative"
            )));
        }
        Ok(Self {
            samples,
            nominal_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Each channel resampled onto the uniform grid at `rate`.
    fn resample(&self, rate: f64) -> Result<(Vec<[f64; 3]>, f64)> {
        let channel = |pick: fn(&RgbSample) -> f64| -> Result<UniformSignal> {
            let s: Vec<Sample> = self
                .samples
                .iter()
                .map(|f| Sample::new(f.t, pick(f)))
                .collect();
            resample_uniform(&s, rate)
        };
        let r = channel(|f| f.r)?;
        let g = channel(|f| f.g)?;
        let b = channel(|f| f.b)?;
        let rgb = (0..r.len())
            .map(|k| [r.samples[k], g.samples[k], b.samples[k]])
            .collect();
        Ok((rgb, r.t0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseWave {
    pub signal: UniformSignal,
    /// Band the signal was filtered to.
    pub band: BandpassSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExtractorId {
    Green,
    Chrom,
    Pos,
}

impl ExtractorId {
    pub const ALL: [ExtractorId; 3] = [ExtractorId::Green, ExtractorId::Chrom, ExtractorId::Pos];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExtractorId::Green => "green",
            ExtractorId::Chrom => "chrom",
            ExtractorId::Pos => "pos",
        }
    }

    /// Sign that turns the raw projection into peaks-up orientation.
    fn polarity(&self) -> f64 {
        match self {
            ExtractorId::Chrom => 1.0,
            ExtractorId::Green | ExtractorId::Pos => -1.0,
        }
    }
}

impl Default for ExtractorId {
    fn default() -> Self {
        ExtractorId::Pos
    }
}

impl fmt::Display for ExtractorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExtractorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "green" => Ok(ExtractorId::Green),
            "chrom" => Ok(ExtractorId::Chrom),
            "pos" => Ok(ExtractorId::Pos),
            other => Err(Error::InvalidConfig(format!("unknown extractor '{other}'"))),
        }
    }
}

fn std_dev(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Mean-centred projection of one window of raw RGB.
fn project_window(id: ExtractorId, win: &[[f64; 3]]) -> Vec<f64> {
    let len = win.len() as f64;
    let mut mean = [0.0; 3];
    for px in win {
        for c in 0..3 {
            mean[c] += px[c];
        }
    }
    mean.iter_mut().for_each(|m| *m /= len);
    let norm = |px: &[f64; 3], c: usize| if mean[c] > 0.0 { px[c] / mean[c] } else { 0.0 };

    let (u, v): (Vec<f64>, Vec<f64>) = win
        .iter()
        .map(|px| {
            let (r, g, b) = (norm(px, 0), norm(px, 1), norm(px, 2));
            match id {
                ExtractorId::Pos => (g - b, g + b - 2.0 * r),
                ExtractorId::Chrom => (3.0 * r - 2.0 * g, 1.5 * r + g - 1.5 * b),
                ExtractorId::Green => (g, 0.0),
            }
        })
        .unzip();

    let (su, sv) = (std_dev(&u), std_dev(&v));
    let alpha = match id {
        _ if sv < FLAT_STD => 0.0,
        ExtractorId::Pos => su / sv,
        ExtractorId::Chrom => -su / sv,
        ExtractorId::Green => 0.0,
    };
    let h: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + alpha * b).collect();
    let m = h.iter().sum::<f64>() / len;
    h.into_iter().map(|x| x - m).collect()
}

fn periodic_hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect()
}

/// Window length in samples, rounded to an even count of at least 4.
pub fn window_samples(window_s: f64, rate: f64) -> usize {
    ((window_s * rate / 2.0).round() as usize * 2).max(4)
}

fn overlap_add(id: ExtractorId, rgb: &[[f64; 3]], win_len: usize) -> Vec<f64> {
    let hop = win_len / 2;
    let hann = periodic_hann(win_len);
    let mut out = vec![0.0; rgb.len()];
    let mut start = 0;
    while start + win_len <= rgb.len() {
        let h = project_window(id, &rgb[start..start + win_len]);
        for (i, v) in h.iter().enumerate() {
            out[start + i] += hann[i] * v;
        }
        start += hop;
    }
    out
}

fn finish(raw: Vec<f64>, id: ExtractorId, rate: f64, t0: f64, band: &BandpassSpec) -> Result<PulseWave> {
    let coeffs = design_butterworth_bandpass(band, rate)?;
    let filtered = filter_zero_phase(&UniformSignal::new(raw, rate, t0), &coeffs)?;
    let sign = id.polarity();
    let samples = filtered.samples.into_iter().map(|v| sign * v).collect();
    Ok(PulseWave {
        signal: UniformSignal::new(samples, rate, t0),
        band: *band,
    })
}

fn check_len(trace: &RgbTrace, needed: usize) -> Result<()> {
    if trace.len() < needed {
        return Err(Error::TooFewSamples {
            needed,
            got: trace.len(),
        });
    }
    Ok(())
}

/// Green channel, detrended and bandpassed offline.
pub fn extract_green(trace: &RgbTrace, rate: f64, band: &BandpassSpec) -> Result<PulseWave> {
    check_len(trace, 2)?;
    band.validate(rate)?;
    let (rgb, t0) = trace.resample(rate)?;
    let g = UniformSignal::new(rgb.iter().map(|px| px[1]).collect(), rate, t0);
    let detrended = detrend_moving_mean(&g, GREEN_DETREND_S)?;
    finish(detrended.samples, ExtractorId::Green, rate, t0, band)
}

fn extract_windowed(
    id: ExtractorId,
    trace: &RgbTrace,
    rate: f64,
    band: &BandpassSpec,
    window_s: f64,
) -> Result<PulseWave> {
    if !(window_s > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "window must be positive, got {window_s}"
        )));
    }
    band.validate(rate)?;
    check_len(trace, 2)?;
    let win_len = window_samples(window_s, rate);
    let (rgb, t0) = trace.resample(rate)?;
    if rgb.len() < win_len {
        return Err(Error::TooFewSamples {
            needed: win_len,
            got: rgb.len(),
        });
    }
    finish(overlap_add(id, &rgb, win_len), id, rate, t0, band)
}

/// Chrominance projection `X - (sd X / sd Y) Y`.
pub fn extract_chrom(
    trace: &RgbTrace,
    rate: f64,
    band: &BandpassSpec,
    window_s: f64,
) -> Result<PulseWave> {
    extract_windowed(ExtractorId::Chrom, trace, rate, band, window_s)
}

/// Plane-orthogonal-to-skin projection `S1 + (sd S1 / sd S2) S2`.
pub fn extract_pos(
    trace: &RgbTrace,
    rate: f64,
    band: &BandpassSpec,
    window_s: f64,
) -> Result<PulseWave> {
    extract_windowed(ExtractorId::Pos, trace, rate, band, window_s)
}

pub fn extract(
    id: ExtractorId,
    trace: &RgbTrace,
    rate: f64,
    band: &BandpassSpec,
    window_s: f64,
) -> Result<PulseWave> {
    match id {
        ExtractorId::Green => extract_green(trace, rate, band),
        ExtractorId::Chrom => extract_chrom(trace, rate, band, window_s),
        ExtractorId::Pos => extract_pos(trace, rate, band, window_s),
    }
}

/// Causal, sample-at-a-time extraction for live sessions.
///
/// Input is already on the uniform grid. Output samples come out in grid
/// order, delayed by the window length (CHROM/POS) or half the detrend span
/// (GREEN), and are causally bandpassed.
#[derive(Debug, Clone)]
pub struct StreamingExtractor {
    id: ExtractorId,
    win_len: usize,
    hann: Vec<f64>,
    raw: VecDeque<[f64; 3]>,
    acc: VecDeque<f64>,
    seen: usize,
    green_half: usize,
    filter: SosState,
}

impl StreamingExtractor {
    pub fn new(id: ExtractorId, rate: f64, band: &BandpassSpec, window_s: f64) -> Result<Self> {
        let coeffs = design_butterworth_bandpass(band, rate)?;
        let win_len = window_samples(window_s, rate);
        Ok(Self {
            id,
            win_len,
            hann: periodic_hann(win_len),
            raw: VecDeque::with_capacity(win_len + 1),
            acc: VecDeque::with_capacity(win_len + 1),
            seen: 0,
            green_half: ((GREEN_DETREND_S * rate).round() as usize) / 2,
            filter: SosState::new(&coeffs),
        })
    }

    /// Samples held back before they are final.
    pub fn buffered(&self) -> usize {
        self.raw.len() + self.acc.len()
    }

    pub fn reset(&mut self) {
        self.raw.clear();
        self.acc.clear();
        self.seen = 0;
        self.filter.reset();
    }

    /// Push one grid sample, appending any finalised output to `out`.
    pub fn push(&mut self, rgb: [f64; 3], out: &mut Vec<f64>) {
        let before = out.len();
        match self.id {
            ExtractorId::Green => self.push_green(rgb[1], out),
            _ => self.push_windowed(rgb, out),
        }
        let sign = self.id.polarity();
        for v in &mut out[before..] {
            *v = sign * self.filter.process(*v);
        }
    }

    /// Projection and overlap-add, before filtering.
    fn push_windowed(&mut self, rgb: [f64; 3], out: &mut Vec<f64>) {
        self.raw.push_back(rgb);
        if self.raw.len() > self.win_len {
            self.raw.pop_front();
        }
        self.acc.push_back(0.0);
        self.seen += 1;

        let hop = self.win_len / 2;
        if self.seen >= self.win_len && (self.seen - self.win_len) % hop == 0 {
            let win: Vec<[f64; 3]> = self.raw.iter().copied().collect();
            let h = project_window(self.id, &win);
            let offset = self.acc.len() - self.win_len;
            for (i, v) in h.iter().enumerate() {
                self.acc[offset + i] += self.hann[i] * v;
            }
            // The next window starts `hop` samples later; everything before
            // it is final.
            for _ in 0..hop {
                out.push(self.acc.pop_front().expect("accumulator holds a full window"));
            }
        }
    }

    fn push_green(&mut self, g: f64, out: &mut Vec<f64>) {
        let half = self.green_half;
        self.acc.push_back(g);
        self.seen += 1;
        if self.acc.len() > 2 * half + 1 {
            self.acc.pop_front();
        }
        // centre sample k = seen - 1 - half; window [k - half, k + half]
        if self.seen > half {
            let k = self.seen - 1 - half;
            let centre = self.acc[self.acc.len() - 1 - half];
            let lo_abs = k.saturating_sub(half);
            let start = self.acc.len() - (self.seen - lo_abs);
            let win = self.acc.range(start..);
            let n = win.len() as f64;
            let mean = win.sum::<f64>() / n;
            out.push(centre - mean);
        }
    }
}
