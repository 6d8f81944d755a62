//! Uniformly sampled signals, resampling, detrending and Butterworth
//! bandpass filtering.
//!
//! Filters are realised as cascades of second-order sections in transposed
//! direct form II. The same per-sample update backs the batch and the
//! streaming paths, so both produce bit-identical output.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

/// A single timestamped value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Seconds since stream start.
    pub t: f64,
    pub value: f64,
}

impl Sample {
    pub fn new(t: f64, value: f64) -> Self {
        Self { t, value }
    }
}

/// A signal on the grid `t0 + k / sample_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSignal {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub t0: f64,
}

impl UniformSignal {
    pub fn new(samples: Vec<f64>, sample_rate: f64, t0: f64) -> Self {
        assert!(
            sample_rate > 0.0 && sample_rate.is_finite(),
            "sample rate must be positive, got {sample_rate}"
        );
        Self {
            samples,
            sample_rate,
            t0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time of sample `k`.
    pub fn time_at(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.sample_rate
    }

    /// Span covered by the samples, `(len - 1) / rate`.
    pub fn duration(&self) -> f64 {
        self.samples.len().saturating_sub(1) as f64 / self.sample_rate
    }

    fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            sample_rate: self.sample_rate,
            t0: self.t0,
        }
    }
}

/// Passband edges of a Butterworth bandpass. `order` is the order of the
/// lowpass prototype; the realised bandpass has twice as many poles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandpassSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
}

impl BandpassSpec {
    /// 39 to 210 beats per minute, the range the pipeline reports.
    pub const OPERATING: BandpassSpec = BandpassSpec {
        low_hz: 0.65,
        high_hz: 3.5,
        order: 2,
    };

    /// 45 to 150 beats per minute, used to condition ground-truth signals.
    pub const GROUND_TRUTH: BandpassSpec = BandpassSpec {
        low_hz: 0.75,
        high_hz: 2.5,
        order: 2,
    };

    pub fn new(low_hz: f64, high_hz: f64) -> Self {
        Self {
            low_hz,
            high_hz,
            order: 2,
        }
    }

    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        let nyquist = sample_rate / 2.0;
        let ok = self.low_hz.is_finite()
            && self.high_hz.is_finite()
            && self.low_hz > 0.0
            && self.low_hz < self.high_hz
            && self.high_hz < nyquist
            && self.order >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidBand {
                low_hz: self.low_hz,
                high_hz: self.high_hz,
                order: self.order,
                nyquist_hz: nyquist,
            })
        }
    }

    pub fn contains(&self, freq_hz: f64) -> bool {
        freq_hz >= self.low_hz && freq_hz <= self.high_hz
    }
}

impl Default for BandpassSpec {
    fn default() -> Self {
        Self::OPERATING
    }
}

/// One second-order section, normalised so that `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    /// `a1, a2`.
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z_inv2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z_inv2 * self.b[2];
        let den = 1.0 + z_inv * self.a[0] + z_inv2 * self.a[1];
        num / den
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoefficients {
    pub sections: Vec<Biquad>,
}

impl FilterCoefficients {
    /// Number of poles of the realised filter.
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, sample_rate: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / sample_rate;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude(&self, freq_hz: f64, sample_rate: f64) -> f64 {
        self.response(freq_hz, sample_rate).norm()
    }
}

/// Running state of a section cascade, for sample-at-a-time filtering.
#[derive(Debug, Clone)]
pub struct SosState {
    sections: Vec<Biquad>,
    z: Vec<[f64; 2]>,
}

impl SosState {
    pub fn new(coeffs: &FilterCoefficients) -> Self {
        Self {
            sections: coeffs.sections.clone(),
            z: vec![[0.0; 2]; coeffs.sections.len()],
        }
    }

    /// State the cascade would settle into after a long constant input `x0`.
    fn steady(coeffs: &FilterCoefficients, x0: f64) -> Self {
        let mut u = x0;
        let z = coeffs
            .sections
            .iter()
            .map(|s| {
                let y = s.dc_gain() * u;
                let z2 = s.b[2] * u - s.a[1] * y;
                let z1 = s.b[1] * u - s.a[0] * y + z2;
                u = y;
                [z1, z2]
            })
            .collect();
        Self {
            sections: coeffs.sections.clone(),
            z,
        }
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let mut v = x;
        for (s, z) in self.sections.iter().zip(self.z.iter_mut()) {
            let y = s.b[0] * v + z[0];
            z[0] = s.b[1] * v - s.a[0] * y + z[1];
            z[1] = s.b[2] * v - s.a[1] * y;
            v = y;
        }
        v
    }

    pub fn reset(&mut self) {
        self.z.iter_mut().for_each(|z| *z = [0.0; 2]);
    }
}

/// Linearly interpolate `trace` onto the grid `first.t + k / target_rate`
/// spanning the first to the last timestamp. Nothing is extrapolated.
pub fn resample_uniform(trace: &[Sample], target_rate: f64) -> Result<UniformSignal> {
    if !(target_rate > 0.0 && target_rate.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "target rate must be positive, got {target_rate}"
        )));
    }
    if trace.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: trace.len(),
        });
    }
    if let Some(index) = first_non_increasing(trace.iter().map(|s| s.t)) {
        return Err(Error::NonMonotonicTimestamps { index });
    }

    let t0 = trace[0].t;
    let t_last = trace[trace.len() - 1].t;
    let n = ((t_last - t0) * target_rate + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let t = t0 + k as f64 / target_rate;
        while seg + 2 < trace.len() && trace[seg + 1].t <= t {
            seg += 1;
        }
        let (a, b) = (trace[seg], trace[seg + 1]);
        let v = if t >= b.t {
            b.value
        } else {
            a.value + (b.value - a.value) * ((t - a.t) / (b.t - a.t))
        };
        out.push(v);
    }
    Ok(UniformSignal::new(out, target_rate, t0))
}

pub(crate) fn first_non_increasing(times: impl Iterator<Item = f64>) -> Option<usize> {
    let mut prev = f64::NEG_INFINITY;
    for (i, t) in times.enumerate() {
        if !t.is_finite() || t <= prev {
            return Some(i);
        }
        prev = t;
    }
    None
}

/// Subtract a centred moving mean of `window_s` seconds. Windows shrink at
/// the edges instead of padding.
pub fn detrend_moving_mean(signal: &UniformSignal, window_s: f64) -> Result<UniformSignal> {
    if signal.is_empty() {
        return Err(Error::EmptySignal);
    }
    if !(window_s > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "detrend window must be positive, got {window_s}"
        )));
    }
    let x = &signal.samples;
    let n = x.len();
    let half = ((window_s * signal.sample_rate).round() as usize) / 2;

    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in x {
        acc += v;
        prefix.push(acc);
    }

    let out = (0..n)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half).min(n - 1);
            let mean = (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64;
            x[k] - mean
        })
        .collect();
    Ok(signal.with_samples(out))
}

/// Digital Butterworth bandpass via the bilinear transform, with both band
/// edges pre-warped so they land exactly on the -3 dB points.
pub fn design_butterworth_bandpass(
    spec: &BandpassSpec,
    sample_rate: f64,
) -> Result<FilterCoefficients> {
    spec.validate(sample_rate)?;
    let fs2 = 2.0 * sample_rate;
    let warp = |f: f64| fs2 * (PI * f / sample_rate).tan();
    let w_lo = warp(spec.low_hz);
    let w_hi = warp(spec.high_hz);
    let bw = w_hi - w_lo;
    let w0_sq = w_lo * w_hi;

    let n = spec.order;
    let bilinear = |s: Complex64| (fs2 + s) / (fs2 - s);
    let section_from = |p1: Complex64, p2: Complex64| Biquad {
        // One zero at z = 1 (DC) and one at z = -1 (Nyquist).
        b: [1.0, 0.0, -1.0],
        a: [-(p1 + p2).re, (p1 * p2).re],
    };

    let mut sections = Vec::with_capacity(n);
    for k in 0..n {
        // Prototype poles on the left half of the unit circle.
        let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
        let p = Complex64::from_polar(1.0, theta);
        if p.im < -1e-12 {
            continue;
        }
        // s^2 - p*bw*s + w0^2 = 0
        let pb = p * bw;
        let disc = (pb * pb - 4.0 * w0_sq).sqrt();
        let s1 = bilinear((pb + disc) / 2.0);
        let s2 = bilinear((pb - disc) / 2.0);
        if p.im > 1e-12 {
            sections.push(section_from(s1, s1.conj()));
            sections.push(section_from(s2, s2.conj()));
        } else {
            sections.push(section_from(s1, s2));
        }
    }

    let mut coeffs = FilterCoefficients { sections };
    // Analog centre sqrt(w_lo * w_hi) has unit gain; map it back to digital.
    let f_center = (w0_sq.sqrt() / fs2).atan() * sample_rate / PI;
    let gain = coeffs.magnitude(f_center, sample_rate);
    let per_section = gain.powf(-1.0 / coeffs.sections.len() as f64);
    for s in &mut coeffs.sections {
        s.b.iter_mut().for_each(|b| *b *= per_section);
    }
    Ok(coeffs)
}

/// Causal filtering from a zero initial state.
pub fn filter_causal(signal: &UniformSignal, coeffs: &FilterCoefficients) -> Result<UniformSignal> {
    if signal.is_empty() {
        return Err(Error::EmptySignal);
    }
    let mut state = SosState::new(coeffs);
    let out = signal.samples.iter().map(|&x| state.process(x)).collect();
    Ok(signal.with_samples(out))
}

/// Forward-backward filtering. Edges are padded by odd reflection and each
/// pass starts from the steady state for its first padded sample, which
/// keeps start-up transients out of the returned span.
pub fn filter_zero_phase(
    signal: &UniformSignal,
    coeffs: &FilterCoefficients,
) -> Result<UniformSignal> {
    let n = signal.len();
    let needed = 3 * coeffs.order();
    if n <= needed {
        return Err(Error::SignalTooShort { needed, got: n });
    }
    let x = &signal.samples;
    let pad = (3 * (2 * coeffs.sections.len() + 1)).min(n - 1);

    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let run = |data: &mut Vec<f64>| {
        let mut state = SosState::steady(coeffs, data[0]);
        data.iter_mut().for_each(|v| *v = state.process(*v));
        data.reverse();
    };
    run(&mut ext);
    run(&mut ext);

    Ok(signal.with_samples(ext[pad..pad + n].to_vec()))
}
