//! Pulse peak detection, batch and incremental.
//!
//! Both modes drive the same per-sample state machine:
//!
//! 1. a sample becomes a candidate once its right neighbour is known and it
//!    is strictly greater than both neighbours;
//! 2. a candidate closer than the minimum distance to the pending peak
//!    replaces it if strictly higher, otherwise it is dropped;
//! 3. the pending peak is resolved once `min_distance` samples have followed
//!    it. It is kept if its prominence reaches `prominence_fraction` of the
//!    trailing signal amplitude.
//!
//! Every decision about sample `p` depends only on samples up to
//! `p + min_distance`, so an incremental run confirms exactly the batch peaks
//! except those in the last `min_distance` samples of the stream.

use std::collections::VecDeque;

use crate::biometrics::{MAX_IBI_S, MIN_IBI_S};
use crate::error::{Error, Result};
use crate::signal::UniformSignal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakDetectorConfig {
    /// Minimum spacing between peaks, also the confirmation delay.
    pub min_distance_s: f64,
    /// Required prominence as a fraction of the trailing amplitude.
    pub prominence_fraction: f64,
    /// Span of the trailing max-min amplitude estimate.
    pub amplitude_window_s: f64,
}

impl Default for PeakDetectorConfig {
    fn default() -> Self {
        Self {
            min_distance_s: MIN_IBI_S,
            prominence_fraction: 0.3,
            amplitude_window_s: 10.0,
        }
    }
}

impl PeakDetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_distance_s > 0.0 && self.min_distance_s.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "min_distance_s must be positive, got {}",
                self.min_distance_s
            )));
        }
        if !(self.prominence_fraction > 0.0 && self.prominence_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "prominence_fraction must lie in (0, 1], got {}",
                self.prominence_fraction
            )));
        }
        if !(self.amplitude_window_s > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "amplitude_window_s must be positive, got {}",
                self.amplitude_window_s
            )));
        }
        Ok(())
    }
}

/// Peak positions as sample indices and the matching times.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeakList {
    pub indices: Vec<usize>,
    pub times: Vec<f64>,
}

impl PeakList {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn extend(&mut self, other: PeakList) {
        self.indices.extend(other.indices);
        self.times.extend(other.times);
    }

    fn push(&mut self, index: usize, time: f64) {
        self.indices.push(index);
        self.times.push(time);
    }
}

/// Sample counts derived from a config at a given rate.
#[derive(Debug, Clone, Copy)]
struct Spans {
    min_distance: usize,
    amplitude: usize,
    base: usize,
}

impl Spans {
    fn new(cfg: &PeakDetectorConfig, rate: f64) -> Self {
        Self {
            min_distance: ((cfg.min_distance_s * rate - 1e-9).ceil() as usize).max(1),
            amplitude: ((cfg.amplitude_window_s * rate).round() as usize).max(1),
            base: (MAX_IBI_S * rate).ceil() as usize,
        }
    }

    fn history(&self) -> usize {
        self.amplitude.max(self.base + self.min_distance + 1) + 2
    }
}

/// Incremental peak detector for one stream.
#[derive(Debug, Clone)]
pub struct PeakDetector {
    cfg: PeakDetectorConfig,
    spans: Option<Spans>,
    sample_rate: f64,
    t0: f64,
    started: bool,
    buf: VecDeque<f64>,
    /// Absolute index of `buf[0]`.
    buf_start: usize,
    seen: usize,
    pending: Option<usize>,
}

impl PeakDetector {
    pub fn new(cfg: PeakDetectorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            spans: None,
            sample_rate: 0.0,
            t0: 0.0,
            started: false,
            buf: VecDeque::new(),
            buf_start: 0,
            seen: 0,
            pending: None,
        })
    }

    pub fn config(&self) -> &PeakDetectorConfig {
        &self.cfg
    }

    /// Samples consumed so far.
    pub fn samples_seen(&self) -> usize {
        self.seen
    }

    /// Time of the next sample the detector expects.
    pub fn next_time(&self) -> Option<f64> {
        self.started
            .then(|| self.t0 + self.seen as f64 / self.sample_rate)
    }

    /// Samples currently retained for look-back.
    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Upper bound on `buffered()` once started.
    pub fn history_cap(&self) -> Option<usize> {
        self.spans.map(|s| s.history())
    }

    /// Start a stream without a first chunk.
    pub fn start(&mut self, sample_rate: f64, t0: f64) {
        self.sample_rate = sample_rate;
        self.t0 = t0;
        self.started = true;
        self.spans = Some(Spans::new(&self.cfg, sample_rate));
    }

    /// Feed the next chunk; returns peaks confirmed by it.
    pub fn push_chunk(&mut self, chunk: &UniformSignal) -> Result<PeakList> {
        if chunk.is_empty() {
            return Ok(PeakList::default());
        }
        if !self.started {
            self.start(chunk.sample_rate, chunk.t0);
        } else {
            if (chunk.sample_rate - self.sample_rate).abs() > 1e-9 * self.sample_rate {
                return Err(Error::SampleRateMismatch {
                    expected: self.sample_rate,
                    got: chunk.sample_rate,
                });
            }
            let expected = self.t0 + self.seen as f64 / self.sample_rate;
            if (chunk.t0 - expected).abs() > 0.5 / self.sample_rate {
                return Err(Error::OutOfOrderChunk {
                    expected,
                    got: chunk.t0,
                });
            }
        }
        let mut out = PeakList::default();
        for &x in &chunk.samples {
            if let Some(p) = self.push_sample(x) {
                out.push(p, self.time_of(p));
            }
        }
        Ok(out)
    }

    /// Feed one sample of a started stream. Returns the index of a peak
    /// confirmed by this sample, if any.
    ///
    /// Panics if the stream has not been started.
    pub fn push_sample(&mut self, x: f64) -> Option<usize> {
        let spans = self.spans.expect("PeakDetector::start must be called first");
        let n = self.seen;
        self.buf.push_back(x);
        self.seen += 1;
        while self.buf.len() > spans.history() {
            self.buf.pop_front();
            self.buf_start += 1;
        }

        if n >= 2 {
            let c = n - 1;
            let (l, m, r) = (self.at(c - 1), self.at(c), self.at(n));
            if m > l && m > r {
                match self.pending {
                    Some(p) if c - p < spans.min_distance => {
                        if m > self.at(p) {
                            self.pending = Some(c);
                        }
                    }
                    _ => self.pending = Some(c),
                }
            }
        }

        match self.pending {
            Some(p) if n >= p + spans.min_distance => {
                self.pending = None;
                self.is_prominent(p, &spans).then_some(p)
            }
            _ => None,
        }
    }

    /// End of stream: resolve the pending peak against the truncated right
    /// context. Batch detection uses this; live sessions never call it.
    pub fn finish(&mut self) -> PeakList {
        let mut out = PeakList::default();
        if let (Some(p), Some(spans)) = (self.pending.take(), self.spans) {
            if self.is_prominent(p, &spans) {
                out.push(p, self.time_of(p));
            }
        }
        out
    }

    pub fn reset(&mut self) {
        *self = Self {
            cfg: self.cfg,
            spans: None,
            sample_rate: 0.0,
            t0: 0.0,
            started: false,
            buf: VecDeque::new(),
            buf_start: 0,
            seen: 0,
            pending: None,
        };
    }

    pub fn time_of(&self, index: usize) -> f64 {
        self.t0 + index as f64 / self.sample_rate
    }

    fn at(&self, index: usize) -> f64 {
        self.buf[index - self.buf_start]
    }

    fn range_min_max(&self, lo: usize, hi: usize) -> (f64, f64) {
        let lo = lo.max(self.buf_start);
        (lo..=hi).fold((f64::INFINITY, f64::NEG_INFINITY), |(mn, mx), i| {
            let v = self.at(i);
            (mn.min(v), mx.max(v))
        })
    }

    fn is_prominent(&self, p: usize, spans: &Spans) -> bool {
        let last = self.seen - 1;
        let right_end = (p + spans.min_distance).min(last);
        let (left_base, _) = self.range_min_max(p.saturating_sub(spans.base), p);
        let (right_base, _) = self.range_min_max(p, right_end);
        let (lo, hi) = self.range_min_max((right_end + 1).saturating_sub(spans.amplitude), right_end);
        let prominence = self.at(p) - left_base.max(right_base);
        let amplitude = hi - lo;
        amplitude > 0.0 && prominence >= self.cfg.prominence_fraction * amplitude
    }
}

/// Offline peak detection over a whole signal.
pub fn detect_peaks(wave: &UniformSignal, cfg: &PeakDetectorConfig) -> Result<PeakList> {
    if wave.is_empty() {
        return Err(Error::EmptySignal);
    }
    let mut det = PeakDetector::new(*cfg)?;
    let mut peaks = det.push_chunk(wave)?;
    peaks.extend(det.finish());
    Ok(peaks)
}

/// Functional form of [`PeakDetector::push_chunk`].
pub fn detect_peaks_streaming(
    mut state: PeakDetector,
    chunk: &UniformSignal,
) -> Result<(PeakDetector, PeakList)> {
    let peaks = state.push_chunk(chunk)?;
    Ok((state, peaks))
}
