//! Live monitoring session: frames in, windowed biometric readings out.
//!
//! Each frame is resampled onto the session grid, pushed through a streaming
//! extractor and the incremental peak detector, and confirmed peaks become
//! intervals. Readings start once `min_window_s` of data exists, cover all
//! data up to `window_s`, and slide after that.

use std::collections::VecDeque;
use std::time::Instant;

use crate::biometrics::{BiometricReading, MIN_IBI_S};
use crate::error::{Error, Result};
use crate::extract::{ExtractorId, RgbSample, RgbTrace, StreamingExtractor, DEFAULT_WINDOW_S};
use crate::ibi::{correct_ibis, IbiEntry, IbiSeries};
use crate::peaks::{PeakDetector, PeakDetectorConfig};
use crate::signal::BandpassSpec;

/// Slack for comparing frame times against schedule boundaries.
const TIME_EPS: f64 = 1e-9;
const TIMING_RING: usize = 4096;
/// Frames needed before timing statistics are reported.
pub const MIN_TIMED_FRAMES: usize = 1000;
/// Confirmed peak times kept for `drain_peaks`; older ones are dropped.
pub const PEAK_BUFFER: usize = 1024;

/// When readings are produced and what they cover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSchedule {
    pub window_s: f64,
    pub min_window_s: f64,
    pub update_period_s: f64,
}

impl Default for WindowSchedule {
    fn default() -> Self {
        Self {
            window_s: 60.0,
            min_window_s: 10.0,
            update_period_s: 1.0,
        }
    }
}

impl WindowSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_window_s > 0.0 && self.min_window_s <= self.window_s) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < min window ({}) <= window ({})",
                self.min_window_s, self.window_s
            )));
        }
        if !(self.update_period_s > 0.0 && self.update_period_s.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "update period must be positive, got {}",
                self.update_period_s
            )));
        }
        Ok(())
    }

    /// Window covered by a reading at `t` for a stream that began at `start`.
    pub fn window_at(&self, start: f64, t: f64) -> (f64, f64) {
        (start.max(t - self.window_s), t)
    }
}

/// Reading over the corrected intervals closing inside `[lo, hi]`.
pub fn reading_over(series: &IbiSeries, lo: f64, hi: f64) -> BiometricReading {
    let ibis = correct_ibis(&series.slice_time(lo, hi)).valid_ibis();
    BiometricReading::from_ibis((lo, hi), &ibis)
}

/// Readings at `start + min_window_s`, then every `update_period_s` up to
/// `end`.
pub fn windowed_readings(
    series: &IbiSeries,
    start: f64,
    end: f64,
    schedule: &WindowSchedule,
) -> Vec<BiometricReading> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t = start + schedule.min_window_s + k as f64 * schedule.update_period_s;
        if t > end + TIME_EPS {
            break;
        }
        let (lo, hi) = schedule.window_at(start, t);
        out.push(reading_over(series, lo, hi));
        k += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorConfig {
    pub extractor: ExtractorId,
    /// Rate of the internal processing grid.
    pub nominal_rate: f64,
    pub window_s: f64,
    pub min_window_s: f64,
    pub update_period_s: f64,
    pub band: BandpassSpec,
    pub detector: PeakDetectorConfig,
    /// CHROM/POS projection window.
    pub extractor_window_s: f64,
    /// A pause longer than this restarts the session.
    pub gap_reset_s: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        let s = WindowSchedule::default();
        Self {
            extractor: ExtractorId::Pos,
            nominal_rate: 30.0,
            window_s: s.window_s,
            min_window_s: s.min_window_s,
            update_period_s: s.update_period_s,
            band: BandpassSpec::OPERATING,
            detector: PeakDetectorConfig::default(),
            extractor_window_s: DEFAULT_WINDOW_S,
            gap_reset_s: 2.0,
        }
    }
}

impl MonitorConfig {
    pub fn schedule(&self) -> WindowSchedule {
        WindowSchedule {
            window_s: self.window_s,
            min_window_s: self.min_window_s,
            update_period_s: self.update_period_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule().validate()?;
        self.band.validate(self.nominal_rate)?;
        self.detector.validate()?;
        if !(self.gap_reset_s > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gap reset must be positive, got {}",
                self.gap_reset_s
            )));
        }
        if !(self.extractor_window_s > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "extractor window must be positive, got {}",
                self.extractor_window_s
            )));
        }
        Ok(())
    }
}

/// Wall-time statistics of `push_frame`, seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTiming {
    pub frames: usize,
    pub mean_s: f64,
    pub p95_s: f64,
}

#[derive(Debug, Clone)]
pub struct MonitorSession {
    config: MonitorConfig,
    extractor: StreamingExtractor,
    detector: PeakDetector,
    start: Option<f64>,
    last_frame: Option<(f64, [f64; 3])>,
    next_grid: usize,
    scratch: Vec<f64>,
    last_peak: Option<f64>,
    ibis: VecDeque<IbiEntry>,
    last_emission: Option<f64>,
    new_peaks: VecDeque<f64>,
    timings: VecDeque<f64>,
    frames_timed: usize,
}

impl MonitorSession {
    pub fn new(config: MonitorConfig) -> Result<Self> {
        config.validate()?;
        let extractor = StreamingExtractor::new(
            config.extractor,
            config.nominal_rate,
            &config.band,
            config.extractor_window_s,
        )?;
        let detector = PeakDetector::new(config.detector)?;
        Ok(Self {
            config,
            extractor,
            detector,
            start: None,
            last_frame: None,
            next_grid: 0,
            scratch: Vec::new(),
            last_peak: None,
            ibis: VecDeque::new(),
            last_emission: None,
            new_peaks: VecDeque::new(),
            timings: VecDeque::with_capacity(TIMING_RING),
            frames_timed: 0,
        })
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    /// Start of the current stream, if any frame has arrived since the
    /// last reset.
    pub fn stream_start(&self) -> Option<f64> {
        self.start
    }

    /// Ingest one frame; returns a reading when one is due.
    pub fn push_frame(&mut self, t: f64, r: f64, g: f64, b: f64) -> Result<Option<BiometricReading>> {
        let clock = Instant::now();
        let out = self.ingest(t, [r, g, b]);
        self.record_time(clock.elapsed().as_secs_f64());
        out
    }

    pub fn push_frames(&mut self, frames: &[RgbSample]) -> Result<Vec<BiometricReading>> {
        let mut out = Vec::new();
        for f in frames {
            if let Some(r) = self.push_frame(f.t, f.r, f.g, f.b)? {
                out.push(r);
            }
        }
        Ok(out)
    }

    /// Peak times confirmed since the last call.
    pub fn drain_peaks(&mut self) -> Vec<f64> {
        self.new_peaks.drain(..).collect()
    }

    /// Intervals currently held for the reading window.
    pub fn ibis(&self) -> IbiSeries {
        IbiSeries {
            entries: self.ibis.iter().copied().collect(),
        }
    }

    /// Values currently retained across all internal buffers.
    pub fn buffered_values(&self) -> usize {
        self.extractor.buffered()
            + self.detector.buffered()
            + self.ibis.len()
            + self.new_peaks.len()
            + self.timings.len()
    }

    /// Bound on `buffered_values`, independent of stream length.
    pub fn buffered_cap(&self) -> usize {
        let fs = self.config.nominal_rate;
        let win = crate::extract::window_samples(self.config.extractor_window_s, fs);
        let green = (crate::extract::GREEN_DETREND_S * fs).round() as usize + 1;
        let detector = self.detector.history_cap().unwrap_or(0);
        let ibis = (self.config.window_s / MIN_IBI_S).ceil() as usize + 2;
        2 * win.max(green) + detector + ibis + PEAK_BUFFER + TIMING_RING
    }

    pub fn per_frame_budget_check(&self) -> Result<FrameTiming> {
        if self.frames_timed < MIN_TIMED_FRAMES {
            return Err(Error::InsufficientSamples {
                needed: MIN_TIMED_FRAMES,
                got: self.frames_timed,
            });
        }
        let mut v: Vec<f64> = self.timings.iter().copied().collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.sort_by(f64::total_cmp);
        let idx = ((0.95 * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
        Ok(FrameTiming {
            frames: self.frames_timed,
            mean_s: mean,
            p95_s: v[idx],
        })
    }

    /// Drop all stream state; the next frame starts a new warm-up.
    pub fn reset(&mut self) {
        self.extractor.reset();
        self.detector.reset();
        self.start = None;
        self.last_frame = None;
        self.next_grid = 0;
        self.last_peak = None;
        self.ibis.clear();
        self.last_emission = None;
    }

    fn record_time(&mut self, secs: f64) {
        if self.timings.len() == TIMING_RING {
            self.timings.pop_front();
        }
        self.timings.push_back(secs);
        self.frames_timed += 1;
    }

    fn ingest(&mut self, t: f64, rgb: [f64; 3]) -> Result<Option<BiometricReading>> {
        if let Some((prev, _)) = self.last_frame {
            if !(t > prev) {
                return Err(Error::NonMonotonicTimestamp { previous: prev, got: t });
            }
            if t - prev > self.config.gap_reset_s {
                self.reset();
            }
        } else if !t.is_finite() {
            return Err(Error::NonMonotonicTimestamp {
                previous: f64::NEG_INFINITY,
                got: t,
            });
        }
        let start = match self.start {
            Some(s) => s,
            None => {
                self.start = Some(t);
                self.detector.start(self.config.nominal_rate, t);
                t
            }
        };

        let fs = self.config.nominal_rate;
        loop {
            let g = start + self.next_grid as f64 / fs;
            if g > t + TIME_EPS / fs {
                break;
            }
            let px = match self.last_frame {
                Some((tp, prev)) => {
                    let w = ((g - tp) / (t - tp)).clamp(0.0, 1.0);
                    [
                        prev[0] + (rgb[0] - prev[0]) * w,
                        prev[1] + (rgb[1] - prev[1]) * w,
                        prev[2] + (rgb[2] - prev[2]) * w,
                    ]
                }
                None => rgb,
            };
            self.next_grid += 1;
            self.scratch.clear();
            self.extractor.push(px, &mut self.scratch);
            for i in 0..self.scratch.len() {
                if let Some(p) = self.detector.push_sample(self.scratch[i]) {
                    self.on_peak(self.detector.time_of(p));
                }
            }
        }
        self.last_frame = Some((t, rgb));

        let horizon = t - self.config.window_s - TIME_EPS;
        while self.ibis.front().is_some_and(|e| e.t_end < horizon) {
            self.ibis.pop_front();
        }

        let due = t - start >= self.config.min_window_s - TIME_EPS
            && self
                .last_emission
                .is_none_or(|le| t - le >= self.config.update_period_s - TIME_EPS);
        if !due {
            return Ok(None);
        }
        self.last_emission = Some(t);
        let (lo, hi) = self.config.schedule().window_at(start, t);
        Ok(Some(reading_over(&self.ibis(), lo, hi)))
    }

    fn on_peak(&mut self, time: f64) {
        if let Some(prev) = self.last_peak {
            self.ibis.push_back(IbiEntry::new(time, time - prev));
        }
        self.last_peak = Some(time);
        if self.new_peaks.len() == PEAK_BUFFER {
            self.new_peaks.pop_front();
        }
        self.new_peaks.push_back(time);
    }
}

/// Replay a whole recording through a fresh session.
pub fn process_recording(trace: &RgbTrace, config: &MonitorConfig) -> Result<Vec<BiometricReading>> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    MonitorSession::new(config.clone())?.push_frames(&trace.samples)
}
