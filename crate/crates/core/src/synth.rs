//! Synthetic RGB traces with a known beat sequence.
//!
//! Beats are Gaussian bumps in blood volume. Each channel dips by a fixed
//! fraction of its baseline when blood volume rises, in proportions typical
//! of skin: green most, red least. Drift and noise are added in intensity
//! units on a 0-255 scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::biometrics::{is_valid_ibi, BiometricReading, MAX_HR_BPM, MAX_IBI_S, MIN_HR_BPM, MIN_IBI_S};
use crate::error::{Error, Result};
use crate::extract::{RgbSample, RgbTrace};
use crate::ibi::IbiSeries;
use crate::monitor::{windowed_readings, WindowSchedule};
use crate::signal::UniformSignal;

/// Relative reflectance change per unit blood volume, red/green/blue.
pub const PULSE_SIGNATURE: [f64; 3] = [-0.33, -0.77, -0.53];
pub const DEFAULT_SKIN_TONE: [f64; 3] = [170.0, 120.0, 100.0];
/// Time of the first beat.
pub const FIRST_BEAT_S: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub enum IbiModel {
    Fixed,
    /// Normal around the base interval with spread `hrv_sdnn_ms`, truncated to
    /// the valid band.
    Jittered,
    /// Explicit intervals in seconds, used in order until the recording ends.
    Supplied(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub duration_s: f64,
    pub fps: f64,
    pub base_hr_bpm: f64,
    pub hrv_sdnn_ms: f64,
    pub ibi_model: IbiModel,
    /// Standard deviation of each Gaussian beat at 60 bpm, seconds. Scaled
    /// by the base interval so the pulse keeps its duty cycle at any rate.
    pub pulse_width_s: f64,
    /// Peak fractional modulation of the baseline.
    pub amplitude: f64,
    pub noise_std: f64,
    pub drift_amplitude: f64,
    pub drift_hz: f64,
    pub skin_tone: [f64; 3],
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            fps: 30.0,
            base_hr_bpm: 72.0,
            hrv_sdnn_ms: 0.0,
            ibi_model: IbiModel::Fixed,
            pulse_width_s: 0.12,
            amplitude: 0.01,
            noise_std: 0.0,
            drift_amplitude: 0.0,
            drift_hz: 0.05,
            skin_tone: DEFAULT_SKIN_TONE,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration_s));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        if !(MIN_HR_BPM..=MAX_HR_BPM).contains(&self.base_hr_bpm) {
            return bad(format!(
                "heart rate {} outside {MIN_HR_BPM}-{MAX_HR_BPM} bpm",
                self.base_hr_bpm
            ));
        }
        if !(self.hrv_sdnn_ms >= 0.0 && self.hrv_sdnn_ms.is_finite()) {
            return bad(format!("sdnn must be non-negative, got {}", self.hrv_sdnn_ms));
        }
        if !(self.pulse_width_s > 0.0) {
            return bad(format!("pulse width must be positive, got {}", self.pulse_width_s));
        }
        if !(0.0..1.0).contains(&self.amplitude) {
            return bad(format!("amplitude must be in [0, 1), got {}", self.amplitude));
        }
        if !(self.noise_std >= 0.0 && self.drift_amplitude >= 0.0 && self.drift_hz >= 0.0) {
            return bad("noise and drift must be non-negative".into());
        }
        if self.skin_tone.iter().any(|c| !(*c > 0.0)) {
            return bad("skin tone channels must be positive".into());
        }
        if let IbiModel::Supplied(v) = &self.ibi_model {
            if v.is_empty() {
                return bad("supplied interval list is empty".into());
            }
            if let Some(x) = v.iter().find(|x| !is_valid_ibi(**x)) {
                return bad(format!("supplied interval {x} s outside the valid band"));
            }
        }
        Ok(())
    }

    /// Number of frames, one every `1 / fps` from t = 0.
    pub fn frame_count(&self) -> usize {
        (self.duration_s * self.fps).round() as usize
    }
}

/// Embedded ground truth of a synthetic recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTruth {
    /// Beat times, seconds.
    pub beats: Vec<f64>,
    pub ibis: IbiSeries,
    /// Blood-volume signal sampled on the frame grid.
    pub pulse: UniformSignal,
    /// Biometrics over every embedded interval.
    pub overall: BiometricReading,
}

impl SynthTruth {
    /// Readings on the same schedule a live session would use.
    pub fn readings(&self, schedule: &WindowSchedule) -> Vec<BiometricReading> {
        windowed_readings(&self.ibis, 0.0, self.pulse.duration(), schedule)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub trace: RgbTrace,
    pub truth: SynthTruth,
}

/// Intervals covering the recording: beats start at `FIRST_BEAT_S` and
/// continue while they fall inside the duration.
pub fn synth_ibis(spec: &SynthSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let mean = 60.0 / spec.base_hr_bpm;
    let span = spec.duration_s - FIRST_BEAT_S;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(mean, spec.hrv_sdnn_ms / 1000.0)
        .map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let mut draw = |k: usize| -> f64 {
        match &spec.ibi_model {
            IbiModel::Fixed => mean,
            IbiModel::Jittered => loop {
                let x = normal.sample(&mut rng);
                if (MIN_IBI_S..=MAX_IBI_S).contains(&x) {
                    break x;
                }
            },
            IbiModel::Supplied(v) => v[k % v.len()],
        }
    };
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        let ibi = draw(out.len());
        if t + ibi > span {
            break;
        }
        if let IbiModel::Supplied(v) = &spec.ibi_model {
            if out.len() == v.len() {
                break;
            }
        }
        t += ibi;
        out.push(ibi);
    }
    Ok(out)
}

pub fn synth_trace(spec: &SynthSpec) -> Result<SynthOutput> {
    let ibis = synth_ibis(spec)?;
    let mut beats = Vec::with_capacity(ibis.len() + 1);
    let mut t = FIRST_BEAT_S;
    beats.push(t);
    for ibi in &ibis {
        t += ibi;
        beats.push(t);
    }

    let n = spec.frame_count();
    let sigma = spec.pulse_width_s * 60.0 / spec.base_hr_bpm;
    let reach = 6.0 * sigma;
    let mut pulse = Vec::with_capacity(n);
    let mut first = 0;
    for k in 0..n {
        let t = k as f64 / spec.fps;
        while first < beats.len() && beats[first] < t - reach {
            first += 1;
        }
        let v: f64 = beats[first..]
            .iter()
            .take_while(|&&b| b <= t + reach)
            .map(|&b| (-(t - b).powi(2) / (2.0 * sigma * sigma)).exp())
            .sum();
        pulse.push(v);
    }

    // separate stream so the noise does not shift with the beat draws
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let drift_phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let samples = pulse
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let t = k as f64 / spec.fps;
            let drift = spec.drift_amplitude
                * (std::f64::consts::TAU * spec.drift_hz * t + drift_phase).sin();
            let mut c = [0.0; 3];
            for (i, v) in c.iter_mut().enumerate() {
                let base = spec.skin_tone[i];
                let x = base * (1.0 + spec.amplitude * PULSE_SIGNATURE[i] * p)
                    + drift
                    + noise.sample(&mut rng);
                *v = x.max(0.0);
            }
            RgbSample::new(t, c[0], c[1], c[2])
        })
        .collect();

    let series = IbiSeries::from_intervals(FIRST_BEAT_S, &ibis);
    let overall = BiometricReading::from_ibis((0.0, spec.duration_s), &ibis);
    Ok(SynthOutput {
        trace: RgbTrace::new(samples, spec.fps)?,
        truth: SynthTruth {
            beats,
            ibis: series,
            pulse: UniformSignal::new(pulse, spec.fps, 0.0),
            overall,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(hr: f64) -> SynthSpec {
        SynthSpec {
            base_hr_bpm: hr,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn fixed_intervals() {
        let ibis = synth_ibis(&spec(60.0)).unwrap();
        assert!(ibis.iter().all(|&x| x == 1.0));
        // beats at 0.3, 1.3, ..., 59.3
        assert_eq!(ibis.len(), 59);
    }

    #[test]
    fn jittered_spread() {
        let s = SynthSpec {
            duration_s: 1001.0,
            base_hr_bpm: 60.0,
            hrv_sdnn_ms: 50.0,
            ibi_model: IbiModel::Jittered,
            seed: 11,
            ..SynthSpec::default()
        };
        let ibis = synth_ibis(&s).unwrap();
        assert!(ibis.len() >= 990);
        let ibis = &ibis[..990.min(ibis.len())];
        let m = ibis.iter().sum::<f64>() / ibis.len() as f64;
        let sd = (ibis.iter().map(|x| (x - m).powi(2)).sum::<f64>() / ibis.len() as f64).sqrt();
        assert!((sd * 1000.0 - 50.0).abs() <= 5.0, "sd {sd}");
        assert!(ibis.iter().all(|&x| is_valid_ibi(x)));
    }

    #[test]
    fn rejects_out_of_band_rate() {
        assert!(matches!(synth_ibis(&spec(300.0)), Err(Error::InvalidSpec(_))));
        assert!(matches!(synth_trace(&spec(20.0)), Err(Error::InvalidSpec(_))));
        let bad = SynthSpec {
            ibi_model: IbiModel::Supplied(vec![0.8, 0.1]),
            ..SynthSpec::default()
        };
        assert!(synth_ibis(&bad).is_err());
    }

    #[test]
    fn supplied_sequence_used_in_order() {
        let s = SynthSpec {
            ibi_model: IbiModel::Supplied(vec![0.8, 0.9, 1.0]),
            ..SynthSpec::default()
        };
        assert_eq!(synth_ibis(&s).unwrap(), vec![0.8, 0.9, 1.0]);
    }

    #[test]
    fn frame_grid_and_truth() {
        let s = SynthSpec {
            duration_s: 300.0,
            ..spec(72.0)
        };
        let out = synth_trace(&s).unwrap();
        assert_eq!(out.trace.len(), 9000);
        assert_eq!(out.truth.beats.len(), out.truth.ibis.len() + 1);
        let hr = out.truth.overall.hr_bpm.value().unwrap();
        assert!((hr - 72.0).abs() < 1e-9);
        // every channel dips at a beat
        let k = (out.truth.beats[3] * 30.0).round() as usize;
        let px = out.trace.samples[k];
        assert!(px.g < DEFAULT_SKIN_TONE[1] && px.r < DEFAULT_SKIN_TONE[0]);
        assert!(out.truth.pulse.samples[k] > 0.9);
    }

    #[test]
    fn deterministic_under_seed() {
        let s = SynthSpec {
            noise_std: 0.5,
            drift_amplitude: 1.0,
            hrv_sdnn_ms: 40.0,
            ibi_model: IbiModel::Jittered,
            seed: 7,
            ..SynthSpec::default()
        };
        assert_eq!(synth_trace(&s).unwrap(), synth_trace(&s).unwrap());
        let other = SynthSpec { seed: 8, ..s.clone() };
        assert_ne!(synth_trace(&s).unwrap().trace, synth_trace(&other).unwrap().trace);
    }

    #[test]
    fn noise_does_not_move_beats() {
        let a = SynthSpec {
            hrv_sdnn_ms: 40.0,
            ibi_model: IbiModel::Jittered,
            seed: 3,
            ..SynthSpec::default()
        };
        let b = SynthSpec { noise_std: 2.0, ..a.clone() };
        assert_eq!(synth_trace(&a).unwrap().truth, synth_trace(&b).unwrap().truth);
    }
}
