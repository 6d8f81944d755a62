//! File formats: traces, pulse waves, interval and peak lists, readings,
//! evaluation reports and corpus directories.
//!
//! Corpus layout: one subdirectory per recording holding `trace.csv` and
//! any of `pulse.csv`, `ground_truth.txt` (three rows: pulse, HR,
//! timestamps in seconds) and `peaks.txt`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::biometrics::{BiometricReading, Estimate};
use crate::error::{Error, Result};
use crate::eval::{CorpusEntry, EvalReport, GroundTruth, Recording};
use crate::extract::{RgbSample, RgbTrace};
use crate::metrics::MetricSet;
use crate::signal::{resample_uniform, Sample, UniformSignal};

pub const TRACE_FILE: &str = "trace.csv";
pub const PULSE_FILE: &str = "pulse.csv";
pub const PEAKS_FILE: &str = "peaks.txt";
pub const IBIS_FILE: &str = "ibis.txt";
pub const READINGS_FILE: &str = "readings.csv";
pub const UBFC_FILE: &str = "ground_truth.txt";

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn csv_rows(path: &Path, header: &[&str]) -> Result<Vec<(usize, Vec<f64>)>> {
    let text = read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let got: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::format(path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if got != header {
        return Err(Error::format(
            path,
            1,
            format!("expected header '{}', got '{}'", header.join(","), got.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::format(path, line, e.to_string()))?;
        let vals = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::format(path, line, format!("not a number: '{f}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, vals));
    }
    Ok(rows)
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let wrap = |e: csv::Error| Error::format(path, 0, e.to_string());
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Rate implied by the median spacing of increasing timestamps.
fn median_rate(times: &[f64]) -> Option<f64> {
    let mut dt: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    if dt.is_empty() {
        return None;
    }
    dt.sort_by(f64::total_cmp);
    let m = dt[dt.len() / 2];
    (m > 0.0).then(|| 1.0 / m)
}

fn check_times(path: &Path, lines: &[usize], times: &[f64]) -> Result<()> {
    if let Some(i) = crate::signal::first_non_increasing(times.iter().copied()) {
        return Err(Error::format(path, lines[i], "timestamps must be strictly increasing"));
    }
    Ok(())
}

/// Trace CSV with header `t_ms,r,g,b`.
pub fn read_trace(path: &Path) -> Result<RgbTrace> {
    let rows = csv_rows(path, &["t_ms", "r", "g", "b"])?;
    if rows.len() < 2 {
        return Err(Error::format(path, rows.len() + 1, "need at least two frames"));
    }
    let lines: Vec<usize> = rows.iter().map(|r| r.0).collect();
    let samples: Vec<RgbSample> = rows
        .iter()
        .map(|(_, v)| RgbSample::new(v[0] / 1000.0, v[1], v[2], v[3]))
        .collect();
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    check_times(path, &lines, &times)?;
    if let Some(i) = samples.iter().position(|s| s.r < 0.0 || s.g < 0.0 || s.b < 0.0) {
        return Err(Error::format(path, lines[i], "negative colour value"));
    }
    let rate = median_rate(&times).expect("two increasing timestamps");
    RgbTrace::new(samples, rate)
}

pub fn write_trace(path: &Path, trace: &RgbTrace) -> Result<()> {
    write_csv(
        path,
        &["t_ms", "r", "g", "b"],
        trace.samples.iter().map(|s| {
            vec![
                (s.t * 1000.0).to_string(),
                s.r.to_string(),
                s.g.to_string(),
                s.b.to_string(),
            ]
        }),
    )
}

/// Pulse CSV with header `t_ms,value`, resampled onto a uniform grid at its
/// median rate.
pub fn read_pulse(path: &Path) -> Result<UniformSignal> {
    let rows = csv_rows(path, &["t_ms", "value"])?;
    if rows.len() < 2 {
        return Err(Error::format(path, rows.len() + 1, "need at least two samples"));
    }
    let lines: Vec<usize> = rows.iter().map(|r| r.0).collect();
    let samples: Vec<Sample> = rows.iter().map(|(_, v)| Sample::new(v[0] / 1000.0, v[1])).collect();
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    check_times(path, &lines, &times)?;
    let rate = median_rate(&times).expect("two increasing timestamps");
    resample_uniform(&samples, rate)
}

pub fn write_pulse(path: &Path, signal: &UniformSignal) -> Result<()> {
    write_csv(
        path,
        &["t_ms", "value"],
        signal
            .samples
            .iter()
            .enumerate()
            .map(|(k, v)| vec![(signal.time_at(k) * 1000.0).to_string(), v.to_string()]),
    )
}

fn read_lines(path: &Path) -> Result<Vec<(usize, f64)>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(|v| (i + 1, v))
                .ok_or_else(|| Error::format(path, i + 1, format!("not a number: '{}'", l.trim())))
        })
        .collect()
}

fn write_lines(path: &Path, values: impl Iterator<Item = String>) -> Result<()> {
    let mut f = std::io::BufWriter::new(create(path)?);
    for v in values {
        writeln!(f, "{v}").map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}

/// Interval file: one integer millisecond value per line. Returns seconds.
pub fn read_ibis_ms(path: &Path) -> Result<Vec<f64>> {
    read_lines(path)?
        .into_iter()
        .map(|(line, v)| {
            if v <= 0.0 {
                Err(Error::format(path, line, "interval must be positive"))
            } else {
                Ok(v / 1000.0)
            }
        })
        .collect()
}

/// Writes intervals given in seconds as rounded milliseconds.
pub fn write_ibis_ms(path: &Path, ibis_s: &[f64]) -> Result<()> {
    write_lines(path, ibis_s.iter().map(|v| format!("{}", (v * 1000.0).round() as i64)))
}

/// Peak file: one time in seconds per line, strictly increasing.
pub fn read_peaks(path: &Path) -> Result<Vec<f64>> {
    let rows = read_lines(path)?;
    let lines: Vec<usize> = rows.iter().map(|r| r.0).collect();
    let times: Vec<f64> = rows.iter().map(|r| r.1).collect();
    check_times(path, &lines, &times)?;
    Ok(times)
}

pub fn write_peaks(path: &Path, times: &[f64]) -> Result<()> {
    write_lines(path, times.iter().map(|t| t.to_string()))
}

/// UBFC-style ground truth: pulse, heart rate and timestamps (seconds) as
/// three whitespace-separated rows. Returns the pulse on a uniform grid.
pub fn read_ubfc_ground_truth(path: &Path) -> Result<UniformSignal> {
    let text = read_text(path)?;
    let rows: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();
    if rows.len() != 3 {
        return Err(Error::format(path, 1, format!("expected 3 rows, found {}", rows.len())));
    }
    let parse = |(line, l): (usize, &str)| -> Result<Vec<f64>> {
        l.split_whitespace()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::format(path, line, format!("not a number: '{f}'")))
            })
            .collect()
    };
    let pulse = parse(rows[0])?;
    let hr = parse(rows[1])?;
    let times = parse(rows[2])?;
    if pulse.len() != times.len() || hr.len() != times.len() {
        return Err(Error::format(
            path,
            rows[2].0,
            format!(
                "row lengths differ: {} pulse, {} hr, {} timestamps",
                pulse.len(),
                hr.len(),
                times.len()
            ),
        ));
    }
    if let Some(i) = crate::signal::first_non_increasing(times.iter().copied()) {
        return Err(Error::format(path, rows[2].0, format!("timestamp {} not increasing", i + 1)));
    }
    let rate = median_rate(&times)
        .ok_or_else(|| Error::format(path, rows[2].0, "need at least two samples"))?;
    let samples: Vec<Sample> = times.iter().zip(&pulse).map(|(&t, &v)| Sample::new(t, v)).collect();
    resample_uniform(&samples, rate)
}

fn cell(e: Estimate) -> String {
    e.value().map(|v| v.to_string()).unwrap_or_default()
}

fn status(r: &BiometricReading) -> String {
    r.status().map_or_else(|| "ok".to_string(), |s| s.to_string())
}

/// Readings CSV: `t_end_s,hr_bpm,sdnn_ms,stress_si,n_ibis,status`. Undefined
/// values are empty cells; `status` names the first undefined reason.
pub fn write_readings(path: &Path, readings: &[BiometricReading]) -> Result<()> {
    write_csv(
        path,
        &["t_end_s", "hr_bpm", "sdnn_ms", "stress_si", "n_ibis", "status"],
        readings.iter().map(|r| {
            vec![
                r.window.1.to_string(),
                cell(r.hr_bpm),
                cell(r.sdnn_ms),
                cell(r.stress_si),
                r.n_ibis.to_string(),
                status(r),
            ]
        }),
    )
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn summary_rows(report: &EvalReport) -> Vec<Vec<String>> {
    [("hr_bpm", report.hr), ("sdnn_ms", report.sdnn), ("stress_si", report.stress)]
        .into_iter()
        .map(|(name, m): (&str, Option<MetricSet>)| match m {
            Some(m) => vec![
                name.to_string(),
                m.n.to_string(),
                m.mae.to_string(),
                opt(m.mape),
                m.rmse.to_string(),
                opt(m.pearson),
            ],
            None => vec![name.to_string(), "0".into(), String::new(), String::new(), String::new(), String::new()],
        })
        .collect()
}

/// Per-recording rows, a blank line, then one summary row per biometric.
pub fn write_report(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_writer(create(path)?);
    let wrap = |e: csv::Error| Error::format(path, 0, e.to_string());
    w.write_record([
        "recording", "status", "hr_pred", "hr_true", "sdnn_pred", "sdnn_true", "stress_pred",
        "stress_true", "error",
    ])
    .map_err(wrap)?;
    for r in &report.results {
        let row = match &r.outcome {
            Ok(s) => vec![
                r.id.clone(),
                "ok".into(),
                cell(s.predicted.hr_bpm),
                cell(s.target.hr_bpm),
                cell(s.predicted.sdnn_ms),
                cell(s.target.sdnn_ms),
                cell(s.predicted.stress_si),
                cell(s.target.stress_si),
                String::new(),
            ],
            Err(e) => {
                let mut v = vec![r.id.clone(), "failed".into()];
                v.extend(std::iter::repeat_n(String::new(), 6));
                v.push(e.clone());
                v
            }
        };
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let mut f = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    writeln!(f).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(f);
    w.write_record(["biometric", "n", "mae", "mape", "rmse", "pearson"])
        .map_err(wrap)?;
    for row in summary_rows(report) {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Human-readable summary table.
pub fn format_summary(report: &EvalReport) -> String {
    let mut s = format!(
        "{} recordings, {} failed ({} / {} protocol)\n{:<10} {:>4} {:>10} {:>9} {:>10} {:>8}\n",
        report.results.len(),
        report.failures(),
        report.extractor,
        report.protocol,
        "biometric",
        "n",
        "mae",
        "mape%",
        "rmse",
        "pearson"
    );
    let num = |v: Option<f64>, p: usize| v.map_or_else(|| "-".to_string(), |x| format!("{x:.p$}"));
    for row in [("hr_bpm", report.hr), ("sdnn_ms", report.sdnn), ("stress_si", report.stress)] {
        let (name, m) = row;
        match m {
            Some(m) => s.push_str(&format!(
                "{:<10} {:>4} {:>10.3} {:>9} {:>10.3} {:>8}\n",
                name,
                m.n,
                m.mae,
                num(m.mape, 2),
                m.rmse,
                num(m.pearson, 3)
            )),
            None => s.push_str(&format!("{name:<10} {:>4}\n", 0)),
        }
    }
    s
}

fn load_recording(dir: &Path, id: &str) -> Result<Recording> {
    let trace = read_trace(&dir.join(TRACE_FILE))?;
    let pulse_csv = dir.join(PULSE_FILE);
    let ubfc = dir.join(UBFC_FILE);
    let pulse = if pulse_csv.is_file() {
        Some(read_pulse(&pulse_csv)?)
    } else if ubfc.is_file() {
        Some(read_ubfc_ground_truth(&ubfc)?)
    } else {
        None
    };
    let peaks_file = dir.join(PEAKS_FILE);
    let verified_peaks = if peaks_file.is_file() {
        Some(read_peaks(&peaks_file)?)
    } else {
        None
    };
    Ok(Recording {
        id: id.to_string(),
        trace,
        truth: GroundTruth {
            pulse,
            verified_peaks,
        },
    })
}

/// Every subdirectory of `dir` that contains a trace, sorted by name.
/// Recordings that fail to load are returned as `Unreadable`.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusEntry>> {
    let mut subdirs: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir() && p.join(TRACE_FILE).exists())
        .collect();
    subdirs.sort();
    Ok(subdirs
        .into_iter()
        .map(|p| {
            let id = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            match load_recording(&p, &id) {
                Ok(r) => CorpusEntry::Loaded(r),
                Err(e) => CorpusEntry::Unreadable {
                    id,
                    error: e.to_string(),
                },
            }
        })
        .collect())
}
