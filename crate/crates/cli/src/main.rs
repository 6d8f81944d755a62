//! `pulselab` command-line tool.
//!
//! Exit codes: 0 success, 1 unreadable or malformed input, 2 invalid
//! arguments or violated preconditions, 3 internal failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pulselab::biometrics::BiometricReading;
use pulselab::eval::{evaluate_corpus, EvalConfig, GroundTruthProtocol};
use pulselab::extract::{extract, ExtractorId, DEFAULT_WINDOW_S};
use pulselab::ibi::{peaks_to_ibis, IbiSeries};
use pulselab::io;
use pulselab::monitor::{windowed_readings, MonitorConfig, MonitorSession, WindowSchedule};
use pulselab::peaks::{detect_peaks, PeakDetectorConfig};
use pulselab::signal::BandpassSpec;
use pulselab::synth::{synth_trace, IbiModel, SynthSpec};
use pulselab::Error;

#[derive(Parser)]
#[command(name = "pulselab", version, about = "Camera-based pulse, HRV and stress estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic RGB trace with known beats
    Synth(SynthArgs),
    /// Extract a pulse wave from an RGB trace
    Extract(ExtractArgs),
    /// Windowed readings from a pulse wave or an interval file
    Analyze(AnalyzeArgs),
    /// Replay a trace through a live monitoring session
    Monitor(MonitorArgs),
    /// Evaluate an extractor on a corpus of recordings
    Eval(EvalArgs),
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected two comma-separated numbers, got '{s}'"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}"));
    Ok((num(a)?, num(b)?))
}

fn parse_extractor(s: &str) -> Result<ExtractorId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_protocol(s: &str) -> Result<GroundTruthProtocol, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args)]
struct SynthArgs {
    /// Recording length, seconds
    #[arg(long)]
    duration: f64,
    /// Frame rate, Hz
    #[arg(long)]
    fps: f64,
    /// Base heart rate, bpm
    #[arg(long)]
    hr: f64,
    /// Interval standard deviation, ms; 0 gives a fixed rhythm
    #[arg(long, default_value_t = 0.0)]
    sdnn: f64,
    /// Per-channel noise standard deviation, 0-255 intensity units
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Illumination drift as AMPLITUDE,HZ
    #[arg(long, value_parser = parse_pair, value_name = "AMP,HZ")]
    drift: Option<(f64, f64)>,
    /// Fractional pulse modulation of the skin colour
    #[arg(long, default_value_t = 0.01)]
    amplitude: f64,
    #[arg(long)]
    seed: u64,
    /// Output trace CSV
    #[arg(short, long)]
    output: PathBuf,
    /// Directory for pulse.csv, ibis.txt, peaks.txt and readings.csv
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long, value_parser = parse_extractor, default_value = "pos")]
    algo: ExtractorId,
    /// Input trace CSV (t_ms,r,g,b)
    #[arg(long)]
    input: PathBuf,
    /// Passband as LOW,HIGH in Hz
    #[arg(long, value_parser = parse_pair, value_name = "LO,HI")]
    band: Option<(f64, f64)>,
    /// Output rate, Hz; defaults to the trace's frame rate
    #[arg(long)]
    rate: Option<f64>,
    /// Projection window for chrom and pos, seconds
    #[arg(long, default_value_t = DEFAULT_WINDOW_S)]
    window: f64,
    /// Output pulse CSV (t_ms,value)
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct ScheduleArgs {
    /// Longest reading window, seconds
    #[arg(long, default_value_t = 60.0)]
    window: f64,
    /// Data needed before the first reading, seconds
    #[arg(long = "min-window", default_value_t = 10.0)]
    min_window: f64,
    /// Time between readings, seconds
    #[arg(long, default_value_t = 1.0)]
    step: f64,
}

impl ScheduleArgs {
    fn schedule(&self) -> WindowSchedule {
        WindowSchedule {
            window_s: self.window,
            min_window_s: self.min_window,
            update_period_s: self.step,
        }
    }
}

#[derive(Args)]
#[group(id = "source", required = true, multiple = false, args = ["pulse", "ibis"])]
struct AnalyzeArgs {
    /// Pulse wave CSV (t_ms,value)
    #[arg(long)]
    pulse: Option<PathBuf>,
    /// Interval file, integer milliseconds per line
    #[arg(long)]
    ibis: Option<PathBuf>,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Output readings CSV
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct MonitorArgs {
    #[arg(long, value_parser = parse_extractor, default_value = "pos")]
    algo: ExtractorId,
    /// Input trace CSV (t_ms,r,g,b)
    #[arg(long)]
    input: PathBuf,
    /// Passband as LOW,HIGH in Hz
    #[arg(long, value_parser = parse_pair, value_name = "LO,HI")]
    band: Option<(f64, f64)>,
    /// Processing rate, Hz; defaults to the trace's frame rate
    #[arg(long)]
    rate: Option<f64>,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Print per-frame processing time
    #[arg(long)]
    timing: bool,
    /// Output readings CSV
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory with one subdirectory per recording
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_parser = parse_extractor, default_value = "pos")]
    algo: ExtractorId,
    /// Reference protocol: peaks, fft or verified
    #[arg(long, value_parser = parse_protocol, default_value = "peaks")]
    protocol: GroundTruthProtocol,
    /// Passband for the prediction side, LOW,HIGH in Hz
    #[arg(long, value_parser = parse_pair, value_name = "LO,HI")]
    band: Option<(f64, f64)>,
    /// Output report CSV
    #[arg(short, long)]
    output: PathBuf,
}

/// Failure of a command, carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_input_error() { 1 } else { 2 },
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn band_from(pair: Option<(f64, f64)>) -> BandpassSpec {
    pair.map_or(BandpassSpec::OPERATING, |(lo, hi)| BandpassSpec::new(lo, hi))
}

fn synth(a: SynthArgs) -> CmdResult {
    let (drift_amplitude, drift_hz) = a.drift.unwrap_or((0.0, SynthSpec::default().drift_hz));
    let spec = SynthSpec {
        duration_s: a.duration,
        fps: a.fps,
        base_hr_bpm: a.hr,
        hrv_sdnn_ms: a.sdnn,
        ibi_model: if a.sdnn > 0.0 { IbiModel::Jittered } else { IbiModel::Fixed },
        amplitude: a.amplitude,
        noise_std: a.noise,
        drift_amplitude,
        drift_hz,
        seed: a.seed,
        ..SynthSpec::default()
    };
    let out = synth_trace(&spec)?;
    io::write_trace(&a.output, &out.trace)?;
    if let Some(dir) = &a.truth {
        io::write_pulse(&dir.join(io::PULSE_FILE), &out.truth.pulse)?;
        io::write_ibis_ms(&dir.join(io::IBIS_FILE), &out.truth.ibis.intervals())?;
        io::write_peaks(&dir.join(io::PEAKS_FILE), &out.truth.beats)?;
        io::write_readings(
            &dir.join(io::READINGS_FILE),
            &out.truth.readings(&WindowSchedule::default()),
        )?;
    }
    let hr = out.truth.overall.hr_bpm.value().unwrap_or(f64::NAN);
    println!(
        "wrote {} frames to {} ({} beats, mean {:.1} bpm)",
        out.trace.len(),
        a.output.display(),
        out.truth.beats.len(),
        hr
    );
    Ok(())
}

fn extract_cmd(a: ExtractArgs) -> CmdResult {
    let band = band_from(a.band);
    let trace = io::read_trace(&a.input)?;
    let rate = a.rate.unwrap_or(trace.nominal_rate);
    band.validate(rate)?;
    let wave = extract(a.algo, &trace, rate, &band, a.window)?;
    io::write_pulse(&a.output, &wave.signal)?;
    println!(
        "{}: {} samples at {:.3} Hz to {}",
        a.algo,
        wave.signal.len(),
        rate,
        a.output.display()
    );
    Ok(())
}

fn write_readings(path: &Path, readings: &[BiometricReading]) -> CmdResult {
    io::write_readings(path, readings)?;
    println!("{} readings to {}", readings.len(), path.display());
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> CmdResult {
    let schedule = a.schedule.schedule();
    schedule.validate()?;
    let (series, start, end) = if let Some(p) = &a.pulse {
        let wave = io::read_pulse(p)?;
        let peaks = detect_peaks(&wave, &PeakDetectorConfig::default())?;
        (peaks_to_ibis(&peaks), wave.t0, wave.t0 + wave.duration())
    } else {
        let path = a.ibis.as_ref().expect("clap enforces one source");
        let ibis = io::read_ibis_ms(path)?;
        let series = IbiSeries::from_intervals(0.0, &ibis);
        let end = series.entries.last().map_or(0.0, |e| e.t_end);
        (series, 0.0, end)
    };
    write_readings(&a.output, &windowed_readings(&series, start, end, &schedule))
}

fn monitor(a: MonitorArgs) -> CmdResult {
    let trace = io::read_trace(&a.input)?;
    let s = a.schedule.schedule();
    let config = MonitorConfig {
        extractor: a.algo,
        nominal_rate: a.rate.unwrap_or(trace.nominal_rate),
        window_s: s.window_s,
        min_window_s: s.min_window_s,
        update_period_s: s.update_period_s,
        band: band_from(a.band),
        ..MonitorConfig::default()
    };
    let mut session = MonitorSession::new(config)?;
    let readings = session.push_frames(&trace.samples)?;
    write_readings(&a.output, &readings)?;
    if a.timing {
        let t = session.per_frame_budget_check()?;
        println!(
            "per frame: mean {:.1} us, p95 {:.1} us over {} frames",
            t.mean_s * 1e6,
            t.p95_s * 1e6,
            t.frames
        );
    }
    Ok(())
}

fn eval(a: EvalArgs) -> CmdResult {
    let corpus = io::load_corpus(&a.corpus)?;
    if corpus.is_empty() {
        return Err(Failure {
            code: 2,
            message: format!("no recordings under {}", a.corpus.display()),
        });
    }
    let config = EvalConfig {
        band: band_from(a.band),
        ..EvalConfig::default()
    };
    let report = evaluate_corpus(&corpus, a.algo, a.protocol, &config)?;
    io::write_report(&a.output, &report)?;
    print!("{}", io::format_summary(&report));
    for r in &report.results {
        if let Err(e) = &r.outcome {
            eprintln!("{}: {e}", r.id);
        }
    }
    if report.successes() == 0 {
        return Err(Failure {
            code: 1,
            message: "no recording could be evaluated".into(),
        });
    }
    Ok(())
}

fn configure_threads() -> CmdResult {
    let Ok(v) = std::env::var("PULSELAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| Failure {
        code: 2,
        message: format!("PULSELAB_THREADS must be a positive integer, got '{v}'"),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure {
            code: 3,
            message: e.to_string(),
        })
}

fn run(cli: Cli) -> CmdResult {
    configure_threads()?;
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Extract(a) => extract_cmd(a),
        Command::Analyze(a) => analyze(a),
        Command::Monitor(a) => monitor(a),
        Command::Eval(a) => eval(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(3),
    }
}
