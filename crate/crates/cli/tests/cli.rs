use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pulselab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pulselab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth_into(dir: &Path, hr: &str, seed: &str, extra: &[&str]) {
    let trace = dir.join("trace.csv");
    let mut args = vec![
        "synth", "--duration", "60", "--fps", "30", "--hr", hr, "--seed", seed, "-o", s(&trace),
        "--truth", s(dir),
    ];
    args.extend_from_slice(extra);
    let out = pulselab(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_writes_one_row_per_frame() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.csv");
    let out = pulselab(&["synth", "--duration", "300", "--fps", "30", "--hr", "72", "--seed", "7", "-o", s(&t)]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(&t).unwrap();
    assert_eq!(text.lines().count(), 9001);
    assert!(text.starts_with("t_ms,r,g,b\n"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("9000 frames"));

    let again = dir.path().join("u.csv");
    pulselab(&["synth", "--duration", "300", "--fps", "30", "--hr", "72", "--seed", "7", "-o", s(&again)]);
    assert_eq!(fs::read(&t).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn synth_argument_errors() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.csv");
    assert_eq!(code(&pulselab(&["synth", "--duration", "10", "--fps", "30", "--hr", "72", "--seed", "1"])), 2);
    assert_eq!(
        code(&pulselab(&["synth", "--duration", "10", "--fps", "30", "--hr", "300", "--seed", "1", "-o", s(&t)])),
        2
    );
    assert_eq!(
        code(&pulselab(&[
            "synth", "--duration", "10", "--fps", "30", "--hr", "70", "--seed", "1", "--drift", "1", "-o", s(&t)
        ])),
        2
    );
}

#[test]
fn extract_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    let missing = dir.path().join("missing.csv");
    assert_eq!(code(&pulselab(&["extract", "--input", s(&missing), "-o", s(&p)])), 1);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "t_ms,r,g\n0,1,2\n").unwrap();
    assert_eq!(code(&pulselab(&["extract", "--input", s(&bad), "-o", s(&p)])), 1);

    synth_into(dir.path(), "72", "1", &[]);
    let trace = dir.path().join("trace.csv");
    assert_eq!(code(&pulselab(&["extract", "--input", s(&trace), "--band", "5,1", "-o", s(&p)])), 2);
    assert_eq!(code(&pulselab(&["extract", "--algo", "ica", "--input", s(&trace), "-o", s(&p)])), 2);
}

#[test]
fn analyze_constant_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let ibis = dir.path().join("ibis.txt");
    fs::write(&ibis, "1000\n".repeat(120)).unwrap();
    let r = dir.path().join("r.csv");
    let out = pulselab(&["analyze", "--ibis", s(&ibis), "-o", s(&r)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&r).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t_end_s,hr_bpm,sdnn_ms,stress_si,n_ibis,status"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 111);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[1], "60");
        assert_eq!(f[2], "0");
        assert_eq!(f[3], "");
        assert_eq!(f[5], "degenerate");
    }

    assert_eq!(
        code(&pulselab(&["analyze", "--ibis", s(&ibis), "--window", "5", "--min-window", "10", "-o", s(&r)])),
        2
    );
    assert_eq!(code(&pulselab(&["analyze", "-o", s(&r)])), 2);
}

#[test]
fn round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    for (i, hr) in ["62", "75", "88"].iter().enumerate() {
        let rec = corpus.join(format!("rec{i}"));
        fs::create_dir_all(&rec).unwrap();
        synth_into(&rec, hr, &i.to_string(), &["--sdnn", "30", "--noise", "0.05"]);
    }
    let rec0 = corpus.join("rec0");
    let trace = rec0.join("trace.csv");
    let pulse = dir.path().join("pulse.csv");
    assert_eq!(code(&pulselab(&["extract", "--algo", "pos", "--input", s(&trace), "-o", s(&pulse)])), 0);

    let readings = dir.path().join("readings.csv");
    assert_eq!(code(&pulselab(&["analyze", "--pulse", s(&pulse), "-o", s(&readings)])), 0);
    let text = fs::read_to_string(&readings).unwrap();
    let first = text.lines().nth(1).unwrap();
    assert!(first.starts_with("10,"), "{first}");
    let hr: f64 = first.split(',').nth(1).unwrap().parse().unwrap();
    assert!((hr - 62.0).abs() < 3.0, "{hr}");

    let live = dir.path().join("live.csv");
    let out = pulselab(&["monitor", "--input", s(&trace), "--timing", "-o", s(&live)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("per frame"));
    assert_eq!(fs::read_to_string(&live).unwrap().lines().count(), 1 + 50);

    for protocol in ["peaks", "fft", "verified"] {
        let report = dir.path().join(format!("report_{protocol}.csv"));
        let out = pulselab(&[
            "eval", "--corpus", s(&corpus), "--algo", "pos", "--protocol", protocol, "-o", s(&report),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(stdout.contains("hr_bpm"), "{stdout}");
        let text = fs::read_to_string(&report).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("rec") && l.contains(",ok,")).count(), 3);
    }
}

#[test]
fn eval_needs_recordings() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("r.csv");
    assert_eq!(code(&pulselab(&["eval", "--corpus", s(dir.path()), "-o", s(&r)])), 2);
}

#[test]
fn help_for_every_subcommand() {
    for cmd in ["synth", "extract", "analyze", "monitor", "eval"] {
        let out = pulselab(&[cmd, "--help"]);
        assert_eq!(code(&out), 0, "{cmd}");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("--output"), "{cmd}: {text}");
    }
}
