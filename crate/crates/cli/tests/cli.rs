use std::path::Path;
use std::process::{Command, Output};

fn compass(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compass"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    ok(&compass(
        dir.path(),
        &["--seed", "7", "simulate", "-o", "a.wav", "--duration", "8"],
    ));
    ok(&compass(
        dir.path(),
        &["simulate", "--seed", "7", "-o", "b.wav", "--duration", "8"],
    ));
    ok(&compass(
        dir.path(),
        &["--seed", "8", "simulate", "-o", "c.wav", "--duration", "8"],
    ));
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.wav"), read("b.wav"));
    assert_ne!(read("a.wav"), read("c.wav"));
    assert_eq!(read("a.truth.jsonl"), read("b.truth.jsonl"));
}

#[test]
fn missing_input_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["localize", "diarize"] {
        let out = compass(dir.path(), &[cmd, "missing.wav", "-o", "out.txt"]);
        assert!(!out.status.success());
        assert!(String::from_utf8_lossy(&out.stderr).contains("missing.wav"));
        assert!(!dir.path().join("out.txt").exists());
    }
    let out = compass(dir.path(), &["localize", "missing.wav"]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_flag_shows_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = compass(dir.path(), &["localize", "--frobnicate", "x.wav"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn bad_config_values_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    ok(&compass(
        dir.path(),
        &["simulate", "-o", "a.wav", "--duration", "8"],
    ));
    let out = compass(dir.path(), &["--bandwidth", "-3", "localize", "a.wav"]);
    assert!(!out.status.success());
    let out = compass(dir.path(), &["--geometry", "hexagon", "localize", "a.wav"]);
    assert!(!out.status.success());
    // a 3-mic geometry cannot read a 4-channel file
    let out = compass(dir.path(), &["--geometry", "rect3", "localize", "a.wav"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("channels"));
}

#[test]
fn localize_and_diarize_a_simulated_conversation() {
    let dir = tempfile::tempdir().unwrap();
    ok(&compass(
        dir.path(),
        &[
            "--seed",
            "3",
            "simulate",
            "-o",
            "conv.wav",
            "--duration",
            "12",
        ],
    ));

    let out = compass(dir.path(), &["localize", "conv.wav", "-o", "trace.csv"]);
    ok(&out);
    let mut rdr = csv::Reader::from_path(dir.path().join("trace.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(headers.get(2), Some("azimuth_deg"));
    let rows = rdr.records().count();
    let wav_s = 12.0;
    assert!(rows as f64 * 512.0 / 44100.0 >= wav_s * 0.8, "{rows} rows");

    let out = compass(
        dir.path(),
        &[
            "diarize",
            "conv.wav",
            "--truth",
            "conv.truth.jsonl",
            "--events",
            "events.jsonl",
        ],
    );
    ok(&out);
    let log = String::from_utf8(out.stdout).unwrap();
    let segments: Vec<serde_json::Value> = log
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!segments.is_empty());
    assert!(segments.iter().all(|s| s["text"].is_string()), "{log}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("DER"));

    let events = std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap();
    let opens = events
        .lines()
        .filter(|l| l.contains("\"segment_open\""))
        .count();
    let closes = events
        .lines()
        .filter(|l| l.contains("\"segment_close\""))
        .count();
    assert_eq!(opens, closes);
    assert_eq!(closes, segments.len());
}

#[test]
fn eval_der_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = compass(
        dir.path(),
        &[
            "eval", "der", "--mics", "3", "--snr", "12", "--n", "1", "-o", "der.csv",
        ],
    );
    ok(&out);
    let text = std::fs::read_to_string(dir.path().join("der.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("conversation,mics,snr_db,false_alarm_s,missed_s,confusion_s,total_speech_s,der")
    );
    assert!(text.contains("pooled,3,12,"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mean DER"));
}

#[test]
fn eval_sweep_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = compass(
        dir.path(),
        &["eval", "sweep", "--step", "120", "--trials", "1"],
    );
    ok(&out);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 + 1, "{csv}");
    assert!(csv.contains("white-noise,clean,all,"));
}
