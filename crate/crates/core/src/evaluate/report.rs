//! CSV and plain-text table output for the evaluation reports.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use super::convergence::ConvergenceReport;
use super::der::DerReport;
use super::diarization::{CompareReport, DerEvalReport};
use super::sweep::{ElevationReport, SweepReport};
use crate::error::Result;

fn snr_label(snr: Option<f64>) -> String {
    snr.map_or_else(|| "clean".to_string(), |s| format!("{s}"))
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SweepCsvRow<'a> {
    signal: &'a str,
    snr_db: String,
    angle_deg: String,
    mean_error_deg: f64,
}

/// One row per (condition, angle), plus an `all` row per condition.
pub fn write_sweep_csv<W: Write>(report: &SweepReport, w: W) -> Result<()> {
    let mut rows = Vec::new();
    for r in &report.rows {
        for (a, e) in report.angles.iter().zip(&r.per_angle) {
            rows.push(SweepCsvRow {
                signal: &r.signal,
                snr_db: snr_label(r.snr_db),
                angle_deg: format!("{a}"),
                mean_error_deg: *e,
            });
        }
        rows.push(SweepCsvRow {
            signal: &r.signal,
            snr_db: snr_label(r.snr_db),
            angle_deg: "all".into(),
            mean_error_deg: r.mean_error,
        });
    }
    write_rows(w, rows)
}

pub fn sweep_table(report: &SweepReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14} {:>7} {:>10} {:>8}   per-trial",
        "signal", "snr_db", "mean_err", "missing"
    );
    for r in &report.rows {
        let trials: Vec<String> = r.per_trial.iter().map(|t| format!("{t:.2}")).collect();
        let _ = writeln!(
            s,
            "{:<14} {:>7} {:>10.2} {:>8}   {}",
            r.signal,
            snr_label(r.snr_db),
            r.mean_error,
            r.missing,
            trials.join(" ")
        );
    }
    s
}

#[derive(Serialize)]
struct ElevationCsvRow {
    azimuth_deg: f64,
    elevation_deg: f64,
    mean_error_deg: f64,
}

pub fn write_elevation_csv<W: Write>(report: &ElevationReport, w: W) -> Result<()> {
    write_rows(
        w,
        report
            .elevations
            .iter()
            .zip(&report.mean_error)
            .map(|(&e, &m)| ElevationCsvRow {
                azimuth_deg: report.azimuth_deg,
                elevation_deg: e,
                mean_error_deg: m,
            }),
    )
}

pub fn elevation_table(report: &ElevationReport) -> String {
    let mut s = format!(
        "azimuth {}°\n{:>10} {:>10}\n",
        report.azimuth_deg, "elevation", "mean_err"
    );
    for (e, m) in report.elevations.iter().zip(&report.mean_error) {
        let _ = writeln!(s, "{e:>10} {m:>10.2}");
    }
    s
}

#[derive(Serialize)]
struct ConvergenceCsvRow<'a> {
    signal: &'a str,
    seed: u64,
    azimuth_deg: f64,
    candidates: Option<usize>,
    pre_onset_candidates: usize,
    final_error_deg: Option<f64>,
}

pub fn write_convergence_csv<W: Write>(report: &ConvergenceReport, w: W) -> Result<()> {
    write_rows(
        w,
        report.runs.iter().map(|r| ConvergenceCsvRow {
            signal: &report.signal,
            seed: r.seed,
            azimuth_deg: r.azimuth_deg,
            candidates: r.candidates,
            pre_onset_candidates: r.pre_onset_candidates,
            final_error_deg: r.final_error_deg,
        }),
    )
}

pub fn convergence_table(report: &ConvergenceReport) -> String {
    let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.1}"));
    format!(
        "{}: mean {} candidates (min {}, max {}), never converged {} of {}\n",
        report.signal,
        f(report.mean),
        f(report.min.map(|v| v as f64)),
        f(report.max.map(|v| v as f64)),
        report.never_converged,
        report.runs.len()
    )
}

#[derive(Serialize)]
struct DerCsvRow {
    conversation: String,
    mics: usize,
    snr_db: String,
    false_alarm_s: f64,
    missed_s: f64,
    confusion_s: f64,
    total_speech_s: f64,
    der: f64,
}

fn der_row(conversation: String, mics: usize, snr: Option<f64>, r: &DerReport) -> DerCsvRow {
    DerCsvRow {
        conversation,
        mics,
        snr_db: snr_label(snr),
        false_alarm_s: r.false_alarm_s,
        missed_s: r.missed_s,
        confusion_s: r.confusion_s,
        total_speech_s: r.total_speech_s,
        der: r.der,
    }
}

/// Per-conversation rows followed by a `pooled` row.
pub fn write_der_csv<W: Write>(report: &DerEvalReport, w: W) -> Result<()> {
    let mut rows: Vec<DerCsvRow> = report
        .per_conversation
        .iter()
        .enumerate()
        .map(|(i, r)| der_row(i.to_string(), report.mics, report.snr_db, r))
        .collect();
    rows.push(der_row(
        "pooled".into(),
        report.mics,
        report.snr_db,
        &report.pooled,
    ));
    write_rows(w, rows)
}

pub fn der_table(report: &DerEvalReport) -> String {
    format!(
        "{} mics, snr {}: mean DER {:.4} over {} conversations (pooled {:.4}: FA {:.1} s, miss {:.1} s, confusion {:.1} s of {:.1} s)\n",
        report.mics,
        snr_label(report.snr_db),
        report.mean_der,
        report.per_conversation.len(),
        report.pooled.der,
        report.pooled.false_alarm_s,
        report.pooled.missed_s,
        report.pooled.confusion_s,
        report.pooled.total_speech_s
    )
}

#[derive(Serialize)]
struct CompareCsvRow {
    snr_db: String,
    der_4mic: f64,
    der_3mic: f64,
    relative_improvement: f64,
}

pub fn write_compare_csv<W: Write>(report: &CompareReport, w: W) -> Result<()> {
    write_rows(
        w,
        report.rows.iter().map(|r| CompareCsvRow {
            snr_db: snr_label(r.snr_db),
            der_4mic: r.der_4mic,
            der_3mic: r.der_3mic,
            relative_improvement: r.relative_improvement,
        }),
    )
}

pub fn compare_table(report: &CompareReport) -> String {
    let mut s = format!(
        "{:>7} {:>9} {:>9} {:>9}\n",
        "snr_db", "4-mic", "3-mic", "improve"
    );
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:>7} {:>9.4} {:>9.4} {:>8.1}%",
            snr_label(r.snr_db),
            r.der_4mic,
            r.der_3mic,
            100.0 * r.relative_improvement
        );
    }
    let _ = writeln!(
        s,
        "mean relative improvement {:.1}% over {} conversations",
        100.0 * report.mean_relative_improvement,
        report.n_conversations
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::sweep::SweepRow;

    #[test]
    fn sweep_csv_layout() {
        let report = SweepReport {
            angles: vec![0.0, 10.0],
            trials: 1,
            rows: vec![SweepRow {
                signal: "white-noise".into(),
                snr_db: None,
                per_angle: vec![1.0, 3.0],
                per_trial: vec![2.0],
                mean_error: 2.0,
                missing: 0,
            }],
        };
        let mut out = Vec::new();
        write_sweep_csv(&report, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "signal,snr_db,angle_deg,mean_error_deg\nwhite-noise,clean,0,1.0\nwhite-noise,clean,10,3.0\nwhite-noise,clean,all,2.0\n"
        );
        assert!(sweep_table(&report).contains("white-noise"));
    }
}
