//! `compass eval ...`: drives the evaluation protocols and writes their
//! reports as CSV (file or stdout) with a summary table on stderr.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Result};
use clap::{Args, Subcommand, ValueEnum};
use compass_core::evaluate::report::{
    compare_table, convergence_table, der_table, elevation_table, sweep_table, write_compare_csv,
    write_convergence_csv, write_der_csv, write_elevation_csv, write_sweep_csv,
};
use compass_core::evaluate::{
    compare_mic_configs, evaluate_der, measure_convergence, sweep_azimuth, sweep_elevation,
    CompareConfig, ConvergenceConfig, DerEvalConfig, SweepConfig,
};
use compass_core::SignalSpec;

use crate::{emit, GlobalOpts};

/// An SNR in dB, or `clean` for no added noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snr(pub Option<f64>);

impl FromStr for Snr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("clean") {
            return Ok(Snr(None));
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(|v| Snr(Some(v)))
            .ok_or_else(|| format!("`{s}` is neither a number nor `clean`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Signal {
    White,
    Speech,
}

impl From<Signal> for SignalSpec {
    fn from(s: Signal) -> Self {
        match s {
            Signal::White => SignalSpec::WhiteNoise,
            Signal::Speech => SignalSpec::SpeechLike,
        }
    }
}

#[derive(Subcommand)]
pub enum EvalCommand {
    /// Azimuth error over a ring of source directions.
    Sweep(SweepArgs),
    /// Candidates needed before the estimate settles.
    Convergence(ConvergenceArgs),
    /// Azimuth error against source elevation.
    Elevation(ElevationArgs),
    /// Diarization error rate for one array and SNR.
    Der(DerArgs),
    /// DER of the 4-mic against the 3-mic array over several SNRs.
    Compare(CompareArgs),
}

#[derive(Args)]
pub struct Output {
    /// CSV report path; stdout if omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_value = "white")]
    signal: Vec<Signal>,
    /// Comma-separated SNRs in dB, or `clean`.
    #[arg(long, value_delimiter = ',', default_value = "clean")]
    snr: Vec<Snr>,
    #[arg(long, default_value_t = 10.0)]
    step: f64,
    #[arg(long, default_value_t = 3)]
    trials: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    elevation: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
pub struct ConvergenceArgs {
    #[arg(long, value_enum, default_value = "white")]
    signal: Signal,
    #[arg(long, default_value = "20")]
    snr: Snr,
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long, default_value_t = 15.0)]
    tolerance: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
pub struct ElevationArgs {
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "-40,-20,0,20,40",
        allow_negative_numbers = true
    )]
    elevations: Vec<f64>,
    #[arg(long, default_value_t = 90.0)]
    azimuth: f64,
    #[arg(long, default_value_t = 3)]
    trials: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
pub struct DerArgs {
    /// 4 for the full rectangle, 3 for the rectangle minus one corner.
    #[arg(long, default_value_t = 4)]
    mics: usize,
    #[arg(long, default_value = "12")]
    snr: Snr,
    /// Number of conversations.
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
pub struct CompareArgs {
    #[arg(long, value_delimiter = ',', default_value = "clean,18,12,6")]
    snr: Vec<Snr>,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[command(flatten)]
    output: Output,
}

fn snrs(v: &[Snr]) -> Vec<Option<f64>> {
    v.iter().map(|s| s.0).collect()
}

/// Renders the CSV in memory, then writes it and the table.
fn finish(
    output: &Output,
    write: impl FnOnce(&mut Vec<u8>) -> compass_core::Result<()>,
    table: String,
) -> Result<()> {
    let mut csv = Vec::new();
    write(&mut csv)?;
    emit(output.out.as_deref(), &csv)?;
    eprint!("{table}");
    Ok(())
}

pub fn run(g: &GlobalOpts, cmd: &EvalCommand) -> Result<()> {
    let session = g.session()?;
    let seed = g.seed.unwrap_or(0);
    match cmd {
        EvalCommand::Sweep(a) => {
            if !(a.step > 0.0 && a.step <= 360.0) {
                bail!("--step must be in (0, 360]");
            }
            let defaults = SweepConfig::default();
            let n = (360.0 / a.step).round() as usize;
            let cfg = SweepConfig {
                session: SweepConfig::localization_session(session),
                signals: a.signal.iter().map(|&s| s.into()).collect(),
                snr_levels: snrs(&a.snr),
                angles: (0..n).map(|k| k as f64 * a.step).collect(),
                elevation_deg: a.elevation,
                trials: a.trials,
                seed,
                ..defaults
            };
            let r = sweep_azimuth(&cfg)?;
            finish(&a.output, |w| write_sweep_csv(&r, w), sweep_table(&r))
        }
        EvalCommand::Convergence(a) => {
            let cfg = ConvergenceConfig {
                session,
                signal: a.signal.into(),
                snr_db: a.snr.0,
                seeds: a.seeds,
                tolerance_deg: a.tolerance,
                seed,
                ..Default::default()
            };
            let r = measure_convergence(&cfg)?;
            finish(
                &a.output,
                |w| write_convergence_csv(&r, w),
                convergence_table(&r),
            )
        }
        EvalCommand::Elevation(a) => {
            let base = SweepConfig {
                session: SweepConfig::localization_session(session),
                trials: a.trials,
                seed,
                ..Default::default()
            };
            let r = sweep_elevation(&base, &a.elevations, a.azimuth)?;
            finish(
                &a.output,
                |w| write_elevation_csv(&r, w),
                elevation_table(&r),
            )
        }
        EvalCommand::Der(a) => {
            let cfg = DerEvalConfig {
                session,
                mics: a.mics,
                snr_db: a.snr.0,
                n_conversations: a.n,
                seed,
                ..Default::default()
            };
            let r = evaluate_der(&cfg)?;
            finish(&a.output, |w| write_der_csv(&r, w), der_table(&r))
        }
        EvalCommand::Compare(a) => {
            let cfg = CompareConfig {
                session,
                snr_levels: snrs(&a.snr),
                n_conversations: a.n,
                seed,
                ..Default::default()
            };
            let r = compare_mic_configs(&cfg)?;
            finish(&a.output, |w| write_compare_csv(&r, w), compare_table(&r))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_parsing() {
        assert_eq!("clean".parse::<Snr>().unwrap(), Snr(None));
        assert_eq!("-5".parse::<Snr>().unwrap(), Snr(Some(-5.0)));
        assert!("loud".parse::<Snr>().is_err());
        assert!("nan".parse::<Snr>().is_err());
    }
}
