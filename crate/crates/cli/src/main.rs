mod eval;

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use compass_core::evaluate::compute_der;
use compass_core::pipeline::{run_stream, serve, ServeOptions};
use compass_core::simulate::{make_conversation, ConversationSpec};
use compass_core::wav::{read_wav, write_wav, Audio, SampleFormat, WavBlockReader};
use compass_core::{
    Engine, EngineEvent, EventKind, GeometryConfig, GroundTruth, NoiseFieldSpec, NoiseKind,
    SceneSpec, SessionConfig,
};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "compass",
    version,
    about = "Sound localization and direction-based speaker diarization"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct GlobalOpts {
    /// Session config (TOML). Flags below override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Geometry preset (rect4, rect3, phone3) or a geometry TOML file.
    #[arg(long, global = true, value_name = "PRESET|FILE")]
    geometry: Option<String>,
    /// GCC-PHAT weighting exponent.
    #[arg(long, global = true, allow_negative_numbers = true)]
    rho: Option<f64>,
    /// KDE bandwidth in degrees.
    #[arg(long, global = true)]
    bandwidth: Option<f64>,
    /// Seed for simulation and evaluation runs.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene (or a random 4-talker conversation) to a multichannel WAV.
    Simulate(SimulateArgs),
    /// Write the per-block direction trace of a recording as CSV.
    Localize(LocalizeArgs),
    /// Write the speaker segments of a recording as JSON lines.
    Diarize(DiarizeArgs),
    /// Run an evaluation protocol.
    #[command(subcommand)]
    Eval(eval::EvalCommand),
    /// Stream a recording through the engine to one TCP client.
    Serve(ServeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene description (TOML). Without it a conversation is generated.
    scene: Option<PathBuf>,
    #[arg(short, long)]
    out: PathBuf,
    /// Ground truth output; defaults to the WAV path with `.truth.jsonl`.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Sample format: i16 or f32.
    #[arg(long, default_value = "i16")]
    format: SampleFormat,
    /// Noise SNR for a generated conversation ("clean" for none).
    #[arg(long, default_value = "clean")]
    snr: eval::Snr,
    /// Approximate length of a generated conversation.
    #[arg(long, default_value_t = 40.0)]
    duration: f64,
}

#[derive(Args)]
struct LocalizeArgs {
    wav: PathBuf,
    /// CSV output; stdout if omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiarizeArgs {
    wav: PathBuf,
    /// Segment log output; stdout if omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Also write the full event log here.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Ground truth from `simulate`: attaches text and reports DER.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    wav: PathBuf,
    #[arg(long, default_value = "127.0.0.1:7878")]
    bind: SocketAddr,
    /// Playback speed relative to real time; 0 streams as fast as possible.
    #[arg(long, default_value_t = 1.0)]
    pace: f64,
}

impl GlobalOpts {
    fn geometry_config(&self) -> Result<Option<GeometryConfig>> {
        let Some(g) = &self.geometry else {
            return Ok(None);
        };
        let path = Path::new(g);
        if path.is_file() {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let cfg: GeometryConfig =
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            return Ok(Some(cfg));
        }
        Ok(Some(GeometryConfig::preset(g)))
    }

    fn session(&self) -> Result<SessionConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                SessionConfig::load(p).with_context(|| format!("loading {}", p.display()))?
            }
            None => SessionConfig::default(),
        };
        if let Some(g) = self.geometry_config()? {
            cfg.geometry = g;
        }
        if let Some(rho) = self.rho {
            cfg.delay.rho = rho;
        }
        if let Some(bw) = self.bandwidth {
            cfg.bandwidth_deg = bw;
        }
        cfg.validate().context("invalid session config")?;
        Ok(cfg)
    }
}

/// Writes to a file only once the whole payload exists, so failures leave
/// nothing behind.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn load_audio(path: &Path, cfg: &SessionConfig) -> Result<Audio> {
    let audio = read_wav(path).with_context(|| format!("reading {}", path.display()))?;
    let geometry = cfg.array()?;
    if audio.channels.len() != geometry.n_mics() {
        bail!(
            "{} has {} channels but the geometry has {} mics",
            path.display(),
            audio.channels.len(),
            geometry.n_mics()
        );
    }
    if audio.sample_rate_hz != geometry.sample_rate_hz() {
        bail!(
            "{} is sampled at {} Hz but the geometry expects {} Hz",
            path.display(),
            audio.sample_rate_hz,
            geometry.sample_rate_hz()
        );
    }
    Ok(audio)
}

fn block_source(
    audio: &Audio,
    frame_len: usize,
) -> impl Iterator<Item = compass_core::Result<compass_core::FrameBlock>> + '_ {
    compass_core::wav::blocks(&audio.channels, frame_len).map(Ok)
}

fn simulate(g: &GlobalOpts, args: &SimulateArgs) -> Result<()> {
    let geometry = g.geometry_config()?;
    let scene = match &args.scene {
        Some(p) => {
            let mut scene =
                SceneSpec::load(p).with_context(|| format!("loading {}", p.display()))?;
            if let Some(seed) = g.seed {
                scene.seed = seed;
            }
            if let Some(geo) = geometry {
                scene.geometry = geo;
            }
            scene
        }
        None => make_conversation(&ConversationSpec {
            seed: g.seed.unwrap_or(0),
            mean_duration_s: args.duration,
            geometry: geometry.unwrap_or_else(|| GeometryConfig::preset("rect4")),
            noise: args
                .snr
                .0
                .map(|s| NoiseFieldSpec::new(NoiseKind::Babble, Some(s))),
            ..Default::default()
        })?,
    };
    let rendered = compass_core::render(&scene)?;
    let truth_path = args
        .truth
        .clone()
        .unwrap_or_else(|| args.out.with_extension("truth.jsonl"));
    let mut truth = Vec::new();
    rendered.truth.write_jsonl(&mut truth)?;
    write_wav(
        &args.out,
        &rendered.channels,
        rendered.sample_rate_hz,
        args.format,
    )
    .with_context(|| format!("writing {}", args.out.display()))?;
    emit(Some(&truth_path), &truth)?;
    eprintln!(
        "wrote {} ({} channels, {:.1} s) and {}",
        args.out.display(),
        rendered.channels.len(),
        rendered.truth.n_samples as f64 / rendered.sample_rate_hz as f64,
        truth_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TraceRow {
    block: u64,
    time_s: f64,
    azimuth_deg: Option<f64>,
    confidence: Option<f64>,
    n_candidates: usize,
    block_azimuth_deg: Option<f64>,
    speech: bool,
    speaker: Option<usize>,
}

fn localize(g: &GlobalOpts, args: &LocalizeArgs) -> Result<()> {
    let cfg = g.session()?;
    let audio = load_audio(&args.wav, &cfg)?;
    let mut engine = Engine::new(cfg.clone())?;
    let dt = engine.block_duration_s();
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for block in block_source(&audio, cfg.frame_len) {
        let out = engine.process_block(&block?)?;
        wtr.serialize(TraceRow {
            block: out.block_index,
            time_s: (out.block_index + 1) as f64 * dt,
            azimuth_deg: out.estimate.map(|e| e.azimuth_deg),
            confidence: out.estimate.map(|e| e.confidence),
            n_candidates: out.estimate.map_or(0, |e| e.n_candidates),
            block_azimuth_deg: out.block_azimuth,
            speech: out.gate.active,
            speaker: out.label,
        })?;
    }
    let bytes = wtr.into_inner().context("flushing CSV")?;
    emit(args.out.as_deref(), &bytes)
}

fn diarize(g: &GlobalOpts, args: &DiarizeArgs) -> Result<()> {
    let cfg = g.session()?;
    let audio = load_audio(&args.wav, &cfg)?;
    let truth = match &args.truth {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            let t = GroundTruth::read_jsonl(
                BufReader::new(f),
                audio.sample_rate_hz,
                audio.n_samples() as u64,
            )
            .with_context(|| format!("parsing {}", p.display()))?;
            Some(t)
        }
        None => None,
    };
    let mut engine = Engine::new(cfg.clone())?;
    if let Some(t) = &truth {
        engine.set_text_hook(Box::new(t.clone()));
    }
    let mut events: Vec<EngineEvent> = Vec::new();
    run_stream(&mut engine, block_source(&audio, cfg.frame_len), |e| {
        events.push(e.clone());
        Ok(())
    })?;

    let mut log = Vec::new();
    let mut segments = Vec::new();
    for e in &events {
        if let EventKind::SegmentClose { segment, .. } = &e.kind {
            serde_json::to_writer(&mut log, segment)?;
            log.push(b'\n');
            segments.push(segment.clone());
        }
    }
    if let Some(p) = &args.events {
        let bytes: Vec<u8> = events
            .iter()
            .flat_map(|e| e.to_json_line().into_bytes())
            .collect();
        emit(Some(p), &bytes)?;
    }
    emit(args.out.as_deref(), &log)?;
    if let Some(t) = &truth {
        let r = compute_der(&t.reference_segments(), &segments)?;
        eprintln!(
            "DER {:.4} (false alarm {:.2} s, missed {:.2} s, confusion {:.2} s of {:.2} s)",
            r.der, r.false_alarm_s, r.missed_s, r.confusion_s, r.total_speech_s
        );
    }
    Ok(())
}

fn serve_wav(g: &GlobalOpts, args: &ServeArgs) -> Result<()> {
    let cfg = g.session()?;
    let reader = WavBlockReader::open(&args.wav, cfg.frame_len)
        .with_context(|| format!("opening {}", args.wav.display()))?;
    let geometry = cfg.array()?;
    if reader.n_channels() != geometry.n_mics()
        || reader.sample_rate_hz() != geometry.sample_rate_hz()
    {
        bail!(
            "{} is {} channels at {} Hz; the geometry needs {} at {} Hz",
            args.wav.display(),
            reader.n_channels(),
            reader.sample_rate_hz(),
            geometry.n_mics(),
            geometry.sample_rate_hz()
        );
    }
    let mut engine = Engine::new(cfg)?;
    let opts = ServeOptions {
        bind: args.bind,
        pace: (args.pace > 0.0).then_some(args.pace),
    };
    let summary = serve(&mut engine, reader, &opts, |addr| {
        eprintln!("listening on {addr}")
    })?;
    eprintln!(
        "streamed {} blocks, {} events",
        summary.blocks, summary.events
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Simulate(a) => simulate(g, a),
        Command::Localize(a) => localize(g, a),
        Command::Diarize(a) => diarize(g, a),
        Command::Eval(e) => eval::run(g, e),
        Command::Serve(a) => serve_wav(g, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
