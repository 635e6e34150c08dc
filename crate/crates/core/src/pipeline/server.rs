//! Single-client live endpoint: events out and commands in as JSON lines
//! over one TCP connection.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::spectral::FrameBlock;

use super::engine::{Engine, StreamSummary};
use super::events::{Command, EngineEvent, EventKind};

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub bind: SocketAddr,
    /// Playback speed relative to real time; `None` streams as fast as the
    /// engine runs.
    pub pace: Option<f64>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 7878)),
            pace: Some(1.0),
        }
    }
}

fn spawn_reader(stream: TcpStream) -> mpsc::Receiver<Result<Command>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(stream).lines() {
            let Ok(line) = line else { break };
            if line.trim().is_empty() {
                continue;
            }
            if tx.send(Command::parse(&line)).is_err() {
                break;
            }
        }
    });
    rx
}

/// Waits for one client on `listener`, then streams `blocks` through
/// `engine`, pushing every event to the client. Returns when the input is
/// exhausted or the client disconnects.
pub fn serve_on<I>(
    listener: TcpListener,
    engine: &mut Engine,
    blocks: I,
    pace: Option<f64>,
) -> Result<StreamSummary>
where
    I: IntoIterator<Item = Result<FrameBlock>>,
{
    let (stream, _) = listener.accept()?;
    stream.set_nodelay(true)?;
    let commands = spawn_reader(stream.try_clone()?);
    let mut out = BufWriter::new(stream.try_clone()?);
    let mut summary = StreamSummary::default();
    let started = Instant::now();
    let dt = engine.block_duration_s();

    let send =
        |out: &mut BufWriter<TcpStream>, e: &EngineEvent, summary: &mut StreamSummary| -> bool {
            summary.events += 1;
            out.write_all(e.to_json_line().as_bytes()).is_ok()
        };

    let mut connected = true;
    'blocks: for block in blocks {
        let block = block?;
        let now_s = engine.blocks_processed() as f64 * dt;
        for cmd in commands.try_iter() {
            match cmd {
                Ok(c) => engine.queue_command(c),
                Err(e) => {
                    let ev = EngineEvent::new(
                        now_s,
                        EventKind::Error {
                            message: e.to_string(),
                        },
                    );
                    if !send(&mut out, &ev, &mut summary) {
                        connected = false;
                        break 'blocks;
                    }
                }
            }
        }
        let result = engine.process_block(&block)?;
        summary.blocks += 1;
        for e in &result.events {
            if !send(&mut out, e, &mut summary) {
                connected = false;
                break 'blocks;
            }
        }
        if out.flush().is_err() {
            connected = false;
            break;
        }
        if let Some(speed) = pace.filter(|s| *s > 0.0) {
            let due = Duration::from_secs_f64(summary.blocks as f64 * dt / speed);
            if let Some(wait) = due.checked_sub(started.elapsed()) {
                thread::sleep(wait);
            }
        }
    }
    if connected {
        for cmd in commands.try_iter().flatten() {
            engine.queue_command(cmd);
        }
        for e in engine.finish() {
            if !send(&mut out, &e, &mut summary) {
                break;
            }
        }
        let _ = out.flush();
    }
    summary.final_estimate = engine.running_estimate();
    let _ = stream.shutdown(Shutdown::Both);
    Ok(summary)
}

/// Binds, reports the bound address through `on_bound`, and serves one
/// session.
pub fn serve<I, F>(
    engine: &mut Engine,
    blocks: I,
    opts: &ServeOptions,
    on_bound: F,
) -> Result<StreamSummary>
where
    I: IntoIterator<Item = Result<FrameBlock>>,
    F: FnOnce(SocketAddr),
{
    let listener = TcpListener::bind(opts.bind).map_err(Error::Io)?;
    on_bound(listener.local_addr()?);
    serve_on(listener, engine, blocks, opts.pace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diarize::SpeakerSegment;
    use crate::pipeline::SessionConfig;
    use crate::simulate::{render, SceneSpec, SignalSpec, SourceSpec};
    use crate::wav::blocks;

    fn scene() -> Vec<Vec<f64>> {
        let spec = SceneSpec {
            duration_s: 6.0,
            seed: 1,
            geometry: Default::default(),
            sources: vec![SourceSpec {
                azimuth_deg: 270.0,
                elevation_deg: 0.0,
                signal: SignalSpec::SpeechLike,
                level_dbfs: -26.0,
                active_intervals: vec![(0.3, 1.5), (2.0, 3.5), (4.0, 5.5)],
            }],
            noise: None,
        };
        render(&spec).unwrap().channels
    }

    #[test]
    fn filter_command_round_trip() {
        let channels = scene();
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = thread::spawn(move || {
            let mut engine = Engine::new(SessionConfig::default()).unwrap();
            let blocks: Vec<_> = blocks(&channels, 512).map(Ok).collect();
            serve_on(listener, &mut engine, blocks, Some(8.0)).unwrap()
        });

        let mut client = TcpStream::connect(addr).unwrap();
        client.write_all(b"not json\n").unwrap();
        client
            .write_all(b"{\"set_filter\": [[225, 315]]}\n")
            .unwrap();
        let mut acked = false;
        let mut after_ack: Vec<SpeakerSegment> = Vec::new();
        let mut saw_error = false;
        for line in BufReader::new(client.try_clone().unwrap()).lines() {
            let e: EngineEvent = serde_json::from_str(&line.unwrap()).unwrap();
            match e.kind {
                EventKind::Error { .. } => saw_error = true,
                EventKind::FilterAck { ref filter, .. } => {
                    assert!(filter.contains(270.0));
                    acked = true;
                }
                EventKind::SegmentClose { segment, .. } if acked => after_ack.push(segment),
                _ => {}
            }
        }
        let summary = server.join().unwrap();
        assert!(summary.blocks > 0);
        assert!(saw_error, "malformed command reported");
        assert!(acked);
        assert!(!after_ack.is_empty());
        assert!(after_ack.iter().all(|s| s.suppressed), "{after_ack:?}");
    }
}
