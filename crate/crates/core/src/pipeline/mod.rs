//! Streaming orchestration: session config, engine, wire protocol, and the
//! live socket endpoint.

pub mod config;
pub mod engine;
pub mod events;
pub mod server;

pub use config::SessionConfig;
pub use engine::{
    closed_segments, run_stream, write_event_log, BlockOutput, Engine, StreamSummary, TextHook,
};
pub use events::{Command, EngineEvent, EventKind, PROTOCOL_VERSION};
pub use server::{serve, ServeOptions};
