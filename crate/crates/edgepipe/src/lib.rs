//! Simulated edge detection daemon.
//!
//! Frames flow from a source through a temperature-guarded detector to a set
//! of notification sinks. Person detections raise events plus one alert per
//! frame; undeliverable events end up in a dead-letter file.

pub mod clock;
pub mod config;
pub mod error;
pub mod event;
pub mod guard;
pub mod pipeline;
pub mod sink;
pub mod temp;
pub mod trigger;

pub use config::{PipelineConfig, SinkConfig, SourceConfig, DEADLETTER_ENV};
pub use error::{EdgeError, Result};
pub use event::{EventBody, EventKind, PipelineEvent, WireEvent};
pub use guard::{GuardAction, GuardStep, TempReading, TemperatureGuard};
pub use pipeline::{
    Detector, FrameRecord, FrameStatus, ModelDetector, Pipeline, Summary, QUEUE_CAPACITY,
};
pub use sink::{
    Ack, DeadLetter, DeadLetterRecord, Dispatcher, FileSink, Outcome, RetryPolicy, Sink, TcpSink,
};
pub use temp::{open_temp_source, ConstantTemp, ReplayTemp, TempSource};
pub use trigger::{person_trigger, ClassMap, PERSON};
