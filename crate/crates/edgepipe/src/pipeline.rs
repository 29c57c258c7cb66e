use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;

use crossbeam_channel::bounded;
use phantom_core::frames::{Frame, FrameSource};
use phantom_core::netgraph::Model;
use phantom_core::postprocess::{decode, nms, Detection, NMS_IOU};
use phantom_core::tensor::FastExec;
use serde::Serialize;

use crate::clock::Clock;
use crate::event::{EventBody, EventKind, PipelineEvent};
use crate::guard::{GuardStep, TempReading, TemperatureGuard};
use crate::sink::{Dispatcher, Outcome};
use crate::temp::TempSource;
use crate::trigger::{person_trigger, ClassMap};

pub const QUEUE_CAPACITY: usize = 8;

/// Runs inference and postprocessing on one frame.
pub trait Detector: Send {
    fn detect(&mut self, frame: &Frame) -> phantom_core::Result<Vec<Detection>>;
}

/// A bound model followed by decode and class-wise NMS.
pub struct ModelDetector {
    model: Model,
    conf_thresh: f32,
    exec: FastExec,
}

impl ModelDetector {
    pub fn new(model: Model, conf_thresh: f32) -> Self {
        Self {
            model,
            conf_thresh,
            exec: FastExec { parallel: true },
        }
    }
}

impl Detector for ModelDetector {
    fn detect(&mut self, frame: &Frame) -> phantom_core::Result<Vec<Detection>> {
        let raw = self.model.forward_with(&frame.tensor, &self.exec)?;
        let per_image = decode(&raw, self.conf_thresh)?;
        Ok(per_image
            .first()
            .map(|d| nms(d, NMS_IOU))
            .unwrap_or_default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum FrameStatus {
    Inferred { detections: usize },
    Halted,
    Failed,
}

/// What happened to one frame, in processing order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameRecord {
    pub index: u64,
    pub celsius: f64,
    pub status: FrameStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Summary {
    pub frames_read: u64,
    pub frames_inferred: u64,
    pub frames_halted: u64,
    pub frame_errors: u64,
    pub events: u64,
    pub detections: u64,
    pub alerts: u64,
    pub halts: u64,
    pub resumes: u64,
    pub acked: u64,
    pub retried: u64,
    pub dead_lettered: u64,
    pub lost: u64,
    #[serde(skip)]
    pub frames: Vec<FrameRecord>,
    /// Every emitted event in emission order.
    #[serde(skip)]
    pub emitted: Vec<PipelineEvent>,
}

/// Source, inference and dispatch stages wired together.
pub struct Pipeline {
    pub source: Box<dyn FrameSource>,
    pub detector: Box<dyn Detector>,
    pub temps: Box<dyn TempSource>,
    pub dispatcher: Dispatcher,
    pub guard: TemperatureGuard,
    pub classes: ClassMap,
    pub device_id: String,
    pub conf_thresh: f32,
}

enum Item {
    Frame(Frame),
    Failed(phantom_core::Error),
}

impl Pipeline {
    /// Runs until the source is exhausted or `stop` is set, then drains both
    /// queues. Frames are handled in source order. The guard is consulted as
    /// each frame is dequeued, so no frame starts inference while halted.
    pub fn run(self, stop: &AtomicBool) -> Summary {
        let Pipeline {
            mut source,
            mut detector,
            mut temps,
            mut dispatcher,
            mut guard,
            classes,
            device_id,
            conf_thresh,
        } = self;
        let (frame_tx, frame_rx) = bounded::<Item>(QUEUE_CAPACITY);
        let (event_tx, event_rx) = bounded::<PipelineEvent>(QUEUE_CAPACITY);
        let clock = Clock::new();

        thread::scope(|s| {
            s.spawn(move || {
                while !stop.load(Ordering::Relaxed) {
                    let item = match source.next_frame() {
                        None => break,
                        Some(Ok(f)) => Item::Frame(f),
                        Some(Err(e)) => Item::Failed(e),
                    };
                    if frame_tx.send(item).is_err() {
                        break;
                    }
                }
            });

            let dispatch = s.spawn(move || {
                let mut stats = Summary::default();
                for ev in event_rx {
                    for ack in dispatcher.dispatch(&ev) {
                        match ack.outcome {
                            Outcome::Acked { attempts } => {
                                stats.acked += 1;
                                stats.retried += u64::from(attempts > 1);
                            }
                            Outcome::DeadLettered { .. } => stats.dead_lettered += 1,
                            Outcome::Lost { .. } => stats.lost += 1,
                        }
                    }
                }
                stats
            });

            let mut sum = Summary::default();
            let mut next_index = 0u64;
            let emit = |sum: &mut Summary, body: EventBody| {
                match body.kind() {
                    EventKind::Detection => sum.detections += 1,
                    EventKind::Alert => sum.alerts += 1,
                    EventKind::Halt => sum.halts += 1,
                    EventKind::Resume => sum.resumes += 1,
                }
                sum.events += 1;
                let ev = PipelineEvent {
                    ts_ms: clock.now_ms(),
                    device_id: device_id.clone(),
                    body,
                };
                sum.emitted.push(ev.clone());
                if event_tx.send(ev).is_err() {
                    log::error!("dispatch stage stopped early");
                }
            };
            for item in frame_rx {
                sum.frames_read += 1;
                let frame = match item {
                    Item::Frame(f) => {
                        next_index = f.index + 1;
                        f
                    }
                    Item::Failed(e) => {
                        log::warn!("frame {next_index}: {e}");
                        sum.frame_errors += 1;
                        sum.frames.push(FrameRecord {
                            index: next_index,
                            celsius: f64::NAN,
                            status: FrameStatus::Failed,
                        });
                        next_index += 1;
                        continue;
                    }
                };
                let reading = TempReading {
                    celsius: temps.read_celsius(),
                    ts_ms: clock.now_ms(),
                };
                let step = guard.observe(reading);
                let record = |status| FrameRecord {
                    index: frame.index,
                    celsius: reading.celsius,
                    status,
                };
                match step {
                    GuardStep::Halted => {
                        log::warn!(
                            "frame {}: {:.1} °C, halting detection",
                            frame.index,
                            reading.celsius
                        );
                        emit(
                            &mut sum,
                            EventBody::Halt {
                                celsius: reading.celsius,
                                frame: frame.index,
                            },
                        );
                    }
                    GuardStep::Resumed => {
                        log::info!(
                            "frame {}: {:.1} °C, resuming detection",
                            frame.index,
                            reading.celsius
                        );
                        emit(
                            &mut sum,
                            EventBody::Resume {
                                celsius: reading.celsius,
                                frame: frame.index,
                            },
                        );
                    }
                    GuardStep::Running | GuardStep::StillHalted => {}
                }
                if guard.is_halted() {
                    sum.frames_halted += 1;
                    sum.frames.push(record(FrameStatus::Halted));
                    continue;
                }
                match detector.detect(&frame) {
                    Ok(mut dets) => {
                        dets.retain(|d| d.score >= conf_thresh);
                        sum.frames_inferred += 1;
                        sum.frames.push(record(FrameStatus::Inferred {
                            detections: dets.len(),
                        }));
                        for body in person_trigger(&dets, &classes, frame.index) {
                            emit(&mut sum, body);
                        }
                    }
                    Err(e) => {
                        log::warn!("frame {}: {e}", frame.index);
                        sum.frame_errors += 1;
                        sum.frames.push(record(FrameStatus::Failed));
                    }
                }
            }
            drop(event_tx);
            let d = dispatch.join().expect("dispatch stage panicked");
            sum.acked = d.acked;
            sum.retried = d.retried;
            sum.dead_lettered = d.dead_lettered;
            sum.lost = d.lost;
            log::info!(
                "frames read={} inferred={} halted={} errors={}; events={} (halts={} resumes={}); acked={} dead-lettered={} lost={}",
                sum.frames_read,
                sum.frames_inferred,
                sum.frames_halted,
                sum.frame_errors,
                sum.events,
                sum.halts,
                sum.resumes,
                sum.acked,
                sum.dead_lettered,
                sum.lost
            );
            sum
        })
    }
}
