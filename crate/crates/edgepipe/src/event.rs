use phantom_core::postprocess::BBox;
use serde::{Deserialize, Serialize};

pub const WIRE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Detection,
    Halt,
    Resume,
    Alert,
}

/// Event kind with its payload; serialized as `"kind"` plus `"payload"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "lowercase")]
pub enum EventBody {
    Detection {
        class: String,
        score: f32,
        bbox: BBox,
        frame: u64,
    },
    Halt {
        celsius: f64,
        frame: u64,
    },
    Resume {
        celsius: f64,
        frame: u64,
    },
    /// Redundant alert accompanying the first person detection of a frame.
    Alert {
        class: String,
        frame: u64,
        count: usize,
    },
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::Detection { .. } => EventKind::Detection,
            EventBody::Halt { .. } => EventKind::Halt,
            EventBody::Resume { .. } => EventKind::Resume,
            EventBody::Alert { .. } => EventKind::Alert,
        }
    }

    pub fn frame(&self) -> u64 {
        match *self {
            EventBody::Detection { frame, .. }
            | EventBody::Halt { frame, .. }
            | EventBody::Resume { frame, .. }
            | EventBody::Alert { frame, .. } => frame,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineEvent {
    pub ts_ms: u64,
    pub device_id: String,
    pub body: EventBody,
}

/// One line on the wire:
/// `{"v":1,"kind":..,"payload":{..},"ts_ms":..,"device_id":..,"seq":..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireEvent {
    pub v: u32,
    #[serde(flatten)]
    pub body: EventBody,
    pub ts_ms: u64,
    pub device_id: String,
    pub seq: u64,
}

impl WireEvent {
    pub fn new(event: &PipelineEvent, seq: u64) -> Self {
        Self {
            v: WIRE_VERSION,
            body: event.body.clone(),
            ts_ms: event.ts_ms,
            device_id: event.device_id.clone(),
            seq,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("wire events serialize")
    }

    pub fn parse_line(line: &str) -> serde_json::Result<Self> {
        serde_json::from_str(line)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_layout() {
        let e = PipelineEvent {
            ts_ms: 1_700_000_000_123,
            device_id: "pi-01".into(),
            body: EventBody::Detection {
                class: "person".into(),
                score: 0.75,
                bbox: BBox::new(1.0, 2.0, 30.5, 40.0),
                frame: 3,
            },
        };
        let line = WireEvent::new(&e, 7).to_line();
        assert_eq!(
            line,
            r#"{"v":1,"kind":"detection","payload":{"class":"person","score":0.75,"bbox":[1.0,2.0,30.5,40.0],"frame":3},"ts_ms":1700000000123,"device_id":"pi-01","seq":7}"#
        );
        let back = WireEvent::parse_line(&line).unwrap();
        assert_eq!(back.body, e.body);
        assert_eq!(back.seq, 7);
    }

    #[test]
    fn halt_and_resume_stay_distinct() {
        for body in [
            EventBody::Halt {
                celsius: 61.0,
                frame: 2,
            },
            EventBody::Resume {
                celsius: 54.0,
                frame: 9,
            },
        ] {
            let e = PipelineEvent {
                ts_ms: 1,
                device_id: "d".into(),
                body: body.clone(),
            };
            let back = WireEvent::parse_line(&WireEvent::new(&e, 0).to_line()).unwrap();
            assert_eq!(back.body, body);
        }
    }
}
