use phantom_core::postprocess::Detection;
use serde::{Deserialize, Serialize};

use crate::event::EventBody;

pub const PERSON: &str = "person";

/// Default label set of the four-class built-in detectors.
pub const DEFAULT_CLASSES: [&str; 4] = ["person", "car", "traffic light", "street sign"];

/// Class id to name lookup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassMap(pub Vec<String>);

impl Default for ClassMap {
    fn default() -> Self {
        Self(DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect())
    }
}

impl ClassMap {
    /// Name of `id`, or `None` if the map does not cover it.
    pub fn name(&self, id: usize) -> Option<&str> {
        self.0.get(id).map(String::as_str)
    }

    pub fn label(&self, id: usize) -> String {
        self.name(id)
            .map_or_else(|| format!("unknown:{id}"), str::to_string)
    }
}

/// Notification events for one frame.
///
/// Each person detection yields a detection event, and an alert follows the
/// first of them. Ids missing from `classes` are reported as `unknown:<id>`
/// detections. Other known classes are ignored.
pub fn person_trigger(dets: &[Detection], classes: &ClassMap, frame: u64) -> Vec<EventBody> {
    let persons = dets
        .iter()
        .filter(|d| classes.name(d.class_id) == Some(PERSON))
        .count();
    let mut events = Vec::new();
    let mut alerted = false;
    for d in dets {
        let class = match classes.name(d.class_id) {
            Some(PERSON) => PERSON.to_string(),
            Some(_) => continue,
            None => classes.label(d.class_id),
        };
        let is_person = class == PERSON;
        events.push(EventBody::Detection {
            class,
            score: d.score,
            bbox: d.bbox,
            frame,
        });
        if is_person && !alerted {
            alerted = true;
            events.push(EventBody::Alert {
                class: PERSON.into(),
                frame,
                count: persons,
            });
        }
    }
    events
}
