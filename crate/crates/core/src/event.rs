//! Collision event record forwarded from Edge to Cloud.
//!
//! JSON schema (all timestamps are nanosecond integers):
//!
//! ```json
//! {
//!   "event_id": "6f1c…-uuid",
//!   "device_id": 1,
//!   "window_seq": 4,
//!   "t_window_start_ns": 12000000000,
//!   "label": "Bow",
//!   "probs": [0.91, 0.03, 0.04, 0.02],
//!   "scalogram_digest": "<64 hex chars>",
//!   "edge_processing_ms": 7.3,
//!   "human_validation": "confirmed bow strike",
//!   "scalogram_b64": "<base64 SCG1 fixture>"
//! }
//! ```
//!
//! `human_validation` and `scalogram_b64` are optional and omitted when absent.
//! `probs` is indexed Bow, Port, Starboard, None.

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::classifier::ClassProbs;
use crate::label::ImpactLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub event_id: Uuid,
    pub device_id: u32,
    pub window_seq: u64,
    pub t_window_start_ns: u64,
    pub label: ImpactLabel,
    pub probs: ClassProbs,
    pub scalogram_digest: String,
    pub edge_processing_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_validation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalogram_b64: Option<String>,
}

/// Semantic check failure, naming the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {reason}")]
pub struct EventFieldError {
    pub field: &'static str,
    pub reason: String,
}

impl CollisionEvent {
    /// Checks the invariants serde cannot express.
    pub fn validate(&self) -> Result<(), EventFieldError> {
        let err = |field, reason: &str| Err(EventFieldError { field, reason: reason.to_string() });
        if !self.probs.is_valid() {
            return err("probs", "must be a probability distribution over 4 labels");
        }
        if self.probs.argmax() != self.label {
            return err("label", "must equal the argmax of probs");
        }
        if !(self.edge_processing_ms.is_finite() && self.edge_processing_ms >= 0.0) {
            return err("edge_processing_ms", "must be finite and non-negative");
        }
        if self.scalogram_digest.len() != 64 || !self.scalogram_digest.bytes().all(|b| b.is_ascii_hexdigit()) {
            return err("scalogram_digest", "must be 64 hex characters");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event() -> CollisionEvent {
        CollisionEvent {
            event_id: Uuid::from_u128(0x1234),
            device_id: 1,
            window_seq: 4,
            t_window_start_ns: 12_000_000_000,
            label: ImpactLabel::Bow,
            probs: ClassProbs([0.7, 0.1, 0.1, 0.1]),
            scalogram_digest: "ab".repeat(32),
            edge_processing_ms: 7.5,
            human_validation: None,
            scalogram_b64: None,
        }
    }

    #[test]
    fn json_round_trip_and_optional_fields() {
        let e = event();
        let s = serde_json::to_string(&e).unwrap();
        assert!(s.contains("\"event_id\":\"00000000-0000-0000-0000-000000001234\""));
        assert!(s.contains("\"probs\":[0.7,0.1,0.1,0.1]"));
        assert!(!s.contains("human_validation"));
        assert_eq!(serde_json::from_str::<CollisionEvent>(&s).unwrap(), e);
        assert!(e.validate().is_ok());
    }

    #[test]
    fn validation_names_field() {
        let mut e = event();
        e.label = ImpactLabel::Port;
        assert_eq!(e.validate().unwrap_err().field, "label");
        let mut e = event();
        e.edge_processing_ms = -1.0;
        assert_eq!(e.validate().unwrap_err().field, "edge_processing_ms");
        let mut e = event();
        e.probs = ClassProbs([0.9, 0.9, 0.0, 0.0]);
        assert_eq!(e.validate().unwrap_err().field, "probs");
        let mut e = event();
        e.scalogram_digest = "xyz".into();
        assert_eq!(e.validate().unwrap_err().field, "scalogram_digest");
    }

    #[test]
    fn missing_field_is_reported() {
        let mut v = serde_json::to_value(event()).unwrap();
        v.as_object_mut().unwrap().remove("probs");
        let e = serde_json::from_value::<CollisionEvent>(v).unwrap_err();
        assert!(e.to_string().contains("probs"));
    }
}
