//! Wire messages. One JSON object per line in each direction, discriminated
//! by a `type` field.

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PhiSpec {
    Value(f64),
    /// Only `"random"` is accepted.
    Keyword(String),
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    SetField {
        angle_rad: f64,
        /// Keeps the current magnitude when absent.
        #[serde(default)]
        magnitude_mT: Option<f64>,
    },
    Spawn {
        #[serde(default)]
        id: Option<String>,
        phi_rad: PhiSpec,
        #[serde(default)]
        x_um: Option<f64>,
        #[serde(default)]
        y_um: Option<f64>,
        #[serde(default)]
        f_over_m: Option<f64>,
    },
    Remove {
        id: String,
    },
    Pause,
    Resume,
    Reset,
    RecordStart,
    RecordStop,
    SetNoise {
        enabled: bool,
    },
}

pub const CLIENT_TYPES: [&str; 9] = [
    "set_field",
    "spawn",
    "remove",
    "pause",
    "resume",
    "reset",
    "record_start",
    "record_stop",
    "set_noise",
];

impl ClientMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ClientMessage::SetField { .. } => "set_field",
            ClientMessage::Spawn { .. } => "spawn",
            ClientMessage::Remove { .. } => "remove",
            ClientMessage::Pause => "pause",
            ClientMessage::Resume => "resume",
            ClientMessage::Reset => "reset",
            ClientMessage::RecordStart => "record_start",
            ClientMessage::RecordStop => "record_stop",
            ClientMessage::SetNoise { .. } => "set_noise",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorReason {
    Parse,
    UnknownType,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleView {
    pub id: String,
    pub x_um: f64,
    pub y_um: f64,
    pub theta_rad: f64,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldView {
    pub angle_rad: f64,
    pub magnitude_mT: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State {
        t: f64,
        paused: bool,
        field: FieldView,
        particles: Vec<ParticleView>,
    },
    Ack {
        of: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        id: Option<String>,
    },
    Error {
        reason: ErrorReason,
        message: String,
        /// The offending type, or the raw line when it could not be parsed.
        echo: String,
    },
    Recording {
        csv: String,
    },
}

impl ServerMessage {
    pub fn ack(of: &str) -> Self {
        ServerMessage::Ack {
            of: of.into(),
            id: None,
        }
    }

    pub fn error(reason: ErrorReason, message: impl Into<String>, echo: impl Into<String>) -> Self {
        ServerMessage::Error {
            reason,
            message: message.into(),
            echo: echo.into(),
        }
    }

    /// One line of JSON, no trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

/// Decodes one client line, classifying failures the way the protocol
/// reports them.
pub fn parse_client(line: &str) -> Result<ClientMessage, ServerMessage> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| ServerMessage::error(ErrorReason::Parse, e.to_string(), line.trim()))?;
    let Some(obj) = value.as_object() else {
        return Err(ServerMessage::error(
            ErrorReason::Parse,
            "message must be a JSON object",
            line.trim(),
        ));
    };
    let kind = match obj.get("type") {
        Some(Value::String(s)) => s.clone(),
        Some(other) => {
            return Err(ServerMessage::error(
                ErrorReason::Parse,
                "'type' must be a string",
                other.to_string(),
            ))
        }
        None => return Err(ServerMessage::error(ErrorReason::Parse, "missing 'type'", line.trim())),
    };
    if !CLIENT_TYPES.contains(&kind.as_str()) {
        return Err(ServerMessage::error(
            ErrorReason::UnknownType,
            format!("unknown message type '{kind}'"),
            kind,
        ));
    }
    let fieldless = matches!(
        kind.as_str(),
        "pause" | "resume" | "reset" | "record_start" | "record_stop"
    );
    if fieldless && obj.len() > 1 {
        return Err(ServerMessage::error(
            ErrorReason::Validation,
            format!("'{kind}' takes no fields"),
            kind,
        ));
    }
    serde_json::from_value(value).map_err(|e| ServerMessage::error(ErrorReason::Validation, e.to_string(), kind))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_every_type() {
        let lines = [
            r#"{"type":"set_field","angle_rad":1.5708,"magnitude_mT":1.0}"#,
            r#"{"type":"spawn","phi_rad":"random"}"#,
            r#"{"type":"spawn","phi_rad":0.5,"x_um":1,"y_um":2,"f_over_m":1.1,"id":"a"}"#,
            r#"{"type":"remove","id":"a"}"#,
            r#"{"type":"pause"}"#,
            r#"{"type":"resume"}"#,
            r#"{"type":"reset"}"#,
            r#"{"type":"record_start"}"#,
            r#"{"type":"record_stop"}"#,
            r#"{"type":"set_noise","enabled":true}"#,
        ];
        for l in lines {
            let m = parse_client(l).unwrap();
            assert!(l.contains(m.kind()));
        }
    }

    #[test]
    fn classifies_failures() {
        let reason = |l: &str| match parse_client(l) {
            Err(ServerMessage::Error { reason, echo, .. }) => (reason, echo),
            other => panic!("{other:?}"),
        };
        assert_eq!(reason("{not json").0, ErrorReason::Parse);
        assert_eq!(reason("[1,2]").0, ErrorReason::Parse);
        assert_eq!(reason(r#"{"angle_rad":1}"#).0, ErrorReason::Parse);
        assert_eq!(
            reason(r#"{"type":"warp"}"#),
            (ErrorReason::UnknownType, "warp".to_string())
        );
        assert_eq!(reason(r#"{"type":"set_field"}"#).0, ErrorReason::Validation);
        assert_eq!(
            reason(r#"{"type":"set_field","angle_rad":"x"}"#).0,
            ErrorReason::Validation
        );
        assert_eq!(reason(r#"{"type":"pause","extra":1}"#).0, ErrorReason::Validation);
    }

    #[test]
    fn server_lines() {
        let l = ServerMessage::ack("pause").to_line();
        assert_eq!(l, r#"{"type":"ack","of":"pause"}"#);
        let e = ServerMessage::error(ErrorReason::UnknownType, "m", "warp").to_line();
        assert_eq!(
            e,
            r#"{"type":"error","reason":"unknown_type","message":"m","echo":"warp"}"#
        );
    }
}
