//! Wire types of the mgdial service. Every response body carries
//! [`API_VERSION`]; requests may carry it and are rejected on mismatch.

pub mod ops;
pub mod session;

use serde::{Deserialize, Serialize};

pub const API_VERSION: u32 = 1;

fn version() -> u32 {
    API_VERSION
}

/// Response envelope: the payload's fields next to `version`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versioned<T> {
    #[serde(default = "version")]
    pub version: u32,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Versioned<T> {
    pub fn new(body: T) -> Self {
        Versioned {
            version: API_VERSION,
            body,
        }
    }
}

/// Machine-readable error class of a failed request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Malformed body, parameters or API call.
    Schema,
    /// Well-formed request that breaks a rule, such as the selection cap.
    Validation,
    /// Request out of order for the session's phase.
    Sequence,
    /// Missing or unknown capability token.
    Unauthorized,
    /// Token of the wrong role.
    Forbidden,
    NotFound,
    /// API call the engine rejected; it is still logged.
    Engine,
    /// Offline operation that failed.
    Operation,
    Version,
    Internal,
}

impl ErrorKind {
    pub fn status(self) -> u16 {
        match self {
            ErrorKind::Schema | ErrorKind::Version => 400,
            ErrorKind::Unauthorized => 401,
            ErrorKind::Forbidden => 403,
            ErrorKind::NotFound => 404,
            ErrorKind::Sequence => 409,
            ErrorKind::Validation | ErrorKind::Engine | ErrorKind::Operation => 422,
            ErrorKind::Internal => 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub sessions: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_flattens_the_payload() {
        let v = Versioned::new(Health {
            status: "ok".into(),
            sessions: 2,
        });
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(text, r#"{"version":1,"status":"ok","sessions":2}"#);
        let back: Versioned<Health> =
            serde_json::from_str(r#"{"status":"ok","sessions":2}"#).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn statuses_follow_http_conventions() {
        assert_eq!(ErrorKind::NotFound.status(), 404);
        assert_eq!(ErrorKind::Sequence.status(), 409);
        assert_eq!(ErrorKind::Validation.status(), 422);
    }
}
