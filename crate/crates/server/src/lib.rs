//! Live steering sessions: particles under one shared field, advanced in
//! real time and controlled over a JSON line protocol.

pub mod error;
pub mod protocol;
pub mod session;
pub mod transcript;
pub mod transport;

pub use error::{Result, ServerError};
pub use protocol::{parse_client, ClientMessage, ServerMessage};
pub use session::{Session, SessionConfig};
pub use transcript::Transcript;
pub use transport::{serve, ServeOptions};
