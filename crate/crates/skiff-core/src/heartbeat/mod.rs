//! Competition heartbeat: wire codec, periodic TCP reporter and the mock
//! Technical Director server used to exercise it.

mod client;
mod sentence;
mod server;

pub use client::{ClientMetrics, HeartbeatClient};
pub use sentence::{decode, encode, Datum, HeartbeatError, HeartbeatSentence, SystemMode};
pub use server::{MockTdServer, ServerRecord};
