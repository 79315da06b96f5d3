//! Parameter updates: Muon for block-internal matrices, AdamW for the rest.

mod adamw;
mod lr;
mod muon;

pub use adamw::{AdamState, AdamW};
pub use lr::{stable_lr, LrKind, LrSchedule};
pub use muon::{Muon, MuonState, MuonStep};
