//! Read/write policies, the session engine, timing and the event log.

mod clock;
mod engine;
mod events;
mod policy;

pub use clock::{Clock, CostTable, OpKind, Work};
pub use engine::{IncrementalEngine, SimulEngine, Variant};
pub use events::{Event, SessionEventLog};
pub use policy::{
    hold_n_emission, run_hold_n, run_policy, run_wait_k_stride_n, PolicyConfig, PolicyKind,
    SessionOutput,
};
