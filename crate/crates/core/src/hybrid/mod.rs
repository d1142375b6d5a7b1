//! Hybrid systems `(C, F, D, G)`, hybrid arcs, and their integration.

mod arc;
pub mod io;
mod solver;
mod system;
mod validate;

pub use arc::{hybrid_time_slice, HybridArc, HybridTimePoint, Segment};
pub use solver::{
    simulate, Priority, SimError, SolverConfig, DEFAULT_ESCAPE_RADIUS, DEFAULT_MEMBERSHIP_TOL,
};
pub use system::{
    always, default_labels, never, FlowField, HybridSystem, JumpMap, JumpSelector, LogicFlow,
    Membership, PlainField, Projection, ScheduledJump, ThetaData, TimedField,
};
pub use validate::{validate_arc, ValidateError, ValidationReport};
