//! Simulation and analysis toolkit for hybrid dynamical systems whose flows
//! carry high-frequency periodic excitation.
//!
//! The crate is organised bottom-up:
//!
//! * [`hybrid`]: hybrid time, hybrid arcs, the fixed-step hybrid solver and
//!   solution validation.
//! * [`oscillatory`]: the two-timescale flow structure
//!   `f_ε = ε⁻¹·φ₁ + φ₂` with fast timers `τ₁, τ₂`.
//! * [`quadrature`]: periodic trapezoid rules, spectral antiderivatives and
//!   Gauss–Legendre panels used by the averaging engine.
//! * [`averaging`]: numerical second-order (Lie-bracket) averaging.
//! * [`automaton`]: the dwell-time / activation-time switching automaton.
//! * [`closeness`]: `(T,ρ)`-closeness of hybrid arcs and empirical
//!   practical-stability checks.
//! * [`scenarios`]: ready-to-simulate closed loops (source-seeking vehicle,
//!   oscillator synchronization, control-affine extremum seeking and global
//!   extremum seeking on the sphere).

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod automaton;
pub mod averaging;
pub mod closeness;
pub mod hybrid;
pub mod linalg;
pub mod oscillatory;
pub mod quadrature;
pub mod scenarios;

pub use automaton::{AutomatonConfig, AutomatonState, ScheduleVerdict, SwitchSchedule};
pub use averaging::QuadratureConfig;
pub use closeness::{ClosenessReport, IndicatorSpec, StabilityVerdict};
pub use hybrid::{HybridArc, HybridSystem, HybridTimePoint, SolverConfig, ValidationReport};
pub use oscillatory::{OscillatoryFlowSpec, RegularityReport};
