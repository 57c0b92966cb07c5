//! Nonlocality detection from few-body correlators via a commuting-measurement
//! moment-matrix hierarchy.
//!
//! The pipeline: simulate or load a table of correlators ([`corrdata`],
//! [`qsim`]), build a moment matrix over a generating set of monomials
//! ([`algebra`], [`moment`]), decide whether it admits a positive
//! semidefinite completion ([`sdp`]) and turn an infeasibility certificate
//! into a Bell-like functional ([`bell`]). [`localset`] gives exact
//! local-polytope answers for small systems and [`experiment`] wires the
//! standard datasets together.

pub mod algebra;
pub mod bell;
pub mod corrdata;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod localset;
pub mod moment;
pub mod qsim;
pub mod sdp;

pub use algebra::{GeneratingSet, Generator, Monomial};
pub use bell::{BellFunctional, BoundProvenance};
pub use corrdata::{CorrelationTable, CorrelatorKey, ProbabilityTable, Scenario};
pub use error::{Error, Result};
pub use moment::{EntryLabel, MomentStructure, SdpInstance};
pub use qsim::{GraphSpec, MeasurementAssignment, NoiseLevel, StateVector};
pub use sdp::{SdpSolution, SolveStatus, SolverConfig, Verdict};
