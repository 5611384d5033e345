//! Load flow for radial distribution feeders.
//!
//! The primary solver ([`linsolve`]) is non-iterative: constant-impedance and
//! constant-current loads enter exactly, and constant-power loads are
//! linearized through a Wirtinger expansion of `|V|^2`. A backward-forward
//! sweep ([`bfs`]) provides the iterative reference. Single-phase and
//! three-phase (wye and delta loads, coupled 3x3 line impedances) feeders are
//! supported.

pub mod bfs;
pub mod error;
pub mod io;
pub mod linsolve;
pub mod loads;
pub mod metrics;
pub mod network;
pub mod synth;

pub use bfs::{residual, solve_bfs, BfsOptions};
pub use error::{Error, Result};
pub use linsolve::{
    assemble, linearize_vsq, solve_linear, solve_linear_full, solve_three_phase, LinearModel,
    LinearizationPoint, Method, Mode, Solution,
};
pub use loads::{delta_to_wye_injections, injection_current, Connection, PhaseSel, ZipLoad};
pub use metrics::MetricsReport;
pub use network::{
    build_incidence, reduced_impedance, validate_radial, ybus, Branch, Feeder, Impedance,
    IncidenceModel, Network, ReducedImpedance, UnitSystem, ValidationReport,
};
pub use num_complex::Complex64;
