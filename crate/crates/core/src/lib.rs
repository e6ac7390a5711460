//! Closed-form ("direct") position solvers for asynchronous radio-network
//! localization.
//!
//! A tag `M` transmits, `n` passive base stations `B_i` time-stamp the signal
//! and a reference transponder `T` at a known position synchronizes them. Every
//! epoch carries a common, rapidly changing clock offset `O` (in metres), so the
//! pseudo-range reported by station `i` is
//!
//! ```text
//! R_i = O + ||M - B_i|| - ||T - B_i||
//! L_i = R_i + ||T - B_i|| = O + ||M - B_i||
//! ```
//!
//! Pairwise differences `L_i - L_j` are offset free and can be filtered over
//! time. Two linear solvers consume such filtered differences:
//!
//! * [`solver::solve_nonsym`] differences every channel against one reference
//!   station and absorbs that station's noise into the offset unknown;
//! * [`solver::solve_sym`] uses every station pair and rewrites the unknown pair
//!   sums through the total sum `S = sum(L_i)`, leaving the single nuisance
//!   `W = O - S/n`.
//!
//! The geometry, simulation, filtering and solver code is generic over the
//! floating-point type through [`Scalar`]; the grid benchmark in [`bench`] is
//! fixed to `f64`.

pub mod bench;
pub mod error;
pub mod filter;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
pub use filter::{filter_series, FilterKind};
pub use model::{
    distance, validate_layout, DiffKind, DiffMatrix, EpochMeasurement, Layout, LayoutViolation, Point, Truth,
};
pub use scalar::Scalar;
pub use simulate::{NoiseSpec, NoiseTarget, OffsetProcess};
pub use solver::{LinearSystem, LsMethod, SolveResult, Variant};

/// Double-precision point.
pub type Point64 = Point<f64>;
/// Single-precision point.
pub type Point32 = Point<f32>;
/// Double-precision station layout.
pub type Layout64 = Layout<f64>;
/// Single-precision station layout.
pub type Layout32 = Layout<f32>;
pub type DiffMatrix64 = DiffMatrix<f64>;
pub type DiffMatrix32 = DiffMatrix<f32>;
pub type EpochMeasurement64 = EpochMeasurement<f64>;
pub type LinearSystem64 = LinearSystem<f64>;
pub type SolveResult64 = SolveResult<f64>;
pub type SolveResult32 = SolveResult<f32>;
