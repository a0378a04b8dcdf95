//! Solver and simulator for the one-defender, one-intruder perimeter-defense
//! game on a hemisphere.
//!
//! The defender moves on the surface of a unit hemisphere; the intruder moves
//! on the ground plane and wins by reaching the perimeter circle before the
//! defender can cut it off. The crate computes the optimal breaching point,
//! the barrier separating the two winning regions, and integrates full games
//! under optimal or arbitrary strategies.

pub mod barrier;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod simulation;
pub mod solver;

pub use barrier::{BarrierCurve, BarrierSample, RegionLabel};
pub use dynamics::{DefenderControl, IntruderControl, TerminalEvent, TerminalKind};
pub use error::{GameError, Result};
pub use geometry::{DefenderState, GameParams, GameState, IntruderState};
pub use simulation::{ScenarioSpec, Trajectory};
pub use solver::{BreachSolution, SolverBracket};
