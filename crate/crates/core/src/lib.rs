//! Cluster synchronization toolkit for Kuramoto oscillator networks.
//!
//! The crate covers partition checks on weighted graphs ([`graph`]), the
//! spanning-tree change of coordinates ([`tree`]), phase simulation
//! ([`dynamics`]), averaging-based stability certificates
//! ([`certificates`]), synchronization metrics ([`metrics`]), the
//! Balloon–Windkessel hemodynamic model ([`hemodynamics`]) and the
//! experiment pipeline that ties them together ([`pipeline`]).

pub mod error;
pub mod certificates;
pub mod dynamics;
pub mod examples;
pub mod graph;
pub mod hemodynamics;
pub mod linalg;
pub mod metrics;
pub mod ode;
pub mod pipeline;
pub mod tree;

pub use error::{KuraError, Result};
