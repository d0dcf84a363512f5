//! Numerical laboratory for energy barriers between sphere-valued Sobolev maps
//! on flat tori: cubical retractions, degree estimates, the ball construction,
//! Jacobian cycles and flat norms, min-max widths, explicit low-energy paths and
//! a Ginzburg-Landau mountain-pass solver.

pub mod balls;
pub mod complex;
pub mod cycles;
pub mod cones;
pub mod degrees;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod flow;
pub mod maps;
pub mod mountainpass;
pub mod paths;

pub use error::{Error, Result};
