//! Numerical laboratory for the radial energy-critical wave equation with a potential,
//! `u_tt - Δu - V u + u^5 = 0` in three dimensions.
//!
//! The crate finds radial steady states, computes the unstable spectrum of their
//! linearization, evolves data with an energy-conserving leapfrog scheme, solves the
//! stability condition that selects the center-stable manifold, and measures the
//! exterior-energy channels that rule out a return to an excited state.
//!
//! ```no_run
//! use critwave::grid::RadialGrid;
//! use critwave::potential::{Potential, PotentialFamily};
//! use critwave::spectral::{linearize, negative_spectrum};
//! use critwave::steady::{find_steady_states, SteadySearch};
//!
//! let grid = RadialGrid::new(80.0, 4096)?;
//! let potential = Potential::from_family(PotentialFamily::Algebraic { v0: 20.0, s: 2.0 }, grid)?;
//! let states = find_steady_states(&potential, &SteadySearch::default())?;
//! let excited = states.iter().find(|s| s.nodes == 1 && s.center() > 0.0).unwrap();
//! let spectrum = negative_spectrum(&linearize(&potential, excited)?)?;
//! println!("k = {:?}", spectrum.rates());
//! # Ok::<(), critwave::error::Error>(())
//! ```
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod error;
pub mod grid;
pub mod io;
pub mod potential;
pub mod norms;
pub mod tridiag;
pub mod ode;
pub mod steady;
pub mod spectral;
pub mod evolution;
pub mod manifold;
pub mod channel;
pub mod diagnostics;
pub mod config;
pub mod pipeline;
