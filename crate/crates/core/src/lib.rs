//! Simulation and numerics for SLE curves and Gaussian free field flow lines.
//!
//! * [`formulas`]: closed-form dimensions, exponents, phases and boundary data.
//! * [`loewner`]: discretized chordal Loewner chains (zipper scheme).
//! * [`driver`]: SLE_κ and SLE_κ(ρ) driving functions, radial angle SDE.
//! * [`gff`]: discrete GFF on rectangles with piecewise-constant boundary data.
//! * [`flowlines`]: flow lines, light cones and fans of a sampled field.
//! * [`estimation`]: box counting and Monte Carlo exponent regressions.
//! * [`martingales`]: the one-point and two-path martingales.

pub mod driver;
pub mod error;
pub mod estimation;
pub mod flowlines;
pub mod formulas;
pub mod gff;
pub mod loewner;
pub mod martingales;
pub mod rng;
pub mod stats;
pub mod svg;

pub use error::{Error, Result};
pub use num_complex::Complex64;
