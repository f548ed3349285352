//! Static electromechanical analysis of electrostatically actuated
//! microcantilevers: specimen catalog, closed-form pull-in estimates, beam
//! finite elements, gap electrostatics and the coupled pull-in solvers.

pub mod analytic;
pub mod banded;
pub mod beam;
pub mod coupled;
pub mod electrostatics;
pub mod error;
pub mod specimen;

pub use error::{Error, Result};
