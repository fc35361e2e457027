//! Numerical toolkit for periodic orbits of parametrized maps: continuation of
//! nonflip orbit components, period-doubling cascade detection, orbit
//! counting for symbolic models, and boundary censuses.

pub mod census;
pub mod combinatorics;
pub mod continuation;
pub mod error;
pub mod linalg;
pub mod maps;
pub mod orbits;
pub mod output;
pub mod sweep;

pub use error::{Error, Result};
pub use maps::{builtin_map, MapDefinition, State};
pub use orbits::PeriodicOrbit;
