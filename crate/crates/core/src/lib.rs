//! Fibered Hénon dynamics and fibered endomorphisms of projective space:
//! filtrations, Green functions, slice and wedge measures, pullback
//! convergence, entropy estimates and Fatou detection.

pub mod base;
pub mod convergence;
pub mod entropy;
pub mod error;
pub mod filtration;
pub mod green;
pub mod henon;
pub mod pk;
pub mod slice;
pub mod systems;
pub mod util;
pub mod wedge;

pub use base::{Base, BaseMap, BasePoint, BaseSpace};
pub use error::{Error, Result};
pub use henon::{CoeffPoly, Direction, HenonFactor, PlanePoint, SkewHenonSystem};
