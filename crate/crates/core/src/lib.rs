//! Dimension distortion numerics on metric measure spaces.
//!
//! Model spaces (Euclidean, Heisenberg, Grushin, carpets), nets and covers,
//! Frostman measures and energies, box-counting dimension, the random
//! Sobolev map construction, and foliation regularity tables.

pub mod bounds;
pub mod dimension;
pub mod energy;
pub mod foliation;
pub mod error;
pub mod frostman;
pub mod harness;
mod index;
pub mod measure;
pub mod metric;
pub mod point;
pub mod rng;
pub mod sets;
pub mod sobolev;
pub mod spaces;
pub mod tolerances;

pub use error::{Error, Result};
pub use measure::DiscreteMeasure;
pub use metric::{ball_members, distance, greedy_cover_count, maximal_separated_net, Ball, Cover, Net};
pub use point::{Point, Space};
