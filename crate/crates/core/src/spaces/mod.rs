//! Model metric measure spaces: Heisenberg groups, the Grushin plane, and
//! fat Sierpiński carpets.

pub mod carpet;
pub mod grushin;
pub mod heisenberg;

pub use carpet::{carpet_contains, carpet_sample, CarpetSample, CarpetSequence, CarpetSpec};
pub use grushin::{grushin_bracket, GrushinBracket, DEFAULT_C1};
pub use heisenberg::{dilate, heis_inverse, heis_mul, koranyi_dist, koranyi_norm, HeisenbergParams};
