//! Simulation of excursion clouds, random-walk loop soups, discrete Gaussian
//! free fields and Loewner chains on the lattice unit disk.

pub mod coupling;
pub mod error;
pub mod excursions;
pub mod experiment;
pub mod gff;
pub mod lattice;
pub mod loopsoup;
pub mod percolation;
pub mod potential;
pub mod render;
pub mod rng;
pub mod sle;
pub mod sparse;
pub mod stats;
pub mod unionfind;
pub mod validation;

pub use error::{Error, Result};
pub use lattice::{LatticeDisk, Side, VertexSet};
