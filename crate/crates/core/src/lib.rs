//! Exact rational complexes, negative-information closed sets, and the
//! constructions connecting connected subsets of the cube to fixed-point sets.

pub mod coded_sets;
pub mod complex_tree;
pub mod constructions;
pub mod error;
pub mod fixed_point;
pub mod geometry;
pub mod points;
pub mod rat;
pub mod weihrauch;

pub use error::{Error, Result};
pub use rat::{ExtRat, Rat};
