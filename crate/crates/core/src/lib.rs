//! Numerical laboratory for complex Hénon maps: Green functions, saddle cycles, their
//! unstable and stable parametrizations, and intersection/tangency diagnostics.

pub mod error;
pub mod exec;
pub mod config;
pub mod family;
pub mod green;
pub mod intersect;
pub mod henon;
pub mod jet;
pub mod linalg;
pub mod output;
pub mod report;
pub mod saddles;
pub mod uniformize;

pub use error::{Error, Result};
pub use exec::Execution;
pub use henon::{HenonFactor, HenonMap, InverseHenon, PlaneMap};
pub use linalg::{ComplexPair, Mat2};
pub use num_complex::Complex64;
