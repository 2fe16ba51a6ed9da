//! Positive semigroups on finite state spaces: measures and functions in
//! duality, kernels, continuous and discrete semigroups, their asymptotic
//! behaviour, one-dimensional diffusion discretizations and coupled systems.

pub mod error;
pub mod kernel;
pub mod linalg;
pub mod measure;
pub mod semigroup;
pub mod asymptotics;
pub mod elliptic;
pub mod coupled;
pub mod presets;

pub use error::{Error, Result};
pub use kernel::{
    abs_continuous_rows, apply_backward, apply_forward, compose, duality_check, duality_tolerance,
    rows_mutually_equivalent, Kernel, MatrixDocument, SUPPORT_THRESHOLD,
};
pub use measure::{
    pairing, sup_norm, tv_norm, window_seminorm, BoundedFunction, CompactWindow, Coordinate, SignedMeasure,
    StateSpace, ValueDocument,
};
pub use semigroup::{
    boundedness_report, evaluate, trajectory_backward, trajectory_forward, GeneratorMatrix, Semigroup,
    TimeStructure,
};
