//! Simulation laboratory for single-photon polarization experiments.
//!
//! The crate models a pair of polarizing cubes (a preparation side "L" and a
//! measurement side "R") under several ontologies: classical fields,
//! discrete time-symmetric photon trajectories, textbook collapse, and a
//! no-collapse branch picture, together with two hidden-variable toy models.
//! On top of these it provides the control games played against a Demon (on
//! the input side) and Nature (on the output side), a settings-dependence
//! detector for pre-measurement beables, and a forwards/backwards audit of
//! simulated record ensembles.

pub mod algebra;
pub mod audit;
pub mod error;
pub mod games;
pub mod hvmodels;
pub mod model;
pub mod optics;
pub mod photon;
pub mod stats;

pub use algebra::{Angle, ComplexAmp, JonesVector};
pub use error::{LabError, Result};
pub use model::ModelId;
