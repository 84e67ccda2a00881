//! System models, Fock truncation of effective modes and extended-space
//! generators.

mod fock;
mod generator;
mod model;

pub use fock::FockSpace;
pub use generator::{
    build_extended_generator, build_quasi_thermal_generator, kossakowski_matrix,
    project_reduced_state, ExtendedGenerator, GeneratorForm, GeneratorOptions, ReducedState,
};
pub use model::{apply_superops, SystemModel, TruncationSpec};
