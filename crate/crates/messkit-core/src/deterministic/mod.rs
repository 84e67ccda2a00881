//! Deterministic propagation backends: hierarchies, pseudomode generators,
//! the thermofield pair and the second-order master equation.

mod hierarchy;
mod pseudomode;
mod result;
mod tcl2;
mod thermofield;

pub use hierarchy::{
    heom_converged, heom_propagate, heom_propagate_split, propagate_hierarchy, HeomOptions,
    HeomVariant, Hierarchy, HierarchyState, IkedaSplit,
};
pub use pseudomode::{
    propagate_extended, propagate_generator, pseudomode_converged, pseudomode_propagate,
    PseudomodeBath, PseudomodeOptions,
};
pub use result::{uniform_grid, validate_grid, validate_initial, Diagnostics, PropagationResult};
pub use tcl2::{tcl2_propagate, Tcl2Options};
pub use thermofield::{
    squeezed_kossakowski, thermofield_transform, thermofield_vacuum_set, ThermofieldOptions,
    ThermofieldReport,
};
