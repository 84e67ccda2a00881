//! Independent ground truths (pure dephasing, brute-force discretized bath)
//! and the cross-backend comparison harness.

mod compare;
mod dephasing;
mod discretized;

pub use compare::{cross_compare, ComparisonReport, ElementDeviation, ToleranceSpec, Trajectory};
pub use dephasing::{common_eigenbasis, dephasing_oracle, double_integral, DEPHASING_PREFACTOR};
pub use discretized::{discretized_bath_oracle, recurrence_time, DiscreteMode, DiscretizedOptions};
