//! Compression of a bath into effective modes {E, kappa, eta}.

mod aaa;
mod chain;
mod modes;
mod modeset;
mod quasi_thermal;

pub use aaa::{aaa_fit, AaaOptions, BarycentricRational};
pub use chain::{
    chain_closure_spectrum, chain_map, stieltjes, ChainCoefficients, ClosureSpectrum, Recurrence,
    TerminalBath,
};
pub use modes::{
    candidate_grid, extract_exponential_modes, fit_noise_power, modes_from_rational,
    sample_noise_power, BathFit, ExponentialModes, FitOptions,
};
pub use modeset::{
    reconstruct_correlation, reconstruct_spectrum, transform_modeset, EffectiveModeSet, Topology,
    CONDITION_BOUND,
};
pub use quasi_thermal::{
    quasi_thermal_fit, quasi_thermal_fit_samples, QuasiThermalModes, QuasiThermalOptions,
};
