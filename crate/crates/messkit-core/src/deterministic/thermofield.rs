use super::pseudomode::{propagate_generator, PseudomodeOptions};
use super::result::{validate_grid, validate_initial, PropagationResult};
use crate::decomposition::{EffectiveModeSet, QuasiThermalModes, Topology};
use crate::state_space::{
    build_extended_generator, build_quasi_thermal_generator, ExtendedGenerator, GeneratorForm,
    SystemModel, TruncationSpec,
};
use crate::{CMat, CVec, Error, Result, C64};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThermofieldOptions {
    /// Cutoffs (b-like, c-like) of each vacuum mode pair.
    pub vacuum_cutoffs: Vec<(usize, usize)>,
    /// Cutoff of each thermal mode.
    pub thermal_cutoffs: Vec<usize>,
    pub propagation: PseudomodeOptions,
}

/// Both generators of the thermofield pair with their reduced dynamics.
#[derive(Clone, Debug)]
pub struct ThermofieldReport {
    /// Two vacuum modes per thermal mode: E = diag(w - i gamma, -w - i gamma),
    /// kappa = eta = (g sqrt(n+1), g sqrt(n)).
    pub vacuum_set: EffectiveModeSet,
    pub vacuum: ExtendedGenerator,
    pub thermal: ExtendedGenerator,
    /// Squeezing angle per mode, cosh(theta) = sqrt(n+1), sinh(theta) = -sqrt(n).
    pub theta: Vec<f64>,
    /// Kossakowski matrix over (b, c, b^dag, c^dag) in the squeezed frame.
    pub squeezed_kossakowski: Vec<CMat>,
    pub vacuum_result: PropagationResult,
    pub thermal_result: PropagationResult,
    pub max_deviation: f64,
    /// False when either run is not converged in its Fock cutoffs.
    pub comparable: bool,
}

/// Vacuum mode pair encoding the same C(t) as the quasi-thermal modes.
pub fn thermofield_vacuum_set(gq: &QuasiThermalModes) -> Result<EffectiveModeSet> {
    let k = gq.len();
    let mut e = CMat::zeros(2 * k, 2 * k);
    let mut kappa = CVec::zeros(2 * k);
    for j in 0..k {
        let (g, n, w, gam) = (gq.g[j], gq.n[j], gq.omega[j], gq.gamma[j]);
        e[(2 * j, 2 * j)] = C64::new(w, -gam);
        e[(2 * j + 1, 2 * j + 1)] = C64::new(-w, -gam);
        kappa[2 * j] = C64::new(g * (n + 1.0).sqrt(), 0.0);
        kappa[2 * j + 1] = C64::new(g * n.sqrt(), 0.0);
    }
    EffectiveModeSet::new(e, kappa.clone(), kappa, Topology::Star)
}

/// gamma sum_a v_a v_a^dag for a_1 = cosh b + sinh c^dag, a_2 = cosh c + sinh b^dag.
pub fn squeezed_kossakowski(n: f64, gamma: f64) -> (f64, CMat) {
    let theta = -n.sqrt().asinh();
    let (ch, sh) = (theta.cosh(), theta.sinh());
    let v1 = [ch, 0.0, 0.0, sh];
    let v2 = [0.0, ch, sh, 0.0];
    let m = CMat::from_fn(4, 4, |i, j| {
        C64::new(gamma * (v1[i] * v1[j] + v2[i] * v2[j]), 0.0)
    });
    (theta, m)
}

/// Builds the two-mode vacuum and one-mode thermal generators for each
/// quasi-thermal mode and compares their reduced dynamics on `grid`.
pub fn thermofield_transform(
    model: &SystemModel,
    rho0: &CMat,
    gq: &QuasiThermalModes,
    grid: &[f64],
    opts: &ThermofieldOptions,
) -> Result<ThermofieldReport> {
    validate_grid(grid)?;
    validate_initial(rho0, model.dim())?;
    let k = gq.len();
    if k == 0 || opts.vacuum_cutoffs.len() != k || opts.thermal_cutoffs.len() != k {
        return Err(Error::Validation(
            "thermofield cutoffs must be given for every quasi-thermal mode".into(),
        ));
    }
    if gq.n.iter().any(|&n| !(n >= 0.0)) {
        return Err(Error::Validation("occupations must be non-negative".into()));
    }
    let vacuum_set = thermofield_vacuum_set(gq)?;
    let vac_cut: Vec<usize> = opts
        .vacuum_cutoffs
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .collect();
    let vacuum = build_extended_generator(
        model,
        &vacuum_set,
        &TruncationSpec::fock(vac_cut),
        GeneratorForm::StrictLindblad,
        &opts.propagation.generator,
    )?;
    let thermal = build_quasi_thermal_generator(
        model,
        gq,
        &TruncationSpec::fock(opts.thermal_cutoffs.clone()),
        &opts.propagation.generator,
    )?;
    let vacuum_result = propagate_generator(
        &vacuum,
        &vacuum.space.vacuum_product(rho0),
        grid,
        &opts.propagation,
    )?;
    let thermal_init = thermal.space.thermal_product(rho0, &gq.n)?;
    let thermal_result = propagate_generator(&thermal, &thermal_init, grid, &opts.propagation)?;
    let max_deviation = vacuum_result.max_deviation(&thermal_result)?;
    let comparable = !vacuum_result.diagnostics.flagged && !thermal_result.diagnostics.flagged;
    let mut theta = Vec::with_capacity(k);
    let mut squeezed = Vec::with_capacity(k);
    for j in 0..k {
        let (t, m) = squeezed_kossakowski(gq.n[j], gq.gamma[j]);
        theta.push(t);
        squeezed.push(m);
    }
    Ok(ThermofieldReport {
        vacuum_set,
        vacuum,
        thermal,
        theta,
        squeezed_kossakowski: squeezed,
        vacuum_result,
        thermal_result,
        max_deviation,
        comparable,
    })
}
