use super::result::{validate_grid, validate_initial, PropagationResult};
use crate::decomposition::{EffectiveModeSet, QuasiThermalModes};
use crate::ode::{Integrator, OdeSystem, StepStats, Tolerances};
use crate::sparse::vec_from_mat;
use crate::state_space::{
    build_extended_generator, build_quasi_thermal_generator, ExtendedGenerator, GeneratorForm,
    GeneratorOptions, SystemModel, TruncationSpec,
};
use crate::{CMat, Error, Result, C64};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PseudomodeOptions {
    pub tol: Tolerances,
    pub generator: GeneratorOptions,
    /// Largest tolerated matrix element at a Fock cutoff before the run is
    /// flagged as unconverged in the cutoffs.
    pub edge_tol: f64,
    pub watchdog: f64,
}

impl Default for PseudomodeOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            generator: GeneratorOptions::default(),
            edge_tol: 1e-6,
            watchdog: 1e6,
        }
    }
}

/// Bath description accepted by the pseudomode backends.
#[derive(Clone, Copy, Debug)]
pub enum PseudomodeBath<'a> {
    Set(&'a EffectiveModeSet),
    QuasiThermal(&'a QuasiThermalModes),
}

struct Linear<'a> {
    gen: &'a ExtendedGenerator,
    limit: f64,
}

impl OdeSystem for Linear<'_> {
    fn rhs(&mut self, _t: f64, y: &[C64], dy: &mut [C64]) {
        self.gen.apply(y, dy);
    }

    fn after_step(&mut self, t: f64, y: &mut [C64]) -> Result<bool> {
        let norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm <= self.limit) {
            return Err(Error::Instability(format!(
                "extended state norm {norm:.3e} exceeded the watchdog at t = {t}"
            )));
        }
        Ok(false)
    }
}

/// Integrates the column-stacked extended state, calling `observe` on every
/// grid point.
pub fn propagate_extended<O: FnMut(usize, &[C64])>(
    gen: &ExtendedGenerator,
    initial: &CMat,
    grid: &[f64],
    tol: Tolerances,
    watchdog: f64,
    observe: O,
) -> Result<StepStats> {
    validate_grid(grid)?;
    if initial.shape() != (gen.dim(), gen.dim()) {
        return Err(Error::Validation(
            "initial extended state does not match the generator".into(),
        ));
    }
    let y0 = vec_from_mat(initial);
    let norm0 = y0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut sys = Linear {
        gen,
        limit: watchdog * norm0.max(1e-300),
    };
    Integrator::new(tol).integrate(&mut sys, &y0, grid, observe)
}

/// Propagates a generator from `initial` and reduces to rho_s with cutoff
/// and occupation diagnostics.
pub fn propagate_generator(
    gen: &ExtendedGenerator,
    initial: &CMat,
    grid: &[f64],
    opts: &PseudomodeOptions,
) -> Result<PropagationResult> {
    let space = &gen.space;
    let dim = gen.dim();
    let d = space.d;
    let occ: Vec<Vec<usize>> = (0..space.modes_dim).map(|m| space.occupations(m)).collect();
    let edge: Vec<bool> = (0..dim)
        .map(|r| occ[r / d].iter().zip(&space.cutoffs).any(|(n, c)| n == c))
        .collect();
    let k = space.cutoffs.len();
    let density = gen.form.is_density_form();
    let mut rho = Vec::with_capacity(grid.len());
    let mut max_edge = 0.0f64;
    let mut max_occ = 0.0f64;
    let stats = propagate_extended(gen, initial, grid, opts.tol, opts.watchdog, |_, y| {
        rho.push(gen.project(y).rho);
        for c in 0..dim {
            for r in 0..dim {
                if edge[r] || edge[c] {
                    max_edge = max_edge.max(y[r + dim * c].norm());
                }
            }
        }
        if density {
            for q in 0..k {
                let mut n = 0.0;
                for (m, o) in occ.iter().enumerate() {
                    if o[q] == 0 {
                        continue;
                    }
                    for i in 0..d {
                        let r = i + d * m;
                        n += o[q] as f64 * y[r + dim * r].re;
                    }
                }
                max_occ = max_occ.max(n);
            }
        }
    })?;
    let label = match gen.form {
        GeneratorForm::FirstForm => "pseudomode-first-form",
        GeneratorForm::SecondForm => "pseudomode-second-form",
        GeneratorForm::QuasiLindblad => "pseudomode-quasi-lindblad",
        GeneratorForm::StrictLindblad => "pseudomode-strict-lindblad",
        GeneratorForm::QuasiThermal => "pseudomode-quasi-thermal",
        GeneratorForm::ChainUnitary => "pseudomode-chain-unitary",
    };
    let mut result = PropagationResult::new(label, grid.to_vec(), rho);
    result.diagnostics.steps = stats;
    result.diagnostics.edge_population = Some(max_edge);
    if density {
        result.diagnostics.max_occupation = Some(max_occ);
    }
    if max_edge > opts.edge_tol {
        result.flag(format!(
            "Fock cutoffs {:?} not converged: element {max_edge:.3e} at the cutoff exceeds {:.1e}",
            space.cutoffs, opts.edge_tol
        ));
    }
    Ok(result)
}

/// Pseudomode propagation: quasi-thermal modes start in their thermal states,
/// all other forms in the vacuum.
pub fn pseudomode_propagate(
    model: &SystemModel,
    rho0: &CMat,
    bath: PseudomodeBath<'_>,
    trunc: &TruncationSpec,
    form: GeneratorForm,
    grid: &[f64],
    opts: &PseudomodeOptions,
) -> Result<PropagationResult> {
    validate_grid(grid)?;
    validate_initial(rho0, model.dim())?;
    let (gen, initial) = match bath {
        PseudomodeBath::Set(set) => {
            let gen = build_extended_generator(model, set, trunc, form, &opts.generator)?;
            let init = gen.space.vacuum_product(rho0);
            (gen, init)
        }
        PseudomodeBath::QuasiThermal(qt) => {
            if form != GeneratorForm::QuasiThermal {
                return Err(Error::Structural(
                    "quasi-thermal modes require the quasi-thermal form".into(),
                ));
            }
            let gen = build_quasi_thermal_generator(model, qt, trunc, &opts.generator)?;
            let init = gen.space.thermal_product(rho0, &qt.n)?;
            (gen, init)
        }
    };
    propagate_generator(&gen, &initial, grid, opts)
}

/// Runs at `trunc.cutoffs` and at doubled cutoffs; the doubled run is returned
/// with the deviation between the two recorded, flagged above `tol`.
#[allow(clippy::too_many_arguments)]
pub fn pseudomode_converged(
    model: &SystemModel,
    rho0: &CMat,
    bath: PseudomodeBath<'_>,
    trunc: &TruncationSpec,
    form: GeneratorForm,
    grid: &[f64],
    opts: &PseudomodeOptions,
    tol: f64,
) -> Result<PropagationResult> {
    let base = pseudomode_propagate(model, rho0, bath, trunc, form, grid, opts)?;
    let doubled = TruncationSpec {
        cutoffs: trunc.cutoffs.iter().map(|&n| 2 * n.max(1)).collect(),
        ..trunc.clone()
    };
    let mut fine = match pseudomode_propagate(model, rho0, bath, &doubled, form, grid, opts) {
        Ok(r) => r,
        Err(Error::DimensionGuard { dim, limit, .. }) => {
            let mut r = base;
            r.flag(format!(
                "cutoff check skipped: doubled dimension {dim} exceeds {limit}"
            ));
            return Ok(r);
        }
        Err(e) => return Err(e),
    };
    let delta = base.max_deviation(&fine)?;
    fine.diagnostics.cutoff_delta = Some(delta);
    if delta > tol {
        fine.flag(format!(
            "Fock cutoffs not converged: doubling changed rho_s by {delta:.3e} > {tol:.1e}"
        ));
    }
    Ok(fine)
}
