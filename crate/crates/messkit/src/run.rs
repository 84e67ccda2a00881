//! Subcommand pipelines: fit, build, propagate, emit.

use crate::config::{Backend, ConfigError, Method, OracleKind, RunConfig, SolverConfig};
use messkit_core::bath::{decay_time, CorrelationFunction, QuadratureOptions};
use messkit_core::decomposition::{
    chain_map, fit_noise_power, quasi_thermal_fit, ChainCoefficients, EffectiveModeSet,
    ExponentialModes, QuasiThermalModes,
};
use messkit_core::deterministic::*;
use messkit_core::io::{
    emit_timeseries, write_json, write_modeset, write_table, Observable, Table,
};
use messkit_core::oracle::{
    cross_compare, dephasing_oracle, discretized_bath_oracle, DiscretizedOptions, ToleranceSpec,
    Trajectory,
};
use messkit_core::state_space::{GeneratorForm, SystemModel, TruncationSpec};
use messkit_core::stochastic::{
    hops_propagate_ensemble, sln_propagate_ensemble, NoiseSource, TrajectoryEnsemble,
};
use messkit_core::suite::{run_suite, SuiteOptions};
use messkit_core::{CMat, C64};
use serde_json::json;
use std::path::{Path, PathBuf};

/// Failure with its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            code: 2,
            message: e.0,
        }
    }
}

impl From<messkit_core::Error> for Failure {
    fn from(e: messkit_core::Error) -> Self {
        use messkit_core::Error as E;
        let code = match e {
            E::Validation(_)
            | E::OutOfDomain { .. }
            | E::DimensionGuard { .. }
            | E::Precondition(_)
            | E::Structural(_) => 2,
            E::Accuracy { .. } | E::Instability(_) => 1,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

pub type Outcome = Result<bool, Failure>;

/// Command-line settings shared by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

pub struct Context {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
    model: SystemModel,
    rho0: CMat,
}

impl Context {
    pub fn new(mut cfg: RunConfig, ov: &Overrides) -> Result<Self, Failure> {
        if let Some(seed) = ov.seed {
            cfg.solver.seed = seed;
            if let Some(c) = cfg.compare.as_mut() {
                c.a.seed = seed;
                c.b.seed = seed;
            }
        }
        let out_dir = ov.out_dir.clone().unwrap_or_else(|| cfg.output.dir.clone());
        let (h, s, rho0) = cfg.model_parts()?;
        let model = SystemModel::new(h, s).map_err(|e| Failure {
            code: 2,
            message: format!("system: {e}"),
        })?;
        validate_initial(&rho0, model.dim()).map_err(|e| Failure {
            code: 2,
            message: format!("system.rho0: {e}"),
        })?;
        Ok(Self {
            cfg,
            out_dir,
            model,
            rho0,
        })
    }

    fn stem(&self, suffix: &str) -> String {
        if suffix.is_empty() {
            self.cfg.output.stem.clone()
        } else {
            format!("{}_{suffix}", self.cfg.output.stem)
        }
    }

    fn observables(&self) -> Vec<Observable> {
        let d = self.model.dim();
        match &self.cfg.output.observables {
            Some(names) => names
                .iter()
                .filter_map(|n| Observable::by_name(n, d).ok())
                .collect(),
            None => Observable::defaults(d),
        }
    }

    fn emit<'a>(
        &self,
        suffix: &str,
        traj: impl Into<Trajectory<'a>>,
        extra: serde_json::Value,
    ) -> Result<(), Failure> {
        let extra = json!({ "config": self.cfg, "details": extra });
        emit_timeseries(
            &self.out_dir,
            &self.stem(suffix),
            traj,
            &self.observables(),
            extra,
            self.cfg.output.plot,
        )?;
        Ok(())
    }
}

/// Output of the decomposition step.
pub struct Decomposed {
    pub modes: Option<ExponentialModes>,
    pub set: Option<EffectiveModeSet>,
    pub quasi_thermal: Option<QuasiThermalModes>,
    pub chain: Option<ChainCoefficients>,
    pub tolerance: f64,
    pub flagged: Vec<String>,
    pub summary: serde_json::Value,
}

pub fn decompose(cfg: &RunConfig) -> Result<Decomposed, Failure> {
    let dec = &cfg.decomposition;
    let mut out = Decomposed {
        modes: None,
        set: None,
        quasi_thermal: None,
        chain: None,
        tolerance: 0.0,
        flagged: Vec::new(),
        summary: json!({}),
    };
    match dec.method {
        Method::Modes => {
            let m = dec.modes.as_ref().expect("validated");
            let get = |v: &Vec<f64>, i: usize| v.get(i).copied().unwrap_or(0.0);
            let d = (0..m.d_re.len())
                .map(|i| C64::new(m.d_re[i], get(&m.d_im, i)))
                .collect();
            let z = (0..m.z_re.len())
                .map(|i| C64::new(m.z_re[i], get(&m.z_im, i)))
                .collect();
            let modes = ExponentialModes::new(d, z)?;
            out.summary = json!({ "method": "modes", "K": modes.len() });
            out.set = Some(EffectiveModeSet::star(&modes));
            out.modes = Some(modes);
        }
        Method::Aaa => {
            let s = cfg.noise_power()?;
            let fit = fit_noise_power(&s, dec.fit)?;
            let c0 = fit.reference.eval(0.0).norm();
            out.tolerance = fit.rational.achieved;
            out.summary = json!({
                "method": "aaa",
                "K": fit.modes.len(),
                "aaa_order": fit.rational.order(),
                "achieved": fit.rational.achieved,
                "residual_bound": fit.modes.residual_bound,
                "relative_residual": fit.modes.residual_bound / c0,
                "t_max": fit.modes.t_max,
            });
            out.set = Some(EffectiveModeSet::star(&fit.modes));
            out.modes = Some(fit.modes);
        }
        Method::Chain => {
            let s = cfg.noise_power()?;
            let chain = chain_map(&s, dec.chain_sites, dec.chain_power)?;
            if chain.flagged {
                out.flagged.push(format!(
                    "chain orthogonality lost after {} of {} sites",
                    chain.len(),
                    chain.requested
                ));
            }
            out.tolerance = chain.krylov_error;
            out.summary = json!({
                "method": "chain",
                "sites": chain.len(),
                "l": chain.l,
                "normalization": chain.normalization,
                "krylov_error": chain.krylov_error,
            });
            if chain.l == 1 {
                out.set = Some(chain.to_modeset()?);
            }
            out.chain = Some(chain);
        }
        Method::QuasiThermal => {
            let s = cfg.noise_power()?;
            let t_max = match dec.quasi_thermal_t_max {
                Some(t) => t,
                None => 10.0 * decay_time(&s, dec.fit.quadrature_tol)?,
            };
            let c = CorrelationFunction::quadrature(
                s,
                QuadratureOptions {
                    t_max,
                    tol: dec.fit.quadrature_tol,
                    ..Default::default()
                },
            )?;
            let qt = quasi_thermal_fit(
                &c,
                dec.quasi_thermal_modes,
                dec.quasi_thermal_tol,
                t_max,
                dec.quasi_thermal,
            )?;
            if qt.flagged {
                out.flagged.push(format!(
                    "quasi-thermal residual {:.3e} exceeds {:.1e}",
                    qt.residual, qt.tol
                ));
            }
            out.tolerance = qt.residual;
            out.summary = json!({ "method": "quasi-thermal", "fit": qt });
            let modes = qt.to_exponential();
            out.set = Some(EffectiveModeSet::star(&modes));
            out.modes = Some(modes);
            out.quasi_thermal = Some(qt);
        }
    }
    let k = out.set.as_ref().map_or(0, |s| s.len());
    if let Some(cap) = dec.max_modes {
        if k > cap {
            return Err(Failure {
                code: 1,
                message: format!("decomposition produced {k} modes, above max_modes = {cap}"),
            });
        }
    }
    Ok(out)
}

fn need<'a, T>(x: &'a Option<T>, what: &str, backend: Backend) -> Result<&'a T, Failure> {
    x.as_ref().ok_or_else(|| Failure {
        code: 2,
        message: format!("solver.backend {backend:?} needs {what}"),
    })
}

pub enum Propagated {
    Deterministic(PropagationResult),
    Ensemble(TrajectoryEnsemble),
}

impl Propagated {
    pub fn trajectory(&self) -> Trajectory<'_> {
        match self {
            Propagated::Deterministic(r) => r.into(),
            Propagated::Ensemble(e) => e.into(),
        }
    }

    fn diagnostics(&self) -> &Diagnostics {
        match self {
            Propagated::Deterministic(r) => &r.diagnostics,
            Propagated::Ensemble(e) => &e.diagnostics,
        }
    }
}

/// Runs one backend; returns the result and extra metadata.
pub fn propagate(
    ctx: &Context,
    solver: &SolverConfig,
    dec: &Decomposed,
) -> Result<(Propagated, serde_json::Value), Failure> {
    let grid = uniform_grid(solver.t_max, solver.steps);
    let (model, rho0) = (&ctx.model, &ctx.rho0);
    let backend = solver.backend;
    let det = Propagated::Deterministic;
    let heom = |variant: HeomVariant| -> Result<Propagated, Failure> {
        let modes = need(&dec.modes, "exponential modes", backend)?;
        let mut trunc = TruncationSpec::hierarchy(solver.depth, modes.len());
        trunc.filter = solver.filter;
        let r = if solver.converge {
            heom_converged(
                model,
                rho0,
                modes,
                &trunc,
                variant,
                &grid,
                &solver.heom,
                solver.max_depth,
                solver.converge_tol,
            )?
        } else {
            heom_propagate(model, rho0, modes, &trunc, variant, &grid, &solver.heom)?
        };
        Ok(det(r))
    };
    let mut extra = json!({});
    let out = match backend {
        Backend::HeomGeneralized => heom(HeomVariant::Generalized)?,
        Backend::HeomStandard => heom(HeomVariant::Standard)?,
        Backend::HeomIkeda => heom(HeomVariant::Ikeda)?,
        Backend::Pseudomode => {
            let symmetric;
            let bath = if solver.form == GeneratorForm::QuasiThermal {
                PseudomodeBath::QuasiThermal(need(
                    &dec.quasi_thermal,
                    "a quasi-thermal decomposition",
                    backend,
                )?)
            } else if solver.symmetric {
                symmetric = EffectiveModeSet::star_symmetric(need(
                    &dec.modes,
                    "exponential modes",
                    backend,
                )?)?;
                PseudomodeBath::Set(&symmetric)
            } else {
                PseudomodeBath::Set(need(&dec.set, "a mode set", backend)?)
            };
            let k = match bath {
                PseudomodeBath::Set(s) => s.len(),
                PseudomodeBath::QuasiThermal(q) => q.len(),
            };
            let trunc = TruncationSpec::fock(solver.cutoffs.clone().unwrap_or_else(|| vec![8; k]));
            let r = if solver.converge {
                pseudomode_converged(
                    model,
                    rho0,
                    bath,
                    &trunc,
                    solver.form,
                    &grid,
                    &solver.pseudomode,
                    solver.converge_tol,
                )?
            } else {
                pseudomode_propagate(
                    model,
                    rho0,
                    bath,
                    &trunc,
                    solver.form,
                    &grid,
                    &solver.pseudomode,
                )?
            };
            det(r)
        }
        Backend::Thermofield => {
            let qt = need(&dec.quasi_thermal, "a quasi-thermal decomposition", backend)?;
            let k = qt.len();
            let opts = ThermofieldOptions {
                vacuum_cutoffs: solver
                    .thermofield
                    .vacuum_cutoffs
                    .clone()
                    .unwrap_or_else(|| vec![(8, 8); k]),
                thermal_cutoffs: solver
                    .thermofield
                    .thermal_cutoffs
                    .clone()
                    .unwrap_or_else(|| vec![16; k]),
                propagation: solver.pseudomode,
            };
            let rep = thermofield_transform(model, rho0, qt, &grid, &opts)?;
            extra = json!({
                "max_deviation": rep.max_deviation,
                "comparable": rep.comparable,
                "theta": rep.theta,
            });
            let mut r = rep.vacuum_result;
            if !rep.comparable {
                r.diagnostics.flagged = true;
                r.diagnostics
                    .notes
                    .push("thermal reference not converged in its cutoffs".into());
            }
            det(r)
        }
        Backend::Tcl2 => det(tcl2_propagate(
            model,
            rho0,
            need(&dec.modes, "exponential modes", backend)?,
            &grid,
            &solver.tcl2,
        )?),
        Backend::Sln => {
            let source = match (&dec.modes, &dec.set) {
                (Some(m), _) => NoiseSource::Modes(m),
                (None, Some(s)) => NoiseSource::Set(s),
                _ => {
                    return Err(Failure {
                        code: 2,
                        message: "solver.backend Sln needs a mode set".into(),
                    })
                }
            };
            Propagated::Ensemble(sln_propagate_ensemble(
                model,
                rho0,
                source,
                &grid,
                solver.trajectories,
                solver.seed,
                &solver.sln,
            )?)
        }
        Backend::Hops => {
            let modes = need(&dec.modes, "exponential modes", backend)?;
            Propagated::Ensemble(hops_propagate_ensemble(
                model,
                rho0,
                modes,
                solver.depth,
                &grid,
                solver.trajectories,
                solver.seed,
                &solver.hops,
            )?)
        }
    };
    Ok((out, extra))
}

fn report_flags(label: &str, d: &Diagnostics, flagged: &mut Vec<String>) {
    if d.flagged {
        let notes = if d.notes.is_empty() {
            "flagged".to_string()
        } else {
            d.notes.join("; ")
        };
        flagged.push(format!("{label}: {notes}"));
    }
}

fn finish(flagged: &[String], allow: bool) -> Outcome {
    for f in flagged {
        eprintln!("flagged: {f}");
    }
    Ok(flagged.is_empty() || allow)
}

pub fn cmd_fit(ctx: &Context, allow: bool) -> Outcome {
    let dec = decompose(&ctx.cfg)?;
    std::fs::create_dir_all(&ctx.out_dir).map_err(messkit_core::Error::from)?;
    if let Some(set) = &dec.set {
        write_modeset(
            &ctx.out_dir.join(format!("{}.modes", ctx.stem("fit"))),
            set,
            dec.tolerance,
        )?;
    }
    let mut summary = dec.summary.clone();
    if let Some(m) = &dec.modes {
        summary["d"] = json!(m.d.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>());
        summary["z"] = json!(m.z.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>());
    }
    write_json(
        &ctx.out_dir.join(format!("{}.json", ctx.stem("fit"))),
        &summary,
    )?;
    println!(
        "{}",
        serde_json::to_string(&dec.summary).unwrap_or_default()
    );
    finish(&dec.flagged, allow)
}

pub fn cmd_chainmap(ctx: &Context, allow: bool) -> Outcome {
    let dec = &ctx.cfg.decomposition;
    let s = ctx.cfg.noise_power()?;
    let chain = chain_map(&s, dec.chain_sites, dec.chain_power)?;
    let table = Table {
        header: vec!["n".into(), "site".into(), "hop".into()],
        rows: (0..chain.len())
            .map(|n| vec![n as f64, chain.site[n], chain.hop[n]])
            .collect(),
    };
    std::fs::create_dir_all(&ctx.out_dir).map_err(messkit_core::Error::from)?;
    write_table(
        &ctx.out_dir.join(format!("{}.csv", ctx.stem("chain"))),
        &table,
    )?;
    write_json(
        &ctx.out_dir.join(format!("{}.json", ctx.stem("chain"))),
        &chain,
    )?;
    if chain.l == 1 {
        write_modeset(
            &ctx.out_dir.join(format!("{}.modes", ctx.stem("chain"))),
            &chain.to_modeset()?,
            chain.krylov_error,
        )?;
    }
    println!(
        "sites={} l={} krylov_error={:.3e} normalization={}",
        chain.len(),
        chain.l,
        chain.krylov_error,
        chain.normalization
    );
    let flagged = if chain.flagged {
        vec![format!("orthogonality lost after {} sites", chain.len())]
    } else {
        vec![]
    };
    finish(&flagged, allow)
}

pub fn cmd_propagate(ctx: &Context, allow: bool) -> Outcome {
    let dec = decompose(&ctx.cfg)?;
    let (res, extra) = propagate(ctx, &ctx.cfg.solver, &dec)?;
    ctx.emit(
        "",
        res.trajectory(),
        json!({ "decomposition": dec.summary, "backend": extra }),
    )?;
    let mut flagged = dec.flagged.clone();
    report_flags("propagation", res.diagnostics(), &mut flagged);
    finish(&flagged, allow)
}

pub fn cmd_compare(ctx: &Context, allow: bool) -> Outcome {
    let Some(cmp) = &ctx.cfg.compare else {
        return Err(Failure {
            code: 2,
            message: "compare: section missing from the config".into(),
        });
    };
    let dec = decompose(&ctx.cfg)?;
    let (a, ea) = propagate(ctx, &cmp.a, &dec)?;
    let (b, eb) = propagate(ctx, &cmp.b, &dec)?;
    ctx.emit("a", a.trajectory(), ea)?;
    ctx.emit("b", b.trajectory(), eb)?;
    let rep = cross_compare(
        a.trajectory(),
        b.trajectory(),
        ToleranceSpec {
            abs: cmp.abs,
            sigma: cmp.sigma,
        },
    )?;
    write_json(
        &ctx.out_dir.join(format!("{}.json", ctx.stem("comparison"))),
        &rep,
    )?;
    println!("{}", rep.line("compare"));
    let mut flagged = dec.flagged.clone();
    report_flags("a", a.diagnostics(), &mut flagged);
    report_flags("b", b.diagnostics(), &mut flagged);
    Ok(rep.pass && finish(&flagged, allow)?)
}

pub fn cmd_oracle(ctx: &Context, allow: bool) -> Outcome {
    let Some(o) = &ctx.cfg.oracle else {
        return Err(Failure {
            code: 2,
            message: "oracle: section missing from the config".into(),
        });
    };
    let grid = uniform_grid(ctx.cfg.solver.t_max, ctx.cfg.solver.steps);
    let needs_modes = o.kind == OracleKind::Dephasing || o.tolerance.is_some();
    let dec = if needs_modes {
        Some(decompose(&ctx.cfg)?)
    } else {
        None
    };
    let truth = match o.kind {
        OracleKind::Dephasing => {
            let modes = dec.as_ref().and_then(|d| d.modes.as_ref());
            let modes = modes.ok_or_else(|| Failure {
                code: 2,
                message: "oracle: dephasing needs exponential modes".into(),
            })?;
            dephasing_oracle(&ctx.model, &ctx.rho0, modes, &grid)?
        }
        OracleKind::Discretized => {
            let opts = DiscretizedOptions::new(o.cutoffs.clone(), ctx.cfg.oracle_beta()?);
            discretized_bath_oracle(&ctx.model, &ctx.rho0, &o.modes, &grid, &opts)?
        }
    };
    ctx.emit("oracle", &truth, json!({ "kind": o.kind }))?;
    let mut flagged = Vec::new();
    report_flags("oracle", &truth.diagnostics, &mut flagged);
    for n in &truth.diagnostics.notes {
        eprintln!("note: {n}");
    }
    let Some(tol) = o.tolerance else {
        return finish(&flagged, allow);
    };
    let dec = dec.expect("decomposed above");
    let (res, extra) = propagate(ctx, &ctx.cfg.solver, &dec)?;
    ctx.emit("", res.trajectory(), extra)?;
    let rep = cross_compare(
        res.trajectory(),
        &truth,
        ToleranceSpec {
            abs: tol,
            sigma: 3.0,
        },
    )?;
    write_json(
        &ctx.out_dir.join(format!("{}.json", ctx.stem("comparison"))),
        &rep,
    )?;
    println!("{}", rep.line("oracle"));
    report_flags("solver", res.diagnostics(), &mut flagged);
    Ok(rep.pass && finish(&flagged, allow)?)
}

/// Runs the acceptance criteria and prints one line per criterion.
pub fn cmd_suite(ids: &[u8], seed: Option<u64>, out_dir: Option<&Path>) -> Outcome {
    let mut opts = SuiteOptions {
        out_dir: out_dir.map(Path::to_path_buf),
        ..Default::default()
    };
    if let Some(s) = seed {
        opts.seed = s;
    }
    let reports = run_suite(ids, &opts);
    for r in &reports {
        println!("{}", r.line());
        for n in &r.notes {
            println!("    {n}");
        }
    }
    if let Some(dir) = out_dir {
        write_json(&dir.join("suite_report.json"), &reports)?;
    }
    Ok(reports.iter().all(|r| r.pass))
}
