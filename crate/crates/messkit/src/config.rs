//! TOML run configuration, schema version 1.

use messkit_core::bath::{NoisePower, SpectralDensity};
use messkit_core::decomposition::{FitOptions, QuasiThermalOptions};
use messkit_core::deterministic::{HeomOptions, PseudomodeOptions, Tcl2Options};
use messkit_core::oracle::DiscreteMode;
use messkit_core::state_space::GeneratorForm;
use messkit_core::stochastic::{HopsOptions, SlnOptions};
use messkit_core::{CMat, C64};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// Invalid configuration; reported with exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub system: SystemConfig,
    pub bath: Option<BathConfig>,
    #[serde(default)]
    pub decomposition: DecompositionConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub compare: Option<CompareConfig>,
    pub oracle: Option<OracleConfig>,
}

/// Dense matrix given by its real part and an optional imaginary part.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    pub re: Vec<Vec<f64>>,
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixConfig {
    fn to_matrix(&self, d: usize, field: &str) -> Result<CMat, ConfigError> {
        let shape_ok = |m: &Vec<Vec<f64>>| m.len() == d && m.iter().all(|r| r.len() == d);
        if !shape_ok(&self.re) || self.im.as_ref().is_some_and(|m| !shape_ok(m)) {
            return invalid(format!("{field}: expected a {d}x{d} matrix"));
        }
        Ok(CMat::from_fn(d, d, |i, j| {
            C64::new(self.re[i][j], self.im.as_ref().map_or(0.0, |m| m[i][j]))
        }))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub d: usize,
    pub h: MatrixConfig,
    pub s: MatrixConfig,
    pub rho0: MatrixConfig,
}

/// Inverse temperature: a number or "inf".
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Beta {
    Value(f64),
    Text(String),
}

impl Beta {
    fn value(&self, field: &str) -> Result<f64, ConfigError> {
        let b = match self {
            Beta::Value(b) => *b,
            Beta::Text(t) if matches!(t.as_str(), "inf" | "infinity") => f64::INFINITY,
            Beta::Text(t) => {
                return invalid(format!("{field}: expected a number or \"inf\", got {t:?}"))
            }
        };
        if !(b >= 0.0) {
            return invalid(format!("{field}: must be >= 0, got {b}"));
        }
        Ok(b)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    pub beta: Beta,
    /// Builtin density; tagged by `kind`.
    pub density: Option<SpectralDensity>,
    /// Two-column (omega, J) text file, relative to the config file.
    pub file: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Aaa,
    Chain,
    QuasiThermal,
    Modes,
}

/// C(t) = sum d_k exp(-z_k t) given directly.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitModes {
    pub d_re: Vec<f64>,
    #[serde(default)]
    pub d_im: Vec<f64>,
    pub z_re: Vec<f64>,
    #[serde(default)]
    pub z_im: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecompositionConfig {
    pub method: Method,
    pub fit: FitOptions,
    /// Largest accepted mode count.
    pub max_modes: Option<usize>,
    pub chain_sites: usize,
    /// Moment power of the chain measure (1 or 2).
    pub chain_power: u32,
    pub quasi_thermal_modes: usize,
    pub quasi_thermal_tol: f64,
    /// Fit window of the quasi-thermal fit; ten decay times when absent.
    pub quasi_thermal_t_max: Option<f64>,
    pub quasi_thermal: QuasiThermalOptions,
    pub modes: Option<ExplicitModes>,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        Self {
            method: Method::Aaa,
            fit: FitOptions::default(),
            max_modes: None,
            chain_sites: 8,
            chain_power: 1,
            quasi_thermal_modes: 1,
            quasi_thermal_tol: 1e-3,
            quasi_thermal_t_max: None,
            quasi_thermal: QuasiThermalOptions::default(),
            modes: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    HeomGeneralized,
    HeomStandard,
    HeomIkeda,
    Pseudomode,
    Thermofield,
    Tcl2,
    Sln,
    Hops,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermofieldConfig {
    pub vacuum_cutoffs: Option<Vec<(usize, usize)>>,
    pub thermal_cutoffs: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub backend: Backend,
    /// Hierarchy depth.
    pub depth: usize,
    /// Fock cutoff per pseudomode; 8 for every mode when absent.
    pub cutoffs: Option<Vec<usize>>,
    pub form: GeneratorForm,
    /// Use kappa = eta = sqrt(d) instead of the default split.
    pub symmetric: bool,
    /// Hierarchy importance filter threshold.
    pub filter: f64,
    /// Increase depth or cutoffs until successive runs agree to `converge_tol`.
    pub converge: bool,
    pub max_depth: usize,
    pub converge_tol: f64,
    pub t_max: f64,
    pub steps: usize,
    pub trajectories: usize,
    pub seed: u64,
    pub heom: HeomOptions,
    pub pseudomode: PseudomodeOptions,
    pub tcl2: Tcl2Options,
    pub sln: SlnOptions,
    pub hops: HopsOptions,
    pub thermofield: ThermofieldConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            backend: Backend::HeomGeneralized,
            depth: 6,
            cutoffs: None,
            form: GeneratorForm::QuasiLindblad,
            symmetric: false,
            filter: 0.0,
            converge: false,
            max_depth: 16,
            converge_tol: 1e-6,
            t_max: 10.0,
            steps: 100,
            trajectories: 1000,
            seed: 1,
            heom: HeomOptions::default(),
            pseudomode: PseudomodeOptions::default(),
            tcl2: Tcl2Options::default(),
            sln: SlnOptions::default(),
            hops: HopsOptions::default(),
            thermofield: ThermofieldConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub stem: String,
    /// `sz`, `sx`, `sy` or `p<k>`; `sz` for qubits when absent.
    pub observables: Option<Vec<String>>,
    /// Also write a gnuplot script per time series.
    pub plot: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            stem: "run".into(),
            observables: None,
            plot: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub a: SolverConfig,
    pub b: SolverConfig,
    #[serde(default = "default_abs")]
    pub abs: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn default_abs() -> f64 {
    1e-4
}

fn default_sigma() -> f64 {
    3.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Dephasing,
    Discretized,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub kind: OracleKind,
    #[serde(default)]
    pub modes: Vec<DiscreteMode>,
    #[serde(default)]
    pub cutoffs: Vec<usize>,
    pub beta: Option<Beta>,
    /// When set, the solver also runs and must agree with the oracle.
    pub tolerance: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))?;
        if let Some(bath) = cfg.bath.as_mut() {
            if let Some(file) = bath.file.as_mut() {
                if file.is_relative() {
                    *file = path.parent().unwrap_or(Path::new(".")).join(&*file);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return invalid(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            ));
        }
        let d = self.system.d;
        if d < 2 {
            return invalid("system.d: must be at least 2");
        }
        self.system.h.to_matrix(d, "system.h")?;
        self.system.s.to_matrix(d, "system.s")?;
        self.system.rho0.to_matrix(d, "system.rho0")?;
        if let Some(bath) = &self.bath {
            bath.beta.value("bath.beta")?;
            if bath.density.is_some() == bath.file.is_some() {
                return invalid("bath: give exactly one of density and file");
            }
        }
        let dec = &self.decomposition;
        match dec.method {
            Method::Modes => {
                let Some(m) = &dec.modes else {
                    return invalid("decomposition.modes: required for method = \"modes\"");
                };
                let k = m.d_re.len();
                let ok = |v: &Vec<f64>| v.is_empty() || v.len() == k;
                if k == 0 || m.z_re.len() != k || !ok(&m.d_im) || !ok(&m.z_im) {
                    return invalid(
                        "decomposition.modes: d_re, d_im, z_re and z_im need equal lengths",
                    );
                }
            }
            _ if self.bath.is_none() => {
                return invalid("bath: required unless decomposition.method = \"modes\"")
            }
            _ => {}
        }
        self.solver.validate("solver")?;
        if let Some(c) = &self.compare {
            c.a.validate("compare.a")?;
            c.b.validate("compare.b")?;
            if !(c.abs > 0.0) || !(c.sigma > 0.0) {
                return invalid("compare: abs and sigma must be positive");
            }
        }
        if let Some(o) = &self.oracle {
            if let Some(b) = &o.beta {
                b.value("oracle.beta")?;
            }
            if o.kind == OracleKind::Discretized
                && (o.modes.is_empty() || o.modes.len() != o.cutoffs.len())
            {
                return invalid("oracle: discretized needs one cutoff per mode");
            }
        }
        if let Some(obs) = &self.output.observables {
            for name in obs {
                messkit_core::io::Observable::by_name(name, d)
                    .map_err(|e| ConfigError(format!("output.observables: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn model_parts(&self) -> Result<(CMat, CMat, CMat), ConfigError> {
        let d = self.system.d;
        Ok((
            self.system.h.to_matrix(d, "system.h")?,
            self.system.s.to_matrix(d, "system.s")?,
            self.system.rho0.to_matrix(d, "system.rho0")?,
        ))
    }

    pub fn noise_power(&self) -> Result<NoisePower, ConfigError> {
        let Some(bath) = &self.bath else {
            return invalid("bath: missing");
        };
        let beta = bath.beta.value("bath.beta")?;
        let density = match (&bath.density, &bath.file) {
            (Some(d), _) => d.clone(),
            (None, Some(f)) => {
                let text = std::fs::read_to_string(f)
                    .map_err(|e| ConfigError(format!("bath.file: {}: {e}", f.display())))?;
                SpectralDensity::Tabulated(
                    messkit_core::bath::read_tabulated(&text)
                        .map_err(|e| ConfigError(format!("bath.file: {e}")))?,
                )
            }
            (None, None) => return invalid("bath: give exactly one of density and file"),
        };
        density
            .validate()
            .map_err(|e| ConfigError(format!("bath.density: {e}")))?;
        NoisePower::new(density, beta).map_err(|e| ConfigError(format!("bath: {e}")))
    }

    pub fn oracle_beta(&self) -> Result<f64, ConfigError> {
        match self.oracle.as_ref().and_then(|o| o.beta.as_ref()) {
            Some(b) => b.value("oracle.beta"),
            None => Ok(f64::INFINITY),
        }
    }
}

impl SolverConfig {
    fn validate(&self, field: &str) -> Result<(), ConfigError> {
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return invalid(format!("{field}.t_max: must be positive and finite"));
        }
        if self.steps == 0 {
            return invalid(format!("{field}.steps: must be at least 1"));
        }
        if matches!(self.backend, Backend::Sln | Backend::Hops) && self.trajectories < 2 {
            return invalid(format!("{field}.trajectories: must be at least 2"));
        }
        if self
            .cutoffs
            .as_ref()
            .is_some_and(|c| c.iter().any(|&n| n < 1))
        {
            return invalid(format!("{field}.cutoffs: every cutoff must be at least 1"));
        }
        Ok(())
    }
}
