use crate::linalg::{hermitian_eigen, max_abs};
use crate::ode::StepStats;
use crate::{CMat, Error, Result, C64};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: StepStats,
    /// max_t |Tr rho_s(t) - 1|
    pub trace_drift: f64,
    /// max_t ||rho_s - rho_s^dag||_max
    pub hermiticity: f64,
    /// Smallest eigenvalue of the Hermitian part of rho_s over the grid.
    pub min_eigenvalue: f64,
    pub filter_discards: usize,
    pub ado_count: Option<usize>,
    pub max_active: Option<usize>,
    pub max_occupation: Option<f64>,
    /// Largest matrix element touching a Fock level at its cutoff.
    pub edge_population: Option<f64>,
    /// Max deviation between depth L and L + 1.
    pub depth_delta: Option<f64>,
    /// Max deviation between the requested Fock cutoffs and their doubles.
    pub cutoff_delta: Option<f64>,
    pub flagged: bool,
    pub notes: Vec<String>,
}

/// Reduced density operator samples on a time grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropagationResult {
    pub backend: String,
    pub times: Vec<f64>,
    pub rho: Vec<CMat>,
    pub diagnostics: Diagnostics,
}

impl PropagationResult {
    pub fn new(backend: impl Into<String>, times: Vec<f64>, rho: Vec<CMat>) -> Self {
        let mut diagnostics = Diagnostics {
            min_eigenvalue: f64::INFINITY,
            ..Default::default()
        };
        for r in &rho {
            diagnostics.trace_drift = diagnostics
                .trace_drift
                .max((r.trace() - C64::new(1.0, 0.0)).norm());
            let herm = r.adjoint();
            diagnostics.hermiticity = diagnostics.hermiticity.max(max_abs(&(r - &herm)));
            let (vals, _) = hermitian_eigen(&((r + herm) * C64::new(0.5, 0.0)));
            diagnostics.min_eigenvalue = diagnostics.min_eigenvalue.min(vals[0]);
        }
        Self {
            backend: backend.into(),
            times,
            rho,
            diagnostics,
        }
    }

    pub fn dim(&self) -> usize {
        self.rho.first().map_or(0, |r| r.nrows())
    }

    pub fn flag(&mut self, note: impl Into<String>) {
        self.diagnostics.flagged = true;
        self.diagnostics.notes.push(note.into());
    }

    /// Tr(O rho_s(t)) on the grid.
    pub fn expectation(&self, op: &CMat) -> Vec<C64> {
        self.rho.iter().map(|r| (op * r).trace()).collect()
    }

    pub fn element(&self, i: usize, j: usize) -> Vec<C64> {
        self.rho.iter().map(|r| r[(i, j)]).collect()
    }

    /// max over the grid and all matrix elements of |a - b|; grids must match.
    pub fn max_deviation(&self, other: &PropagationResult) -> Result<f64> {
        if self.times.len() != other.times.len()
            || self
                .times
                .iter()
                .zip(&other.times)
                .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
        {
            return Err(Error::Validation(
                "results live on different time grids".into(),
            ));
        }
        if self.dim() != other.dim() {
            return Err(Error::Validation(
                "results have different system dimensions".into(),
            ));
        }
        Ok(self
            .rho
            .iter()
            .zip(&other.rho)
            .map(|(a, b)| max_abs(&(a - b)))
            .fold(0.0, f64::max))
    }
}

/// Output grids must be finite, non-negative and strictly increasing.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Validation("time grid is empty".into()));
    }
    if grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Validation(
            "time grid must be finite and non-negative".into(),
        ));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Validation(
            "time grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

pub fn validate_initial(rho0: &CMat, d: usize) -> Result<()> {
    if rho0.shape() != (d, d) {
        return Err(Error::Validation(format!("initial state must be {d}x{d}")));
    }
    if (rho0.trace() - C64::new(1.0, 0.0)).norm() > 1e-10 {
        return Err(Error::Validation(
            "initial state must have unit trace".into(),
        ));
    }
    if max_abs(&(rho0 - rho0.adjoint())) > 1e-12 {
        return Err(Error::Validation("initial state must be Hermitian".into()));
    }
    Ok(())
}

/// Evenly spaced grid 0, dt, ..., n dt.
pub fn uniform_grid(t_max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t_max * i as f64 / n as f64).collect()
}
