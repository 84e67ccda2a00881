//! Spectral densities, thermal noise power and bath correlation functions.

mod correlation;
mod noise;
mod spectral;

pub use correlation::{
    decay_time, CorrelationFunction, Evaluation, FrequencyGrid, QuadratureOptions,
};
pub use noise::NoisePower;
pub use spectral::{Lorentzian, SpectralDensity, Tabulated};

/// Anything that evaluates a bath correlation function C(t) for all real t.
pub trait Correlator: Sync {
    fn correlation(&self, t: f64) -> crate::C64;
}

impl Correlator for CorrelationFunction {
    fn correlation(&self, t: f64) -> crate::C64 {
        self.eval(t)
    }
}

/// Wraps a closure defined for t >= 0; negative times are conjugated.
pub struct FnCorrelator<F>(pub F);

impl<F: Fn(f64) -> crate::C64 + Sync> Correlator for FnCorrelator<F> {
    fn correlation(&self, t: f64) -> crate::C64 {
        if t < 0.0 {
            (self.0)(-t).conj()
        } else {
            (self.0)(t)
        }
    }
}

/// Reads a two-column (omega, J) table; lines starting with '#' are comments.
pub fn read_tabulated(text: &str) -> crate::Result<Tabulated> {
    let mut om = Vec::new();
    let mut j = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if cols.len() < 2 {
            return Err(crate::Error::Validation(format!(
                "line {}: expected two columns",
                lineno + 1
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| {
                crate::Error::Validation(format!("line {}: cannot parse '{s}'", lineno + 1))
            })
        };
        om.push(parse(cols[0])?);
        j.push(parse(cols[1])?);
    }
    Tabulated::new(om, j)
}
