use super::SpectralDensity;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Thermal noise power S(omega) = J(omega) / (1 - exp(-beta omega)).
/// Zero temperature is `beta = f64::INFINITY`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisePower {
    pub density: SpectralDensity,
    pub beta: f64,
}

impl NoisePower {
    pub fn new(density: SpectralDensity, beta: f64) -> Result<Self> {
        density.validate()?;
        if beta.is_nan() || beta <= 0.0 {
            return Err(Error::Validation(format!(
                "beta must be positive or +inf, got {beta}"
            )));
        }
        Ok(Self { density, beta })
    }

    pub fn zero_temperature(density: SpectralDensity) -> Result<Self> {
        Self::new(density, f64::INFINITY)
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.beta.is_infinite()
    }

    pub fn eval(&self, w: f64) -> Result<f64> {
        if self.is_zero_temperature() {
            return if w > 0.0 {
                self.density.eval(w)
            } else {
                Ok(0.0)
            };
        }
        let x = self.beta * w;
        if x.abs() < 1e-4 {
            // J/(1 - e^{-x}) = (J/omega)/beta * x/(1 - e^{-x})
            let series = 1.0 + x / 2.0 + x * x / 12.0 - x.powi(4) / 720.0;
            let jo = self.density.over_omega(w)?;
            if jo.is_infinite() {
                return Ok(f64::INFINITY);
            }
            return Ok(jo / self.beta * series);
        }
        Ok(self.density.eval(w)? / -(-x).exp_m1())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_temperature_is_step_times_j() {
        let s = NoisePower::zero_temperature(SpectralDensity::ohmic(0.1, 1.0)).unwrap();
        assert_eq!(s.eval(-0.5).unwrap(), 0.0);
        assert_eq!(s.eval(0.5).unwrap(), s.density.eval(0.5).unwrap());
    }

    #[test]
    fn low_frequency_limit() {
        let alpha = 0.3;
        let beta = 2.0;
        let s = NoisePower::new(SpectralDensity::ohmic(alpha, 1e6), beta).unwrap();
        let lim = std::f64::consts::FRAC_PI_2 * alpha / beta;
        assert!((s.eval(0.0).unwrap() - lim).abs() < 1e-14);
        assert!((s.eval(1e-9).unwrap() - lim).abs() < 1e-8);
    }

    #[test]
    fn series_matches_direct_formula_at_switch() {
        let s = NoisePower::new(SpectralDensity::ohmic(0.1, 3.0), 1.0).unwrap();
        for w in [0.99e-4, 1.01e-4, -0.99e-4, -1.01e-4] {
            let direct = s.density.eval(w).unwrap() / -(-s.beta * w).exp_m1();
            assert!((s.eval(w).unwrap() - direct).abs() <= 1e-13 * direct.abs());
        }
    }

    #[test]
    fn rejects_negative_beta() {
        assert!(NoisePower::new(SpectralDensity::ohmic(0.1, 1.0), -1.0).is_err());
        assert!(NoisePower::new(SpectralDensity::ohmic(0.1, 1.0), f64::NAN).is_err());
    }
}
