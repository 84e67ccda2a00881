use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lorentzian {
    pub g: f64,
    pub omega: f64,
    pub gamma: f64,
}

impl Lorentzian {
    #[inline]
    pub fn eval(&self, w: f64) -> f64 {
        let dw = w - self.omega;
        2.0 * self.gamma * self.g * self.g / (dw * dw + self.gamma * self.gamma)
    }
}

/// Monotone cubic (Fritsch–Carlson) interpolant of tabulated samples on
/// non-negative frequencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedSamples")]
pub struct Tabulated {
    pub omega: Vec<f64>,
    pub j: Vec<f64>,
    #[serde(skip)]
    slopes: Vec<f64>,
}

#[derive(Deserialize)]
struct TabulatedSamples {
    omega: Vec<f64>,
    j: Vec<f64>,
}

impl TryFrom<TabulatedSamples> for Tabulated {
    type Error = Error;

    fn try_from(t: TabulatedSamples) -> Result<Self> {
        Self::new(t.omega, t.j)
    }
}

impl Tabulated {
    pub fn new(omega: Vec<f64>, j: Vec<f64>) -> Result<Self> {
        if omega.len() != j.len() || omega.len() < 2 {
            return Err(Error::Validation(
                "tabulated density needs at least two (omega, J) pairs".into(),
            ));
        }
        if omega.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation(
                "tabulated frequencies must be strictly increasing".into(),
            ));
        }
        if omega[0] < 0.0 {
            return Err(Error::Validation(
                "tabulated frequencies must be non-negative (J is extended antisymmetrically)"
                    .into(),
            ));
        }
        if omega.iter().chain(&j).any(|x| !x.is_finite()) {
            return Err(Error::Validation("tabulated samples must be finite".into()));
        }
        let slopes = pchip_slopes(&omega, &j);
        Ok(Self { omega, j, slopes })
    }

    fn ensure_slopes(&self) -> std::borrow::Cow<'_, [f64]> {
        if self.slopes.len() == self.omega.len() {
            std::borrow::Cow::Borrowed(&self.slopes)
        } else {
            std::borrow::Cow::Owned(pchip_slopes(&self.omega, &self.j))
        }
    }

    pub fn range(&self) -> (f64, f64) {
        (self.omega[0], *self.omega.last().unwrap())
    }

    pub fn eval_pos(&self, w: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if w < lo || w > hi {
            return Err(Error::OutOfDomain { omega: w, lo, hi });
        }
        let k = match self.omega.binary_search_by(|x| x.total_cmp(&w)) {
            Ok(i) => return Ok(self.j[i]),
            Err(i) => i - 1,
        };
        let m = self.ensure_slopes();
        let h = self.omega[k + 1] - self.omega[k];
        let t = (w - self.omega[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * self.j[k]
            + (t3 - 2.0 * t2 + t) * h * m[k]
            + (-2.0 * t3 + 3.0 * t2) * self.j[k + 1]
            + (t3 - t2) * h * m[k + 1])
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let delta: Vec<f64> = (0..n - 1)
        .map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k]))
        .collect();
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let (h0, h1) = (x[k] - x[k - 1], x[k + 1] - x[k]);
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    m
}

/// Bath spectral density J(omega), antisymmetric by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpectralDensity {
    OhmicExponential { alpha: f64, omega_c: f64 },
    SubohmicPowerlaw { alpha: f64, s: f64, omega_c: f64 },
    Brownian { c0: f64, omega0: f64, gamma0: f64 },
    LorentzianSum { terms: Vec<Lorentzian> },
    Tabulated(Tabulated),
}

impl SpectralDensity {
    pub fn ohmic(alpha: f64, omega_c: f64) -> Self {
        Self::OhmicExponential { alpha, omega_c }
    }

    pub fn subohmic(alpha: f64, s: f64, omega_c: f64) -> Self {
        Self::SubohmicPowerlaw { alpha, s, omega_c }
    }

    pub fn lorentzian(g: f64, omega: f64, gamma: f64) -> Self {
        Self::LorentzianSum {
            terms: vec![Lorentzian { g, omega, gamma }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(m.to_string()));
        match self {
            Self::OhmicExponential { alpha, omega_c } => {
                if !(*alpha >= 0.0) || !(*omega_c > 0.0) || !omega_c.is_finite() {
                    return bad("ohmic density needs alpha >= 0 and finite omega_c > 0");
                }
            }
            Self::SubohmicPowerlaw { alpha, s, omega_c } => {
                if !(*alpha >= 0.0) || !(*s > 0.0) || !(*omega_c > 0.0) || !omega_c.is_finite() {
                    return bad("power-law density needs alpha >= 0, s > 0 and finite omega_c > 0");
                }
            }
            Self::Brownian { c0, omega0, gamma0 } => {
                if !c0.is_finite() || !(*omega0 > 0.0) || !(*gamma0 > 0.0) {
                    return bad("brownian density needs finite c0, omega0 > 0, gamma0 > 0");
                }
            }
            Self::LorentzianSum { terms } => {
                if terms.is_empty() {
                    return bad("lorentzian sum needs at least one term");
                }
                if terms
                    .iter()
                    .any(|l| !(l.gamma > 0.0) || !l.g.is_finite() || !l.omega.is_finite())
                {
                    return bad("lorentzian terms need finite g, omega and gamma > 0");
                }
            }
            Self::Tabulated(t) => {
                Tabulated::new(t.omega.clone(), t.j.clone())?;
            }
        }
        Ok(())
    }

    /// J(|omega|) for omega >= 0.
    fn eval_pos(&self, w: f64) -> Result<f64> {
        Ok(match self {
            Self::OhmicExponential { alpha, omega_c } => {
                FRAC_PI_2 * alpha * w * (-w / omega_c).exp()
            }
            Self::SubohmicPowerlaw { alpha, s, omega_c } => {
                if w == 0.0 {
                    0.0
                } else {
                    FRAC_PI_2 * alpha * w.powf(*s) * omega_c.powf(1.0 - s) * (-w / omega_c).exp()
                }
            }
            Self::Brownian { c0, omega0, gamma0 } => {
                let d = w * w - omega0 * omega0;
                2.0 * c0 * c0 * gamma0 * w / (d * d + 4.0 * gamma0 * gamma0 * w * w)
            }
            Self::LorentzianSum { terms } => terms.iter().map(|l| l.eval(w) - l.eval(-w)).sum(),
            Self::Tabulated(t) => t.eval_pos(w)?,
        })
    }

    /// J(omega).
    pub fn eval(&self, w: f64) -> Result<f64> {
        let v = self.eval_pos(w.abs())?;
        Ok(if w < 0.0 { -v } else { v })
    }

    /// J(omega)/omega, an even function; finite at omega = 0 except for s < 1
    /// power laws where it diverges.
    pub fn over_omega(&self, w: f64) -> Result<f64> {
        let a = w.abs();
        if a > 0.0 {
            return Ok(self.eval_pos(a)? / a);
        }
        Ok(match self {
            Self::OhmicExponential { alpha, .. } => FRAC_PI_2 * alpha,
            Self::SubohmicPowerlaw { alpha, s, omega_c } => {
                if *s > 1.0 {
                    0.0
                } else if *s == 1.0 {
                    FRAC_PI_2 * alpha * omega_c.powf(0.0)
                } else {
                    f64::INFINITY
                }
            }
            Self::Brownian { c0, omega0, gamma0 } => 2.0 * c0 * c0 * gamma0 / omega0.powi(4),
            Self::LorentzianSum { terms } => terms
                .iter()
                .map(|l| {
                    let den = l.omega * l.omega + l.gamma * l.gamma;
                    2.0 * 4.0 * l.gamma * l.g * l.g * l.omega / (den * den)
                })
                .sum(),
            Self::Tabulated(t) => {
                let m = t.ensure_slopes();
                if t.omega[0] == 0.0 {
                    m[0]
                } else {
                    let (lo, hi) = t.range();
                    return Err(Error::OutOfDomain { omega: 0.0, lo, hi });
                }
            }
        })
    }

    /// Characteristic frequency scale used to lay out quadrature grids.
    pub fn scale(&self) -> f64 {
        match self {
            Self::OhmicExponential { omega_c, .. } | Self::SubohmicPowerlaw { omega_c, .. } => {
                *omega_c
            }
            Self::Brownian { omega0, gamma0, .. } => omega0.max(*gamma0),
            Self::LorentzianSum { terms } => terms
                .iter()
                .map(|l| l.omega.abs() + l.gamma)
                .fold(0.0, f64::max),
            Self::Tabulated(t) => t.range().1,
        }
    }

    /// Upper end of the support if finite (tabulated densities).
    pub fn support_limit(&self) -> Option<f64> {
        match self {
            Self::Tabulated(t) => Some(t.range().1),
            _ => None,
        }
    }
}
