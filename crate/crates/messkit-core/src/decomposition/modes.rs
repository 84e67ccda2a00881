//! Multi-exponential correlation functions from rational noise-power fits.

use super::aaa::{aaa_fit, AaaOptions, BarycentricRational};
use crate::bath::{CorrelationFunction, NoisePower, QuadratureOptions, SpectralDensity};
use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};

/// C(t >= 0) = sum_k d_k exp(-z_k t), z_k = gamma_k + i omega_k.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExponentialModes {
    pub d: Vec<C64>,
    pub z: Vec<C64>,
    /// sup_t |C_ref(t) - C_fit(t)| over [0, t_max].
    pub residual_bound: f64,
    pub t_max: f64,
}

impl ExponentialModes {
    pub fn new(d: Vec<C64>, z: Vec<C64>) -> Result<Self> {
        if d.len() != z.len() {
            return Err(Error::Validation(
                "residue and exponent counts differ".into(),
            ));
        }
        if z.iter().any(|z| !(z.re >= 0.0) || !z.im.is_finite())
            || d.iter().any(|d| !d.re.is_finite() || !d.im.is_finite())
        {
            return Err(Error::Validation(
                "exponents need Re z >= 0 and finite values".into(),
            ));
        }
        Ok(Self {
            d,
            z,
            residual_bound: 0.0,
            t_max: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// C(t) with C(-t) = conj(C(t)).
    pub fn eval(&self, t: f64) -> C64 {
        let a = t.abs();
        let v: C64 = self
            .d
            .iter()
            .zip(&self.z)
            .map(|(d, z)| d * (-z * a).exp())
            .sum();
        if t < 0.0 {
            v.conj()
        } else {
            v
        }
    }

    /// Largest deviation from a reference correlation on a uniform grid.
    pub fn deviation_from(
        &self,
        reference: &CorrelationFunction,
        t_max: f64,
        points: usize,
    ) -> f64 {
        let times: Vec<f64> = (0..points)
            .map(|i| t_max * i as f64 / (points - 1) as f64)
            .collect();
        let refs = reference.sample(&times);
        times
            .iter()
            .zip(refs)
            .map(|(&t, r)| (self.eval(t) - r).norm())
            .fold(0.0, f64::max)
    }
}

/// Poles of R in the lower half plane with residues d = -i Res.
pub fn extract_exponential_modes(
    r: &BarycentricRational,
    reference: &CorrelationFunction,
    t_max: f64,
) -> Result<ExponentialModes> {
    let mut modes = modes_from_rational(r)?;
    modes.t_max = t_max;
    modes.residual_bound = modes.deviation_from(reference, t_max, 2001);
    Ok(modes)
}

/// Pole and residue extraction without certification against a reference.
pub fn modes_from_rational(r: &BarycentricRational) -> Result<ExponentialModes> {
    let poles = r.poles()?;
    let scale = r.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut cand = Vec::new();
    for p in poles {
        if !p.re.is_finite() || !p.im.is_finite() {
            continue;
        }
        let res = r.residue(p);
        // spurious pole-zero pairs: the influence on the fitted data is
        // |Res| over the distance to the nearest support point or |Im p|
        let gap = r
            .support
            .iter()
            .fold(f64::INFINITY, |a, &w| a.min((p.re - w).abs()))
            .max(p.im.abs());
        if res.norm() <= 1e-15 * scale * gap {
            continue;
        }
        cand.push((p, res));
    }
    // and poles whose weight in the correlation function is negligible
    let total: f64 = cand.iter().map(|(_, r)| r.norm()).sum();
    let mut d = Vec::new();
    let mut z = Vec::new();
    for (p, res) in cand {
        if res.norm() <= 1e-12 * total {
            continue;
        }
        if p.im.abs() <= 1e-10 * p.norm().max(1.0) {
            return Err(Error::Conditioning(format!(
                "pole on the real axis at omega = {}",
                p.re
            )));
        }
        if p.im < 0.0 {
            d.push(C64::new(0.0, -1.0) * res);
            z.push(C64::new(-p.im, p.re));
        }
    }
    if d.is_empty() {
        return Err(Error::Decomposition(
            "no poles in the lower half plane".into(),
        ));
    }
    // deterministic ordering by frequency then damping
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|&a, &b| {
        z[a].im
            .total_cmp(&z[b].im)
            .then(z[a].re.total_cmp(&z[b].re))
    });
    Ok(ExponentialModes {
        d: idx.iter().map(|&i| d[i]).collect(),
        z: idx.iter().map(|&i| z[i]).collect(),
        residual_bound: 0.0,
        t_max: 0.0,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub aaa: AaaOptions,
    /// Certification horizon; None means ten decay times.
    pub t_max: Option<f64>,
    /// Candidate points per decade on the logarithmic part of the grid.
    pub per_decade: usize,
    /// Tail tolerance of the reference quadrature.
    pub quadrature_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            aaa: AaaOptions::default(),
            t_max: None,
            per_decade: 40,
            quadrature_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BathFit {
    pub rational: BarycentricRational,
    pub modes: ExponentialModes,
    pub reference: CorrelationFunction,
    pub samples: Vec<(f64, f64)>,
}

/// Candidate grid: a uniform core resolving the narrowest spectral feature,
/// logarithmic refinement towards zero and far points that pin the decay of
/// the fit at large |omega|. Mirrored to negative frequencies.
pub fn candidate_grid(s: &NoisePower, per_decade: usize) -> Vec<f64> {
    let dens = &s.density;
    let omega = dens.scale();
    let mut feature = omega;
    match dens {
        SpectralDensity::LorentzianSum { terms } => {
            feature = terms.iter().map(|l| l.gamma).fold(feature, f64::min);
        }
        SpectralDensity::Brownian { gamma0, .. } => feature = feature.min(*gamma0),
        _ => {}
    }
    if !s.is_zero_temperature() {
        feature = feature.min(1.0 / s.beta);
    }
    let limit = dens.support_limit();
    let core_end = match limit {
        Some(l) => l,
        None => {
            12.0 * omega
                + if s.is_zero_temperature() {
                    0.0
                } else {
                    12.0 / s.beta
                }
        }
    };
    let h = (feature / 12.0).max(core_end / 3000.0);
    let mut pos = Vec::new();
    let mut x = h;
    while x <= core_end {
        pos.push(x);
        x += h;
    }
    let lo = 1e-6 * feature;
    let hi = match limit {
        Some(l) => l,
        None => 1e4 * core_end,
    };
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).ceil() as usize;
    for i in 0..=n {
        pos.push(lo * 10f64.powf(decades * i as f64 / n as f64));
    }
    if let SpectralDensity::Tabulated(t) = dens {
        let (a, b) = t.range();
        pos.retain(|&w| w >= a && w <= b);
    }
    pos.sort_by(f64::total_cmp);
    pos.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    let mut grid: Vec<f64> = pos.iter().rev().map(|w| -w).collect();
    if s.eval(0.0).map_or(false, f64::is_finite) {
        grid.push(0.0);
    }
    grid.extend(pos);
    grid
}

/// Noise power samples on the candidate grid, dropping non-finite values
/// (the integrable singularity of s < 1 power laws at finite temperature).
pub fn sample_noise_power(s: &NoisePower, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(grid.len());
    for &w in grid {
        let v = s.eval(w)?;
        if v.is_finite() {
            out.push((w, v));
        }
    }
    Ok(out)
}

/// AAA fit of S, pole extraction and certification against quadrature C(t).
pub fn fit_noise_power(s: &NoisePower, opts: FitOptions) -> Result<BathFit> {
    let samples = sample_noise_power(s, &candidate_grid(s, opts.per_decade))?;
    // A fit that meets the tolerance can still leave a pole on the real axis
    // near non-analytic points; refit tighter until the poles separate.
    let mut aaa = opts.aaa;
    let (rational, modes) = loop {
        let rational = aaa_fit(&samples, aaa)?;
        match modes_from_rational(&rational) {
            Ok(m) => break (rational, m),
            Err(Error::Conditioning(_)) if aaa.tol > 1e-13 && rational.order() < aaa.m_max => {
                aaa.tol *= 0.1
            }
            Err(e) => return Err(e),
        }
    };
    let t_max = match opts.t_max {
        Some(t) => t,
        None => 10.0 * crate::bath::decay_time(s, opts.quadrature_tol)?,
    };
    let reference = CorrelationFunction::quadrature(
        s.clone(),
        QuadratureOptions {
            t_max,
            tol: opts.quadrature_tol,
            ..Default::default()
        },
    )?;
    let modes = ExponentialModes {
        t_max,
        residual_bound: modes.deviation_from(&reference, t_max, 2001),
        ..modes
    };
    Ok(BathFit {
        rational,
        modes,
        reference,
        samples,
    })
}

impl crate::bath::Correlator for ExponentialModes {
    fn correlation(&self, t: f64) -> C64 {
        self.eval(t)
    }
}
