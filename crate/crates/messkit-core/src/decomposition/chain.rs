//! Orthogonal-polynomial chain mapping and continued-fraction chain closure.

use super::modeset::{EffectiveModeSet, Topology};
use crate::bath::{FrequencyGrid, NoisePower, QuadratureOptions};
use crate::{CMat, CVec, Error, Result, C64};
use serde::{Deserialize, Serialize};

/// Recurrence coefficients of a chain in the variable x = omega^l.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainCoefficients {
    pub l: u32,
    /// Site energies omega_n^l.
    pub site: Vec<f64>,
    /// hop[0] = g_0 = sqrt(C(0)); hop[n] = g_n couples sites n-1 and n.
    pub hop: Vec<f64>,
    /// Fraction of the total weight C(0) carried by the mapped measure (1 for
    /// l = 1; the positive-frequency share for l = 2).
    pub normalization: f64,
    /// max_n |K_n(0) - delta_n0| over the computed sites.
    pub krylov_error: f64,
    /// Orthogonality was lost before the requested length.
    pub flagged: bool,
    pub requested: usize,
}

impl ChainCoefficients {
    pub fn len(&self) -> usize {
        self.site.len()
    }

    pub fn is_empty(&self) -> bool {
        self.site.is_empty()
    }

    pub fn g0(&self) -> f64 {
        self.hop[0]
    }

    /// Hermitian tight-binding chain with the system attached to site 0
    /// (kappa = eta = g_0 e_0); only meaningful for l = 1.
    pub fn to_modeset(&self) -> Result<EffectiveModeSet> {
        if self.l != 1 {
            return Err(Error::Structural(
                "only l = 1 chains have a linear mode-set representation".into(),
            ));
        }
        let k = self.len();
        let mut e = CMat::zeros(k, k);
        for n in 0..k {
            e[(n, n)] = C64::new(self.site[n], 0.0);
            if n + 1 < k {
                e[(n, n + 1)] = C64::new(self.hop[n + 1], 0.0);
                e[(n + 1, n)] = C64::new(self.hop[n + 1], 0.0);
            }
        }
        let mut v = CVec::zeros(k);
        v[0] = C64::new(self.g0(), 0.0);
        EffectiveModeSet::new(e, v.clone(), v, Topology::Chain)
    }
}

/// Result of the discrete Stieltjes procedure.
#[derive(Clone, Debug)]
pub struct Recurrence {
    /// a_n = <x pi_n, pi_n>.
    pub a: Vec<f64>,
    /// b_n for n >= 1 (b[0] is the square root of the total mass).
    pub b: Vec<f64>,
    /// Largest |<pi_i, pi_j> - delta_ij| observed in the checks.
    pub orthogonality_error: f64,
    pub krylov_error: f64,
    pub flagged: bool,
}

/// Stieltjes procedure for the discrete measure sum_i w_i delta(x - x_i),
/// using orthonormal polynomials throughout.
pub fn stieltjes(x: &[f64], w: &[f64], k: usize, tol: f64) -> Result<Recurrence> {
    if x.len() != w.len() || x.is_empty() || k == 0 {
        return Err(Error::Validation(
            "stieltjes needs matching non-empty nodes and weights and k >= 1".into(),
        ));
    }
    if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Validation(
            "measure weights must be finite and non-negative".into(),
        ));
    }
    let mass: f64 = w.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::Validation("measure has zero mass".into()));
    }
    let n = x.len();
    let p0: Vec<f64> = vec![1.0 / mass.sqrt(); n];
    let mut prev = vec![0.0; n];
    let mut cur = p0.clone();
    let mut a = Vec::with_capacity(k);
    let mut b = vec![mass.sqrt()];
    let mut worst = 0.0f64;
    let mut krylov = 0.0f64;
    let mut flagged = false;
    let inner = |p: &[f64], q: &[f64]| -> f64 { (0..n).map(|i| w[i] * p[i] * q[i]).sum() };
    for step in 0..k {
        let an: f64 = (0..n).map(|i| w[i] * x[i] * cur[i] * cur[i]).sum();
        a.push(an);
        // K_n(0) = <pi_n, 1> / <1, 1>^{1/2}
        let kn = inner(&cur, &p0) - if step == 0 { 1.0 } else { 0.0 };
        krylov = krylov.max(kn.abs());
        if step + 1 == k {
            break;
        }
        let bn = *b.last().unwrap();
        let mut next: Vec<f64> = (0..n)
            .map(|i| (x[i] - an) * cur[i] - if step == 0 { 0.0 } else { bn * prev[i] })
            .collect();
        let norm = inner(&next, &next).sqrt();
        let scale =
            (inner(&cur, &cur).sqrt() * x.iter().fold(0.0f64, |m, v| m.max(v.abs()))).max(1e-300);
        if !(norm > 1e-13 * scale) {
            flagged = true;
            break;
        }
        for v in next.iter_mut() {
            *v /= norm;
        }
        let loss = inner(&next, &cur)
            .abs()
            .max(inner(&next, &p0).abs())
            .max((inner(&next, &next) - 1.0).abs());
        worst = worst.max(loss);
        if loss > tol {
            flagged = true;
            break;
        }
        b.push(norm);
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(Recurrence {
        a,
        b,
        orthogonality_error: worst,
        krylov_error: krylov,
        flagged,
    })
}

/// Chain coefficients of dmu = S(omega) d omega / (2 pi g_0^2) with moments
/// in omega^l. For l = 2 the measure is the positive-frequency part of S in
/// the variable x = omega^2.
pub fn chain_map(s: &NoisePower, k: usize, l: u32) -> Result<ChainCoefficients> {
    if k == 0 {
        return Err(Error::Validation("chain length must be at least 1".into()));
    }
    if l != 1 && l != 2 {
        return Err(Error::Validation("chain power l must be 1 or 2".into()));
    }
    let scale = s.density.scale();
    let grid = FrequencyGrid::build(
        s,
        QuadratureOptions {
            t_max: 4.0 * k as f64 / scale,
            tol: 1e-13,
            ..Default::default()
        },
    )?;
    let c0: f64 = grid.weights.iter().sum();
    let (x, w): (Vec<f64>, Vec<f64>) = if l == 1 {
        (grid.nodes.clone(), grid.weights.clone())
    } else {
        grid.nodes
            .iter()
            .zip(&grid.weights)
            .filter(|(n, _)| **n > 0.0)
            .map(|(n, w)| (n * n, *w))
            .unzip()
    };
    let rec = stieltjes(&x, &w, k, 1e-8)?;
    let mass: f64 = w.iter().sum();
    let mut hop = rec.b.clone();
    hop[0] = c0.sqrt();
    Ok(ChainCoefficients {
        l,
        site: rec.a,
        hop,
        normalization: mass / c0,
        krylov_error: rec.krylov_error,
        flagged: rec.flagged,
        requested: k,
    })
}

/// Residual bath attached to the last chain site.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TerminalBath {
    /// Frequency-independent damping S_term = gamma.
    Constant { gamma: f64 },
    /// S_term = 2 gamma omega exp(-omega / cutoff).
    Ohmic { gamma: f64, cutoff: f64 },
    /// S_term from a full noise power.
    Noise(NoisePower),
}

impl TerminalBath {
    pub fn eval(&self, w: f64) -> Result<f64> {
        match self {
            Self::Constant { gamma } => Ok(*gamma),
            Self::Ohmic { gamma, cutoff } => Ok(2.0 * gamma * w * (-w.abs() / cutoff).exp()),
            Self::Noise(s) => s.eval(w),
        }
    }
}

/// Effective noise power of a terminated chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClosureSpectrum {
    pub coeffs: ChainCoefficients,
    pub terminal: TerminalBath,
    /// |G| above this bound is reported as pole proximity.
    pub bound: f64,
}

/// Builds the continued-fraction evaluator for a chain with a residual bath
/// at its last site.
pub fn chain_closure_spectrum(
    coeffs: ChainCoefficients,
    terminal: TerminalBath,
) -> Result<ClosureSpectrum> {
    if coeffs.is_empty() || coeffs.hop.len() < coeffs.len() {
        return Err(Error::Validation(
            "chain coefficients are empty or inconsistent".into(),
        ));
    }
    Ok(ClosureSpectrum {
        coeffs,
        terminal,
        bound: 1e12,
    })
}

impl ClosureSpectrum {
    /// Diagonal Green's functions G_nn(omega), n = 0..K-1, from the downward
    /// recursion G_nn = 1/(x - omega_n^l - g_{n+1}^2 G_{n+1,n+1}).
    pub fn green(&self, w: f64) -> Result<Vec<C64>> {
        let c = &self.coeffs;
        let k = c.len();
        let x = w.powi(c.l as i32);
        let mut g = vec![C64::new(0.0, 0.0); k];
        let term = self.terminal.eval(w)?;
        let mut sigma = C64::new(0.0, -term);
        for n in (0..k).rev() {
            let den = C64::new(x - c.site[n], 0.0) - sigma;
            let gn = 1.0 / den;
            if !(gn.norm() <= self.bound) {
                return Err(Error::PoleProximity { omega: w });
            }
            g[n] = gn;
            if n > 0 {
                sigma = c.hop[n] * c.hop[n] * gn;
            }
        }
        Ok(g)
    }

    /// -2 g_n^2 Im G_nn(omega) at every level; entry 0 is the noise power
    /// seen by the system.
    pub fn levels(&self, w: f64) -> Result<Vec<f64>> {
        let g = self.green(w)?;
        Ok(g.iter()
            .enumerate()
            .map(|(n, gn)| -2.0 * self.coeffs.hop[n].powi(2) * gn.im)
            .collect())
    }

    pub fn eval(&self, w: f64) -> Result<f64> {
        let g = self.green(w)?;
        Ok(-2.0 * self.coeffs.g0().powi(2) * g[0].im)
    }
}
