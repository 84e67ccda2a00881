//! The effective-mode triple {E, kappa, eta}.

use super::modes::ExponentialModes;
use crate::linalg::{condition_number, eigenvalues};
use crate::{CMat, CVec, Error, Result, C64};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    Star,
    Chain,
    General,
}

/// S(omega) = -2 Im{kappa^dagger G(omega) eta}, G(omega) = (omega - E)^{-1}.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EffectiveModeSet {
    pub e: CMat,
    pub kappa: CVec,
    pub eta: CVec,
    pub topology: Topology,
}

/// Default condition-number bound accepted by [`transform_modeset`].
pub const CONDITION_BOUND: f64 = 1e8;

impl EffectiveModeSet {
    pub fn new(e: CMat, kappa: CVec, eta: CVec, topology: Topology) -> Result<Self> {
        let k = e.nrows();
        if !e.is_square() || kappa.len() != k || eta.len() != k || k == 0 {
            return Err(Error::Validation(
                "mode set dimensions are inconsistent".into(),
            ));
        }
        let scale = e.iter().fold(1.0f64, |a, x| a.max(x.norm()));
        for ev in eigenvalues(&e)? {
            if ev.im > 1e-12 * scale {
                return Err(Error::Validation(format!(
                    "mode matrix eigenvalue {ev} lies in the upper half plane"
                )));
            }
        }
        Ok(Self {
            e,
            kappa,
            eta,
            topology,
        })
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    /// Mode Hermitian part Omega = (E + E^dagger)/2.
    pub fn omega(&self) -> CMat {
        (&self.e + self.e.adjoint()) * C64::new(0.5, 0.0)
    }

    /// Damping matrix Gamma = (E^dagger - E)/(2i), positive semidefinite for
    /// physical sets.
    pub fn gamma(&self) -> CMat {
        (self.e.adjoint() - &self.e) * C64::new(0.0, -0.5)
    }

    pub fn kappa_plus(&self) -> CVec {
        (&self.kappa + &self.eta) * C64::new(0.5, 0.0)
    }

    pub fn kappa_minus(&self) -> CVec {
        (&self.kappa - &self.eta) * C64::new(0.5, 0.0)
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let k = self.len();
        (0..k).all(|i| (0..k).all(|j| i == j || self.e[(i, j)].norm() <= tol))
    }

    /// kappa^dagger G(omega) eta.
    fn green_element(&self, w: f64) -> Result<C64> {
        let k = self.len();
        let a = CMat::identity(k, k) * C64::new(w, 0.0) - &self.e;
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.norm())).max(1e-300);
        if self.topology == Topology::Star || self.is_diagonal(0.0) {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..k {
                let den = a[(j, j)];
                if den.norm() <= 1e-13 * scale.max(w.abs()) {
                    return Err(Error::PoleProximity { omega: w });
                }
                acc += self.kappa[j].conj() * self.eta[j] / den;
            }
            return Ok(acc);
        }
        let lu = a.lu();
        let x = lu
            .solve(&self.eta)
            .ok_or(Error::PoleProximity { omega: w })?;
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite())
            || x.norm() > 1e13 * self.eta.norm() / scale
        {
            return Err(Error::PoleProximity { omega: w });
        }
        Ok(self.kappa.dotc(&x))
    }

    /// Reconstructed noise power S(omega) = i{k^dag G eta - eta^dag G^dag k}.
    pub fn spectrum(&self, w: f64) -> Result<f64> {
        let a = self.green_element(w)?;
        Ok(-2.0 * a.im)
    }

    /// Reconstructed correlation: kappa^dagger exp(-iEt) eta for t >= 0,
    /// conjugated for t < 0.
    pub fn correlation(&self, t: f64) -> C64 {
        let a = t.abs();
        let v = if self.is_diagonal(0.0) {
            (0..self.len())
                .map(|j| {
                    self.kappa[j].conj() * self.eta[j] * (C64::new(0.0, -a) * self.e[(j, j)]).exp()
                })
                .sum()
        } else {
            let u = (&self.e * C64::new(0.0, -a)).exp();
            self.kappa.dotc(&(u * &self.eta))
        };
        if t < 0.0 {
            v.conj()
        } else {
            v
        }
    }

    /// Star set with E = diag(omega_k - i gamma_k), kappa_k^* = -sqrt(2 d_k),
    /// eta_k = -sqrt(d_k / 2).
    pub fn star(modes: &ExponentialModes) -> Self {
        let k = modes.len();
        let e = CMat::from_diagonal(&CVec::from_iterator(
            k,
            modes.z.iter().map(|z| C64::new(z.im, -z.re)),
        ));
        let kappa = CVec::from_iterator(k, modes.d.iter().map(|d| -(d * 2.0).sqrt().conj()));
        let eta = CVec::from_iterator(k, modes.d.iter().map(|d| -(d * 0.5).sqrt()));
        Self {
            e,
            kappa,
            eta,
            topology: Topology::Star,
        }
    }

    /// Star set in the symmetric gauge kappa = eta = sqrt(d_k), which makes
    /// kappa_- vanish; needs real non-negative residues.
    pub fn star_symmetric(modes: &ExponentialModes) -> Result<Self> {
        let scale = modes.d.iter().fold(0.0f64, |a, d| a.max(d.norm()));
        if modes
            .d
            .iter()
            .any(|d| d.re < 0.0 || d.im.abs() > 1e-12 * scale.max(1e-300))
        {
            return Err(Error::Structural(
                "symmetric gauge needs real non-negative residues".into(),
            ));
        }
        let k = modes.len();
        let e = CMat::from_diagonal(&CVec::from_iterator(
            k,
            modes.z.iter().map(|z| C64::new(z.im, -z.re)),
        ));
        let v = CVec::from_iterator(k, modes.d.iter().map(|d| C64::new(d.re.sqrt(), 0.0)));
        Ok(Self {
            e,
            kappa: v.clone(),
            eta: v,
            topology: Topology::Star,
        })
    }

    /// Mode set from a chain E with couplings at the first site.
    pub fn chain(e: CMat, kappa0: C64, eta0: C64) -> Result<Self> {
        let k = e.nrows();
        let mut kappa = CVec::zeros(k);
        let mut eta = CVec::zeros(k);
        kappa[0] = kappa0;
        eta[0] = eta0;
        Self::new(e, kappa, eta, Topology::Chain)
    }

    /// Tridiagonalization by two-sided Lanczos started from eta (right) and
    /// kappa (left); couplings end up on the first site only.
    pub fn to_chain(&self) -> Result<Self> {
        let k = self.len();
        let s = self.kappa.dotc(&self.eta);
        if s.norm() <= 1e-300 {
            return Err(Error::Structural(
                "kappa^dagger eta vanishes; no chain representation".into(),
            ));
        }
        let root = s.sqrt();
        let mut v: Vec<CVec> = vec![&self.eta / root];
        let mut w: Vec<CVec> = vec![&self.kappa / root.conj()];
        let mut alpha = Vec::new();
        let mut beta: Vec<C64> = Vec::new();
        let mut gamma: Vec<C64> = Vec::new();
        let e_adj = self.e.adjoint();
        let scale = self
            .e
            .iter()
            .fold(0.0f64, |a, x| a.max(x.norm()))
            .max(1e-300);
        for j in 0..k {
            let av = &self.e * &v[j];
            let a = w[j].dotc(&av);
            alpha.push(a);
            if j + 1 == k {
                break;
            }
            let mut r = av - &v[j] * a;
            let mut q = &e_adj * &w[j] - &w[j] * a.conj();
            if j > 0 {
                r -= &v[j - 1] * gamma[j - 1];
                q -= &w[j - 1] * beta[j - 1].conj();
            }
            // full biorthogonalization, twice
            for _ in 0..2 {
                for i in 0..=j {
                    let cr = w[i].dotc(&r);
                    r -= &v[i] * cr;
                    let cq = v[i].dotc(&q);
                    q -= &w[i] * cq;
                }
            }
            let delta = q.dotc(&r);
            if delta.norm() <= 1e-24 * scale * scale * r.norm().max(1.0) * q.norm().max(1.0) {
                if r.norm() <= 1e-12 * scale || q.norm() <= 1e-12 * scale {
                    break; // invariant subspace: remaining modes do not couple
                }
                return Err(Error::Conditioning(
                    "serious breakdown in two-sided Lanczos".into(),
                ));
            }
            let b = delta.sqrt();
            let g = delta / b;
            beta.push(b);
            gamma.push(g);
            v.push(r / b);
            w.push(q / g.conj());
        }
        let n = alpha.len();
        let mut t = CMat::zeros(n, n);
        for j in 0..n {
            t[(j, j)] = alpha[j];
            if j + 1 < n {
                t[(j + 1, j)] = beta[j];
                t[(j, j + 1)] = gamma[j];
            }
        }
        Self::chain(t, root.conj(), root)
    }
}

/// E' = M E M^{-1}, kappa'^dagger = kappa^dagger M^{-1}, eta' = M eta.
pub fn transform_modeset(set: &EffectiveModeSet, m: &CMat, bound: f64) -> Result<EffectiveModeSet> {
    let k = set.len();
    if m.nrows() != k || m.ncols() != k {
        return Err(Error::Validation(
            "transformation has the wrong size".into(),
        ));
    }
    let cond = condition_number(m);
    if !(cond <= bound) {
        return Err(Error::Conditioning(format!(
            "transformation condition number {cond:.3e} exceeds {bound:.1e}"
        )));
    }
    let inv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Conditioning("singular transformation".into()))?;
    let e = m * &set.e * &inv;
    let kappa = inv.adjoint() * &set.kappa;
    let eta = m * &set.eta;
    let diag = (0..k).all(|i| (0..k).all(|j| i == j || e[(i, j)].norm() <= 1e-14 * cond));
    let topology = if diag && set.topology == Topology::Star {
        Topology::Star
    } else {
        Topology::General
    };
    Ok(EffectiveModeSet {
        e,
        kappa,
        eta,
        topology,
    })
}

/// S(omega) of a mode set (see [`EffectiveModeSet::spectrum`]).
pub fn reconstruct_spectrum(set: &EffectiveModeSet, w: f64) -> Result<f64> {
    set.spectrum(w)
}

/// C(t) of a mode set (see [`EffectiveModeSet::correlation`]).
pub fn reconstruct_correlation(set: &EffectiveModeSet, t: f64) -> C64 {
    set.correlation(t)
}

impl crate::bath::Correlator for EffectiveModeSet {
    fn correlation(&self, t: f64) -> C64 {
        self.correlation(t)
    }
}
