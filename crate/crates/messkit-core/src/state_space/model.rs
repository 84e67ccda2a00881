use crate::linalg::is_hermitian;
use crate::{CMat, Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

/// System Hamiltonian H_s and Hermitian coupling operator S.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SystemModel {
    pub h: CMat,
    pub s: CMat,
}

impl SystemModel {
    pub fn new(h: CMat, s: CMat) -> Result<Self> {
        if !h.is_square() || h.nrows() < 2 || h.shape() != s.shape() {
            return Err(Error::Validation(
                "H_s and S must be square, equal-sized and at least 2x2".into(),
            ));
        }
        if !is_hermitian(&h, 1e-12) {
            return Err(Error::Validation("H_s is not Hermitian".into()));
        }
        if !is_hermitian(&s, 1e-12) {
            return Err(Error::Validation("S is not Hermitian".into()));
        }
        Ok(Self { h, s })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// (S_c rho, S_q rho) = ((S rho + rho S)/sqrt 2, (S rho - rho S)/sqrt 2).
    pub fn superops(&self, rho: &CMat) -> Result<(CMat, CMat)> {
        apply_superops(self, rho)
    }
}

pub fn apply_superops(model: &SystemModel, rho: &CMat) -> Result<(CMat, CMat)> {
    if rho.shape() != model.s.shape() {
        return Err(Error::Validation(format!(
            "operator shape {:?} does not match system dimension {}",
            rho.shape(),
            model.dim()
        )));
    }
    let a = &model.s * rho;
    let b = rho * &model.s;
    let f = C64::new(FRAC_1_SQRT_2, 0.0);
    Ok(((&a + &b) * f, (a - b) * f))
}

/// Per-mode Fock cutoffs, hierarchy depth and filter threshold.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TruncationSpec {
    pub cutoffs: Vec<usize>,
    pub depth: usize,
    pub filter: f64,
}

impl TruncationSpec {
    pub fn fock(cutoffs: Vec<usize>) -> Self {
        let depth = cutoffs.iter().sum::<usize>().max(1);
        Self {
            cutoffs,
            depth,
            filter: 0.0,
        }
    }

    pub fn hierarchy(depth: usize, modes: usize) -> Self {
        Self {
            cutoffs: vec![depth; modes],
            depth,
            filter: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cutoffs.iter().any(|&n| n < 1) {
            return Err(Error::Validation(
                "every Fock cutoff must be at least 1".into(),
            ));
        }
        if self.depth < 1 {
            return Err(Error::Validation(
                "hierarchy depth must be at least 1".into(),
            ));
        }
        if !(self.filter >= 0.0) {
            return Err(Error::Validation(
                "filter threshold must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// d * prod(n_max,k + 1), saturating.
    pub fn extended_dim(&self, d: usize) -> usize {
        self.cutoffs
            .iter()
            .fold(d, |acc, &n| acc.saturating_mul(n + 1))
    }
}
