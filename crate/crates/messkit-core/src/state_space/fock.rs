use crate::sparse::{Csr, Triplets};
use crate::{CMat, Result, C64};

/// Product space system (x) modes with the system index running fastest:
/// index = i + d * sum_k n_k stride_k, stride_0 = 1.
#[derive(Clone, Debug)]
pub struct FockSpace {
    pub d: usize,
    pub cutoffs: Vec<usize>,
    pub strides: Vec<usize>,
    pub modes_dim: usize,
}

impl FockSpace {
    pub fn new(d: usize, cutoffs: &[usize]) -> Self {
        let mut strides = Vec::with_capacity(cutoffs.len());
        let mut acc = 1usize;
        for &n in cutoffs {
            strides.push(acc);
            acc *= n + 1;
        }
        Self {
            d,
            cutoffs: cutoffs.to_vec(),
            strides,
            modes_dim: acc,
        }
    }

    pub fn dim(&self) -> usize {
        self.d * self.modes_dim
    }

    /// Occupation numbers of mode-space index m.
    pub fn occupations(&self, m: usize) -> Vec<usize> {
        self.cutoffs
            .iter()
            .zip(&self.strides)
            .map(|(&n, &s)| (m / s) % (n + 1))
            .collect()
    }

    /// System operator embedded as A (x) 1.
    pub fn system(&self, a: &CMat) -> Csr {
        let mut t = Triplets::new(self.dim(), self.dim());
        for m in 0..self.modes_dim {
            for i in 0..self.d {
                for j in 0..self.d {
                    t.push(i + self.d * m, j + self.d * m, a[(i, j)]);
                }
            }
        }
        t.to_csr()
    }

    /// Annihilation operator of mode k on the full space.
    pub fn annihilation(&self, k: usize) -> Csr {
        let mut t = Triplets::new(self.dim(), self.dim());
        let s = self.strides[k];
        let nmax = self.cutoffs[k];
        for m in 0..self.modes_dim {
            let nk = (m / s) % (nmax + 1);
            if nk == 0 {
                continue;
            }
            let v = C64::new((nk as f64).sqrt(), 0.0);
            for i in 0..self.d {
                t.push(i + self.d * (m - s), i + self.d * m, v);
            }
        }
        t.to_csr()
    }

    pub fn identity(&self) -> Csr {
        Csr::identity(self.dim())
    }

    /// rho_s (x) |0><0|.
    pub fn vacuum_product(&self, rho_s: &CMat) -> CMat {
        let mut out = CMat::zeros(self.dim(), self.dim());
        out.view_mut((0, 0), (self.d, self.d)).copy_from(rho_s);
        out
    }

    /// rho_s (x) prod_k thermal(n_k) with geometric occupations truncated and
    /// renormalized at the cutoff.
    pub fn thermal_product(&self, rho_s: &CMat, occupations: &[f64]) -> Result<CMat> {
        let mut probs: Vec<Vec<f64>> = Vec::new();
        for (k, &n) in occupations.iter().enumerate() {
            let nmax = self.cutoffs[k];
            let p: Vec<f64> = if n <= 0.0 {
                (0..=nmax).map(|j| if j == 0 { 1.0 } else { 0.0 }).collect()
            } else {
                let r = n / (n + 1.0);
                (0..=nmax).map(|j| r.powi(j as i32) / (n + 1.0)).collect()
            };
            let z: f64 = p.iter().sum();
            probs.push(p.into_iter().map(|x| x / z).collect());
        }
        let mut out = CMat::zeros(self.dim(), self.dim());
        for m in 0..self.modes_dim {
            let occ = self.occupations(m);
            let w: f64 = occ
                .iter()
                .enumerate()
                .map(|(k, &nk)| probs[k][nk])
                .product();
            if w == 0.0 {
                continue;
            }
            for i in 0..self.d {
                for j in 0..self.d {
                    out[(i + self.d * m, j + self.d * m)] = rho_s[(i, j)] * w;
                }
            }
        }
        Ok(out)
    }
}
