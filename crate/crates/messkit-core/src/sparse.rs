//! Row-compressed sparse complex matrices and Liouville-space assembly.
//!
//! Vectorization is column stacking: entry (r, c) of a D x D operator sits at
//! index `r + D * c`.

use crate::{CMat, C64};
use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<C64>,
}

#[derive(Clone, Debug, Default)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    #[inline]
    pub fn push(&mut self, r: usize, c: usize, v: C64) {
        if v != C64::new(0.0, 0.0) {
            self.entries.push((r, c, v));
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_csr(mut self) -> Csr {
        self.entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<C64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            indptr[r + 1] += indptr[r];
        }
        Csr {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }
}

impl Csr {
    pub fn from_dense(m: &CMat, tol: f64) -> Self {
        let mut t = Triplets::new(m.nrows(), m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)].norm() > tol {
                    t.push(r, c, m[(r, c)]);
                }
            }
        }
        t.to_csr()
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            t.push(i, i, C64::new(1.0, 0.0));
        }
        t.to_csr()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b]
            .iter()
            .copied()
            .zip(self.values[a..b].iter().copied())
    }

    /// y = A x.
    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        let kernel = |(r, out): (usize, &mut C64)| {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *out = acc;
        };
        if self.nnz() > 200_000 {
            y.par_iter_mut()
                .enumerate()
                .with_min_len(512)
                .for_each(kernel);
        } else {
            y.iter_mut().enumerate().for_each(kernel);
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn adjoint(&self) -> Csr {
        let mut t = Triplets::new(self.ncols, self.nrows);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                t.push(c, r, v.conj());
            }
        }
        t.to_csr()
    }

    pub fn transpose(&self) -> Csr {
        let mut t = Triplets::new(self.ncols, self.nrows);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                t.push(c, r, v);
            }
        }
        t.to_csr()
    }

    pub fn scale(&self, s: C64) -> Csr {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &Csr) -> Csr {
        let mut t = Triplets::new(self.nrows, self.ncols);
        for m in [self, other] {
            for r in 0..m.nrows {
                for (c, v) in m.row(r) {
                    t.push(r, c, v);
                }
            }
        }
        t.to_csr()
    }

    pub fn mul(&self, other: &Csr) -> Csr {
        let mut t = Triplets::new(self.nrows, other.ncols);
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    t.push(r, c, a * b);
                }
            }
        }
        t.to_csr()
    }
}

/// Accumulates a superoperator acting on column-stacked D x D operators.
pub struct SuperBuilder {
    pub dim: usize,
    trip: Triplets,
}

impl SuperBuilder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            trip: Triplets::new(dim * dim, dim * dim),
        }
    }

    /// rho -> coef * A rho
    pub fn left(&mut self, coef: C64, a: &Csr) {
        let d = self.dim;
        for r in 0..d {
            for (rp, v) in a.row(r) {
                let val = coef * v;
                for c in 0..d {
                    self.trip.push(r + d * c, rp + d * c, val);
                }
            }
        }
    }

    /// rho -> coef * rho B
    pub fn right(&mut self, coef: C64, b: &Csr) {
        let d = self.dim;
        for cp in 0..d {
            for (c, v) in b.row(cp) {
                let val = coef * v;
                for r in 0..d {
                    self.trip.push(r + d * c, r + d * cp, val);
                }
            }
        }
    }

    /// rho -> coef * A rho B
    pub fn sandwich(&mut self, coef: C64, a: &Csr, b: &Csr) {
        let d = self.dim;
        for r in 0..d {
            for (rp, av) in a.row(r) {
                for cp in 0..d {
                    for (c, bv) in b.row(cp) {
                        self.trip.push(r + d * c, rp + d * cp, coef * av * bv);
                    }
                }
            }
        }
    }

    /// rho -> -i [H, rho]
    pub fn hamiltonian(&mut self, h: &Csr) {
        let mi = C64::new(0.0, -1.0);
        self.left(mi, h);
        self.right(-mi, h);
    }

    /// rho -> coef * (2 A rho B^dagger... ) in the general form
    /// coef * (2 L rho M^dagger - M^dagger L rho - rho M^dagger L).
    pub fn dissipator(&mut self, coef: C64, l: &Csr, m: &Csr) {
        let md = m.adjoint();
        let mdl = md.mul(l);
        self.sandwich(coef * 2.0, l, &md);
        self.left(-coef, &mdl);
        self.right(-coef, &mdl);
    }

    pub fn build(self) -> Csr {
        self.trip.to_csr()
    }
}

pub fn vec_from_mat(m: &CMat) -> Vec<C64> {
    // nalgebra storage is column-major already
    m.as_slice().to_vec()
}

pub fn mat_from_vec(v: &[C64], dim: usize) -> CMat {
    CMat::from_column_slice(dim, dim, v)
}
