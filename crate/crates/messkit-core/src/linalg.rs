//! Small dense helpers on top of nalgebra.

use crate::{CMat, CVec, Error, Result, C64};
use nalgebra::{Schur, SymmetricEigen};

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn sigma_x() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn sigma_y() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn sigma_z() -> CMat {
    CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMat {
    CMat::from_row_slice(
        rows,
        cols,
        &data.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>(),
    )
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.is_square() && max_abs(&(m - m.adjoint())) <= tol
}

/// Eigenvalues of a general complex matrix.
pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Conditioning("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(m.clone());
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(m.nrows(), m.ncols());
    for (new, &old) in idx.iter().enumerate() {
        vecs.set_column(new, &eig.eigenvectors.column(old));
    }
    (vals, vecs)
}

/// Square root of a Hermitian positive semidefinite matrix, negative
/// eigenvalues clipped to zero.
pub fn psd_sqrt(m: &CMat) -> CMat {
    let (vals, vecs) = hermitian_eigen(m);
    let mut scaled = vecs.clone();
    for (j, v) in vals.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= s;
        }
    }
    scaled * vecs.adjoint()
}

/// Solves A X + X A^dagger = Q for X by vectorization.
pub fn lyapunov(a: &CMat, q: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let id = CMat::identity(n, n);
    // vec(AX) = (I (x) A) vec X, vec(X A^dagger) = (conj(A) (x) I) vec X
    let lhs = kron(&id, a) + kron(&a.map(|z| z.conj()), &id);
    let rhs = CVec::from_iterator(n * n, q.iter().copied());
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Conditioning("singular Lyapunov operator".into()))?;
    Ok(CMat::from_iterator(n, n, sol.iter().copied()))
}

/// Orthonormal basis of the null space of a single row vector w^T (as columns).
pub fn row_null_space(w: &[C64]) -> CMat {
    let m = w.len();
    let row = CMat::from_fn(1, m, |_, j| w[j]);
    // null space of w^T is the orthogonal complement of conj(w)
    let full = row.adjoint();
    let mut basis = CMat::identity(m, m);
    basis.set_column(0, &full.column(0));
    let qr = basis.qr();
    let q = qr.q();
    q.columns(1, m - 1).into_owned()
}

/// Relative condition number from singular values.
pub fn condition_number(m: &CMat) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Column-major d x d product `out = a * b` on raw slices.
#[inline]
pub fn matmul_into(d: usize, a: &[C64], b: &[C64], out: &mut [C64]) {
    for j in 0..d {
        for i in 0..d {
            let mut acc = ZERO;
            for k in 0..d {
                acc += a[i + d * k] * b[k + d * j];
            }
            out[i + d * j] = acc;
        }
    }
}

pub fn partial_trace_system(rho: &CMat, d: usize) -> CMat {
    // system is the fastest-running factor
    let n = rho.nrows() / d;
    let mut out = CMat::zeros(d, d);
    for k in 0..n {
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] += rho[(i + d * k, j + d * k)];
            }
        }
    }
    out
}
