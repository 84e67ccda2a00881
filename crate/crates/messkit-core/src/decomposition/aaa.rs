//! AAA barycentric rational approximation on the real frequency axis.

use crate::linalg::row_null_space;
use crate::{CMat, Error, Result, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct AaaOptions {
    /// Relative sup-norm tolerance (relative to max |S|).
    pub tol: f64,
    pub m_max: usize,
}

impl Default for AaaOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            m_max: 120,
        }
    }
}

/// R(w) = sum_j theta_j f_j / (w - w_j) / sum_j theta_j / (w - w_j).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BarycentricRational {
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
    /// Best relative error reached after each iteration (non-increasing).
    pub error_history: Vec<f64>,
    /// Relative error of each iterate; not monotone in general.
    pub raw_error_history: Vec<f64>,
    /// Achieved relative sup-norm error.
    pub achieved: f64,
    pub tol: f64,
    /// Tolerance not reached within m_max.
    pub flagged: bool,
}

impl BarycentricRational {
    pub fn order(&self) -> usize {
        self.support.len()
    }

    pub fn eval(&self, w: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..self.support.len() {
            let dw = w - self.support[j];
            if dw == 0.0 {
                return self.values[j];
            }
            let c = self.weights[j] / dw;
            num += c * self.values[j];
            den += c;
        }
        num / den
    }

    pub fn eval_complex(&self, w: C64) -> C64 {
        let mut num = C64::new(0.0, 0.0);
        let mut den = C64::new(0.0, 0.0);
        for j in 0..self.support.len() {
            let c = self.weights[j] / (w - self.support[j]);
            num += c * self.values[j];
            den += c;
        }
        num / den
    }

    /// Poles from the arrowhead generalized eigenproblem
    /// [[0, w^T], [1, diag(z)]] x = lambda diag(0, 1, ..., 1) x, reduced to a
    /// standard problem on the null space of w^T.
    pub fn poles(&self) -> Result<Vec<C64>> {
        let m = self.support.len();
        if m < 2 {
            return Ok(Vec::new());
        }
        let w: Vec<C64> = self.weights.iter().map(|&x| C64::new(x, 0.0)).collect();
        let q = row_null_space(&w); // m x (m-1), columns y with w^T y = 0
        let ones: Vec<C64> = vec![C64::new(1.0, 0.0); m];
        let u = row_null_space(&ones).adjoint(); // (m-1) x m, rows orthogonal to ones
        let z = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            m,
            self.support.iter().map(|&x| C64::new(x, 0.0)),
        ));
        let uq = &u * &q;
        let uzq = &u * &z * &q;
        let a = uq
            .lu()
            .solve(&uzq)
            .ok_or_else(|| Error::Conditioning("singular pencil in pole computation".into()))?;
        crate::linalg::eigenvalues(&a)
    }

    /// Residue of R at a simple pole p: N(p) / D'(p).
    pub fn residue(&self, p: C64) -> C64 {
        let mut num = C64::new(0.0, 0.0);
        let mut dden = C64::new(0.0, 0.0);
        for j in 0..self.support.len() {
            let inv = 1.0 / (p - self.support[j]);
            num += self.weights[j] * self.values[j] * inv;
            dden -= self.weights[j] * inv * inv;
        }
        num / dden
    }
}

/// Greedy AAA fit of real samples (w_i, S_i).
pub fn aaa_fit(samples: &[(f64, f64)], opts: AaaOptions) -> Result<BarycentricRational> {
    if samples.len() < 8 {
        return Err(Error::Validation(format!(
            "AAA needs at least 8 samples, got {}",
            samples.len()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Validation("AAA tolerance must be positive".into()));
    }
    if samples
        .iter()
        .any(|(w, s)| !w.is_finite() || !s.is_finite())
    {
        return Err(Error::Validation("AAA samples must be finite".into()));
    }
    let mut sorted: Vec<f64> = samples.iter().map(|s| s.0).collect();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|p| p[0] == p[1]) {
        return Err(Error::Validation("duplicate sample abscissae".into()));
    }
    let zs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let fs: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let n = zs.len();
    let scale = fs.iter().fold(0.0f64, |a, f| a.max(f.abs()));
    let mean = fs.iter().sum::<f64>() / n as f64;
    let mut r: Vec<f64> = vec![mean; n];
    let mut is_support = vec![false; n];
    let mut support_idx: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    let mut raw = Vec::new();
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    let m_max = opts.m_max.min(n - 1);

    if scale == 0.0 {
        return Ok(BarycentricRational {
            support: vec![zs[0]],
            weights: vec![1.0],
            values: vec![0.0],
            error_history: vec![0.0],
            raw_error_history: vec![0.0],
            achieved: 0.0,
            tol: opts.tol,
            flagged: false,
        });
    }

    for _ in 0..m_max {
        // (i) greedy support selection
        let mut jmax = usize::MAX;
        let mut emax = -1.0;
        for i in 0..n {
            if !is_support[i] {
                let e = (fs[i] - r[i]).abs();
                if e > emax {
                    emax = e;
                    jmax = i;
                }
            }
        }
        is_support[jmax] = true;
        support_idx.push(jmax);
        let m = support_idx.len();
        let rest: Vec<usize> = (0..n).filter(|&i| !is_support[i]).collect();
        // (ii) Loewner matrix and its smallest right singular vector
        let mut loewner = DMatrix::<f64>::zeros(rest.len(), m);
        for (row, &i) in rest.iter().enumerate() {
            for (col, &j) in support_idx.iter().enumerate() {
                loewner[(row, col)] = (fs[i] - fs[j]) / (zs[i] - zs[j]);
            }
        }
        let weights = smallest_right_singular_vector(loewner)?;
        // (iii) update the approximation on the remaining grid
        let mut err = 0.0f64;
        for i in 0..n {
            if is_support[i] {
                r[i] = fs[i];
                continue;
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for (col, &j) in support_idx.iter().enumerate() {
                let c = weights[col] / (zs[i] - zs[j]);
                num += c * fs[j];
                den += c;
            }
            r[i] = num / den;
            err = err.max((fs[i] - r[i]).abs());
        }
        let rel = err / scale;
        raw.push(rel);
        if best.as_ref().map_or(true, |b| rel < b.0) {
            best = Some((rel, support_idx.clone(), weights.clone()));
        }
        history.push(best.as_ref().unwrap().0);
        if rel <= opts.tol {
            break;
        }
    }
    let (achieved, idx, weights) = best.expect("at least one iteration");
    Ok(BarycentricRational {
        support: idx.iter().map(|&i| zs[i]).collect(),
        values: idx.iter().map(|&i| fs[i]).collect(),
        weights,
        error_history: history,
        raw_error_history: raw,
        achieved,
        tol: opts.tol,
        flagged: achieved > opts.tol,
    })
}

fn smallest_right_singular_vector(a: DMatrix<f64>) -> Result<Vec<f64>> {
    let m = a.ncols();
    if m == 1 {
        return Ok(vec![1.0]);
    }
    // QR first keeps the SVD small: A = QR, right singular vectors of R
    let r = if a.nrows() > m { a.qr().r() } else { a };
    let mut sq = DMatrix::<f64>::zeros(m.max(r.nrows()), m);
    sq.view_mut((0, 0), (r.nrows(), m)).copy_from(&r);
    let svd = sq.svd(false, true);
    let vt = svd
        .v_t
        .ok_or_else(|| Error::Conditioning("SVD failed in AAA".into()))?;
    let (imin, _) =
        svd.singular_values
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc },
            );
    Ok(vt.row(imin).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_function_converges_at_order_one() {
        let samples: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 0.3 - 2.0, 1.0)).collect();
        let r = aaa_fit(&samples, AaaOptions::default()).unwrap();
        assert_eq!(r.order(), 1);
        assert_eq!(r.achieved, 0.0);
        for (w, _) in &samples {
            assert_eq!(r.eval(*w), 1.0);
        }
    }

    #[test]
    fn duplicate_abscissae_rejected() {
        let mut samples: Vec<(f64, f64)> = (0..10)
            .map(|i| (i as f64, 1.0 / (1.0 + i as f64)))
            .collect();
        samples.push((3.0, 0.25));
        assert!(matches!(
            aaa_fit(&samples, AaaOptions::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn too_few_samples_rejected() {
        let samples: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 1.0)).collect();
        assert!(aaa_fit(&samples, AaaOptions::default()).is_err());
    }
}
