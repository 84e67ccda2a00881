use crate::deterministic::Diagnostics;
use crate::{CMat, Error, Result, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Trajectories per reduction block. Blocks are fixed by index so the
/// reduction tree never depends on scheduling.
const BLOCK: usize = 32;

/// Running first and second moments (pairwise Chan merge) of flattened samples.
#[derive(Clone, Debug)]
pub(crate) struct Moments {
    count: usize,
    mean: Vec<C64>,
    m2_re: Vec<f64>,
    m2_im: Vec<f64>,
}

impl Moments {
    fn single(x: Vec<C64>) -> Self {
        let n = x.len();
        Self {
            count: 1,
            mean: x,
            m2_re: vec![0.0; n],
            m2_im: vec![0.0; n],
        }
    }

    fn merge(a: Self, b: Self) -> Self {
        let n = (a.count + b.count) as f64;
        let (na, nb) = (a.count as f64, b.count as f64);
        let mut out = a;
        for k in 0..out.mean.len() {
            let delta = b.mean[k] - out.mean[k];
            out.mean[k] += delta * (nb / n);
            out.m2_re[k] += b.m2_re[k] + delta.re * delta.re * na * nb / n;
            out.m2_im[k] += b.m2_im[k] + delta.im * delta.im * na * nb / n;
        }
        out.count += b.count;
        out
    }
}

/// Runs `f` for trajectories 0..n in parallel and reduces their flattened
/// outputs with a fixed block-and-pairwise-tree order.
pub(crate) fn reduce<F>(n: usize, keep: bool, f: F) -> Result<(Moments, Option<Vec<Vec<C64>>>)>
where
    F: Fn(usize) -> Result<Vec<C64>> + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    let parts: Vec<Result<(Moments, Vec<Vec<C64>>)>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc: Option<Moments> = None;
            let mut kept = Vec::new();
            for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                let x = f(i)?;
                if keep {
                    kept.push(x.clone());
                }
                let m = Moments::single(x);
                acc = Some(match acc {
                    None => m,
                    Some(a) => Moments::merge(a, m),
                });
            }
            Ok((acc.expect("non-empty block"), kept))
        })
        .collect();
    let mut level = Vec::with_capacity(blocks);
    let mut samples = keep.then(Vec::new);
    for p in parts {
        let (m, kept) = p?;
        if let Some(s) = samples.as_mut() {
            s.extend(kept);
        }
        level.push(m);
    }
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => Moments::merge(a, b),
                None => a,
            });
        }
        level = next;
    }
    let total = level
        .pop()
        .ok_or_else(|| Error::Validation("empty ensemble".into()))?;
    Ok((total, samples))
}

/// Monte-Carlo estimate of rho_s(t) with per-element standard errors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryEnsemble {
    pub backend: String,
    pub master_seed: u64,
    pub trajectories: usize,
    pub construction: Option<String>,
    pub times: Vec<f64>,
    pub mean: Vec<CMat>,
    /// Standard error of the real parts in `re`, of the imaginary parts in `im`.
    pub stderr: Vec<CMat>,
    /// Per-trajectory rho_s(t), kept only on request.
    pub samples: Option<Vec<Vec<CMat>>>,
    pub diagnostics: Diagnostics,
}

impl TrajectoryEnsemble {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_moments(
        backend: &str,
        master_seed: u64,
        construction: Option<String>,
        times: Vec<f64>,
        d: usize,
        moments: Moments,
        samples: Option<Vec<Vec<C64>>>,
        stderr_bound: f64,
    ) -> Self {
        let n = moments.count;
        let d2 = d * d;
        let denom = (n as f64) * ((n.max(2) - 1) as f64);
        let mut mean = Vec::with_capacity(times.len());
        let mut stderr = Vec::with_capacity(times.len());
        for it in 0..times.len() {
            let r = it * d2..(it + 1) * d2;
            mean.push(CMat::from_column_slice(d, d, &moments.mean[r.clone()]));
            let se: Vec<C64> = r
                .map(|k| {
                    C64::new(
                        (moments.m2_re[k] / denom).sqrt(),
                        (moments.m2_im[k] / denom).sqrt(),
                    )
                })
                .collect();
            stderr.push(CMat::from_column_slice(d, d, &se));
        }
        let samples = samples.map(|all| {
            all.into_iter()
                .map(|x| {
                    x.chunks(d2)
                        .map(|c| CMat::from_column_slice(d, d, c))
                        .collect()
                })
                .collect()
        });
        let mut ens = Self {
            backend: backend.into(),
            master_seed,
            trajectories: n,
            construction,
            times,
            mean,
            stderr,
            samples,
            diagnostics: Diagnostics::default(),
        };
        ens.diagnostics.trace_drift = ens
            .mean
            .iter()
            .map(|m| (m.trace() - C64::new(1.0, 0.0)).norm())
            .fold(0.0, f64::max);
        ens.diagnostics.hermiticity = ens
            .mean
            .iter()
            .map(|m| crate::linalg::max_abs(&(m - m.adjoint())))
            .fold(0.0, f64::max);
        let last = ens.max_stderr_at(ens.times.len() - 1);
        if !(last <= stderr_bound) {
            ens.diagnostics.flagged = true;
            ens.diagnostics.notes.push(format!(
                "variance blow-up: standard error {last:.3e} at t = {} exceeds {stderr_bound:.1e}",
                ens.times[ens.times.len() - 1]
            ));
        }
        ens
    }

    pub fn dim(&self) -> usize {
        self.mean.first().map_or(0, |m| m.nrows())
    }

    /// Largest standard error (real or imaginary part) over all elements at
    /// grid index `i`.
    pub fn max_stderr_at(&self, i: usize) -> f64 {
        self.stderr[i]
            .iter()
            .map(|z| z.re.max(z.im))
            .fold(0.0, f64::max)
    }

    /// Standard error of Tr rho at grid index `i`, from the diagonal element
    /// errors combined as independent.
    pub fn trace_stderr(&self, i: usize) -> f64 {
        let se = &self.stderr[i];
        (0..self.dim())
            .map(|k| se[(k, k)].norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Mean and standard error of Tr(O rho) assuming uncorrelated elements
    /// when `samples` are absent; exact from the samples otherwise.
    pub fn expectation(&self, op: &CMat) -> Vec<(C64, f64)> {
        let n = self.trajectories as f64;
        (0..self.times.len())
            .map(|i| {
                let m = (op * &self.mean[i]).trace();
                let se = match &self.samples {
                    Some(all) => {
                        let vals: Vec<C64> = all.iter().map(|s| (op * &s[i]).trace()).collect();
                        let var = vals.iter().map(|v| (v - m).norm_sqr()).sum::<f64>()
                            / (n - 1.0).max(1.0);
                        (var / n).sqrt()
                    }
                    None => {
                        let d = self.dim();
                        let mut acc = 0.0;
                        for a in 0..d {
                            for b in 0..d {
                                acc += op[(b, a)].norm_sqr() * self.stderr[i][(a, b)].norm_sqr();
                            }
                        }
                        acc.sqrt()
                    }
                };
                (m, se)
            })
            .collect()
    }
}
