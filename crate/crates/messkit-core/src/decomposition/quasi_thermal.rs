//! Quasi-thermal decomposition C(t) = sum_k g_k^2 [(n_k+1) e^{-i w_k t} + n_k e^{i w_k t}] e^{-gamma_k |t|}.

use super::modes::ExponentialModes;
use crate::bath::CorrelationFunction;
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct QuasiThermalModes {
    pub g: Vec<f64>,
    pub n: Vec<f64>,
    pub omega: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Achieved sup-norm residual on the fit grid.
    pub residual: f64,
    pub tol: f64,
    pub flagged: bool,
}

impl QuasiThermalModes {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn eval(&self, t: f64) -> C64 {
        let a = t.abs();
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..self.len() {
            let ph = C64::new(0.0, self.omega[k] * a).exp();
            acc += self.g[k].powi(2)
                * ((self.n[k] + 1.0) * ph.conj() + self.n[k] * ph)
                * (-self.gamma[k] * a).exp();
        }
        if t < 0.0 {
            acc.conj()
        } else {
            acc
        }
    }

    /// The same correlation as 2K exponential modes.
    pub fn to_exponential(&self) -> ExponentialModes {
        let mut d = Vec::new();
        let mut z = Vec::new();
        for k in 0..self.len() {
            let g2 = self.g[k].powi(2);
            d.push(C64::new(g2 * (self.n[k] + 1.0), 0.0));
            z.push(C64::new(self.gamma[k], self.omega[k]));
            if self.n[k] > 0.0 {
                d.push(C64::new(g2 * self.n[k], 0.0));
                z.push(C64::new(self.gamma[k], -self.omega[k]));
            }
        }
        ExponentialModes {
            d,
            z,
            residual_bound: self.residual,
            t_max: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct QuasiThermalOptions {
    pub starts: usize,
    pub seed: u64,
    /// Keep gamma_k = 0 (undamped modes).
    pub undamped: bool,
    pub max_iter: usize,
}

impl Default for QuasiThermalOptions {
    fn default() -> Self {
        Self {
            starts: 16,
            seed: 0x5eed,
            undamped: false,
            max_iter: 500,
        }
    }
}

const PER_MODE: usize = 4;

// parameters per mode: (a, b, w, c) with g = a^2, n = b^2, omega = w, gamma = c^2
fn unpack(p: &[f64], k: usize, undamped: bool) -> (f64, f64, f64, f64) {
    let q = &p[PER_MODE * k..PER_MODE * (k + 1)];
    (
        q[0] * q[0],
        q[1] * q[1],
        q[2],
        if undamped { 0.0 } else { q[3] * q[3] },
    )
}

fn residual_and_jacobian(
    p: &[f64],
    times: &[f64],
    target: &[C64],
    undamped: bool,
    jac: Option<&mut DMatrix<f64>>,
) -> DVector<f64> {
    let modes = p.len() / PER_MODE;
    let n = times.len();
    let mut r = DVector::zeros(2 * n);
    let mut jac = jac;
    for (i, &t) in times.iter().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..modes {
            let (g, nk, w, gam) = unpack(p, k, undamped);
            let q = &p[PER_MODE * k..PER_MODE * (k + 1)];
            let decay = (-gam * t).exp();
            let em = C64::new(0.0, -w * t).exp() * decay;
            let ep = em.conj();
            let shape = (nk + 1.0) * em + nk * ep;
            let g2 = g * g;
            acc += g2 * shape;
            if let Some(j) = jac.as_deref_mut() {
                // chain rule through the squares
                let d_a = 2.0 * g * shape * (2.0 * q[0]);
                let d_b = g2 * (em + ep) * (2.0 * q[1]);
                let d_w = g2 * C64::new(0.0, t) * (nk * ep - (nk + 1.0) * em);
                let d_c = if undamped {
                    C64::new(0.0, 0.0)
                } else {
                    -t * g2 * shape * (2.0 * q[3])
                };
                for (col, d) in [d_a, d_b, d_w, d_c].into_iter().enumerate() {
                    j[(2 * i, PER_MODE * k + col)] = d.re;
                    j[(2 * i + 1, PER_MODE * k + col)] = d.im;
                }
            }
        }
        let diff = acc - target[i];
        r[2 * i] = diff.re;
        r[2 * i + 1] = diff.im;
    }
    r
}

fn levenberg_marquardt(
    p0: Vec<f64>,
    times: &[f64],
    target: &[C64],
    opts: &QuasiThermalOptions,
) -> (Vec<f64>, f64) {
    let np = p0.len();
    let mut p = p0;
    let mut jac = DMatrix::zeros(2 * times.len(), np);
    let mut r = residual_and_jacobian(&p, times, target, opts.undamped, Some(&mut jac));
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..opts.max_iter {
        let jt = jac.transpose();
        let a = &jt * &jac;
        let grad = &jt * &r;
        if grad.amax() <= 1e-30 {
            break;
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut m = a.clone();
            for i in 0..np {
                m[(i, i)] += lambda * (a[(i, i)] + 1e-12);
            }
            let Some(step) = m.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 4.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rt = residual_and_jacobian(&trial, times, target, opts.undamped, None);
            let ct = rt.norm_squared();
            if ct.is_finite() && ct < cost {
                let rel = (cost - ct) / cost.max(1e-300);
                p = trial;
                r = residual_and_jacobian(&p, times, target, opts.undamped, Some(&mut jac));
                cost = ct;
                lambda = (lambda / 3.0).max(1e-15);
                improved = rel > 1e-12;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (p, cost)
}

/// Rough spectral moments of sampled C(t): returns (weights, frequencies)
/// of a one-sided cosine transform on a coarse grid.
fn spectral_profile(times: &[f64], values: &[C64]) -> Vec<(f64, f64)> {
    let n = times.len();
    let dt = (times[n - 1] - times[0]) / (n - 1).max(1) as f64;
    let nyq = std::f64::consts::PI / dt.max(1e-300);
    // a quarter of the window resolution
    let m = ((4.0 * nyq * (times[n - 1] - times[0]) / (2.0 * std::f64::consts::PI)).ceil()
        as usize)
        .clamp(50, 4000);
    (0..=2 * m)
        .map(|i| {
            let w = nyq * (i as f64 - m as f64) / m as f64;
            let mut acc = 0.0;
            for (j, (&t, c)) in times.iter().zip(values).enumerate() {
                let wt = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                acc += wt * (c * C64::new(0.0, w * t).exp()).re;
            }
            (w, (2.0 * acc * dt).max(0.0))
        })
        .collect()
}

/// Multi-start damped least-squares fit of sampled C(t).
pub fn quasi_thermal_fit_samples(
    times: &[f64],
    values: &[C64],
    k: usize,
    tol: f64,
    opts: QuasiThermalOptions,
) -> Result<QuasiThermalModes> {
    if k == 0 {
        return Err(Error::Validation("quasi-thermal fit needs K >= 1".into()));
    }
    if times.len() != values.len() || times.len() < 4 * k {
        return Err(Error::Validation(
            "quasi-thermal fit needs at least 4K samples".into(),
        ));
    }
    let c0 = values[0]
        .re
        .abs()
        .max(values.iter().fold(0.0f64, |a, v| a.max(v.norm())));
    let profile = spectral_profile(times, values);
    let total: f64 = profile.iter().map(|p| p.1).sum::<f64>().max(1e-300);
    // frequency quantiles of the positive-frequency weight
    let quantile = |q: f64| -> f64 {
        let mut acc = 0.0;
        for &(w, s) in &profile {
            acc += s / total;
            if acc >= q {
                return w;
            }
        }
        profile.last().unwrap().0
    };
    let t_end = *times.last().unwrap();
    let decay_idx = values
        .iter()
        .rposition(|v| v.norm() > 0.2 * c0)
        .unwrap_or(0);
    let gamma0 =
        (1.0 / times[decay_idx.max(1)].max(1e-3 * t_end)).min(10.0 / t_end.max(1e-300) * 1e3);
    let base: Vec<f64> = (0..k)
        .flat_map(|j| {
            let w = quantile((j as f64 + 0.5) / k as f64);
            let lookup = |x: f64| {
                profile
                    .iter()
                    .min_by(|a, b| (a.0 - x).abs().total_cmp(&(b.0 - x).abs()))
                    .unwrap()
                    .1
            };
            let ratio = (lookup(-w.abs()) / lookup(w.abs()).max(1e-300)).clamp(0.0, 0.95);
            let n = ratio / (1.0 - ratio);
            let w_signed = if lookup(-w.abs()) > lookup(w.abs()) {
                -w.abs()
            } else {
                w.abs()
            };
            let g = (c0 / (k as f64 * (2.0 * n + 1.0))).sqrt();
            let n = if w_signed < 0.0 { n.max(1.0) } else { n };
            [
                g.sqrt(),
                n.sqrt(),
                w_signed.abs(),
                if opts.undamped { 0.0 } else { gamma0.sqrt() },
            ]
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let w_hi = quantile(0.95)
        .abs()
        .max(quantile(0.05).abs())
        .max(1e-3 / t_end.max(1e-300));
    let sup = |p: &[f64]| -> f64 {
        let r = residual_and_jacobian(p, times, values, opts.undamped, None);
        (0..times.len())
            .map(|i| r[2 * i].hypot(r[2 * i + 1]))
            .fold(0.0, f64::max)
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in 0..opts.starts.max(1) {
        let mut p = base.clone();
        if start % 2 == 1 {
            // jitter around the heuristic start
            for (i, v) in p.iter_mut().enumerate() {
                let f: f64 = rng.gen_range(-0.5..0.5);
                if i % PER_MODE == 2 {
                    *v += f * (v.abs() + 0.5 * w_hi);
                } else if !(opts.undamped && i % PER_MODE == 3) {
                    *v *= (1.0 + f).max(0.05);
                }
            }
        } else if start > 0 {
            // broad draw on the data scales
            for j in 0..k {
                let q = &mut p[PER_MODE * j..PER_MODE * (j + 1)];
                q[0] = (c0 / k as f64 * rng.gen_range(0.05..1.0)).sqrt().sqrt();
                q[1] = rng.gen_range(0.0..1.5);
                q[2] = rng.gen_range(-0.3..1.5) * w_hi;
                q[3] = if opts.undamped {
                    0.0
                } else {
                    (gamma0 * rng.gen_range(0.2..5.0)).sqrt()
                };
            }
        }
        let (p, _) = levenberg_marquardt(p, times, values, &opts);
        let r = sup(&p);
        if best.as_ref().map_or(true, |b| r < b.1) {
            best = Some((p, r));
        }
    }
    let (p, _) = best.unwrap();
    let mut out = QuasiThermalModes {
        g: vec![],
        n: vec![],
        omega: vec![],
        gamma: vec![],
        residual: 0.0,
        tol,
        flagged: false,
    };
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| p[PER_MODE * a + 2].total_cmp(&p[PER_MODE * b + 2]));
    for j in order {
        let (g, n, w, gam) = unpack(&p, j, opts.undamped);
        out.g.push(g);
        out.n.push(n);
        out.omega.push(w);
        out.gamma.push(gam);
    }
    out.residual = times
        .iter()
        .zip(values)
        .map(|(&t, v)| (out.eval(t) - v).norm())
        .fold(0.0, f64::max);
    out.flagged = out.residual > tol;
    Ok(out)
}

/// Fit of a correlation function sampled uniformly on [0, t_max].
pub fn quasi_thermal_fit(
    c: &CorrelationFunction,
    k: usize,
    tol: f64,
    t_max: f64,
    opts: QuasiThermalOptions,
) -> Result<QuasiThermalModes> {
    let n = (100 * k).max(400);
    let times: Vec<f64> = (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect();
    let values = c.sample(&times);
    quasi_thermal_fit_samples(&times, &values, k, tol, opts)
}

impl crate::bath::Correlator for QuasiThermalModes {
    fn correlation(&self, t: f64) -> C64 {
        self.eval(t)
    }
}
