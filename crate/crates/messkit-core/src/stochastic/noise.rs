use crate::bath::Correlator;
use crate::decomposition::{EffectiveModeSet, ExponentialModes};
use crate::linalg::{lyapunov, psd_sqrt};
use crate::quad::gauss_legendre;
use crate::{CMat, CVec, Error, Result, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseConstruction {
    OuUnraveling,
    FftFilter,
}

impl NoiseConstruction {
    pub fn label(self) -> &'static str {
        match self {
            NoiseConstruction::OuUnraveling => "ou-unraveling",
            NoiseConstruction::FftFilter => "fft-filter",
        }
    }
}

/// Bath description the noise generators accept.
#[derive(Clone, Copy)]
pub enum NoiseSource<'a> {
    Modes(&'a ExponentialModes),
    Set(&'a EffectiveModeSet),
    /// Only usable by the fft-filter construction.
    Correlation(&'a dyn Correlator),
}

impl NoiseSource<'_> {
    fn correlator(&self) -> &dyn Correlator {
        match self {
            NoiseSource::Modes(m) => *m,
            NoiseSource::Set(s) => *s,
            NoiseSource::Correlation(c) => *c,
        }
    }

    /// True when the source encodes C = 0 exactly (no modes or all weights
    /// zero). A bare correlation is never treated as silent.
    pub fn is_silent(&self) -> bool {
        let zero = C64::new(0.0, 0.0);
        match self {
            NoiseSource::Modes(m) => m.d.iter().all(|&d| d == zero),
            NoiseSource::Set(s) => s.kappa.iter().chain(s.eta.iter()).all(|&v| v == zero),
            NoiseSource::Correlation(_) => false,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseOptions {
    pub construction: NoiseConstruction,
    /// Scales the filtered part of Z_c by lambda and the white parts by
    /// 1/lambda; the target correlations do not depend on it. None picks
    /// lambda = (2 int_0^inf |C|^2 dt)^(-1/4), which roughly balances the
    /// two sources of sample variance.
    pub balance: Option<f64>,
    /// Draw the OU states at t = 0 from their stationary distribution.
    pub stationary_start: bool,
}

impl Default for NoiseOptions {
    fn default() -> Self {
        Self {
            construction: NoiseConstruction::OuUnraveling,
            balance: None,
            stationary_start: true,
        }
    }
}

/// One realization of the complex SLN noise pair on a uniform grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SLNNoisePair {
    pub times: Vec<f64>,
    pub zc: Vec<C64>,
    pub zq: Vec<C64>,
    pub construction: NoiseConstruction,
    pub seed: u64,
    pub stream: u64,
}

/// Random stream of trajectory `stream` under `seed`.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Circularly symmetric complex normal with E|x|^2 = 1.
fn cnormal<R: Rng>(rng: &mut R) -> C64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    C64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

fn cnormal_vec<R: Rng>(rng: &mut R, n: usize) -> CVec {
    CVec::from_iterator(n, (0..n).map(|_| cnormal(rng)))
}

/// (e^{a h} - 1) / a, stable for small |a h|.
fn phi(a: C64, h: f64) -> C64 {
    let x = a * h;
    if x.norm() < 1e-4 {
        h * (C64::new(1.0, 0.0) + x / 2.0 + x * x / 6.0 + x * x * x / 24.0)
    } else {
        (x.exp() - 1.0) / a
    }
}

fn auto_balance(c: &dyn Correlator, h: f64, lags: usize) -> f64 {
    let mut acc = 0.5 * c.correlation(0.0).norm_sqr();
    for l in 1..lags {
        acc += c.correlation(l as f64 * h).norm_sqr();
    }
    let b = 2.0 * acc * h;
    if b > 0.0 && b.is_finite() {
        b.powf(-0.25).clamp(1.0, 1e3)
    } else {
        1.0
    }
}

/// Checks a uniform grid starting at 0 and returns its step.
pub fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 || times[0] != 0.0 {
        return Err(Error::Validation(
            "noise grid must start at 0 and have at least two points".into(),
        ));
    }
    let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(h > 0.0)
        || times
            .iter()
            .enumerate()
            .any(|(i, &t)| (t - i as f64 * h).abs() > 1e-9 * h.max(t.abs()))
    {
        return Err(Error::Validation("noise grid must be uniform".into()));
    }
    Ok(h)
}

/// Exact one-step update data for dy = -A y dt + b dW, with dW complex white
/// noise of intensity 2 (sum or difference of two unit noises).
#[derive(Clone, Debug)]
struct OuChannel {
    /// e^{-A h} on the diagonal.
    decay: Vec<C64>,
    b: CVec,
    /// Square root of the joint covariance of (dW over the bin, the bin
    /// stochastic integrals of every mode).
    joint_sqrt: CMat,
    /// Square root of the stationary covariance.
    stationary_sqrt: CMat,
}

impl OuChannel {
    /// `rates[j]` are the diagonal entries a_j of -A, so y_j' = a_j y_j + b_j w.
    fn new(rates: &[C64], b: CVec, h: f64) -> Result<Self> {
        let k = rates.len();
        let mut cov = CMat::zeros(k + 1, k + 1);
        cov[(0, 0)] = C64::new(2.0 * h, 0.0);
        for j in 0..k {
            let v = phi(rates[j], h) * 2.0;
            cov[(j + 1, 0)] = v;
            cov[(0, j + 1)] = v.conj();
            for l in 0..k {
                cov[(j + 1, l + 1)] = phi(rates[j] + rates[l].conj(), h) * 2.0;
            }
        }
        let a = CMat::from_diagonal(&CVec::from_iterator(k, rates.iter().map(|r| -r)));
        let q = (&b * b.adjoint()) * C64::new(2.0, 0.0);
        let p = lyapunov(&a, &q)?;
        Ok(Self {
            decay: rates.iter().map(|r| (r * h).exp()).collect(),
            b,
            joint_sqrt: psd_sqrt(&cov),
            stationary_sqrt: psd_sqrt(&p),
        })
    }
}

/// Precomputed generator for SLN noise realizations on a fixed uniform grid.
#[derive(Clone, Debug)]
pub struct SlnNoiseGenerator {
    opts: NoiseOptions,
    balance: f64,
    h: f64,
    times: Vec<f64>,
    kind: Kind,
}

#[derive(Clone, Debug)]
enum Kind {
    Ou {
        kappa: CVec,
        plus: OuChannel,
        minus: OuChannel,
    },
    Fft {
        history: usize,
        len: usize,
        kernel_hat: Vec<C64>,
        kernel_conj_hat: Vec<C64>,
    },
}

impl SlnNoiseGenerator {
    pub fn new(source: NoiseSource<'_>, times: &[f64], opts: NoiseOptions) -> Result<Self> {
        let h = uniform_step(times)?;
        let balance = match opts.balance {
            Some(b) if b > 0.0 && b.is_finite() => b,
            Some(_) => return Err(Error::Validation("noise balance must be positive".into())),
            None => auto_balance(source.correlator(), h, 4 * times.len()),
        };
        let kind = match opts.construction {
            NoiseConstruction::OuUnraveling => {
                let set = match source {
                    NoiseSource::Modes(m) => EffectiveModeSet::star(m),
                    NoiseSource::Set(s) => s.clone(),
                    NoiseSource::Correlation(_) => {
                        return Err(Error::Construction(
                            "ou-unraveling needs a mode decomposition; use fft-filter for a bare correlation".into(),
                        ))
                    }
                };
                if !set.is_diagonal(1e-12) {
                    return Err(Error::Construction(
                        "ou-unraveling needs a diagonal (star) mode matrix; use fft-filter".into(),
                    ));
                }
                let k = set.len();
                let eps: Vec<C64> = (0..k).map(|j| set.e[(j, j)]).collect();
                // y' = -i E y + eta w_+,  (y^diamond)^T' = i E^* (y^diamond)^T + eta^* w_-
                let plus_rates: Vec<C64> = eps.iter().map(|e| C64::new(0.0, -1.0) * e).collect();
                let minus_rates: Vec<C64> =
                    eps.iter().map(|e| C64::new(0.0, 1.0) * e.conj()).collect();
                if plus_rates.iter().any(|r| r.re >= 0.0) {
                    return Err(Error::Construction(
                        "ou-unraveling needs strictly damped modes".into(),
                    ));
                }
                let plus = OuChannel::new(&plus_rates, set.eta.clone(), h)?;
                let minus = OuChannel::new(&minus_rates, set.eta.map(|z| z.conj()), h)?;
                Kind::Ou {
                    kappa: set.kappa.clone(),
                    plus,
                    minus,
                }
            }
            NoiseConstruction::FftFilter => {
                let c = source.correlator();
                let n = times.len();
                let history = 3 * n;
                let bins = history + n;
                let len = (2 * bins).next_power_of_two().max(4 * n);
                // bin averages of C over lag intervals [(l-1)h, l h]
                let (x, w) = gauss_legendre(6);
                let mut kernel = vec![C64::new(0.0, 0.0); len];
                for (l, slot) in kernel.iter_mut().enumerate().take(bins + 1).skip(1) {
                    let mut acc = C64::new(0.0, 0.0);
                    for (xi, wi) in x.iter().zip(&w) {
                        let u = (l as f64 - 0.5 + 0.5 * xi) * h;
                        acc += c.correlation(u) * (0.5 * wi);
                    }
                    if !acc.re.is_finite() || !acc.im.is_finite() {
                        return Err(Error::Construction(
                            "correlation is not finite on the filter lattice; try ou-unraveling"
                                .into(),
                        ));
                    }
                    *slot = acc;
                }
                let mut kernel_conj: Vec<C64> = kernel.iter().map(|z| z.conj()).collect();
                let fft = FftPlanner::new().plan_fft_forward(len);
                fft.process(&mut kernel);
                fft.process(&mut kernel_conj);
                Kind::Fft {
                    history,
                    len,
                    kernel_hat: kernel,
                    kernel_conj_hat: kernel_conj,
                }
            }
        };
        Ok(Self {
            opts,
            balance,
            h,
            times: times.to_vec(),
            kind,
        })
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn balance(&self) -> f64 {
        self.balance
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sample(&self, seed: u64, stream: u64) -> SLNNoisePair {
        let mut rng = trajectory_rng(seed, stream);
        let n = self.times.len();
        let lam = self.balance;
        let h = self.h;
        let mut zc = Vec::with_capacity(n);
        let mut zq = Vec::with_capacity(n);
        match &self.kind {
            Kind::Ou { kappa, plus, minus } => {
                let k = kappa.len();
                let (mut y, mut yd) = if self.opts.stationary_start {
                    (
                        &plus.stationary_sqrt * cnormal_vec(&mut rng, k),
                        &minus.stationary_sqrt * cnormal_vec(&mut rng, k),
                    )
                } else {
                    (CVec::zeros(k), CVec::zeros(k))
                };
                for _ in 0..n {
                    let xp = &plus.joint_sqrt * cnormal_vec(&mut rng, k + 1);
                    let xm = &minus.joint_sqrt * cnormal_vec(&mut rng, k + 1);
                    let filtered: C64 = (0..k)
                        .map(|j| kappa[j].conj() * y[j] + yd[j] * kappa[j])
                        .sum();
                    let wc = (xp[0] + xm[0]) / (2.0 * h);
                    let wq = (xp[0] - xm[0]) / (2.0 * h);
                    zc.push(filtered * lam + wc.conj() / lam);
                    zq.push(wq.conj() / lam);
                    for j in 0..k {
                        y[j] = plus.decay[j] * y[j] + plus.b[j] * xp[j + 1];
                        yd[j] = minus.decay[j] * yd[j] + minus.b[j] * xm[j + 1];
                    }
                }
            }
            Kind::Fft {
                history,
                len,
                kernel_hat,
                kernel_conj_hat,
            } => {
                let bins = history + n;
                let sd = (2.0 * h).sqrt();
                let mut a = vec![C64::new(0.0, 0.0); *len];
                let mut b = vec![C64::new(0.0, 0.0); *len];
                for i in 0..bins {
                    a[i] = cnormal(&mut rng) * sd;
                    b[i] = cnormal(&mut rng) * sd;
                }
                let mut planner = FftPlanner::new();
                let fwd = planner.plan_fft_forward(*len);
                let inv = planner.plan_fft_inverse(*len);
                let mut fa = a.clone();
                let mut fb = b.clone();
                fwd.process(&mut fa);
                fwd.process(&mut fb);
                let mut conv: Vec<C64> = (0..*len)
                    .map(|i| fa[i] * kernel_hat[i] + fb[i] * kernel_conj_hat[i])
                    .collect();
                inv.process(&mut conv);
                let norm = 1.0 / *len as f64;
                for j in 0..n {
                    let i = history + j;
                    let wc = (a[i] + b[i]) / (2.0 * h);
                    let wq = (a[i] - b[i]) / (2.0 * h);
                    zc.push(conv[i] * norm * lam + wc.conj() / lam);
                    zq.push(wq.conj() / lam);
                }
            }
        }
        SLNNoisePair {
            times: self.times.clone(),
            zc,
            zq,
            construction: self.opts.construction,
            seed,
            stream,
        }
    }
}

/// One realization of the SLN noise pair for trajectory `stream`.
pub fn generate_sln_noise(
    source: NoiseSource<'_>,
    times: &[f64],
    seed: u64,
    stream: u64,
    opts: NoiseOptions,
) -> Result<SLNNoisePair> {
    Ok(SlnNoiseGenerator::new(source, times, opts)?.sample(seed, stream))
}

/// Target non-conjugated correlations (<Z_c(t) Z_c(0)>, <Z_c(t) Z_q(0)>,
/// <Z_q(t) Z_c(0)>, <Z_q(t) Z_q(0)>) of the continuum noise pair.
pub fn sln_targets(c: &dyn Correlator, t: f64) -> [C64; 4] {
    let ct = c.correlation(t.abs());
    let i = C64::new(0.0, 1.0);
    let zero = C64::new(0.0, 0.0);
    let causal = if t > 0.0 { i * (2.0 * ct.im) } else { zero };
    let anti = if t < 0.0 { i * (2.0 * ct.im) } else { zero };
    [C64::new(2.0 * ct.re, 0.0), causal, anti, zero]
}

/// Complex Gaussian noise with <Z_t Z_s^*> = C(t - s) and <Z_t Z_s> = 0 for
/// the hierarchy of pure states.
#[derive(Clone, Debug)]
pub struct HopsNoiseGenerator {
    h: f64,
    n: usize,
    kind: HopsKind,
}

#[derive(Clone, Debug)]
enum HopsKind {
    /// Sum of independent complex OU processes, one per mode with real
    /// positive weight.
    Ou {
        decay: Vec<C64>,
        kick: Vec<f64>,
        stationary: Vec<f64>,
    },
    /// Spectral synthesis from S(w) on an FFT lattice.
    Spectral { len: usize, amplitude: Vec<f64> },
}

impl HopsNoiseGenerator {
    pub fn new(modes: &ExponentialModes, times: &[f64]) -> Result<Self> {
        let h = uniform_step(times)?;
        let n = times.len();
        let scale = modes
            .d
            .iter()
            .fold(0.0f64, |a, d| a.max(d.norm()))
            .max(1e-300);
        let ou = modes
            .d
            .iter()
            .all(|d| d.re >= 0.0 && d.im.abs() <= 1e-12 * scale)
            && modes.z.iter().all(|z| z.re > 0.0);
        let kind = if ou {
            HopsKind::Ou {
                decay: modes.z.iter().map(|z| (-z * h).exp()).collect(),
                kick: modes
                    .d
                    .iter()
                    .zip(&modes.z)
                    .map(|(d, z)| (d.re * (1.0 - (-2.0 * z.re * h).exp())).sqrt())
                    .collect(),
                stationary: modes.d.iter().map(|d| d.re.sqrt()).collect(),
            }
        } else {
            let len = (8 * n).next_power_of_two();
            let dw = 2.0 * std::f64::consts::PI / (len as f64 * h);
            let mut negative = 0.0f64;
            let mut total = 0.0f64;
            let amplitude = (0..len)
                .map(|l| {
                    let k = if l <= len / 2 {
                        l as f64
                    } else {
                        l as f64 - len as f64
                    };
                    let w = k * dw;
                    let s: f64 = modes
                        .d
                        .iter()
                        .zip(&modes.z)
                        .map(|(d, z)| 2.0 * (d / (z - C64::new(0.0, w))).re)
                        .sum();
                    total += s.abs();
                    if s < 0.0 {
                        negative += -s;
                    }
                    (s.max(0.0) * dw / (2.0 * std::f64::consts::PI)).sqrt()
                })
                .collect();
            if negative > 1e-3 * total {
                return Err(Error::Construction(format!(
                    "mode spectrum is not a valid noise power (negative weight fraction {:.2e})",
                    negative / total
                )));
            }
            HopsKind::Spectral { len, amplitude }
        };
        Ok(Self { h, n, kind })
    }

    pub fn sample(&self, seed: u64, stream: u64) -> Vec<C64> {
        let mut rng = trajectory_rng(seed, stream);
        match &self.kind {
            HopsKind::Ou {
                decay,
                kick,
                stationary,
            } => {
                let mut u: Vec<C64> = stationary.iter().map(|s| cnormal(&mut rng) * *s).collect();
                let mut out = Vec::with_capacity(self.n);
                for _ in 0..self.n {
                    out.push(u.iter().sum());
                    for j in 0..u.len() {
                        u[j] = decay[j] * u[j] + cnormal(&mut rng) * kick[j];
                    }
                }
                out
            }
            HopsKind::Spectral { len, amplitude } => {
                // Z(t_n) = sum_l a_l xi_l e^{-i w_l t_n}: a forward transform
                let mut buf: Vec<C64> = amplitude.iter().map(|a| cnormal(&mut rng) * *a).collect();
                FftPlanner::new().plan_fft_forward(*len).process(&mut buf);
                buf.truncate(self.n);
                buf
            }
        }
    }

    pub fn step(&self) -> f64 {
        self.h
    }
}
