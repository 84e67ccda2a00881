use super::{NoisePower, SpectralDensity};
use crate::quad::gauss_legendre;
use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureOptions {
    /// Longest time the grid must resolve.
    pub t_max: f64,
    /// Tolerated tail mass relative to C(0).
    pub tol: f64,
    /// Gauss–Legendre points per panel.
    pub order: usize,
    /// Panel density multiplier (2.0 halves every core panel).
    pub density: f64,
    /// Upper bound on oscillation-resolving core panels per side.
    pub max_core_panels: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            t_max: 100.0,
            tol: 1e-10,
            order: 20,
            density: 1.0,
            max_core_panels: 60_000,
        }
    }
}

/// Frequency nodes with precomputed weights w_i S(omega_i) / 2 pi.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Estimated mass not captured (relative to C(0)), including the part of
    /// the spectrum where oscillations at t_max are unresolved.
    pub tail_estimate: f64,
    pub options: QuadratureOptions,
}

struct Side<'a> {
    s: &'a NoisePower,
    sign: f64,
}

impl Side<'_> {
    fn f(&self, w: f64) -> Result<f64> {
        self.s.eval(self.sign * w)
    }
}

fn panel_mass(side: &Side, a: f64, b: f64, gx: &[f64], gw: &[f64]) -> Result<f64> {
    let (h, m) = (0.5 * (b - a), 0.5 * (a + b));
    let mut acc = 0.0;
    for (x, w) in gx.iter().zip(gw) {
        acc += w * side.f(m + h * x)?.abs();
    }
    Ok(acc * h)
}

/// Breakpoints for one half-line, ordered outward from zero. Returns the
/// breakpoints, the index of the last oscillation-resolved break, and the
/// omitted tail mass.
fn half_line(
    side: &Side,
    opts: &QuadratureOptions,
    gx: &[f64],
    gw: &[f64],
) -> Result<(Vec<f64>, f64, f64)> {
    let dens = &side.s.density;
    let omega = dens.scale();
    let mut feature = omega;
    if let SpectralDensity::LorentzianSum { terms } = dens {
        feature = terms.iter().map(|l| l.gamma).fold(feature, f64::min);
    }
    if let SpectralDensity::Brownian { gamma0, .. } = dens {
        feature = feature.min(*gamma0);
    }
    if !side.s.is_zero_temperature() {
        feature = feature.min(1.0 / side.s.beta);
    }
    let h_core = (feature / 8.0).min(12.0 / opts.t_max.max(1e-300)) / opts.density;
    let limit = dens.support_limit();

    // probe the tail mass on a geometric ladder to locate the cutoff
    let start = h_core.max(1e-3 * omega);
    let mut ladder = vec![start];
    let mut masses = Vec::new();
    let ratio = 1.1;
    let mut total_probe = panel_mass(side, 0.0, start, gx, gw)?;
    loop {
        let a = *ladder.last().unwrap();
        let mut b = a * ratio;
        if let Some(l) = limit {
            b = b.min(l);
        }
        if b <= a {
            break;
        }
        let m = panel_mass(side, a, b, gx, gw)?;
        total_probe += m;
        masses.push(m);
        ladder.push(b);
        let recent: f64 = masses.iter().rev().take(20).sum();
        if limit.map_or(false, |l| b >= l)
            || b > 1e9 * omega
            || (masses.len() > 60 && recent < 1e-22 * total_probe.max(1e-300))
        {
            break;
        }
    }
    if total_probe == 0.0 {
        return Ok((vec![0.0, start], 0.0, 0.0));
    }
    // cumulative tail beyond each ladder point
    let mut tail = vec![0.0; ladder.len()];
    for j in (0..masses.len()).rev() {
        tail[j] = tail[j + 1] + masses[j];
    }
    let mut cut = *ladder.last().unwrap();
    for (j, &x) in ladder.iter().enumerate() {
        if tail[j] <= 0.01 * opts.tol * total_probe {
            cut = x;
            break;
        }
    }
    let mut breaks = vec![0.0];
    let mut x = h_core;
    let mut fine = Vec::new();
    while x > h_core * 2f64.powi(-70) {
        fine.push(x);
        x *= 0.5;
    }
    fine.reverse();
    breaks.extend(fine);
    // core panels: feature-resolving near the origin, growing with omega up
    // to the oscillation limit
    let h_osc = 12.0 / opts.t_max.max(1e-300) / opts.density;
    let mut x = h_core;
    let mut n_core = 0;
    while x < cut && n_core < opts.max_core_panels {
        let width = h_osc.min(h_core.max(0.05 * x / opts.density));
        x = (x + width).min(cut);
        breaks.push(x);
        n_core += 1;
    }
    let last_resolved = breaks.len() - 1;
    let resolved_end = *breaks.last().unwrap();
    // geometric outer panels through the remaining tail
    let mut a = resolved_end;
    let end = *ladder.last().unwrap();
    while a < end {
        let b = (a * 1.2).min(end);
        breaks.push(b);
        a = b;
    }
    let at_limit = limit.map_or(false, |l| end >= l);
    let omitted = if at_limit {
        0.0
    } else {
        *masses.last().unwrap_or(&0.0) * 10.0
    };
    let unresolved = if last_resolved + 1 < breaks.len() {
        let from = breaks[last_resolved];
        let idx = ladder
            .iter()
            .position(|&x| x >= from)
            .unwrap_or(ladder.len() - 1);
        tail[idx]
    } else {
        0.0
    };
    Ok((breaks, omitted / total_probe, unresolved / total_probe))
}

impl FrequencyGrid {
    pub fn build(s: &NoisePower, opts: QuadratureOptions) -> Result<Self> {
        let (gx, gw) = gauss_legendre(opts.order);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut tail = 0.0;
        let mut mass = 0.0;
        for sign in [1.0, -1.0] {
            if sign < 0.0 && s.is_zero_temperature() {
                continue;
            }
            let side = Side { s, sign };
            let (breaks, omitted, unresolved) = half_line(&side, &opts, &gx, &gw)?;
            tail = f64::max(tail, omitted + unresolved);
            for win in breaks.windows(2) {
                let (a, b) = (win[0], win[1]);
                let (h, m) = (0.5 * (b - a), 0.5 * (a + b));
                for (x, w) in gx.iter().zip(&gw) {
                    let om = m + h * x;
                    let val = side.f(om)?;
                    let wt = w * h * val / (2.0 * PI);
                    mass += wt.abs();
                    nodes.push(sign * om);
                    weights.push(wt);
                }
            }
        }
        if !mass.is_finite() {
            return Err(Error::Accuracy {
                estimate: f64::INFINITY,
                tol: opts.tol,
            });
        }
        if tail > opts.tol {
            return Err(Error::Accuracy {
                estimate: tail,
                tol: opts.tol,
            });
        }
        Ok(Self {
            nodes,
            weights,
            tail_estimate: tail,
            options: opts,
        })
    }

    pub fn eval(&self, t: f64) -> C64 {
        use rayon::prelude::*;
        let chunk = |(ws, as_): (&[f64], &[f64])| {
            let mut acc = C64::new(0.0, 0.0);
            for (w, a) in ws.iter().zip(as_) {
                let (sn, cs) = (w * t).sin_cos();
                acc += C64::new(a * cs, -a * sn);
            }
            acc
        };
        const BLOCK: usize = 16_384;
        if self.nodes.len() <= BLOCK {
            return chunk((&self.nodes, &self.weights));
        }
        // fixed blocks summed in order keep the result independent of scheduling
        let parts: Vec<C64> = self
            .nodes
            .par_chunks(BLOCK)
            .zip(self.weights.par_chunks(BLOCK))
            .map(chunk)
            .collect();
        parts.into_iter().sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Evaluation {
    ClosedForm,
    Quadrature(FrequencyGrid),
}

/// Bath correlation function C(t) = (1/2 pi) int S(omega) exp(-i omega t) d omega.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelationFunction {
    pub source: NoisePower,
    pub evaluation: Evaluation,
    #[serde(skip)]
    cache: Option<(Vec<f64>, Vec<C64>)>,
}

impl CorrelationFunction {
    pub fn quadrature(source: NoisePower, opts: QuadratureOptions) -> Result<Self> {
        let grid = FrequencyGrid::build(&source, opts)?;
        Ok(Self {
            source,
            evaluation: Evaluation::Quadrature(grid),
            cache: None,
        })
    }

    /// Closed forms: a Lorentzian sum read as the noise power itself
    /// (C = sum g^2 exp(-(gamma + i omega) t)), and the high-temperature
    /// Brownian oscillator.
    pub fn closed_form(source: NoisePower) -> Result<Self> {
        match &source.density {
            SpectralDensity::LorentzianSum { .. } => {}
            SpectralDensity::Brownian { omega0, gamma0, .. } => {
                if source.is_zero_temperature() || gamma0 >= omega0 {
                    return Err(Error::Validation(
                        "brownian closed form needs finite beta and omega0 > gamma0".into(),
                    ));
                }
            }
            _ => {
                return Err(Error::Validation(
                    "no closed form for this spectral density".into(),
                ))
            }
        }
        Ok(Self {
            source,
            evaluation: Evaluation::ClosedForm,
            cache: None,
        })
    }

    fn eval_pos(&self, t: f64) -> C64 {
        match &self.evaluation {
            Evaluation::Quadrature(g) => g.eval(t),
            Evaluation::ClosedForm => match &self.source.density {
                SpectralDensity::LorentzianSum { terms } => terms
                    .iter()
                    .map(|l| l.g * l.g * C64::new(-l.gamma * t, -l.omega * t).exp())
                    .sum(),
                SpectralDensity::Brownian { c0, omega0, gamma0 } => {
                    let zeta = (omega0 * omega0 - gamma0 * gamma0).sqrt();
                    let decay = (-gamma0 * t).exp();
                    let phi_q = decay * ((zeta * t).cos() + gamma0 / zeta * (zeta * t).sin());
                    let phi_p = -(omega0 / zeta) * decay * (zeta * t).sin();
                    let beta = self.source.beta;
                    C64::new(
                        c0 * c0 / (2.0 * beta * omega0 * omega0) * phi_q,
                        c0 * c0 / (4.0 * omega0) * phi_p,
                    )
                }
                _ => unreachable!("closed form validated at construction"),
            },
        }
    }

    /// C(t), with C(-t) = conj(C(t)) imposed structurally.
    pub fn eval(&self, t: f64) -> C64 {
        let a = t.abs();
        let v = match &self.cache {
            Some((ts, vs)) => match ts.binary_search_by(|x| x.total_cmp(&a)) {
                Ok(i) => vs[i],
                Err(_) => self.eval_pos(a),
            },
            None => self.eval_pos(a),
        };
        if t < 0.0 {
            v.conj()
        } else {
            v
        }
    }

    pub fn sample(&self, times: &[f64]) -> Vec<C64> {
        use rayon::prelude::*;
        times.par_iter().map(|&t| self.eval(t)).collect()
    }

    /// Precomputes C on the given non-negative sorted times.
    pub fn with_cache(mut self, times: &[f64]) -> Self {
        let mut ts: Vec<f64> = times.iter().map(|t| t.abs()).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let vs = self.sample(&ts);
        self.cache = Some((ts, vs));
        self
    }

    pub fn grid(&self) -> Option<&FrequencyGrid> {
        match &self.evaluation {
            Evaluation::Quadrature(g) => Some(g),
            Evaluation::ClosedForm => None,
        }
    }

    /// Time after which |C| stays below 1e-3 C(0), divided by ln(1000): the
    /// e-folding time for exponential decay.
    pub fn decay_time(&self) -> f64 {
        let c0 = self.eval(0.0).norm();
        let horizon = match &self.evaluation {
            Evaluation::Quadrature(g) => g.options.t_max,
            Evaluation::ClosedForm => f64::INFINITY,
        };
        let mut t = 1e-3 / self.source.density.scale().max(1e-300);
        let mut last_above = 0.0;
        let mut quiet = 0;
        while t < horizon && quiet < 40 {
            if self.eval(t).norm() >= 1e-3 * c0 {
                last_above = t;
                quiet = 0;
            } else {
                quiet += 1;
            }
            t *= 1.05;
        }
        if last_above == 0.0 {
            last_above = t;
        }
        last_above / 1000f64.ln()
    }
}

/// Estimates the decay time of a noise power, enlarging the quadrature
/// horizon until the decay is resolved.
pub fn decay_time(source: &NoisePower, tol: f64) -> Result<f64> {
    let mut t_max = 50.0 / source.density.scale();
    for _ in 0..8 {
        let c = CorrelationFunction::quadrature(
            source.clone(),
            QuadratureOptions {
                t_max,
                tol,
                ..Default::default()
            },
        )?;
        let tau = c.decay_time();
        if tau * 1000f64.ln() < 0.5 * t_max {
            return Ok(tau);
        }
        t_max *= 4.0;
    }
    Err(Error::Accuracy {
        estimate: t_max,
        tol,
    })
}
