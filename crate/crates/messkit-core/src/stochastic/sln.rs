use super::ensemble::{reduce, TrajectoryEnsemble};
use super::noise::{NoiseOptions, NoiseSource, SlnNoiseGenerator};
use crate::deterministic::{validate_grid, validate_initial};
use crate::linalg::matmul_into;
use crate::state_space::SystemModel;
use crate::{CMat, Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SlnOptions {
    /// Noise lattice and integration step.
    pub dt: f64,
    pub noise: NoiseOptions,
    /// Largest standard error tolerated at the final time before the result
    /// is flagged.
    pub stderr_bound: f64,
    pub keep_samples: bool,
}

impl Default for SlnOptions {
    fn default() -> Self {
        Self {
            dt: 0.01,
            noise: NoiseOptions::default(),
            stderr_bound: 0.05,
            keep_samples: false,
        }
    }
}

/// Maps output times onto a uniform lattice of `steps` steps: (node, weight
/// of the next node).
pub(crate) fn lattice(grid: &[f64], dt: f64) -> Result<(f64, usize, Vec<(usize, f64)>)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Validation(
            "integration step must be positive".into(),
        ));
    }
    let t_end = *grid.last().unwrap();
    let steps = ((t_end / dt).ceil() as usize).max(1);
    let h = if t_end > 0.0 {
        t_end / steps as f64
    } else {
        dt
    };
    let map = grid
        .iter()
        .map(|&t| {
            let x = t / h;
            let mut i = x.floor() as usize;
            let mut w = x - i as f64;
            if w > 1.0 - 1e-9 {
                i += 1;
                w = 0.0;
            }
            if i >= steps {
                (steps, 0.0)
            } else {
                (i, if w < 1e-9 { 0.0 } else { w })
            }
        })
        .collect();
    Ok((h, steps, map))
}

/// Linear interpolation of per-node states onto the output map.
pub(crate) fn interpolate(nodes: &[Vec<C64>], map: &[(usize, f64)]) -> Vec<C64> {
    let mut out = Vec::with_capacity(map.len() * nodes[0].len());
    for &(i, w) in map {
        if w == 0.0 {
            out.extend_from_slice(&nodes[i]);
        } else {
            out.extend(
                nodes[i]
                    .iter()
                    .zip(&nodes[i + 1])
                    .map(|(a, b)| a * (1.0 - w) + b * w),
            );
        }
    }
    out
}

struct Liouville {
    d: usize,
    h: Vec<C64>,
    s: Vec<C64>,
    buf: [Vec<C64>; 4],
}

impl Liouville {
    /// -i[H, rho] - i Z_c S_q rho - i Z_q S_c rho
    fn eval(&mut self, zc: C64, zq: C64, rho: &[C64], out: &mut [C64]) {
        let d = self.d;
        let [hr, rh, sr, rs] = &mut self.buf;
        matmul_into(d, &self.h, rho, hr);
        matmul_into(d, rho, &self.h, rh);
        matmul_into(d, &self.s, rho, sr);
        matmul_into(d, rho, &self.s, rs);
        let i = C64::new(0.0, 1.0);
        let a = -i * (zc + zq) * FRAC_1_SQRT_2;
        let b = -i * (zq - zc) * FRAC_1_SQRT_2;
        for k in 0..d * d {
            out[k] = -i * (hr[k] - rh[k]) + a * sr[k] + b * rs[k];
        }
    }
}

fn rk4_path<F: FnMut(f64, &[C64], &mut [C64])>(
    y0: &[C64],
    steps: usize,
    h: f64,
    mut f: F,
) -> Vec<Vec<C64>> {
    let n = y0.len();
    let mut nodes = Vec::with_capacity(steps + 1);
    nodes.push(y0.to_vec());
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![C64::default(); n],
        vec![C64::default(); n],
        vec![C64::default(); n],
        vec![C64::default(); n],
        vec![C64::default(); n],
    );
    for s in 0..steps {
        let y = &nodes[s];
        let t = s as f64;
        f(t, y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (0.5 * h);
        }
        f(t + 0.5, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + k2[i] * (0.5 * h);
        }
        f(t + 0.5, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + k3[i] * h;
        }
        f(t + 1.0, &tmp, &mut k4);
        let next: Vec<C64> = (0..n)
            .map(|i| y[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0))
            .collect();
        nodes.push(next);
    }
    nodes
}

/// Noise value at fractional lattice position `x` (piecewise linear).
pub(crate) fn at(z: &[C64], x: f64) -> C64 {
    let i = x.floor() as usize;
    let w = x - i as f64;
    if w == 0.0 || i + 1 >= z.len() {
        z[i.min(z.len() - 1)]
    } else {
        z[i] * (1.0 - w) + z[i + 1] * w
    }
}

/// Ensemble of stochastic Liouville-von Neumann trajectories
/// d/dt rho_z = -i[H_s, rho_z] - i Z_c S_q rho_z - i Z_q S_c rho_z.
pub fn sln_propagate_ensemble(
    model: &SystemModel,
    rho0: &CMat,
    source: NoiseSource<'_>,
    grid: &[f64],
    n: usize,
    seed: u64,
    opts: &SlnOptions,
) -> Result<TrajectoryEnsemble> {
    validate_grid(grid)?;
    validate_initial(rho0, model.dim())?;
    if n < 2 {
        return Err(Error::Validation(
            "an ensemble needs at least two trajectories".into(),
        ));
    }
    let (h, steps, map) = lattice(grid, opts.dt)?;
    let noise_times: Vec<f64> = (0..=steps).map(|i| i as f64 * h).collect();
    let gen = SlnNoiseGenerator::new(source, &noise_times, opts.noise)?;
    // without a bath the white parts only add variance to an exact mean
    let silent = source.is_silent();
    let d = model.dim();
    let y0 = rho0.as_slice().to_vec();
    let hs = model.h.as_slice().to_vec();
    let ss = model.s.as_slice().to_vec();
    let (moments, samples) = reduce(n, opts.keep_samples, |i| {
        let mut pair = gen.sample(seed, i as u64);
        if silent {
            pair.zc.fill(C64::default());
            pair.zq.fill(C64::default());
        }
        let mut lv = Liouville {
            d,
            h: hs.clone(),
            s: ss.clone(),
            buf: std::array::from_fn(|_| vec![C64::default(); d * d]),
        };
        let nodes = rk4_path(&y0, steps, h, |x, y, dy| {
            lv.eval(at(&pair.zc, x), at(&pair.zq, x), y, dy)
        });
        let out = interpolate(&nodes, &map);
        if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Instability(format!("SLN trajectory {i} diverged")));
        }
        Ok(out)
    })?;
    let mut ens = TrajectoryEnsemble::from_moments(
        "sln",
        seed,
        Some(opts.noise.construction.label().to_string()),
        grid.to_vec(),
        d,
        moments,
        samples,
        opts.stderr_bound,
    );
    ens.diagnostics
        .notes
        .push(format!("noise step {h}, balance {}", gen.balance()));
    Ok(ens)
}
