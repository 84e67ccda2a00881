use super::ensemble::{reduce, TrajectoryEnsemble};
use super::noise::HopsNoiseGenerator;
use super::sln::{at, interpolate, lattice};
use crate::decomposition::ExponentialModes;
use crate::deterministic::{validate_grid, validate_initial};
use crate::linalg::hermitian_eigen;
use crate::state_space::SystemModel;
use crate::{CMat, Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct HopsOptions {
    pub dt: f64,
    pub stderr_bound: f64,
    /// Largest tolerated norm ratio |psi at the truncation depth| / |psi_0|
    /// over the pilot trajectories.
    pub depth_tol: f64,
    pub pilot: usize,
    pub keep_samples: bool,
}

impl Default for HopsOptions {
    fn default() -> Self {
        Self {
            dt: 0.01,
            stderr_bound: 0.05,
            depth_tol: 1e-2,
            pilot: 16,
            keep_samples: false,
        }
    }
}

struct Pure {
    d: usize,
    k: usize,
    depth: usize,
    /// -i H_s
    hm: CMat,
    s: CMat,
    decay: Vec<C64>,
    lower: Vec<Vec<(usize, C64)>>,
    upper: Vec<Vec<usize>>,
    top: Vec<bool>,
}

impl Pure {
    fn new(model: &SystemModel, modes: &ExponentialModes, depth: usize) -> Self {
        let k = modes.len();
        let mut indices: Vec<Vec<usize>> = vec![vec![0; k]];
        let mut lookup = HashMap::new();
        lookup.insert(vec![0; k], 0usize);
        let mut start = 0;
        for _ in 0..depth {
            let end = indices.len();
            for a in start..end {
                for j in 0..k {
                    let mut m = indices[a].clone();
                    m[j] += 1;
                    if !lookup.contains_key(&m) {
                        lookup.insert(m.clone(), indices.len());
                        indices.push(m);
                    }
                }
            }
            start = end;
        }
        let n = indices.len();
        let mut lower = vec![Vec::new(); n];
        let mut upper = vec![Vec::new(); n];
        let mut decay = vec![C64::default(); n];
        let mut top = vec![false; n];
        for (a, m) in indices.iter().enumerate() {
            decay[a] = m.iter().zip(&modes.z).map(|(&mj, z)| z * mj as f64).sum();
            top[a] = m.iter().sum::<usize>() == depth;
            for j in 0..k {
                if m[j] > 0 {
                    let mut lo = m.clone();
                    lo[j] -= 1;
                    lower[a].push((lookup[&lo], modes.d[j] * m[j] as f64));
                }
                let mut up = m.clone();
                up[j] += 1;
                if let Some(&b) = lookup.get(&up) {
                    upper[a].push(b);
                }
            }
        }
        Self {
            d: model.dim(),
            k,
            depth,
            hm: &model.h * C64::new(0.0, -1.0),
            s: model.s.clone(),
            decay,
            lower,
            upper,
            top,
        }
    }

    fn len(&self) -> usize {
        self.decay.len()
    }

    /// d/dt psi_m = (-i H_s + Z^* S - m.z) psi_m + sum_k (m_k d_k S psi_{m-} - S psi_{m+})
    fn eval(&self, z: C64, y: &[C64], out: &mut [C64], sy: &mut [C64]) {
        let d = self.d;
        let zc = z.conj();
        for a in 0..self.len() {
            let psi = &y[a * d..(a + 1) * d];
            for r in 0..d {
                let mut acc = C64::default();
                for c in 0..d {
                    acc += self.s[(r, c)] * psi[c];
                }
                sy[a * d + r] = acc;
            }
        }
        for a in 0..self.len() {
            let psi = &y[a * d..(a + 1) * d];
            for r in 0..d {
                let mut acc = (zc * sy[a * d + r]) - self.decay[a] * psi[r];
                for c in 0..d {
                    acc += self.hm[(r, c)] * psi[c];
                }
                for &(b, w) in &self.lower[a] {
                    acc += w * sy[b * d + r];
                }
                for &b in &self.upper[a] {
                    acc -= sy[b * d + r];
                }
                out[a * d + r] = acc;
            }
        }
    }

    fn top_ratio(&self, y: &[C64]) -> f64 {
        let d = self.d;
        let n0: f64 = y[..d].iter().map(|z| z.norm_sqr()).sum();
        let nt: f64 = (0..self.len())
            .filter(|&a| self.top[a])
            .map(|a| {
                y[a * d..(a + 1) * d]
                    .iter()
                    .map(|z| z.norm_sqr())
                    .sum::<f64>()
            })
            .sum();
        (nt / n0.max(1e-300)).sqrt()
    }
}

/// Extracts psi from a rank-one density matrix.
fn pure_state(rho0: &CMat) -> Result<Vec<C64>> {
    let (vals, vecs) = hermitian_eigen(rho0);
    let n = vals.len();
    if (vals[n - 1] - 1.0).abs() > 1e-10 || vals[..n - 1].iter().any(|v| v.abs() > 1e-10) {
        return Err(Error::Precondition(
            "the hierarchy of pure states needs a pure initial state".into(),
        ));
    }
    Ok(vecs.column(n - 1).iter().copied().collect())
}

struct Trajectory {
    rho: Vec<C64>,
    top_ratio: f64,
}

fn run_one(
    sys: &Pure,
    psi0: &[C64],
    noise: &[C64],
    steps: usize,
    h: f64,
    map: &[(usize, f64)],
) -> Trajectory {
    let d = sys.d;
    let n = sys.len() * d;
    let mut y = vec![C64::default(); n];
    y[..d].copy_from_slice(psi0);
    let mut sy = vec![C64::default(); n];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![C64::default(); n],
        vec![C64::default(); n],
        vec![C64::default(); n],
        vec![C64::default(); n],
        vec![C64::default(); n],
    );
    let proj = |y: &[C64]| -> Vec<C64> {
        let mut r = vec![C64::default(); d * d];
        for c in 0..d {
            for a in 0..d {
                r[a + d * c] = y[a] * y[c].conj();
            }
        }
        r
    };
    let mut nodes = Vec::with_capacity(steps + 1);
    nodes.push(proj(&y));
    let mut top_ratio = 0.0f64;
    for s in 0..steps {
        let x = s as f64;
        sys.eval(at(noise, x), &y, &mut k1, &mut sy);
        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (0.5 * h);
        }
        sys.eval(at(noise, x + 0.5), &tmp, &mut k2, &mut sy);
        for i in 0..n {
            tmp[i] = y[i] + k2[i] * (0.5 * h);
        }
        sys.eval(at(noise, x + 0.5), &tmp, &mut k3, &mut sy);
        for i in 0..n {
            tmp[i] = y[i] + k3[i] * h;
        }
        sys.eval(at(noise, x + 1.0), &tmp, &mut k4, &mut sy);
        for i in 0..n {
            y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
        top_ratio = top_ratio.max(sys.top_ratio(&y));
        nodes.push(proj(&y));
    }
    Trajectory {
        rho: interpolate(&nodes, map),
        top_ratio,
    }
}

/// Ensemble of linear HOPS trajectories; rho_s = <|psi_0><psi_0|>.
#[allow(clippy::too_many_arguments)]
pub fn hops_propagate_ensemble(
    model: &SystemModel,
    rho0: &CMat,
    modes: &ExponentialModes,
    depth: usize,
    grid: &[f64],
    n: usize,
    seed: u64,
    opts: &HopsOptions,
) -> Result<TrajectoryEnsemble> {
    validate_grid(grid)?;
    validate_initial(rho0, model.dim())?;
    if n < 2 {
        return Err(Error::Validation(
            "an ensemble needs at least two trajectories".into(),
        ));
    }
    let psi0 = pure_state(rho0)?;
    let (h, steps, map) = lattice(grid, opts.dt)?;
    let noise_times: Vec<f64> = (0..=steps).map(|i| i as f64 * h).collect();
    let gen = HopsNoiseGenerator::new(modes, &noise_times)?;
    let sys = Pure::new(model, modes, depth);
    let check = |t: &Trajectory, i: usize| {
        if t.rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            Err(Error::Instability(format!("HOPS trajectory {i} diverged")))
        } else {
            Ok(())
        }
    };
    let mut top = 0.0f64;
    for i in 0..opts.pilot.min(n) {
        let t = run_one(&sys, &psi0, &gen.sample(seed, i as u64), steps, h, &map);
        check(&t, i)?;
        top = top.max(t.top_ratio);
    }
    let (moments, samples) = reduce(n, opts.keep_samples, |i| {
        let t = run_one(&sys, &psi0, &gen.sample(seed, i as u64), steps, h, &map);
        check(&t, i)?;
        Ok(t.rho)
    })?;
    let mut ens = TrajectoryEnsemble::from_moments(
        "hops",
        seed,
        None,
        grid.to_vec(),
        model.dim(),
        moments,
        samples,
        opts.stderr_bound,
    );
    ens.diagnostics.ado_count = Some(sys.len());
    ens.diagnostics.depth_delta = Some(top);
    if sys.k > 0 && sys.depth > 0 && top > opts.depth_tol {
        ens.diagnostics.flagged = true;
        ens.diagnostics.notes.push(format!(
            "depth {} not converged: top-level norm ratio {top:.3e} exceeds {:.1e}",
            sys.depth, opts.depth_tol
        ));
    }
    Ok(ens)
}
