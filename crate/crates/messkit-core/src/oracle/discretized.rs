use crate::deterministic::{validate_grid, validate_initial, PropagationResult};
use crate::linalg::hermitian_eigen;
use crate::ode::{Integrator, Tolerances};
use crate::sparse::{Csr, Triplets};
use crate::state_space::SystemModel;
use crate::{CMat, CVec, Error, Result, C64};
use serde::{Deserialize, Serialize};

/// Undamped bath mode coupled as g S (b + b^dag) with energy omega b^dag b.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMode {
    pub g: f64,
    pub omega: f64,
}

#[derive(Clone, Debug)]
pub struct DiscretizedOptions {
    pub cutoffs: Vec<usize>,
    /// Inverse temperature; infinity starts every mode in its vacuum.
    pub beta: f64,
    pub max_dim: usize,
    /// Fraction of the recurrence estimate beyond which a warning is noted.
    pub window: f64,
    /// Largest total dimension propagated by exact diagonalization.
    pub dense_limit: usize,
    pub tol: Tolerances,
    /// Initial-state components with smaller weight are dropped.
    pub weight_floor: f64,
}

impl DiscretizedOptions {
    pub fn new(cutoffs: Vec<usize>, beta: f64) -> Self {
        Self {
            cutoffs,
            beta,
            max_dim: 1_000_000,
            window: 0.3,
            dense_limit: 1200,
            tol: Tolerances {
                rtol: 1e-11,
                atol: 1e-13,
            },
            weight_floor: 1e-16,
        }
    }
}

/// 2 pi over the smallest gap among the mode frequencies (the frequency
/// itself for a single mode); infinite without modes.
pub fn recurrence_time(modes: &[DiscreteMode]) -> f64 {
    let mut w: Vec<f64> = modes.iter().map(|m| m.omega.abs()).collect();
    w.sort_by(f64::total_cmp);
    w.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    let gap = match w.len() {
        0 => return f64::INFINITY,
        1 => w[0],
        _ => w
            .windows(2)
            .map(|p| p[1] - p[0])
            .fold(f64::INFINITY, f64::min),
    };
    if gap > 0.0 {
        2.0 * std::f64::consts::PI / gap
    } else {
        f64::INFINITY
    }
}

struct Layout {
    d: usize,
    cutoffs: Vec<usize>,
    strides: Vec<usize>,
    modes_dim: usize,
}

impl Layout {
    fn occupation(&self, m: usize, k: usize) -> usize {
        (m / self.strides[k]) % (self.cutoffs[k] + 1)
    }

    fn dim(&self) -> usize {
        self.d * self.modes_dim
    }
}

fn total_hamiltonian(model: &SystemModel, modes: &[DiscreteMode], lay: &Layout) -> Csr {
    let d = lay.d;
    let mut t = Triplets::new(lay.dim(), lay.dim());
    for m in 0..lay.modes_dim {
        let mut energy = 0.0;
        for (k, mode) in modes.iter().enumerate() {
            energy += mode.omega * lay.occupation(m, k) as f64;
        }
        for i in 0..d {
            for j in 0..d {
                let mut v = model.h[(i, j)];
                if i == j {
                    v += energy;
                }
                if v != C64::new(0.0, 0.0) {
                    t.push(i + d * m, j + d * m, v);
                }
            }
        }
        for (k, mode) in modes.iter().enumerate() {
            let n = lay.occupation(m, k);
            if n < lay.cutoffs[k] {
                // b^dag |n> = sqrt(n+1) |n+1>, together with its adjoint
                let up = m + lay.strides[k];
                let amp = mode.g * ((n + 1) as f64).sqrt();
                for i in 0..d {
                    for j in 0..d {
                        let v = model.s[(i, j)] * amp;
                        if v != C64::new(0.0, 0.0) {
                            t.push(i + d * up, j + d * m, v);
                            t.push(j + d * m, i + d * up, v.conj());
                        }
                    }
                }
            }
        }
    }
    t.to_csr()
}

fn thermal_weights(omega: f64, beta: f64, cutoff: usize) -> Vec<f64> {
    if beta.is_infinite() {
        let mut p = vec![0.0; cutoff + 1];
        p[0] = 1.0;
        return p;
    }
    let raw: Vec<f64> = (0..=cutoff)
        .map(|n| (-beta * omega * n as f64).exp())
        .collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / z).collect()
}

fn reduce_into(psi: &[C64], d: usize, weight: f64, rho: &mut CMat) {
    let modes_dim = psi.len() / d;
    for m in 0..modes_dim {
        let blk = &psi[d * m..d * (m + 1)];
        for i in 0..d {
            for j in 0..d {
                rho[(i, j)] += blk[i] * blk[j].conj() * weight;
            }
        }
    }
}

/// Brute-force unitary propagation of the system with a few undamped modes;
/// thermal mode states are propagated as a mixture of number states.
pub fn discretized_bath_oracle(
    model: &SystemModel,
    rho0: &CMat,
    modes: &[DiscreteMode],
    grid: &[f64],
    opts: &DiscretizedOptions,
) -> Result<PropagationResult> {
    validate_grid(grid)?;
    validate_initial(rho0, model.dim())?;
    if modes.len() > 6 {
        return Err(Error::Validation(format!(
            "at most 6 discrete modes are supported, got {}",
            modes.len()
        )));
    }
    if opts.cutoffs.len() != modes.len() {
        return Err(Error::Validation(
            "one Fock cutoff per discrete mode is required".into(),
        ));
    }
    if modes
        .iter()
        .any(|m| !m.g.is_finite() || !(m.omega >= 0.0) || !m.omega.is_finite())
    {
        return Err(Error::Validation(
            "discrete modes need finite g and omega >= 0".into(),
        ));
    }
    if !(opts.beta > 0.0) {
        return Err(Error::Validation(
            "beta must be positive (infinity for T = 0)".into(),
        ));
    }
    let d = model.dim();
    let mut strides = Vec::with_capacity(modes.len());
    let mut modes_dim = 1usize;
    let mut dim = d;
    for &c in &opts.cutoffs {
        strides.push(modes_dim);
        modes_dim = modes_dim.saturating_mul(c + 1);
        dim = dim.saturating_mul(c + 1);
    }
    if dim > opts.max_dim.min(1_000_000) {
        let limit = opts.max_dim.min(1_000_000);
        let mut hint = opts.cutoffs.clone();
        while hint.iter().fold(d, |a, &c| a.saturating_mul(c + 1)) > limit {
            let (idx, &c) = hint.iter().enumerate().max_by_key(|(_, &c)| c).unwrap();
            if c <= 1 {
                break;
            }
            hint[idx] -= 1;
        }
        return Err(Error::DimensionGuard {
            dim,
            limit: opts.max_dim.min(1_000_000),
            hint,
        });
    }
    let lay = Layout {
        d,
        cutoffs: opts.cutoffs.clone(),
        strides,
        modes_dim,
    };
    let ham = total_hamiltonian(model, modes, &lay);

    // initial components: eigenvectors of rho0 times number states
    let (p_sys, v_sys) = hermitian_eigen(rho0);
    let occ: Vec<Vec<f64>> = modes
        .iter()
        .zip(&opts.cutoffs)
        .map(|(m, &c)| thermal_weights(m.omega, opts.beta, c))
        .collect();
    let mut components: Vec<(f64, Vec<C64>)> = Vec::new();
    for (a, &pa) in p_sys.iter().enumerate() {
        if pa <= opts.weight_floor {
            continue;
        }
        for m in 0..lay.modes_dim {
            let w = (0..modes.len()).fold(pa, |acc, k| acc * occ[k][lay.occupation(m, k)]);
            if w <= opts.weight_floor {
                continue;
            }
            let mut psi = vec![C64::new(0.0, 0.0); dim];
            for i in 0..d {
                psi[i + d * m] = v_sys[(i, a)];
            }
            components.push((w, psi));
        }
    }

    let mut rho = vec![CMat::zeros(d, d); grid.len()];
    if dim <= opts.dense_limit {
        let (lam, vecs) = hermitian_eigen(&ham.to_dense());
        let vh = vecs.adjoint();
        for (w, psi) in &components {
            let c0 = &vh * CVec::from_column_slice(psi);
            for (it, &t) in grid.iter().enumerate() {
                let ct = CVec::from_iterator(
                    dim,
                    (0..dim).map(|k| c0[k] * C64::new(0.0, -lam[k] * t).exp()),
                );
                let psi_t = &vecs * ct;
                reduce_into(psi_t.as_slice(), d, *w, &mut rho[it]);
            }
        }
    } else {
        let integrator = Integrator::new(opts.tol);
        for (w, psi) in &components {
            let mut rhs = |_t: f64, y: &[C64], dy: &mut [C64]| {
                ham.matvec_into(y, dy);
                for z in dy.iter_mut() {
                    *z *= C64::new(0.0, -1.0);
                }
            };
            integrator.integrate(&mut rhs, psi, grid, |it, y| {
                reduce_into(y, d, *w, &mut rho[it])
            })?;
        }
    }
    let total: f64 = components.iter().map(|(w, _)| w).sum();
    for r in &mut rho {
        *r /= C64::new(total, 0.0);
    }
    let mut result = PropagationResult::new("oracle-discretized", grid.to_vec(), rho);
    let t_rec = recurrence_time(modes);
    result
        .diagnostics
        .notes
        .push(format!("recurrence estimate {t_rec:.6e}"));
    let t_max = *grid.last().unwrap();
    if t_max > opts.window * t_rec {
        result.diagnostics.notes.push(format!(
            "warning: t_max = {t_max} exceeds {} x recurrence estimate {t_rec:.4e}; later times are not ground truth",
            opts.window
        ));
    }
    Ok(result)
}
