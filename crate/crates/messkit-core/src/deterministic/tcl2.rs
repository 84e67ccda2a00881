use super::result::{validate_grid, validate_initial, PropagationResult};
use crate::bath::Correlator;
use crate::linalg::{hermitian_eigen, matmul_into, ZERO};
use crate::state_space::SystemModel;
use crate::{CMat, Error, Result, C64};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Tcl2Options {
    /// Fixed step; None picks 0.01 / max(1, spread of H_s).
    pub step: Option<f64>,
    /// When set, reruns at half the step and fails if the two runs differ by
    /// more than this.
    pub accuracy: Option<f64>,
}

/// Quadrature weight of node i out of 0..=n for unit spacing: trapezoid,
/// Simpson and 3/8 rules for short ranges, end-corrected (4th order)
/// trapezoid otherwise.
fn weight(i: usize, n: usize) -> f64 {
    const SIMPSON: [f64; 3] = [1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0];
    const EIGHTHS: [f64; 4] = [3.0 / 8.0, 9.0 / 8.0, 9.0 / 8.0, 3.0 / 8.0];
    const END: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
    match n {
        0 => 0.0,
        1 => 0.5,
        2 => SIMPSON[i],
        3 => EIGHTHS[i],
        4 => [1.0 / 3.0, 4.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0][i],
        5 => [
            3.0 / 8.0,
            9.0 / 8.0,
            9.0 / 8.0,
            3.0 / 8.0 + 1.0 / 3.0,
            4.0 / 3.0,
            1.0 / 3.0,
        ][i],
        _ => {
            let j = i.min(n - i);
            if j < 3 {
                END[j]
            } else {
                1.0
            }
        }
    }
}

struct Tcl2<'a> {
    d: usize,
    lambda: Vec<f64>,
    s_eig: CMat,
    cvals: &'a [C64],
    delta: f64,
    ys: Vec<Vec<C64>>,
    ws: Vec<Vec<C64>>,
    tmp: Vec<C64>,
}

impl Tcl2<'_> {
    /// S in the interaction picture, eigenbasis of H_s.
    fn s_int(&self, s: f64) -> Vec<C64> {
        let d = self.d;
        let mut out = vec![ZERO; d * d];
        for b in 0..d {
            for a in 0..d {
                out[a + d * b] =
                    self.s_eig[(a, b)] * C64::new(0.0, (self.lambda[a] - self.lambda[b]) * s).exp();
            }
        }
        out
    }

    fn yw(&mut self, js: usize, rho: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let d = self.d;
        let si = self.s_int(js as f64 * self.delta);
        let mut y = vec![ZERO; d * d];
        let mut w = vec![ZERO; d * d];
        matmul_into(d, &si, rho, &mut y);
        matmul_into(d, rho, &si, &mut w);
        (y, w)
    }

    fn store(&mut self, js: usize, rho: &[C64]) {
        let (y, w) = self.yw(js, rho);
        self.ys[js] = y;
        self.ws[js] = w;
    }

    /// -[S_I(s), int_0^s (C(s-u) S_I(u) rho(u) - C*(s-u) rho(u) S_I(u)) du]
    /// with the node at u = s taken from `rho`.
    fn deriv(&mut self, js: usize, rho: &[C64], out: &mut [C64]) {
        let d = self.d;
        let d2 = d * d;
        let (ylast, wlast) = self.yw(js, rho);
        let mut m = vec![ZERO; d2];
        for i in 0..=js {
            let w = weight(i, js) * self.delta;
            if w == 0.0 {
                continue;
            }
            let cv = self.cvals[js - i] * w;
            let cc = self.cvals[js - i].conj() * w;
            let (y, x) = if i == js {
                (&ylast, &wlast)
            } else {
                (&self.ys[i], &self.ws[i])
            };
            for k in 0..d2 {
                m[k] += cv * y[k] - cc * x[k];
            }
        }
        let si = self.s_int(js as f64 * self.delta);
        matmul_into(d, &si, &m, &mut self.tmp[..d2]);
        matmul_into(d, &m, &si, &mut out[..d2]);
        for k in 0..d2 {
            out[k] -= self.tmp[k];
        }
    }
}

fn run(
    model: &SystemModel,
    rho0: &CMat,
    c: &dyn Correlator,
    grid: &[f64],
    step: f64,
) -> Result<PropagationResult> {
    let d = model.dim();
    let d2 = d * d;
    let (lambda, v) = hermitian_eigen(&model.h);
    let s_eig = v.adjoint() * &model.s * &v;
    let rho_eig = v.adjoint() * rho0 * &v;
    let t_end = *grid.last().unwrap();
    let n_steps = ((t_end / step).ceil() as usize).max(1);
    let h = if t_end > 0.0 {
        t_end / n_steps as f64
    } else {
        step
    };
    let delta = 0.5 * h;
    let cvals: Vec<C64> = (0..=2 * n_steps + 2)
        .map(|j| c.correlation(j as f64 * delta))
        .collect();
    if cvals.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Validation(
            "correlation function is not finite on the integration lattice".into(),
        ));
    }
    let mut sys = Tcl2 {
        d,
        lambda: lambda.clone(),
        s_eig,
        cvals: &cvals,
        delta,
        ys: vec![vec![ZERO; d2]; 2 * n_steps + 1],
        ws: vec![vec![ZERO; d2]; 2 * n_steps + 1],
        tmp: vec![ZERO; d2],
    };
    let mut states: Vec<Vec<C64>> = Vec::with_capacity(n_steps + 1);
    states.push(rho_eig.as_slice().to_vec());
    sys.store(0, &states[0]);
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![ZERO; d2],
        vec![ZERO; d2],
        vec![ZERO; d2],
        vec![ZERO; d2],
    );
    let mut stage = vec![ZERO; d2];
    let axpy = |base: &[C64], a: f64, k: &[C64], out: &mut [C64]| {
        for i in 0..base.len() {
            out[i] = base[i] + k[i] * a;
        }
    };
    for n in 0..n_steps {
        let b = 2 * n;
        let r = states[n].clone();
        sys.deriv(b, &r, &mut k1);
        axpy(&r, 0.5 * h, &k1, &mut stage);
        sys.deriv(b + 1, &stage.clone(), &mut k2);
        axpy(&r, 0.5 * h, &k2, &mut stage);
        let mid_stage = stage.clone();
        sys.deriv(b + 1, &mid_stage, &mut k3);
        sys.store(b + 1, &mid_stage);
        axpy(&r, h, &k3, &mut stage);
        sys.deriv(b + 2, &stage.clone(), &mut k4);
        let next: Vec<C64> = (0..d2)
            .map(|i| r[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0))
            .collect();
        if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Instability(format!(
                "non-finite state at t = {}",
                (n + 1) as f64 * h
            )));
        }
        // history at the half step by interpolation of the step values
        let mid: Vec<C64> = match n {
            0 => (0..d2)
                .map(|i| (r[i] * 3.0 + next[i]) * 0.25 + k1[i] * (0.25 * h))
                .collect(),
            1 => (0..d2)
                .map(|i| states[0][i] * -0.125 + r[i] * 0.75 + next[i] * 0.375)
                .collect(),
            _ => (0..d2)
                .map(|i| {
                    states[n - 2][i] * 0.0625 - states[n - 1][i] * 0.3125
                        + r[i] * 0.9375
                        + next[i] * 0.3125
                })
                .collect(),
        };
        sys.store(b + 1, &mid);
        sys.store(b + 2, &next);
        states.push(next);
    }
    // cubic Lagrange interpolation between step values, back to the
    // Schroedinger picture
    let mut rho = Vec::with_capacity(grid.len());
    for &t in grid {
        let x = if t_end > 0.0 { t / h } else { 0.0 };
        let npts = (n_steps + 1).min(4);
        let mut first = (x.floor() as isize - 1).max(0) as usize;
        if first + npts > n_steps + 1 {
            first = n_steps + 1 - npts;
        }
        let mut acc = vec![ZERO; d2];
        for a in 0..npts {
            let xa = (first + a) as f64;
            let mut l = 1.0;
            for b in 0..npts {
                if a != b {
                    let xb = (first + b) as f64;
                    l *= (x - xb) / (xa - xb);
                }
            }
            for i in 0..d2 {
                acc[i] += states[first + a][i] * l;
            }
        }
        let mut m = CMat::from_column_slice(d, d, &acc);
        for bcol in 0..d {
            for arow in 0..d {
                m[(arow, bcol)] *= C64::new(0.0, -(lambda[arow] - lambda[bcol]) * t).exp();
            }
        }
        rho.push(&v * m * v.adjoint());
    }
    Ok(PropagationResult::new("tcl2", grid.to_vec(), rho))
}

/// Second-order time-nonlocal master equation
/// d/dt rho_I = -int_0^t [S_I(t), C(t-u) S_I(u) rho_I(u) - C*(t-u) rho_I(u) S_I(u)] du.
pub fn tcl2_propagate(
    model: &SystemModel,
    rho0: &CMat,
    c: &dyn Correlator,
    grid: &[f64],
    opts: &Tcl2Options,
) -> Result<PropagationResult> {
    validate_grid(grid)?;
    validate_initial(rho0, model.dim())?;
    let step = match opts.step {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(_) => return Err(Error::Validation("tcl2 step must be positive".into())),
        None => {
            let (l, _) = hermitian_eigen(&model.h);
            0.01 / (l[l.len() - 1] - l[0]).max(1.0)
        }
    };
    let mut result = run(model, rho0, c, grid, step)?;
    if let Some(tol) = opts.accuracy {
        let fine = run(model, rho0, c, grid, 0.5 * step)?;
        let estimate = result.max_deviation(&fine)?;
        if estimate > tol {
            return Err(Error::Accuracy { estimate, tol });
        }
        result
            .diagnostics
            .notes
            .push(format!("step-halving deviation {estimate:.3e}"));
    }
    Ok(result)
}
