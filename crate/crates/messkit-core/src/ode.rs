//! Adaptive Dormand–Prince 5(4) integrator with dense output on complex
//! state vectors.

use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub min_step: f64,
    pub max_step: f64,
}

/// Right-hand side of y' = f(t, y).
pub trait OdeSystem {
    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]);

    /// Called after every accepted step; may modify the state (returns true
    /// if it did) or abort with an error.
    fn after_step(&mut self, _t: f64, _y: &mut [C64]) -> Result<bool> {
        Ok(false)
    }
}

impl<F: FnMut(f64, &[C64], &mut [C64])> OdeSystem for F {
    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        self(t, y, dy)
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Clone, Debug)]
pub struct Integrator {
    pub tol: Tolerances,
    pub max_steps: usize,
    pub max_step: f64,
}

impl Integrator {
    pub fn new(tol: Tolerances) -> Self {
        Self {
            tol,
            max_steps: 10_000_000,
            max_step: f64::INFINITY,
        }
    }

    fn err_norm(&self, y0: &[C64], y1: &[C64], e: &[C64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..y0.len() {
            let sc = self.tol.atol + self.tol.rtol * y0[i].norm().max(y1[i].norm());
            let r = e[i].norm() / sc;
            acc += r * r;
        }
        (acc / y0.len().max(1) as f64).sqrt()
    }

    /// Integrates from `grid[0]` through every grid time, calling
    /// `observe(index, state)` at each one (dense output between steps).
    pub fn integrate<S, O>(
        &self,
        sys: &mut S,
        y0: &[C64],
        grid: &[f64],
        mut observe: O,
    ) -> Result<StepStats>
    where
        S: OdeSystem,
        O: FnMut(usize, &[C64]),
    {
        let n = y0.len();
        let mut stats = StepStats {
            min_step: f64::INFINITY,
            ..Default::default()
        };
        if grid.is_empty() {
            return Ok(stats);
        }
        let mut y = y0.to_vec();
        observe(0, &y);
        if grid.len() == 1 {
            return Ok(stats);
        }
        let t_end = *grid.last().unwrap();
        let mut t = grid[0];
        let zero = C64::new(0.0, 0.0);
        let mut k: Vec<Vec<C64>> = vec![vec![zero; n]; 7];
        let mut tmp = vec![zero; n];
        let mut ynew = vec![zero; n];
        let mut errv = vec![zero; n];
        sys.rhs(t, &y, &mut k[0]);
        stats.rhs_evals += 1;

        // initial step from the Hairer heuristic
        let mut h = {
            let d0 = self.err_norm(&y, &y, &y);
            let d1 = self.err_norm(&y, &y, &k[0]);
            let h0 = if d0 < 1e-5 || d1 < 1e-5 {
                1e-6
            } else {
                0.01 * d0 / d1
            };
            h0.min(t_end - t).min(self.max_step).max(1e-12)
        };
        let mut next_out = 1;
        let mut fsal_valid = true;
        let mut steps = 0usize;
        while next_out < grid.len() {
            if steps > self.max_steps {
                return Err(Error::Integrator(format!(
                    "step budget exhausted at t = {t}"
                )));
            }
            steps += 1;
            if !fsal_valid {
                sys.rhs(t, &y, &mut k[0]);
                stats.rhs_evals += 1;
                fsal_valid = true;
            }
            let h_eff = h.min(t_end - t);
            let stage = |coeffs: &[(usize, f64)], k: &Vec<Vec<C64>>, y: &[C64], out: &mut [C64]| {
                for i in 0..n {
                    let mut acc = zero;
                    for &(j, a) in coeffs {
                        acc += k[j][i] * a;
                    }
                    out[i] = y[i] + acc * h_eff;
                }
            };
            stage(&[(0, A21)], &k, &y, &mut tmp);
            sys.rhs(t + C2 * h_eff, &tmp, &mut k[1]);
            stage(&[(0, A31), (1, A32)], &k, &y, &mut tmp);
            sys.rhs(t + C3 * h_eff, &tmp, &mut k[2]);
            stage(&[(0, A41), (1, A42), (2, A43)], &k, &y, &mut tmp);
            sys.rhs(t + C4 * h_eff, &tmp, &mut k[3]);
            stage(&[(0, A51), (1, A52), (2, A53), (3, A54)], &k, &y, &mut tmp);
            sys.rhs(t + C5 * h_eff, &tmp, &mut k[4]);
            stage(
                &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)],
                &k,
                &y,
                &mut tmp,
            );
            sys.rhs(t + h_eff, &tmp, &mut k[5]);
            stage(
                &[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)],
                &k,
                &y,
                &mut ynew,
            );
            sys.rhs(t + h_eff, &ynew, &mut k[6]);
            stats.rhs_evals += 6;
            for i in 0..n {
                errv[i] = (k[0][i] * E1
                    + k[2][i] * E3
                    + k[3][i] * E4
                    + k[4][i] * E5
                    + k[5][i] * E6
                    + k[6][i] * E7)
                    * h_eff;
            }
            let err = self.err_norm(&y, &ynew, &errv);
            if !err.is_finite() {
                if h_eff < 1e-14 {
                    return Err(Error::Integrator(format!("non-finite state at t = {t}")));
                }
                h = 0.1 * h_eff;
                stats.rejected += 1;
                continue;
            }
            if err <= 1.0 {
                let t_new = t + h_eff;
                // dense output for every grid point inside (t, t_new]
                while next_out < grid.len()
                    && grid[next_out] <= t_new + 1e-12 * t_new.abs().max(1.0)
                {
                    let theta = ((grid[next_out] - t) / h_eff).clamp(0.0, 1.0);
                    let th1 = 1.0 - theta;
                    for i in 0..n {
                        let r2 = ynew[i] - y[i];
                        let r3 = k[0][i] * h_eff - r2;
                        let r4 = r2 - k[6][i] * h_eff - r3;
                        let r5 = (k[0][i] * D1
                            + k[2][i] * D3
                            + k[3][i] * D4
                            + k[4][i] * D5
                            + k[5][i] * D6
                            + k[6][i] * D7)
                            * h_eff;
                        tmp[i] = y[i] + (r2 + (r3 + (r4 + r5 * th1) * theta) * th1) * theta;
                    }
                    observe(next_out, &tmp);
                    next_out += 1;
                }
                std::mem::swap(&mut y, &mut ynew);
                k.swap(0, 6);
                t = t_new;
                stats.accepted += 1;
                stats.min_step = stats.min_step.min(h_eff);
                stats.max_step = stats.max_step.max(h_eff);
                if sys.after_step(t, &mut y)? {
                    fsal_valid = false;
                }
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                h = (h_eff * fac).min(self.max_step);
            } else {
                stats.rejected += 1;
                h = h_eff * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_dense_output() {
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 * 0.2).collect();
        let mut out = vec![C64::new(0.0, 0.0); grid.len()];
        let integ = Integrator::new(Tolerances {
            rtol: 1e-10,
            atol: 1e-12,
        });
        let mut f = |_t: f64, y: &[C64], dy: &mut [C64]| {
            dy[0] = y[0] * C64::new(-0.1, -2.0);
        };
        integ
            .integrate(&mut f, &[C64::new(1.0, 0.0)], &grid, |i, y| out[i] = y[0])
            .unwrap();
        for (t, v) in grid.iter().zip(&out) {
            let exact = (C64::new(-0.1, -2.0) * *t).exp();
            assert!((v - exact).norm() < 1e-8, "t={t} got {v} want {exact}");
        }
    }
}
