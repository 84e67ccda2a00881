use crate::deterministic::PropagationResult;
use crate::stochastic::TrajectoryEnsemble;
use crate::{CMat, Error, Result, C64};
use serde::{Deserialize, Serialize};

/// Either kind of trajectory accepted by [`cross_compare`].
#[derive(Clone, Copy, Debug)]
pub enum Trajectory<'a> {
    Deterministic(&'a PropagationResult),
    Ensemble(&'a TrajectoryEnsemble),
}

impl<'a> From<&'a PropagationResult> for Trajectory<'a> {
    fn from(r: &'a PropagationResult) -> Self {
        Trajectory::Deterministic(r)
    }
}

impl<'a> From<&'a TrajectoryEnsemble> for Trajectory<'a> {
    fn from(e: &'a TrajectoryEnsemble) -> Self {
        Trajectory::Ensemble(e)
    }
}

impl Trajectory<'_> {
    pub fn label(&self) -> &str {
        match self {
            Trajectory::Deterministic(r) => &r.backend,
            Trajectory::Ensemble(e) => &e.backend,
        }
    }

    pub fn times(&self) -> &[f64] {
        match self {
            Trajectory::Deterministic(r) => &r.times,
            Trajectory::Ensemble(e) => &e.times,
        }
    }

    pub fn values(&self) -> &[CMat] {
        match self {
            Trajectory::Deterministic(r) => &r.rho,
            Trajectory::Ensemble(e) => &e.mean,
        }
    }

    /// Standard errors (re, im parts) for ensembles.
    pub fn errors(&self) -> Option<&[CMat]> {
        match self {
            Trajectory::Deterministic(_) => None,
            Trajectory::Ensemble(e) => Some(&e.stderr),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    /// Bound on the largest absolute deviation for deterministic pairs.
    pub abs: f64,
    /// Bound in combined standard errors when either side is an ensemble.
    pub sigma: f64,
}

impl ToleranceSpec {
    pub fn absolute(abs: f64) -> Self {
        Self { abs, sigma: 3.0 }
    }
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            abs: 1e-4,
            sigma: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementDeviation {
    pub row: usize,
    pub col: usize,
    pub max_abs: f64,
    pub mean_abs: f64,
    /// Largest deviation of the real or imaginary part in combined standard
    /// errors; present in Monte-Carlo mode only.
    pub max_sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub labels: (String, String),
    pub times: Vec<f64>,
    pub elements: Vec<ElementDeviation>,
    pub max_abs: f64,
    pub max_sigma: Option<f64>,
    pub tolerance: ToleranceSpec,
    pub pass: bool,
}

impl ComparisonReport {
    pub fn monte_carlo(&self) -> bool {
        self.max_sigma.is_some()
    }

    /// `name metric=value tol=bound PASS|FAIL`
    pub fn line(&self, name: &str) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        match self.max_sigma {
            Some(s) => format!(
                "{name} max_sigma={s:.3e} tol={:.3e} {verdict}",
                self.tolerance.sigma
            ),
            None => format!(
                "{name} max_abs={:.3e} tol={:.3e} {verdict}",
                self.max_abs, self.tolerance.abs
            ),
        }
    }
}

/// Lagrange interpolation of order <= 3 (linear for standard errors) at `t`.
fn sample(times: &[f64], vals: &[CMat], t: f64, order: usize) -> CMat {
    let n = times.len();
    let pos = times.partition_point(|&x| x < t);
    if pos < n && times[pos] == t {
        return vals[pos].clone();
    }
    if n == 1 {
        return vals[0].clone();
    }
    let npts = (order + 1).min(n);
    let hi = pos.clamp(1, n - 1);
    let mut first = (hi as isize - (npts as isize) / 2).max(0) as usize;
    if first + npts > n {
        first = n - npts;
    }
    let mut acc = CMat::zeros(vals[0].nrows(), vals[0].ncols());
    for a in first..first + npts {
        let mut l = 1.0;
        for b in first..first + npts {
            if a != b {
                l *= (t - times[b]) / (times[a] - times[b]);
            }
        }
        acc += &vals[a] * C64::new(l, 0.0);
    }
    acc
}

fn sample_errors(times: &[f64], errs: &[CMat], t: f64) -> CMat {
    let s = sample(times, errs, t, 1);
    s.map(|z| C64::new(z.re.max(0.0), z.im.max(0.0)))
}

/// Per-element comparison on the union of both grids inside their overlap.
pub fn cross_compare<'a, 'b>(
    a: impl Into<Trajectory<'a>>,
    b: impl Into<Trajectory<'b>>,
    tol: ToleranceSpec,
) -> Result<ComparisonReport> {
    let (a, b) = (a.into(), b.into());
    let (ta, tb) = (a.times(), b.times());
    if ta.is_empty() || tb.is_empty() {
        return Err(Error::Validation(
            "cannot compare empty trajectories".into(),
        ));
    }
    let d = a.values()[0].nrows();
    if b.values()[0].nrows() != d {
        return Err(Error::Validation(
            "trajectories have different system dimensions".into(),
        ));
    }
    let lo = ta[0].max(tb[0]);
    let hi = ta[ta.len() - 1].min(tb[tb.len() - 1]);
    if lo > hi {
        return Err(Error::Validation(format!(
            "disjoint time grids: overlap [{lo}, {hi}] is empty"
        )));
    }
    let mut times: Vec<f64> = ta
        .iter()
        .chain(tb)
        .copied()
        .filter(|&t| t >= lo && t <= hi)
        .collect();
    times.sort_by(f64::total_cmp);
    let scale = hi.abs().max(1.0);
    times.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * scale);
    let mc = a.errors().is_some() || b.errors().is_some();
    let mut max_abs = vec![0.0f64; d * d];
    let mut sum_abs = vec![0.0f64; d * d];
    let mut max_sig = vec![0.0f64; d * d];
    for &t in &times {
        let va = sample(ta, a.values(), t, 3);
        let vb = sample(tb, b.values(), t, 3);
        let ea = a.errors().map(|e| sample_errors(ta, e, t));
        let eb = b.errors().map(|e| sample_errors(tb, e, t));
        for col in 0..d {
            for row in 0..d {
                let k = row + d * col;
                let diff = va[(row, col)] - vb[(row, col)];
                let dev = diff.norm();
                max_abs[k] = max_abs[k].max(dev);
                sum_abs[k] += dev;
                if mc {
                    let sq =
                        |e: &Option<CMat>| e.as_ref().map_or(C64::new(0.0, 0.0), |m| m[(row, col)]);
                    let (sa, sb) = (sq(&ea), sq(&eb));
                    let sig_re = (sa.re * sa.re + sb.re * sb.re).sqrt();
                    let sig_im = (sa.im * sa.im + sb.im * sb.im).sqrt();
                    let units = |x: f64, s: f64| {
                        if s > 0.0 {
                            x.abs() / s
                        } else if x.abs() <= tol.abs {
                            0.0
                        } else {
                            f64::INFINITY
                        }
                    };
                    max_sig[k] = max_sig[k]
                        .max(units(diff.re, sig_re))
                        .max(units(diff.im, sig_im));
                }
            }
        }
    }
    let n = times.len() as f64;
    let mut elements = Vec::with_capacity(d * d);
    for row in 0..d {
        for col in 0..d {
            let k = row + d * col;
            elements.push(ElementDeviation {
                row,
                col,
                max_abs: max_abs[k],
                mean_abs: sum_abs[k] / n,
                max_sigma: mc.then_some(max_sig[k]),
            });
        }
    }
    let overall_abs = max_abs.iter().copied().fold(0.0, f64::max);
    let overall_sigma = mc.then(|| max_sig.iter().copied().fold(0.0, f64::max));
    let pass = match overall_sigma {
        Some(s) => s <= tol.sigma,
        None => overall_abs <= tol.abs,
    };
    Ok(ComparisonReport {
        labels: (a.label().to_string(), b.label().to_string()),
        times,
        elements,
        max_abs: overall_abs,
        max_sigma: overall_sigma,
        tolerance: tol,
        pass,
    })
}
