use crate::bath::Correlator;
use crate::deterministic::{validate_grid, validate_initial, PropagationResult};
use crate::linalg::{hermitian_eigen, max_abs};
use crate::quad::adaptive;
use crate::state_space::SystemModel;
use crate::{CMat, Error, Result, C64};

/// Prefactor P of the coherence exponent
/// rho_ab(t) = rho_ab(0) e^{-i w_ab t} exp(-P (s_a - s_b)(s_a G(t) - s_b G^*(t))),
/// G(t) = int_0^t dtau int_0^tau du C(tau - u). Fixed by matching the
/// one-mode discretized bath.
pub const DEPHASING_PREFACTOR: f64 = 1.0;

/// Common eigenbasis of commuting H_s and S: (energies, S eigenvalues, basis).
pub fn common_eigenbasis(model: &SystemModel) -> Result<(Vec<f64>, Vec<f64>, CMat)> {
    let comm = &model.h * &model.s - &model.s * &model.h;
    let scale = max_abs(&model.h).max(max_abs(&model.s)).max(1.0);
    if max_abs(&comm) > 1e-10 * scale * scale {
        return Err(Error::Precondition(format!(
            "pure dephasing needs [H_s, S] = 0; commutator norm is {:.3e}",
            max_abs(&comm)
        )));
    }
    let d = model.dim();
    let (sv, sb) = hermitian_eigen(&model.s);
    let mut basis = CMat::zeros(d, d);
    let mut energies = vec![0.0; d];
    let mut svals = vec![0.0; d];
    let tol = 1e-9 * scale;
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && (sv[end] - sv[start]).abs() <= tol {
            end += 1;
        }
        // diagonalize H_s inside the degenerate block of S
        let block = sb.columns(start, end - start).into_owned();
        let hb = block.adjoint() * &model.h * &block;
        let (ev, evec) = hermitian_eigen(&hb);
        let rotated = &block * evec;
        for j in 0..end - start {
            basis.set_column(start + j, &rotated.column(j));
            energies[start + j] = ev[j];
            svals[start + j] = sv[start..end].iter().sum::<f64>() / (end - start) as f64;
        }
        start = end;
    }
    Ok((energies, svals, basis))
}

/// G(t) = int_0^t (t - v) C(v) dv on every grid point, accumulated interval
/// by interval with adaptive quadrature.
pub fn double_integral(c: &dyn Correlator, grid: &[f64], tol: f64) -> Vec<C64> {
    let mut out = Vec::with_capacity(grid.len());
    let (mut f, mut m) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    let mut prev = 0.0;
    for &t in grid {
        if t > prev {
            let (df, _) = adaptive(|v| c.correlation(v), prev, t, tol, tol);
            let (dm, _) = adaptive(|v| c.correlation(v) * v, prev, t, tol, tol);
            f += df;
            m += dm;
        }
        prev = t;
        out.push(f * t - m);
    }
    out
}

/// Exact reduced dynamics for [H_s, S] = 0.
pub fn dephasing_oracle(
    model: &SystemModel,
    rho0: &CMat,
    c: &dyn Correlator,
    grid: &[f64],
) -> Result<PropagationResult> {
    validate_grid(grid)?;
    validate_initial(rho0, model.dim())?;
    let (e, s, v) = common_eigenbasis(model)?;
    let d = model.dim();
    let g = double_integral(c, grid, 1e-14);
    if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Validation(
            "correlation integral is not finite".into(),
        ));
    }
    let r0 = v.adjoint() * rho0 * &v;
    let rho = grid
        .iter()
        .zip(&g)
        .map(|(&t, gt)| {
            let m = CMat::from_fn(d, d, |a, b| {
                let ds = s[a] - s[b];
                let phase = C64::new(0.0, -(e[a] - e[b]) * t).exp();
                let decay = (-(gt * s[a] - gt.conj() * s[b]) * (DEPHASING_PREFACTOR * ds)).exp();
                r0[(a, b)] * phase * decay
            });
            &v * m * v.adjoint()
        })
        .collect();
    Ok(PropagationResult::new(
        "oracle-dephasing",
        grid.to_vec(),
        rho,
    ))
}
