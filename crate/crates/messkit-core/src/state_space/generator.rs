use super::fock::FockSpace;
use super::model::{SystemModel, TruncationSpec};
use crate::decomposition::{EffectiveModeSet, QuasiThermalModes};
use crate::linalg::partial_trace_system;
use crate::sparse::{mat_from_vec, Csr, SuperBuilder};
use crate::{CMat, Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorForm {
    FirstForm,
    SecondForm,
    QuasiLindblad,
    StrictLindblad,
    QuasiThermal,
    ChainUnitary,
}

impl GeneratorForm {
    pub fn is_density_form(self) -> bool {
        self != GeneratorForm::FirstForm
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorOptions {
    /// Replaces the zero system corner of the quasi-Lindblad Kossakowski
    /// matrix.
    pub gamma_s: f64,
    /// Tolerance for structural preconditions (kappa = eta, diagonal E, ...).
    pub structure_tol: f64,
    /// Largest extended Hilbert-space dimension accepted.
    pub max_dim: usize,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self {
            gamma_s: 0.0,
            structure_tol: 1e-12,
            max_dim: 1500,
        }
    }
}

/// Sparse generator acting on the column-stacked extended operator.
#[derive(Clone, Debug)]
pub struct ExtendedGenerator {
    pub form: GeneratorForm,
    pub op: Csr,
    pub space: FockSpace,
    /// max |d/dt Tr(reduced)| per unit state norm found at build time.
    pub trace_defect: f64,
}

impl ExtendedGenerator {
    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn system_dim(&self) -> usize {
        self.space.d
    }

    pub fn nnz(&self) -> usize {
        self.op.nnz()
    }

    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.op.matvec_into(x, y);
    }

    /// Linear functional giving d/dt of the reduced trace.
    fn trace_row(&self) -> Vec<C64> {
        let dim = self.dim();
        let d = self.space.d;
        let mut row = vec![C64::new(0.0, 0.0); dim * dim];
        let rows: Vec<usize> = if self.form.is_density_form() {
            (0..dim).map(|i| i + dim * i).collect()
        } else {
            (0..d).map(|i| i + dim * i).collect()
        };
        for r in rows {
            for (c, v) in self.op.row(r) {
                row[c] += v;
            }
        }
        row
    }

    /// Reduced system state of an extended state.
    pub fn project(&self, state: &[C64]) -> ReducedState {
        project_reduced_state(state, self.form, &self.space)
    }
}

/// Reduced density operator with its trace.
#[derive(Clone, Debug)]
pub struct ReducedState {
    pub rho: CMat,
    pub trace: C64,
}

/// First form: the vacuum matrix element; density forms: partial trace over
/// all modes.
pub fn project_reduced_state(
    state: &[C64],
    form: GeneratorForm,
    space: &FockSpace,
) -> ReducedState {
    let dim = space.dim();
    let d = space.d;
    let rho = if form.is_density_form() {
        partial_trace_system(&mat_from_vec(state, dim), d)
    } else {
        CMat::from_fn(d, d, |i, j| state[i + dim * j])
    };
    let trace = rho.trace();
    ReducedState { rho, trace }
}

fn check_dims(
    model: &SystemModel,
    trunc: &TruncationSpec,
    k: usize,
    opts: &GeneratorOptions,
) -> Result<FockSpace> {
    trunc.validate()?;
    if trunc.cutoffs.len() != k {
        return Err(Error::Validation(format!(
            "{} Fock cutoffs given for {k} modes",
            trunc.cutoffs.len()
        )));
    }
    let dim = trunc.extended_dim(model.dim());
    if dim > opts.max_dim {
        // halve the largest cutoffs until the guard is met
        let mut hint = trunc.cutoffs.clone();
        while TruncationSpec::fock(hint.clone()).extended_dim(model.dim()) > opts.max_dim {
            let (i, _) = hint.iter().enumerate().max_by_key(|(_, &n)| n).unwrap();
            if hint[i] <= 1 {
                break;
            }
            hint[i] /= 2;
        }
        return Err(Error::DimensionGuard {
            dim,
            limit: opts.max_dim,
            hint,
        });
    }
    Ok(FockSpace::new(model.dim(), &trunc.cutoffs))
}

fn sum_ops(terms: Vec<(C64, Csr)>, n: usize) -> Csr {
    let mut acc = Csr::identity(n).scale(C64::new(0.0, 0.0));
    for (c, op) in terms {
        if c != C64::new(0.0, 0.0) {
            acc = acc.add(&op.scale(c));
        }
    }
    acc
}

struct Ops {
    s: Csr,
    h: Csr,
    a: Vec<Csr>,
    ad: Vec<Csr>,
}

fn ops(space: &FockSpace, model: &SystemModel, k: usize) -> Ops {
    let a: Vec<Csr> = (0..k).map(|j| space.annihilation(j)).collect();
    let ad = a.iter().map(|x| x.adjoint()).collect();
    Ops {
        s: space.system(&model.s),
        h: space.system(&model.h),
        a,
        ad,
    }
}

/// a^dagger M a = sum_jk M_jk a_j^dagger a_k.
fn quadratic(o: &Ops, m: &CMat, n: usize) -> Csr {
    let k = o.a.len();
    let mut terms = Vec::new();
    for j in 0..k {
        for l in 0..k {
            if m[(j, l)] != C64::new(0.0, 0.0) {
                terms.push((m[(j, l)], o.ad[j].mul(&o.a[l])));
            }
        }
    }
    sum_ops(terms, n)
}

/// H_0 = H_s + S (a^dagger k_+ + k_+^dagger a) + a^dagger Omega a.
fn h0(o: &Ops, set: &EffectiveModeSet, kp: &crate::CVec, n: usize) -> Csr {
    let k = set.len();
    let mut terms: Vec<(C64, Csr)> = Vec::new();
    for j in 0..k {
        terms.push((kp[j], o.ad[j].clone()));
        terms.push((kp[j].conj(), o.a[j].clone()));
    }
    let x = sum_ops(terms, n);
    o.h.add(&o.s.mul(&x)).add(&quadratic(o, &set.omega(), n))
}

fn finish(form: GeneratorForm, b: SuperBuilder, space: FockSpace) -> Result<ExtendedGenerator> {
    let mut gen = ExtendedGenerator {
        form,
        op: b.build(),
        space,
        trace_defect: 0.0,
    };
    let row = gen.trace_row();
    let scale = gen.op.values.iter().fold(1.0f64, |a, v| a.max(v.norm()));
    let defect = row.iter().fold(0.0f64, |a, v| a.max(v.norm()));
    gen.trace_defect = defect;
    if defect > 1e-12 * scale {
        return Err(Error::Construction(format!(
            "generator violates trace preservation by {defect:.3e}"
        )));
    }
    Ok(gen)
}

fn first_form(
    model: &SystemModel,
    set: &EffectiveModeSet,
    space: FockSpace,
) -> Result<ExtendedGenerator> {
    let n = space.dim();
    let k = set.len();
    let o = ops(&space, model, k);
    let mut b = SuperBuilder::new(n);
    let mi = C64::new(0.0, -1.0);
    // -i [H_s, rho] - i (H_mode rho - rho H_mode^dagger), H_mode = a^dag E a
    b.hamiltonian(&o.h);
    let hm = quadratic(&o, &set.e, n);
    b.left(mi, &hm);
    b.right(-mi, &hm.adjoint());
    // X_q = B rho + rho B^dagger, B = sum kappa_j^* a_j + eta_j a_j^dagger
    let mut terms = Vec::new();
    for j in 0..k {
        terms.push((set.kappa[j].conj(), o.a[j].clone()));
        terms.push((set.eta[j], o.ad[j].clone()));
    }
    let bop = sum_ops(terms, n);
    let bd = bop.adjoint();
    // -i S_q X_q = -i/sqrt2 (S X_q - X_q S)
    let f = mi * FRAC_1_SQRT_2;
    b.left(f, &o.s.mul(&bop));
    b.sandwich(f, &o.s, &bd);
    b.sandwich(-f, &bop, &o.s);
    b.right(-f, &bd.mul(&o.s));
    // X_c = A rho - rho A^dagger, A = sum eta_j a_j^dagger;
    // -i S_c X_c = -i/sqrt2 (S X_c + X_c S)
    let mut terms = Vec::new();
    for j in 0..k {
        terms.push((set.eta[j], o.ad[j].clone()));
    }
    let aop = sum_ops(terms, n);
    let ad = aop.adjoint();
    b.left(f, &o.s.mul(&aop));
    b.sandwich(-f, &o.s, &ad);
    b.sandwich(f, &aop, &o.s);
    b.right(-f, &ad.mul(&o.s));
    finish(GeneratorForm::FirstForm, b, space)
}

fn second_form(
    model: &SystemModel,
    set: &EffectiveModeSet,
    space: FockSpace,
    form: GeneratorForm,
) -> Result<ExtendedGenerator> {
    let n = space.dim();
    let k = set.len();
    let o = ops(&space, model, k);
    let mut b = SuperBuilder::new(n);
    let km = set.kappa_minus();
    b.hamiltonian(&h0(&o, set, &set.kappa_plus(), n));
    let i = C64::new(0.0, 1.0);
    for j in 0..k {
        if km[j] != C64::new(0.0, 0.0) {
            b.dissipator(i * km[j].conj(), &o.a[j], &o.s);
            b.dissipator(-i * km[j], &o.s, &o.a[j]);
        }
    }
    let gamma = set.gamma();
    for j in 0..k {
        for l in 0..k {
            if gamma[(j, l)] != C64::new(0.0, 0.0) {
                b.dissipator(gamma[(j, l)], &o.a[l], &o.a[j]);
            }
        }
    }
    finish(form, b, space)
}

/// Kossakowski matrix over F = (S, a_1, ..., a_K):
/// [[gamma_s, i kappa_-^dagger], [-i kappa_-, Gamma]].
pub fn kossakowski_matrix(set: &EffectiveModeSet, gamma_s: f64) -> CMat {
    let k = set.len();
    let km = set.kappa_minus();
    let g = set.gamma();
    let i = C64::new(0.0, 1.0);
    CMat::from_fn(k + 1, k + 1, |r, c| match (r, c) {
        (0, 0) => C64::new(gamma_s, 0.0),
        (0, c) => i * km[c - 1].conj(),
        (r, 0) => -i * km[r - 1],
        (r, c) => g[(r - 1, c - 1)],
    })
}

fn quasi_lindblad(
    model: &SystemModel,
    set: &EffectiveModeSet,
    space: FockSpace,
    gamma_s: f64,
) -> Result<ExtendedGenerator> {
    let n = space.dim();
    let k = set.len();
    let o = ops(&space, model, k);
    let mut b = SuperBuilder::new(n);
    b.hamiltonian(&h0(&o, set, &set.kappa_plus(), n));
    let cm = kossakowski_matrix(set, gamma_s);
    let f: Vec<&Csr> = std::iter::once(&o.s).chain(o.a.iter()).collect();
    for j in 0..=k {
        for l in 0..=k {
            if cm[(j, l)] != C64::new(0.0, 0.0) {
                b.dissipator(cm[(j, l)], f[l], f[j]);
            }
        }
    }
    finish(GeneratorForm::QuasiLindblad, b, space)
}

fn strict_lindblad(
    model: &SystemModel,
    set: &EffectiveModeSet,
    space: FockSpace,
    tol: f64,
) -> Result<ExtendedGenerator> {
    let scale = set
        .kappa
        .iter()
        .chain(set.eta.iter())
        .fold(1.0f64, |a, v| a.max(v.norm()));
    if (&set.kappa - &set.eta).camax() > tol * scale {
        return Err(Error::Structural(
            "strict-lindblad form requires kappa = eta".into(),
        ));
    }
    if !set.is_diagonal(tol * scale) {
        return Err(Error::Structural(
            "strict-lindblad form requires a diagonal mode matrix E".into(),
        ));
    }
    let n = space.dim();
    let k = set.len();
    let o = ops(&space, model, k);
    let mut b = SuperBuilder::new(n);
    let mut terms = Vec::new();
    for j in 0..k {
        let e = set.e[(j, j)];
        terms.push((set.kappa[j], o.s.mul(&o.ad[j])));
        terms.push((set.kappa[j].conj(), o.s.mul(&o.a[j])));
        terms.push((C64::new(e.re, 0.0), o.ad[j].mul(&o.a[j])));
    }
    let h = o.h.add(&sum_ops(terms, n));
    b.hamiltonian(&h);
    for j in 0..k {
        let gam = -set.e[(j, j)].im;
        if gam != 0.0 {
            b.dissipator(C64::new(gam, 0.0), &o.a[j], &o.a[j]);
        }
    }
    finish(GeneratorForm::StrictLindblad, b, space)
}

fn chain_unitary(
    model: &SystemModel,
    set: &EffectiveModeSet,
    space: FockSpace,
    tol: f64,
) -> Result<ExtendedGenerator> {
    let scale = set.e.iter().fold(1.0f64, |a, v| a.max(v.norm()));
    if set.gamma().camax() > tol * scale {
        return Err(Error::Structural(
            "chain-unitary form requires Gamma = 0 (Hermitian E)".into(),
        ));
    }
    let cscale = set
        .kappa
        .iter()
        .chain(set.eta.iter())
        .fold(1.0f64, |a, v| a.max(v.norm()));
    if set.kappa_minus().camax() > tol * cscale {
        return Err(Error::Structural(
            "chain-unitary form requires kappa_- = 0".into(),
        ));
    }
    let n = space.dim();
    let o = ops(&space, model, set.len());
    let mut b = SuperBuilder::new(n);
    b.hamiltonian(&h0(&o, set, &set.kappa_plus(), n));
    finish(GeneratorForm::ChainUnitary, b, space)
}

/// Builds one of the extended-space generators for an effective mode set.
pub fn build_extended_generator(
    model: &SystemModel,
    set: &EffectiveModeSet,
    trunc: &TruncationSpec,
    form: GeneratorForm,
    opts: &GeneratorOptions,
) -> Result<ExtendedGenerator> {
    let space = check_dims(model, trunc, set.len(), opts)?;
    match form {
        GeneratorForm::FirstForm => first_form(model, set, space),
        GeneratorForm::SecondForm => second_form(model, set, space, GeneratorForm::SecondForm),
        GeneratorForm::QuasiLindblad => quasi_lindblad(model, set, space, opts.gamma_s),
        GeneratorForm::StrictLindblad => strict_lindblad(model, set, space, opts.structure_tol),
        GeneratorForm::ChainUnitary => chain_unitary(model, set, space, opts.structure_tol),
        GeneratorForm::QuasiThermal => Err(Error::Structural(
            "quasi-thermal form is built from quasi-thermal modes (build_quasi_thermal_generator)"
                .into(),
        )),
    }
}

/// H_0 = H_s + sum_k [w_k b_k^dag b_k + g_k S (b_k + b_k^dag)], dissipators
/// gamma_k (n_k + 1) D[b_k] + gamma_k n_k D[b_k^dag].
pub fn build_quasi_thermal_generator(
    model: &SystemModel,
    modes: &QuasiThermalModes,
    trunc: &TruncationSpec,
    opts: &GeneratorOptions,
) -> Result<ExtendedGenerator> {
    let k = modes.len();
    let space = check_dims(model, trunc, k, opts)?;
    let n = space.dim();
    let o = ops(&space, model, k);
    let mut terms = Vec::new();
    for j in 0..k {
        terms.push((C64::new(modes.omega[j], 0.0), o.ad[j].mul(&o.a[j])));
        let x = o.a[j].add(&o.ad[j]);
        terms.push((C64::new(modes.g[j], 0.0), o.s.mul(&x)));
    }
    let h = o.h.add(&sum_ops(terms, n));
    let mut b = SuperBuilder::new(n);
    b.hamiltonian(&h);
    for j in 0..k {
        let (g, nk) = (modes.gamma[j], modes.n[j]);
        if g != 0.0 {
            b.dissipator(C64::new(g * (nk + 1.0), 0.0), &o.a[j], &o.a[j]);
            if nk != 0.0 {
                b.dissipator(C64::new(g * nk, 0.0), &o.ad[j], &o.ad[j]);
            }
        }
    }
    finish(GeneratorForm::QuasiThermal, b, space)
}
