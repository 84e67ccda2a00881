use super::result::{validate_grid, validate_initial, PropagationResult};
use crate::decomposition::ExponentialModes;
use crate::linalg::{matmul_into, I, ZERO};
use crate::ode::{Integrator, OdeSystem, Tolerances};
use crate::state_space::{SystemModel, TruncationSpec};
use crate::{CMat, CVec, Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeomVariant {
    Generalized,
    Ikeda,
    Standard,
}

impl HeomVariant {
    pub fn label(self) -> &'static str {
        match self {
            HeomVariant::Generalized => "heom-generalized",
            HeomVariant::Ikeda => "heom-ikeda",
            HeomVariant::Standard => "heom-standard",
        }
    }
}

/// Split of the correlation function into Re C = kappa^dag exp(-iEt) eta_re
/// and i Im C = kappa^dag exp(-iEt) eta_im for t >= 0.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IkedaSplit {
    pub e: CMat,
    pub kappa: CVec,
    pub eta_re: CVec,
    pub eta_im: CVec,
}

impl IkedaSplit {
    pub fn new(e: CMat, kappa: CVec, eta_re: CVec, eta_im: CVec) -> Result<Self> {
        let k = e.nrows();
        if !e.is_square() || kappa.len() != k || eta_re.len() != k || eta_im.len() != k {
            return Err(Error::Validation(
                "ikeda split needs a square E and vectors of matching length".into(),
            ));
        }
        if e.iter()
            .chain(kappa.iter())
            .chain(eta_re.iter())
            .chain(eta_im.iter())
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Validation(
                "ikeda split has non-finite entries".into(),
            ));
        }
        Ok(Self {
            e,
            kappa,
            eta_re,
            eta_im,
        })
    }

    /// Doubles every exponent z into the pair (z, z*) and merges coincident
    /// exponents, so that each mode carries both the real and the imaginary
    /// part of C.
    pub fn from_modes(modes: &ExponentialModes) -> Result<Self> {
        let scale = modes
            .z
            .iter()
            .fold(0.0f64, |a, z| a.max(z.norm()))
            .max(1e-300);
        // (exponent, weight in Re C, weight in i Im C)
        let mut terms: Vec<(C64, C64, C64)> = Vec::new();
        let half = C64::new(0.5, 0.0);
        for (&d, &z) in modes.d.iter().zip(&modes.z) {
            for (zz, a, b) in [
                (z, d * half, d * half),
                (z.conj(), d.conj() * half, -d.conj() * half),
            ] {
                match terms
                    .iter_mut()
                    .find(|(w, _, _)| (w - zz).norm() <= 1e-12 * scale)
                {
                    Some(t) => {
                        t.1 += a;
                        t.2 += b;
                    }
                    None => terms.push((zz, a, b)),
                }
            }
        }
        let total: f64 = terms.iter().map(|(_, a, b)| a.norm() + b.norm()).sum();
        terms.retain(|(_, a, b)| a.norm() + b.norm() > 1e-15 * total);
        if terms.is_empty() {
            return Err(Error::Decomposition(
                "correlation function vanishes identically".into(),
            ));
        }
        let k = terms.len();
        let mut e = CMat::zeros(k, k);
        let mut kappa = CVec::zeros(k);
        let mut eta_re = CVec::zeros(k);
        let mut eta_im = CVec::zeros(k);
        for (j, (z, a, b)) in terms.into_iter().enumerate() {
            e[(j, j)] = -I * z;
            let w = a.norm().max(b.norm()).sqrt();
            kappa[j] = C64::new(w, 0.0);
            eta_re[j] = a / w;
            eta_im[j] = b / w;
        }
        Self::new(e, kappa, eta_re, eta_im)
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    fn propagate(&self, t: f64, eta: &CVec) -> C64 {
        let offdiag =
            (0..self.len()).any(|i| (0..self.len()).any(|j| i != j && self.e[(i, j)] != ZERO));
        let prop = if !offdiag {
            CMat::from_diagonal(&self.e.diagonal().map(|x| (-I * x * t).exp()))
        } else {
            (self.e.clone() * (-I * t)).exp()
        };
        (self.kappa.adjoint() * prop * eta)[(0, 0)]
    }

    /// Reconstructed Re C(t) for t >= 0.
    pub fn real_part(&self, t: f64) -> C64 {
        self.propagate(t, &self.eta_re)
    }

    /// Reconstructed i Im C(t) for t >= 0.
    pub fn imag_part(&self, t: f64) -> C64 {
        self.propagate(t, &self.eta_im)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LinkKind {
    Left,
    Right,
    Comm,
    Anti,
    Plain,
}

#[derive(Clone, Copy, Debug)]
struct Link {
    src: usize,
    kind: LinkKind,
    coef: C64,
}

/// Truncated hierarchy with level-ordered ADOs and precomputed connectivity.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    pub variant: HeomVariant,
    pub depth: usize,
    /// Length of the multi-index (2K for the generalized variant).
    pub width: usize,
    pub indices: Vec<Box<[u16]>>,
    lookup: HashMap<Box<[u16]>, usize>,
    decay: Vec<C64>,
    links: Vec<Vec<Link>>,
}

fn ado_count(width: usize, depth: usize) -> f64 {
    // binomial(width + depth, depth)
    (1..=depth).fold(1.0, |acc, j| acc * (width + j) as f64 / j as f64)
}

fn enumerate(width: usize, depth: usize, max_ados: usize) -> Result<Vec<Box<[u16]>>> {
    let count = ado_count(width, depth);
    if count > max_ados as f64 {
        let mut hint = depth;
        while hint > 1 && ado_count(width, hint) > max_ados as f64 {
            hint -= 1;
        }
        return Err(Error::DimensionGuard {
            dim: count.min(usize::MAX as f64) as usize,
            limit: max_ados,
            hint: vec![hint],
        });
    }
    if depth > u16::MAX as usize {
        return Err(Error::Validation("hierarchy depth too large".into()));
    }
    fn fill(pos: usize, left: usize, cur: &mut Vec<u16>, out: &mut Vec<Box<[u16]>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left as u16;
            out.push(cur.clone().into_boxed_slice());
            return;
        }
        for v in (0..=left).rev() {
            cur[pos] = v as u16;
            fill(pos + 1, left - v, cur, out);
        }
    }
    let mut out = Vec::with_capacity(count as usize);
    if width == 0 {
        out.push(Vec::new().into_boxed_slice());
        return Ok(out);
    }
    let mut cur = vec![0u16; width];
    for level in 0..=depth {
        fill(0, level, &mut cur, &mut out);
    }
    Ok(out)
}

impl Hierarchy {
    fn skeleton(variant: HeomVariant, width: usize, depth: usize, max_ados: usize) -> Result<Self> {
        let indices = enumerate(width, depth, max_ados)?;
        let lookup = indices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        let n = indices.len();
        Ok(Self {
            variant,
            depth,
            width,
            indices,
            lookup,
            decay: vec![ZERO; n],
            links: vec![Vec::new(); n],
        })
    }

    fn find(&self, base: &[u16], up: Option<usize>, down: Option<usize>) -> Option<usize> {
        let mut v = base.to_vec();
        if let Some(k) = down {
            if v[k] == 0 {
                return None;
            }
            v[k] -= 1;
        }
        if let Some(k) = up {
            v[k] = v[k].checked_add(1)?;
        }
        self.lookup.get(v.as_slice()).copied()
    }

    fn link(&mut self, target: usize, src: Option<usize>, kind: LinkKind, coef: C64) {
        if let Some(src) = src {
            if coef != ZERO {
                self.links[target].push(Link { src, kind, coef });
            }
        }
    }

    /// rho_{m,n} hierarchy in the number basis of star modes, rescaled by
    /// the sqrt(m_k d_k) factors.
    pub fn generalized(modes: &ExponentialModes, depth: usize, max_ados: usize) -> Result<Self> {
        let k = modes.len();
        let mut h = Self::skeleton(HeomVariant::Generalized, 2 * k, depth, max_ados)?;
        let roots: Vec<C64> = modes.d.iter().map(|d| d.sqrt()).collect();
        for j in 0..h.indices.len() {
            let v = h.indices[j].clone();
            let mut decay = ZERO;
            for q in 0..k {
                let (m, n) = (v[q] as f64, v[k + q] as f64);
                let z = modes.z[q];
                decay += z * m + z.conj() * n;
                let s = roots[q];
                let up_m = h.find(&v, Some(q), None);
                let up_n = h.find(&v, Some(k + q), None);
                let dn_m = h.find(&v, None, Some(q));
                let dn_n = h.find(&v, None, Some(k + q));
                h.link(j, up_m, LinkKind::Comm, I * s * (m + 1.0).sqrt());
                h.link(j, up_n, LinkKind::Comm, I * s.conj() * (n + 1.0).sqrt());
                h.link(j, dn_m, LinkKind::Left, I * s * m.sqrt());
                h.link(j, dn_n, LinkKind::Right, -I * s.conj() * n.sqrt());
            }
            h.decay[j] = decay;
        }
        Ok(h)
    }

    /// Single-index hierarchy for purely damped exponents (all omega_k = 0).
    pub fn standard(
        modes: &ExponentialModes,
        depth: usize,
        max_ados: usize,
        tol: f64,
    ) -> Result<Self> {
        let scale = modes.z.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        if let Some(z) = modes.z.iter().find(|z| z.im.abs() > tol * scale) {
            return Err(Error::Precondition(format!(
                "standard HEOM needs all mode frequencies zero (found omega = {})",
                z.im
            )));
        }
        let k = modes.len();
        let mut h = Self::skeleton(HeomVariant::Standard, k, depth, max_ados)?;
        for j in 0..h.indices.len() {
            let v = h.indices[j].clone();
            let mut decay = ZERO;
            for q in 0..k {
                let n = v[q] as f64;
                decay += C64::new(modes.z[q].re * n, 0.0);
                let d = modes.d[q];
                if d == ZERO {
                    continue;
                }
                let s = d.sqrt();
                let up = h.find(&v, Some(q), None);
                let dn = h.find(&v, None, Some(q));
                h.link(j, up, LinkKind::Comm, -I * s * (n + 1.0).sqrt());
                h.link(j, dn, LinkKind::Left, -I * s * n.sqrt());
                h.link(j, dn, LinkKind::Right, I * (d.conj() / s) * n.sqrt());
            }
            h.decay[j] = decay;
        }
        Ok(h)
    }

    /// Hierarchy over a single Fock index per mode with the real/imaginary
    /// split of C; E may be non-diagonal.
    pub fn ikeda(split: &IkedaSplit, depth: usize, max_ados: usize) -> Result<Self> {
        let k = split.len();
        let mut h = Self::skeleton(HeomVariant::Ikeda, k, depth, max_ados)?;
        for j in 0..h.indices.len() {
            let v = h.indices[j].clone();
            let mut decay = ZERO;
            for p in 0..k {
                let n = v[p] as f64;
                decay += I * split.e[(p, p)] * n;
                let up = h.find(&v, Some(p), None);
                let dn = h.find(&v, None, Some(p));
                h.link(
                    j,
                    up,
                    LinkKind::Comm,
                    -I * split.kappa[p].conj() * (n + 1.0).sqrt(),
                );
                h.link(j, dn, LinkKind::Comm, -I * split.eta_re[p] * n.sqrt());
                h.link(j, dn, LinkKind::Anti, -I * split.eta_im[p] * n.sqrt());
                for q in 0..k {
                    if q == p || split.e[(p, q)] == ZERO || v[p] == 0 {
                        continue;
                    }
                    let src = h.find(&v, Some(q), Some(p));
                    let f = (n * (v[q] as f64 + 1.0)).sqrt();
                    h.link(j, src, LinkKind::Plain, -I * split.e[(p, q)] * f);
                }
            }
            h.decay[j] = decay;
        }
        Ok(h)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn index_of(&self, multi: &[u16]) -> Option<usize> {
        self.lookup.get(multi).copied()
    }

    /// rho_{0,0} = rho_s(0), every other ADO zero.
    pub fn initial_state(&self, rho0: &CMat) -> HierarchyState {
        let mut ados = BTreeMap::new();
        ados.insert(self.indices[0].to_vec(), rho0.clone());
        HierarchyState {
            depth: self.depth,
            rescaled: true,
            ados,
        }
    }

    fn state_from_flat(&self, y: &[C64], d: usize) -> HierarchyState {
        let d2 = d * d;
        let mut ados = BTreeMap::new();
        for (j, idx) in self.indices.iter().enumerate() {
            let block = &y[j * d2..(j + 1) * d2];
            if j == 0 || block.iter().any(|z| *z != ZERO) {
                ados.insert(idx.to_vec(), CMat::from_column_slice(d, d, block));
            }
        }
        HierarchyState {
            depth: self.depth,
            rescaled: true,
            ados,
        }
    }
}

/// Nonzero ADOs keyed by multi-index.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HierarchyState {
    pub depth: usize,
    pub rescaled: bool,
    pub ados: BTreeMap<Vec<u16>, CMat>,
}

impl HierarchyState {
    pub fn reduced(&self) -> Option<&CMat> {
        self.ados
            .iter()
            .find(|(k, _)| k.iter().all(|&x| x == 0))
            .map(|(_, v)| v)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct HeomOptions {
    pub tol: Tolerances,
    /// Abort when the total ADO norm exceeds this multiple of its initial value.
    pub watchdog: f64,
    pub max_ados: usize,
    /// When set, also runs depth L + 1 and flags deviations above this value.
    pub depth_check: Option<f64>,
    /// Tolerance on |omega_k| for the standard variant.
    pub structure_tol: f64,
}

impl Default for HeomOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            watchdog: 1e6,
            max_ados: 200_000,
            depth_check: None,
            structure_tol: 1e-12,
        }
    }
}

struct HeomSystem<'a> {
    h: &'a Hierarchy,
    d: usize,
    hs: Vec<C64>,
    s: Vec<C64>,
    filter: f64,
    active: Vec<bool>,
    compute: Vec<bool>,
    left: Vec<C64>,
    right: Vec<C64>,
    tmp: Vec<C64>,
    limit: f64,
    discards: usize,
    max_active: usize,
}

impl HeomSystem<'_> {
    fn refresh_frontier(&mut self) {
        for j in 0..self.h.len() {
            self.compute[j] = self.active[j] || self.h.links[j].iter().any(|l| self.active[l.src]);
        }
        let count = self.active.iter().filter(|&&a| a).count();
        self.max_active = self.max_active.max(count);
    }
}

impl OdeSystem for HeomSystem<'_> {
    fn rhs(&mut self, _t: f64, y: &[C64], dy: &mut [C64]) {
        let d = self.d;
        let d2 = d * d;
        for j in 0..self.h.len() {
            if !self.active[j] {
                continue;
            }
            let blk = &y[j * d2..(j + 1) * d2];
            matmul_into(d, &self.s, blk, &mut self.left[j * d2..(j + 1) * d2]);
            matmul_into(d, blk, &self.s, &mut self.right[j * d2..(j + 1) * d2]);
        }
        for j in 0..self.h.len() {
            let out = &mut dy[j * d2..(j + 1) * d2];
            if !self.compute[j] {
                out.fill(ZERO);
                continue;
            }
            let blk = &y[j * d2..(j + 1) * d2];
            // -i [H, rho] - decay rho
            matmul_into(d, &self.hs, blk, &mut self.tmp[..d2]);
            matmul_into(d, blk, &self.hs, &mut self.tmp[d2..2 * d2]);
            let decay = self.h.decay[j];
            for i in 0..d2 {
                out[i] = -I * (self.tmp[i] - self.tmp[d2 + i]) - decay * blk[i];
            }
            for l in &self.h.links[j] {
                if !self.active[l.src] {
                    continue;
                }
                let r = l.src * d2..(l.src + 1) * d2;
                let (ls, rs, ys) = (&self.left[r.clone()], &self.right[r.clone()], &y[r]);
                match l.kind {
                    LinkKind::Left => out.iter_mut().zip(ls).for_each(|(o, a)| *o += l.coef * a),
                    LinkKind::Right => out.iter_mut().zip(rs).for_each(|(o, b)| *o += l.coef * b),
                    LinkKind::Comm => out
                        .iter_mut()
                        .zip(ls.iter().zip(rs))
                        .for_each(|(o, (a, b))| *o += l.coef * (a - b)),
                    LinkKind::Anti => out
                        .iter_mut()
                        .zip(ls.iter().zip(rs))
                        .for_each(|(o, (a, b))| *o += l.coef * (a + b)),
                    LinkKind::Plain => out.iter_mut().zip(ys).for_each(|(o, x)| *o += l.coef * x),
                }
            }
        }
    }

    fn after_step(&mut self, t: f64, y: &mut [C64]) -> Result<bool> {
        let norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm <= self.limit) {
            return Err(Error::Instability(format!(
                "ADO norm {norm:.3e} exceeded the watchdog bound {:.3e} at t = {t}",
                self.limit
            )));
        }
        if self.filter <= 0.0 {
            return Ok(false);
        }
        let d2 = self.d * self.d;
        let mut modified = false;
        for j in 1..self.h.len() {
            let blk = &mut y[j * d2..(j + 1) * d2];
            let big = blk.iter().fold(0.0f64, |a, z| a.max(z.norm()));
            if big < self.filter {
                if big > 0.0 {
                    blk.fill(ZERO);
                    modified = true;
                }
                if self.active[j] {
                    self.discards += 1;
                }
                self.active[j] = false;
            } else {
                self.active[j] = true;
            }
        }
        self.refresh_frontier();
        Ok(modified)
    }
}

/// Propagates a prebuilt hierarchy; returns rho_{0,0} on the grid and the
/// final hierarchy state.
pub fn propagate_hierarchy(
    model: &SystemModel,
    rho0: &CMat,
    hierarchy: &Hierarchy,
    filter: f64,
    grid: &[f64],
    opts: &HeomOptions,
) -> Result<(PropagationResult, HierarchyState)> {
    validate_grid(grid)?;
    let d = model.dim();
    validate_initial(rho0, d)?;
    if !(filter >= 0.0) {
        return Err(Error::Validation(
            "filter threshold must be non-negative".into(),
        ));
    }
    let n = hierarchy.len();
    let d2 = d * d;
    let mut y0 = vec![ZERO; n * d2];
    y0[..d2].copy_from_slice(rho0.as_slice());
    let init_norm = rho0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let filtering = filter > 0.0;
    let mut active = vec![!filtering; n];
    active[0] = true;
    let mut sys = HeomSystem {
        h: hierarchy,
        d,
        hs: model.h.as_slice().to_vec(),
        s: model.s.as_slice().to_vec(),
        filter,
        active,
        compute: vec![true; n],
        left: vec![ZERO; n * d2],
        right: vec![ZERO; n * d2],
        tmp: vec![ZERO; 2 * d2],
        limit: opts.watchdog * init_norm,
        discards: 0,
        max_active: 0,
    };
    sys.refresh_frontier();
    let mut rho = Vec::with_capacity(grid.len());
    let mut last = Vec::new();
    let integ = Integrator::new(opts.tol);
    let stats = integ.integrate(&mut sys, &y0, grid, |i, y| {
        rho.push(CMat::from_column_slice(d, d, &y[..d2]));
        if i + 1 == grid.len() {
            last = y.to_vec();
        }
    })?;
    let mut result = PropagationResult::new(hierarchy.variant.label(), grid.to_vec(), rho);
    result.diagnostics.steps = stats;
    result.diagnostics.ado_count = Some(n);
    result.diagnostics.max_active = Some(if filtering { sys.max_active } else { n });
    result.diagnostics.filter_discards = sys.discards;
    let state = hierarchy.state_from_flat(&last, d);
    Ok((result, state))
}

fn build(
    modes: &ExponentialModes,
    variant: HeomVariant,
    depth: usize,
    opts: &HeomOptions,
) -> Result<Hierarchy> {
    match variant {
        HeomVariant::Generalized => Hierarchy::generalized(modes, depth, opts.max_ados),
        HeomVariant::Standard => {
            Hierarchy::standard(modes, depth, opts.max_ados, opts.structure_tol)
        }
        HeomVariant::Ikeda => {
            Hierarchy::ikeda(&IkedaSplit::from_modes(modes)?, depth, opts.max_ados)
        }
    }
}

/// HEOM propagation of rho_s for a star decomposition C = sum d_k exp(-z_k t).
pub fn heom_propagate(
    model: &SystemModel,
    rho0: &CMat,
    modes: &ExponentialModes,
    trunc: &TruncationSpec,
    variant: HeomVariant,
    grid: &[f64],
    opts: &HeomOptions,
) -> Result<PropagationResult> {
    trunc.validate()?;
    let h = build(modes, variant, trunc.depth, opts)?;
    let (mut result, _) = propagate_hierarchy(model, rho0, &h, trunc.filter, grid, opts)?;
    if let Some(tol) = opts.depth_check {
        let deeper = build(modes, variant, trunc.depth + 1, opts)?;
        let (next, _) = propagate_hierarchy(model, rho0, &deeper, trunc.filter, grid, opts)?;
        let delta = result.max_deviation(&next)?;
        result.diagnostics.depth_delta = Some(delta);
        if delta > tol {
            result.flag(format!(
                "depth {} not converged: L vs L+1 deviation {delta:.3e} > {tol:.1e}",
                trunc.depth
            ));
        }
    }
    Ok(result)
}

/// Ikeda HEOM with an explicitly supplied real/imaginary split.
pub fn heom_propagate_split(
    model: &SystemModel,
    rho0: &CMat,
    split: &IkedaSplit,
    trunc: &TruncationSpec,
    grid: &[f64],
    opts: &HeomOptions,
) -> Result<PropagationResult> {
    trunc.validate()?;
    let h = Hierarchy::ikeda(split, trunc.depth, opts.max_ados)?;
    Ok(propagate_hierarchy(model, rho0, &h, trunc.filter, grid, opts)?.0)
}

/// Raises the depth from `trunc.depth` until consecutive depths agree to
/// `tol` (returning the deeper run) or `max_depth` is reached (flagged).
pub fn heom_converged(
    model: &SystemModel,
    rho0: &CMat,
    modes: &ExponentialModes,
    trunc: &TruncationSpec,
    variant: HeomVariant,
    grid: &[f64],
    opts: &HeomOptions,
    max_depth: usize,
    tol: f64,
) -> Result<PropagationResult> {
    trunc.validate()?;
    let mut depth = trunc.depth;
    let mut prev = propagate_hierarchy(
        model,
        rho0,
        &build(modes, variant, depth, opts)?,
        trunc.filter,
        grid,
        opts,
    )?
    .0;
    loop {
        depth += 1;
        let (mut next, _) = propagate_hierarchy(
            model,
            rho0,
            &build(modes, variant, depth, opts)?,
            trunc.filter,
            grid,
            opts,
        )?;
        let delta = prev.max_deviation(&next)?;
        next.diagnostics.depth_delta = Some(delta);
        if delta <= tol {
            return Ok(next);
        }
        if depth >= max_depth {
            next.flag(format!(
                "depth {depth} not converged: L vs L+1 deviation {delta:.3e} > {tol:.1e}"
            ));
            return Ok(next);
        }
        prev = next;
    }
}
