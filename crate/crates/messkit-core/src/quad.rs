//! Gauss–Legendre panels and adaptive Gauss–Kronrod integration.

use crate::C64;
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Nodes and weights of a composite rule: `order`-point Gauss–Legendre on
/// each interval of `breaks`.
pub fn composite(breaks: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let mut nodes = Vec::with_capacity(breaks.len() * order);
    let mut weights = Vec::with_capacity(breaks.len() * order);
    for win in breaks.windows(2) {
        let (a, b) = (win[0], win[1]);
        let h = 0.5 * (b - a);
        let m = 0.5 * (a + b);
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(m + h * x);
            weights.push(h * w);
        }
    }
    (nodes, weights)
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: FnMut(f64) -> C64>(f: &mut F, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    (kron * h, ((kron - gauss) * h).norm())
}

/// Adaptive Gauss–Kronrod 7/15 integration of a complex integrand over [a, b]:
/// the panel with the largest error estimate is bisected until the summed
/// error meets max(abs_tol, rel_tol |I|). Returns the integral and the error
/// estimate.
pub fn adaptive<F: FnMut(f64) -> C64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> (C64, f64) {
    struct Panel {
        lo: f64,
        hi: f64,
        val: C64,
        err: f64,
    }
    impl PartialEq for Panel {
        fn eq(&self, o: &Self) -> bool {
            self.err == o.err
        }
    }
    impl Eq for Panel {}
    impl PartialOrd for Panel {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Panel {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            self.err.total_cmp(&o.err)
        }
    }
    let mut heap = std::collections::BinaryHeap::new();
    // a few initial panels guard against features the first rule misses
    let n0 = 8;
    for i in 0..n0 {
        let lo = a + (b - a) * i as f64 / n0 as f64;
        let hi = a + (b - a) * (i + 1) as f64 / n0 as f64;
        let (val, err) = gk15(&mut f, lo, hi);
        heap.push(Panel { lo, hi, val, err });
    }
    let mut panels = n0;
    let mut total: C64 = heap.iter().map(|p| p.val).sum();
    let mut err: f64 = heap.iter().map(|p| p.err).sum();
    loop {
        if err <= abs_tol.max(rel_tol * total.norm()) || panels > 50_000 {
            break;
        }
        let worst = heap.pop().unwrap();
        total -= worst.val;
        err -= worst.err;
        if worst.hi - worst.lo < 1e-15 * (b - a).abs() {
            total += worst.val;
            heap.push(Panel { err: 0.0, ..worst });
            continue;
        }
        let mid = 0.5 * (worst.lo + worst.hi);
        for (lo, hi) in [(worst.lo, mid), (mid, worst.hi)] {
            let (val, e) = gk15(&mut f, lo, hi);
            total += val;
            err += e;
            heap.push(Panel {
                lo,
                hi,
                val,
                err: e,
            });
        }
        panels += 1;
    }
    let total: C64 = heap.iter().map(|p| p.val).sum();
    let err: f64 = heap.iter().map(|p| p.err).sum();
    (total, err)
}

/// Real-valued convenience wrapper around [`adaptive`].
pub fn adaptive_real<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> (f64, f64) {
    let (v, e) = adaptive(|x| C64::new(f(x), 0.0), a, b, abs_tol, rel_tol);
    (v.re, e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_oscillation() {
        let (v, _) = adaptive(|x| C64::new(0.0, -40.0 * x).exp(), 0.0, 1.0, 1e-13, 1e-13);
        let exact = (C64::new(0.0, -40.0).exp() - 1.0) / C64::new(0.0, -40.0);
        assert!((v - exact).norm() < 1e-12);
    }

    #[test]
    fn adaptive_real_sqrt_singularity() {
        let (v, _) = adaptive_real(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-10, 1e-10);
        assert!((v - 2.0).abs() < 1e-7);
    }
}
