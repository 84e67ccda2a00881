use messkit_core::bath::{CorrelationFunction, NoisePower, QuadratureOptions, SpectralDensity};
use messkit_core::decomposition::*;
use messkit_core::linalg::c;
use messkit_core::quad::adaptive_real;
use messkit_core::{CMat, C64};
use proptest::prelude::*;

fn lorentzian_samples(g: f64, w0: f64, gamma: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 0..=2000 {
        let w = -10.0 + 20.0 * i as f64 / 2000.0;
        out.push((w, 2.0 * gamma * g * g / ((w - w0).powi(2) + gamma * gamma)));
    }
    for i in 1..=60 {
        let w = 10.0 * 10f64.powf(i as f64 / 10.0);
        for s in [-1.0, 1.0] {
            out.push((
                s * w,
                2.0 * gamma * g * g / ((s * w - w0).powi(2) + gamma * gamma),
            ));
        }
    }
    out
}

#[test]
fn aaa_recovers_single_lorentzian() {
    let (g, w0, gamma) = (0.2, 1.0, 0.1);
    let samples = lorentzian_samples(g, w0, gamma);
    let r = aaa_fit(
        &samples,
        AaaOptions {
            tol: 1e-12,
            m_max: 120,
        },
    )
    .unwrap();
    let scale = 2.0 * g * g / gamma;
    for &(w, s) in &samples {
        assert!((r.eval(w) - s).abs() <= 1e-10 * scale, "w={w}");
    }
    let poles = r.poles().unwrap();
    let finite: Vec<C64> = poles
        .iter()
        .copied()
        .filter(|p| r.residue(*p).norm() > 1e-10 * scale)
        .collect();
    assert_eq!(finite.len(), 2, "poles {poles:?}");
    let lower = finite.iter().find(|p| p.im < 0.0).unwrap();
    assert!((lower - c(w0, -gamma)).norm() < 1e-9, "{lower}");
    assert!(finite.iter().any(|p| (p - c(w0, gamma)).norm() < 1e-9));
}

#[test]
fn lorentzian_modes_match_closed_form() {
    let (g, w0, gamma) = (0.2, 1.0, 0.1);
    let samples = lorentzian_samples(g, w0, gamma);
    let r = aaa_fit(
        &samples,
        AaaOptions {
            tol: 1e-12,
            m_max: 120,
        },
    )
    .unwrap();
    let source = NoisePower::zero_temperature(SpectralDensity::lorentzian(g, w0, gamma)).unwrap();
    let reference = CorrelationFunction::closed_form(source).unwrap();
    let modes = extract_exponential_modes(&r, &reference, 50.0).unwrap();
    assert_eq!(modes.len(), 1);
    assert!((modes.d[0] - c(g * g, 0.0)).norm() < 1e-9, "{:?}", modes.d);
    assert!((modes.z[0] - c(gamma, w0)).norm() < 1e-9, "{:?}", modes.z);
    assert!(modes.residual_bound < 1e-9);
    // the closed form example: 0.04 exp(-(0.1 + 1i) t)
    for t in [0.0, 0.7, 3.0, 12.0] {
        let want = 0.04 * (-c(0.1, 1.0) * t).exp();
        assert!((reference.eval(t) - want).norm() < 1e-15);
    }
}

#[test]
fn aaa_support_interpolation_and_monotone_history() {
    let s = NoisePower::new(SpectralDensity::ohmic(0.1, 5.0), 1.0).unwrap();
    let samples = sample_noise_power(&s, &candidate_grid(&s, 40)).unwrap();
    let r = aaa_fit(&samples, AaaOptions::default()).unwrap();
    assert!(!r.flagged, "achieved {}", r.achieved);
    for (w, v) in r.support.iter().zip(&r.values) {
        assert_eq!(r.eval(*w), *v);
    }
    assert!(r.weights.iter().any(|w| *w != 0.0));
    let mut best = f64::INFINITY;
    for e in &r.error_history {
        best = best.min(*e);
    }
    assert_eq!(best, r.achieved);
}

#[test]
fn subohmic_zero_temperature_mode_count() {
    // s = 0.5, alpha = 0.05, T = 0
    let s = NoisePower::zero_temperature(SpectralDensity::subohmic(0.05, 0.5, 1.0)).unwrap();
    let fit = fit_noise_power(
        &s,
        FitOptions {
            t_max: Some(100.0),
            ..Default::default()
        },
    )
    .unwrap();
    let c0 = fit.reference.eval(0.0).re;
    eprintln!(
        "K = {}, AAA order {}, achieved {:.2e}, residual {:.3e} C(0)",
        fit.modes.len(),
        fit.rational.order(),
        fit.rational.achieved,
        fit.modes.residual_bound / c0
    );
    assert!(fit.modes.len() <= 40);
    assert!(fit.modes.residual_bound <= 1e-4 * c0);
    assert!(fit.modes.z.iter().all(|z| z.re > 0.0));
}

fn single_mode() -> ExponentialModes {
    ExponentialModes::new(vec![c(0.04, 0.0)], vec![c(0.1, 1.0)]).unwrap()
}

fn three_modes() -> ExponentialModes {
    ExponentialModes::new(
        vec![c(0.05, 0.01), c(0.02, -0.03), c(0.1, 0.0)],
        vec![c(0.3, 1.2), c(0.8, -0.4), c(0.05, 0.0)],
    )
    .unwrap()
}

#[test]
fn star_mapping_single_mode() {
    let set = EffectiveModeSet::star(&single_mode());
    assert_eq!(set.topology, Topology::Star);
    assert_eq!(set.e[(0, 0)], c(1.0, -0.1));
    assert!((set.kappa[0].conj() - c(-(0.08f64).sqrt(), 0.0)).norm() < 1e-16);
    assert!((set.eta[0] - c(-(0.02f64).sqrt(), 0.0)).norm() < 1e-16);
    // real d: kappa = 2 eta, both real negative
    assert!((set.kappa[0] - set.eta[0] * 2.0).norm() < 1e-15);
    assert!(set.kappa[0].re < 0.0 && set.eta[0].re < 0.0);
    // C(0+) = kappa^dagger eta
    assert!((set.correlation(0.0) - set.kappa.dotc(&set.eta)).norm() < 1e-16);
}

#[test]
fn star_reconstruction_is_the_exponential_sum() {
    let modes = three_modes();
    let set = EffectiveModeSet::star(&modes);
    for i in 0..200 {
        let t = i as f64 * 0.1;
        let want: C64 = modes
            .d
            .iter()
            .zip(&modes.z)
            .map(|(d, z)| d * (-z * t).exp())
            .sum();
        assert!((set.correlation(t) - want).norm() <= 1e-14, "t={t}");
        if t > 0.0 {
            assert!((set.correlation(-t) - want.conj()).norm() <= 1e-14);
        }
    }
}

#[test]
fn star_spectrum_of_lorentzian() {
    let (g, w0, gamma) = (0.2, 1.0, 0.1);
    let modes = ExponentialModes::new(vec![c(g * g, 0.0)], vec![c(gamma, w0)]).unwrap();
    let set = EffectiveModeSet::star(&modes);
    for i in 0..400 {
        let w = -5.0 + 0.025 * i as f64;
        let want = 2.0 * gamma * g * g / ((w - w0).powi(2) + gamma * gamma);
        assert!(
            (set.spectrum(w).unwrap() - want).abs() < 1e-14 * want.max(1.0),
            "w={w}"
        );
    }
}

#[test]
fn symmetric_gauge_has_no_kappa_minus() {
    let set = EffectiveModeSet::star_symmetric(&single_mode()).unwrap();
    assert!(set.kappa_minus().norm() == 0.0);
    let star = EffectiveModeSet::star(&single_mode());
    for t in [0.0, 0.5, 2.0, 9.0] {
        assert!((set.correlation(t) - star.correlation(t)).norm() < 1e-15);
    }
    assert!(EffectiveModeSet::star_symmetric(&three_modes()).is_err());
}

#[test]
fn real_axis_pole_is_reported() {
    let modes = ExponentialModes::new(vec![c(0.1, 0.0)], vec![c(0.0, 1.0)]).unwrap();
    let set = EffectiveModeSet::star(&modes);
    assert!(matches!(
        set.spectrum(1.0),
        Err(messkit_core::Error::PoleProximity { .. })
    ));
}

fn spectra_agree(a: &EffectiveModeSet, b: &EffectiveModeSet, tol: f64) {
    for i in 0..500 {
        let w = -6.0 + 0.024 * i as f64 + 1e-3;
        let (sa, sb) = (a.spectrum(w).unwrap(), b.spectrum(w).unwrap());
        assert!((sa - sb).abs() <= tol, "w={w}: {sa} vs {sb}");
    }
}

#[test]
fn identity_and_permutation_transforms() {
    let set = EffectiveModeSet::star(&three_modes());
    let id = transform_modeset(&set, &CMat::identity(3, 3), CONDITION_BOUND).unwrap();
    assert_eq!(id.e, set.e);
    assert_eq!(id.kappa, set.kappa);
    assert_eq!(id.eta, set.eta);
    let mut p = CMat::zeros(3, 3);
    p[(0, 2)] = c(1.0, 0.0);
    p[(1, 0)] = c(1.0, 0.0);
    p[(2, 1)] = c(1.0, 0.0);
    let perm = transform_modeset(&set, &p, CONDITION_BOUND).unwrap();
    assert_eq!(perm.topology, Topology::Star);
    assert_eq!(perm.e[(0, 0)], set.e[(2, 2)]);
    spectra_agree(&set, &perm, 1e-14);
}

#[test]
fn ill_conditioned_transform_rejected() {
    let set = EffectiveModeSet::star(&three_modes());
    let mut m = CMat::identity(3, 3);
    m[(2, 2)] = c(1e-12, 0.0);
    assert!(matches!(
        transform_modeset(&set, &m, CONDITION_BOUND),
        Err(messkit_core::Error::Conditioning(_))
    ));
}

#[test]
fn chain_form_of_star_set() {
    let set = EffectiveModeSet::star(&three_modes());
    let chain = set.to_chain().unwrap();
    assert_eq!(chain.topology, Topology::Chain);
    assert_eq!(chain.len(), 3);
    for i in 0..3 {
        for j in 0..3 {
            if (i as i64 - j as i64).abs() > 1 {
                assert_eq!(chain.e[(i, j)], C64::new(0.0, 0.0));
            }
        }
    }
    assert!(chain.kappa.iter().skip(1).all(|v| *v == C64::new(0.0, 0.0)));
    spectra_agree(&set, &chain, 1e-11);
    for t in [0.0, 1.0, 5.0, 20.0] {
        assert!((set.correlation(t) - chain.correlation(t)).norm() < 1e-11);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn similarity_invariance(entries in proptest::collection::vec(-1.0f64..1.0, 18)) {
        let set = EffectiveModeSet::star(&three_modes());
        // diagonally dominant, hence well conditioned
        let m = CMat::from_fn(3, 3, |i, j| {
            let k = 2 * (3 * i + j);
            c(entries[k], entries[k + 1]) * 0.3 + if i == j { c(1.5, 0.0) } else { c(0.0, 0.0) }
        });
        let t = transform_modeset(&set, &m, CONDITION_BOUND).unwrap();
        for i in 0..200 {
            let w = -4.0 + 0.04 * i as f64 + 1e-3;
            prop_assert!((t.spectrum(w).unwrap() - set.spectrum(w).unwrap()).abs() <= 1e-10);
        }
    }

    #[test]
    fn star_round_trip_kappa_eta(re in 0.001f64..1.0, im in -1.0f64..1.0, g in 0.01f64..2.0, w in -3.0f64..3.0) {
        let modes = ExponentialModes::new(vec![c(re, im)], vec![c(g, w)]).unwrap();
        let set = EffectiveModeSet::star(&modes);
        prop_assert!((set.kappa[0].conj() * set.eta[0] - modes.d[0]).norm() <= 1e-14);
        prop_assert!(set.e[(0, 0)].im <= 0.0);
    }
}

#[test]
fn round_trip_on_sample_grid() {
    for s in [
        NoisePower::new(SpectralDensity::ohmic(0.1, 5.0), 1.0).unwrap(),
        NoisePower::zero_temperature(SpectralDensity::subohmic(0.05, 0.5, 1.0)).unwrap(),
        NoisePower::new(
            SpectralDensity::Brownian {
                c0: 1.0,
                omega0: 1.0,
                gamma0: 0.1,
            },
            2.0,
        )
        .unwrap(),
    ] {
        let samples = sample_noise_power(&s, &candidate_grid(&s, 40)).unwrap();
        let opts = AaaOptions::default();
        let r = aaa_fit(&samples, opts).unwrap();
        let modes = modes_from_rational(&r).unwrap();
        assert!(modes.z.iter().all(|z| z.re > 0.0));
        let set = EffectiveModeSet::star(&modes);
        let scale = samples.iter().fold(0.0f64, |a, s| a.max(s.1.abs()));
        let worst = samples
            .iter()
            .map(|&(w, v)| (set.spectrum(w).unwrap() - v).abs())
            .fold(0.0, f64::max);
        assert!(
            worst <= 2.0 * opts.tol * scale,
            "{:?}: {worst:.3e} vs {scale:.3e}",
            s.density
        );
    }
}

#[test]
fn ohmic_fit_certified_against_quadrature() {
    let s = NoisePower::new(SpectralDensity::ohmic(0.1, 5.0), 1.0).unwrap();
    let fit = fit_noise_power(&s, FitOptions::default()).unwrap();
    let c0 = fit.reference.eval(0.0).re;
    assert!(fit.modes.residual_bound.is_finite());
    assert!(
        fit.modes.residual_bound < 1e-4 * c0,
        "{}",
        fit.modes.residual_bound / c0
    );
    // independent oracle: direct adaptive quadrature of C at a few times
    let dens = SpectralDensity::ohmic(0.1, 5.0);
    for t in [0.0, 0.3, 1.1] {
        let f = |w: f64| s.eval(w).unwrap() * (w * t).cos() / (2.0 * std::f64::consts::PI);
        let g = |w: f64| -s.eval(w).unwrap() * (w * t).sin() / (2.0 * std::f64::consts::PI);
        let re = adaptive_real(f, -60.0, 400.0, 1e-13, 1e-12).0;
        let im = adaptive_real(g, -60.0, 400.0, 1e-13, 1e-12).0;
        assert!((fit.modes.eval(t) - c(re, im)).norm() < 1e-4 * c0);
    }
    let _ = dens;
}

#[test]
fn upper_half_plane_mirror_poles_are_discarded() {
    let samples = lorentzian_samples(0.3, -0.5, 0.2);
    let r = aaa_fit(
        &samples,
        AaaOptions {
            tol: 1e-12,
            m_max: 60,
        },
    )
    .unwrap();
    let poles = r.poles().unwrap();
    assert!(poles.iter().any(|p| p.im > 0.0));
    let modes = modes_from_rational(&r).unwrap();
    assert_eq!(modes.len(), 1);
    assert!(modes.z.iter().all(|z| z.re > 0.0));
}

#[test]
fn empty_pole_set_is_an_error() {
    let samples: Vec<(f64, f64)> = (0..50).map(|i| (i as f64 * 0.1, 2.0)).collect();
    let r = aaa_fit(&samples, AaaOptions::default()).unwrap();
    assert!(matches!(
        modes_from_rational(&r),
        Err(messkit_core::Error::Decomposition(_))
    ));
}

#[test]
fn stieltjes_uniform_measure_gives_shifted_legendre() {
    let (x, w) =
        messkit_core::quad::composite(&(0..=50).map(|i| i as f64 / 50.0).collect::<Vec<_>>(), 20);
    let rec = stieltjes(&x, &w, 30, 1e-8).unwrap();
    assert!(!rec.flagged);
    assert_eq!(rec.a.len(), 30);
    for n in 0..30 {
        assert!((rec.a[n] - 0.5).abs() < 1e-12, "a_{n} = {}", rec.a[n]);
    }
    for n in 1..30 {
        let nf = n as f64;
        let want = nf / (2.0 * (4.0 * nf * nf - 1.0).sqrt());
        assert!((rec.b[n] - want).abs() < 1e-12, "b_{n}");
    }
    assert!(rec.krylov_error < 1e-12);
}

#[test]
fn chain_map_first_moment_and_g0() {
    let s = NoisePower::new(SpectralDensity::ohmic(0.1, 2.0), 2.0).unwrap();
    let chain = chain_map(&s, 12, 1).unwrap();
    assert!(!chain.flagged);
    assert_eq!(chain.len(), 12);
    let c0 = adaptive_real(|w| s.eval(w).unwrap(), -80.0, 200.0, 1e-14, 1e-13).0
        / (2.0 * std::f64::consts::PI);
    assert!((chain.g0() * chain.g0() - c0).abs() < 1e-9 * c0);
    let first = adaptive_real(|w| w * s.eval(w).unwrap(), -80.0, 200.0, 1e-14, 1e-13).0
        / (2.0 * std::f64::consts::PI)
        / c0;
    assert!((chain.site[0] - first).abs() < 1e-8 * first.abs().max(1.0));
    assert!(chain.hop.iter().skip(1).all(|g| *g > 0.0));
    assert!(chain.krylov_error < 1e-10);
    assert_eq!(chain.normalization, 1.0);
    // chain-unitary set reproduces C(t) up to the Gauss quadrature error
    let set = chain.to_modeset().unwrap();
    let reference = CorrelationFunction::quadrature(
        s,
        QuadratureOptions {
            t_max: 5.0,
            ..Default::default()
        },
    )
    .unwrap();
    assert!((set.correlation(0.0) - reference.eval(0.0)).norm() < 1e-9 * c0);
    for t in [0.25, 0.5] {
        assert!((set.correlation(t) - reference.eval(t)).norm() < 1e-5 * c0);
    }
}

#[test]
fn chain_map_l2_uses_squared_frequencies() {
    let s = NoisePower::zero_temperature(SpectralDensity::ohmic(0.1, 1.0)).unwrap();
    let chain = chain_map(&s, 6, 2).unwrap();
    let c0 = chain.g0().powi(2);
    let second = adaptive_real(|w| w * w * s.eval(w).unwrap(), 0.0, 200.0, 1e-14, 1e-13).0
        / (2.0 * std::f64::consts::PI);
    assert!((chain.site[0] - second / (c0 * chain.normalization)).abs() < 1e-8);
    assert!((chain.normalization - 1.0).abs() < 1e-12);
    assert!(chain.to_modeset().is_err());
}

fn one_site(l: u32, w0: f64, g0: f64) -> ChainCoefficients {
    ChainCoefficients {
        l,
        site: vec![w0.powi(l as i32)],
        hop: vec![g0],
        normalization: 1.0,
        krylov_error: 0.0,
        flagged: false,
        requested: 1,
    }
}

#[test]
fn constant_terminal_gives_lorentzian() {
    let (w0, g0, gamma) = (1.3, 0.4, 0.25);
    let cl = chain_closure_spectrum(one_site(1, w0, g0), TerminalBath::Constant { gamma }).unwrap();
    for i in 0..300 {
        let w = -3.0 + 0.02 * i as f64;
        let want = 2.0 * g0 * g0 * gamma / ((w - w0).powi(2) + gamma * gamma);
        assert!((cl.eval(w).unwrap() - want).abs() < 1e-14 * want.max(1.0));
    }
}

#[test]
fn reaction_coordinate_terminal_gives_brownian_shape() {
    let (w0, g0, gamma) = (1.0, 0.5, 0.5 * 1.0);
    let cl = chain_closure_spectrum(
        one_site(2, w0, g0),
        TerminalBath::Ohmic {
            gamma,
            cutoff: 100.0 * w0,
        },
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for i in 1..=5000 {
        let w = 1e-3 + 5.0 * i as f64 / 5000.0;
        let want =
            4.0 * g0 * g0 * gamma * w / ((w * w - w0 * w0).powi(2) + 4.0 * gamma * gamma * w * w);
        worst = worst.max((cl.eval(w).unwrap() - want).abs());
        peak = peak.max(want);
    }
    assert!(worst <= 0.01 * peak, "{}", worst / peak);
}

#[test]
fn closure_sum_rule_with_weak_terminal() {
    let s = NoisePower::new(SpectralDensity::ohmic(0.2, 1.0), 1.0).unwrap();
    let chain = chain_map(&s, 4, 1).unwrap();
    let c0 = chain.g0().powi(2);
    let set = chain.to_modeset().unwrap();
    let mut eig: Vec<f64> = messkit_core::linalg::hermitian_eigen(&set.e).0;
    eig.sort_by(f64::total_cmp);
    let cl = chain_closure_spectrum(chain, TerminalBath::Constant { gamma: 1e-3 }).unwrap();
    // panels hugging each narrow peak, geometric towards the tails
    let mut breaks: Vec<f64> = vec![];
    for e in &eig {
        for d in [-1.0, -0.1, -0.01, 0.0, 0.01, 0.1, 1.0] {
            breaks.push(e + d);
        }
    }
    for k in 0..=6 {
        breaks.push(10f64.powi(k) * 5.0);
        breaks.push(-(10f64.powi(k) * 5.0));
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut total = 0.0;
    for p in breaks.windows(2) {
        total += adaptive_real(|w| cl.eval(w).unwrap(), p[0], p[1], 1e-14, 1e-12).0;
    }
    let integral = total / (2.0 * std::f64::consts::PI);
    assert!((integral - c0).abs() <= 1e-6 * c0, "{integral} vs {c0}");
    // delta-like peaks sit at the chain eigenfrequencies
    let tallest = eig.iter().map(|e| cl.eval(*e).unwrap()).fold(0.0, f64::max);
    assert!(tallest > 100.0 * c0);
    let levels = cl.levels(0.3).unwrap();
    assert_eq!(levels.len(), 4);
    assert_eq!(levels[0], cl.eval(0.3).unwrap());
}

#[test]
fn closure_pole_proximity() {
    let cl = chain_closure_spectrum(one_site(1, 1.0, 0.5), TerminalBath::Constant { gamma: 0.0 })
        .unwrap();
    assert!(matches!(
        cl.eval(1.0),
        Err(messkit_core::Error::PoleProximity { .. })
    ));
}

#[test]
fn quasi_thermal_recovers_own_model() {
    let truth = QuasiThermalModes {
        g: vec![0.1],
        n: vec![0.5],
        omega: vec![1.0],
        gamma: vec![0.2],
        residual: 0.0,
        tol: 0.0,
        flagged: false,
    };
    let times: Vec<f64> = (0..400).map(|i| i as f64 * 0.05).collect();
    let values: Vec<C64> = times.iter().map(|&t| truth.eval(t)).collect();
    let fit = quasi_thermal_fit_samples(&times, &values, 1, 1e-10, QuasiThermalOptions::default())
        .unwrap();
    assert!(!fit.flagged);
    assert!((fit.g[0] - 0.1).abs() < 1e-8, "{fit:?}");
    assert!((fit.n[0] - 0.5).abs() < 1e-8);
    assert!((fit.omega[0] - 1.0).abs() < 1e-8);
    assert!((fit.gamma[0] - 0.2).abs() < 1e-8);
}

#[test]
fn quasi_thermal_undamped_mode_has_bose_occupation() {
    let (beta, w, g) = (1.5f64, 0.8f64, 0.3f64);
    let n = 1.0 / ((beta * w).exp() - 1.0);
    let times: Vec<f64> = (0..400).map(|i| i as f64 * 0.05).collect();
    let values: Vec<C64> = times
        .iter()
        .map(|&t| {
            g * g * ((n + 1.0) * C64::new(0.0, -w * t).exp() + n * C64::new(0.0, w * t).exp())
        })
        .collect();
    let opts = QuasiThermalOptions {
        undamped: true,
        ..Default::default()
    };
    let fit = quasi_thermal_fit_samples(&times, &values, 1, 1e-10, opts).unwrap();
    assert!((fit.n[0] - n).abs() < 1e-8, "{} vs {n}", fit.n[0]);
    assert_eq!(fit.gamma[0], 0.0);
}

#[test]
fn quasi_thermal_ohmic_three_modes() {
    // A global multi-start search (300 starts) for this model class bottoms
    // out near 0.088 C(0) on [0, 20]; the 5e-3 C(0) target is not reachable
    // with K = 3, so the fit must come back flagged and near that optimum.
    let s = NoisePower::new(SpectralDensity::ohmic(0.1, 1.0), 1.0).unwrap();
    let c = CorrelationFunction::quadrature(
        s,
        QuadratureOptions {
            t_max: 20.0,
            ..Default::default()
        },
    )
    .unwrap();
    let c0 = c.eval(0.0).re;
    let fit = quasi_thermal_fit(&c, 3, 5e-3 * c0, 20.0, QuasiThermalOptions::default()).unwrap();
    eprintln!("quasi-thermal K=3 residual {:.3e} C(0)", fit.residual / c0);
    assert!(fit.flagged);
    assert!(
        fit.residual <= 0.11 * c0,
        "residual {:.3e} C(0)",
        fit.residual / c0
    );
    assert!(
        fit.n.iter().all(|n| *n >= 0.0)
            && fit.g.iter().all(|g| *g >= 0.0)
            && fit.gamma.iter().all(|g| *g >= 0.0)
    );
    let ex = fit.to_exponential();
    for t in [0.0, 1.0, 4.0] {
        assert!((ex.eval(t) - fit.eval(t)).norm() < 1e-14);
    }
}
