use messkit_core::bath::*;
use messkit_core::quad::adaptive_real;
use messkit_core::C64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn builtin_kinds() -> Vec<SpectralDensity> {
    vec![
        SpectralDensity::ohmic(0.1, 5.0),
        SpectralDensity::subohmic(0.05, 0.5, 1.0),
        SpectralDensity::subohmic(0.2, 2.0, 3.0),
        SpectralDensity::Brownian {
            c0: 1.0,
            omega0: 1.0,
            gamma0: 0.3,
        },
        SpectralDensity::LorentzianSum {
            terms: vec![
                Lorentzian {
                    g: 0.2,
                    omega: 1.0,
                    gamma: 0.1,
                },
                Lorentzian {
                    g: 0.1,
                    omega: 2.5,
                    gamma: 0.4,
                },
            ],
        },
        SpectralDensity::Tabulated(
            Tabulated::new(vec![0.0, 0.5, 1.0, 2.0, 8.0], vec![0.0, 0.4, 0.6, 0.3, 0.0]).unwrap(),
        ),
    ]
}

fn log_linear_grid(n: usize, hi: f64) -> Vec<f64> {
    let half = n / 2;
    let mut g: Vec<f64> = (0..half)
        .map(|i| 1e-6 * (hi / 1e-6f64).powf(i as f64 / (half - 1) as f64))
        .collect();
    g.extend((0..n - half).map(|i| hi * (i as f64 + 0.5) / (n - half) as f64));
    g
}

#[test]
fn detailed_balance_on_every_builtin() {
    for j in builtin_kinds() {
        for beta in [0.3, 1.0, 5.0, f64::INFINITY] {
            let s = NoisePower::new(j.clone(), beta).unwrap();
            for w in log_linear_grid(200, 7.9) {
                let plus = s.eval(w).unwrap();
                let minus = s.eval(-w).unwrap();
                let expected = (-beta * w).exp() * plus;
                assert!(
                    (minus - expected).abs() <= 1e-12 * plus.abs().max(1.0),
                    "{j:?} beta={beta} w={w}: {minus} vs {expected}"
                );
            }
        }
    }
}

#[test]
fn ohmic_c0_matches_independent_integrator() {
    let s = NoisePower::new(SpectralDensity::ohmic(0.1, 5.0), 1.0).unwrap();
    let c = CorrelationFunction::quadrature(s.clone(), QuadratureOptions::default()).unwrap();
    let f = |w: f64| s.eval(w).unwrap() / (2.0 * PI);
    let mut total = 0.0;
    for (a, b) in [
        (-80.0, -10.0),
        (-10.0, 0.0),
        (0.0, 10.0),
        (10.0, 60.0),
        (60.0, 400.0),
    ] {
        total += adaptive_real(f, a, b, 1e-14, 1e-13).0;
    }
    let got = c.eval(0.0);
    assert!(got.im.abs() < 1e-12);
    assert!(
        (got.re - total).abs() <= 1e-8 * total,
        "{} vs {}",
        got.re,
        total
    );
}

#[test]
fn hermitian_symmetry_is_exact() {
    let s = NoisePower::new(SpectralDensity::ohmic(0.1, 1.0), 2.0).unwrap();
    let c = CorrelationFunction::quadrature(
        s,
        QuadratureOptions {
            t_max: 20.0,
            ..Default::default()
        },
    )
    .unwrap();
    for t in [0.1, 0.7, 3.0, 19.0] {
        assert_eq!(c.eval(-t), c.eval(t).conj());
    }
}

#[test]
fn lorentzian_closed_form() {
    let s = NoisePower::zero_temperature(SpectralDensity::lorentzian(0.2, 1.0, 0.1)).unwrap();
    let c = CorrelationFunction::closed_form(s).unwrap();
    for t in [0.0, 0.5, 2.0, 10.0] {
        let want = 0.04 * C64::new(-0.1 * t, -t).exp();
        assert!((c.eval(t) - want).norm() < 1e-16);
    }
}

#[test]
fn subohmic_zero_temperature_matches_analytic_correlator() {
    // C(t) = (alpha/4) wc^{1-s} Gamma(1+s) (1/wc + i t)^{-(1+s)} for the
    // exponential-cutoff power law at T = 0.
    let (alpha, s_exp, wc) = (0.05, 0.5, 1.0);
    let s = NoisePower::zero_temperature(SpectralDensity::subohmic(alpha, s_exp, wc)).unwrap();
    let c = CorrelationFunction::quadrature(
        s,
        QuadratureOptions {
            t_max: 200.0,
            ..Default::default()
        },
    )
    .unwrap();
    let gamma_1p5 = 0.886_226_925_452_758;
    for t in [0.0, 0.3, 1.0, 7.0, 50.0, 150.0] {
        let want = alpha / 4.0
            * wc.powf(1.0 - s_exp)
            * gamma_1p5
            * C64::new(1.0 / wc, t).powf(-(1.0 + s_exp));
        let got = c.eval(t);
        assert!(
            (got - want).norm() < 1e-9 * want.norm().max(1e-3),
            "t={t}: {got} vs {want}"
        );
    }
}

#[test]
fn brownian_closed_form_matches_quadrature_at_high_temperature() {
    let (c0, w0, g0, beta) = (1.0, 1.0, 0.3, 0.01);
    let s = NoisePower::new(
        SpectralDensity::Brownian {
            c0,
            omega0: w0,
            gamma0: g0,
        },
        beta,
    )
    .unwrap();
    let closed = CorrelationFunction::closed_form(s.clone()).unwrap();
    let quad = CorrelationFunction::quadrature(
        s,
        QuadratureOptions {
            t_max: 10.0,
            tol: 1e-7,
            ..Default::default()
        },
    )
    .unwrap();
    let scale = closed.eval(0.0).norm();
    for t in [0.0, 0.5, 1.3, 4.0, 9.0] {
        let d = (closed.eval(t) - quad.eval(t)).norm();
        // leading order in beta * zeta; the correction is O(beta) relative
        assert!(
            d < 2e-3 * scale,
            "t={t}: {} vs {}",
            closed.eval(t),
            quad.eval(t)
        );
    }
}

#[test]
fn quadrature_converges_under_density_doubling() {
    for (j, beta) in [
        (SpectralDensity::ohmic(0.1, 1.0), 1.0),
        (SpectralDensity::ohmic(0.1, 1.0), f64::INFINITY),
        (SpectralDensity::subohmic(0.05, 0.5, 1.0), f64::INFINITY),
    ] {
        let s = NoisePower::new(j, beta).unwrap();
        let opts = QuadratureOptions {
            t_max: 50.0,
            tol: 1e-10,
            ..Default::default()
        };
        let a = CorrelationFunction::quadrature(s.clone(), opts).unwrap();
        let b = CorrelationFunction::quadrature(
            s,
            QuadratureOptions {
                density: 2.0,
                ..opts
            },
        )
        .unwrap();
        let c0 = a.eval(0.0).re;
        for i in 0..=100 {
            let t = 0.5 * i as f64;
            assert!((a.eval(t) - b.eval(t)).norm() < 1e-10 * c0);
        }
    }
}

#[test]
fn positivity_and_cauchy_schwarz() {
    for j in builtin_kinds() {
        for beta in [0.5, 2.0, f64::INFINITY] {
            let s = NoisePower::new(j.clone(), beta).unwrap();
            let c = CorrelationFunction::quadrature(
                s,
                QuadratureOptions {
                    t_max: 30.0,
                    tol: 1e-6,
                    ..Default::default()
                },
            )
            .unwrap();
            let c0 = c.eval(0.0);
            assert!(c0.re > 0.0 && c0.im.abs() < 1e-12 * c0.re);
            for i in 1..=120 {
                let t = 0.25 * i as f64;
                assert!(
                    c.eval(t).norm() <= c0.re * (1.0 + 1e-9),
                    "{j:?} beta={beta} t={t}"
                );
            }
        }
    }
}

#[test]
fn tabulated_reader_skips_comments() {
    let t = read_tabulated("# omega J\n0 0\n1, 0.5\n2 0.25\n").unwrap();
    assert_eq!(t.omega, vec![0.0, 1.0, 2.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn detailed_balance_random_parameters(alpha in 0.0f64..2.0, s in 0.2f64..3.0, wc in 0.1f64..10.0,
                                          beta in 0.05f64..20.0, w in 1e-8f64..50.0) {
        let p = NoisePower::new(SpectralDensity::subohmic(alpha, s, wc), beta).unwrap();
        let plus = p.eval(w).unwrap();
        let minus = p.eval(-w).unwrap();
        prop_assert!((minus - (-beta * w).exp() * plus).abs() <= 1e-12 * plus.abs().max(1.0));
    }

    #[test]
    fn spectral_density_is_odd(c0 in 0.1f64..3.0, w0 in 0.1f64..5.0, g0 in 0.01f64..2.0, w in -40.0f64..40.0) {
        let j = SpectralDensity::Brownian { c0, omega0: w0, gamma0: g0 };
        prop_assert_eq!(j.eval(-w).unwrap(), -j.eval(w).unwrap());
    }
}
