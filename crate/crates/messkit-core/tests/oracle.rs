use messkit_core::bath::{
    CorrelationFunction, FnCorrelator, NoisePower, QuadratureOptions, SpectralDensity,
};
use messkit_core::decomposition::{EffectiveModeSet, ExponentialModes};
use messkit_core::deterministic::*;
use messkit_core::linalg::{c, max_abs, real_matrix, sigma_x, sigma_z};
use messkit_core::oracle::*;
use messkit_core::state_space::{GeneratorForm, SystemModel, TruncationSpec};
use messkit_core::stochastic::{sln_propagate_ensemble, NoiseSource, SlnOptions};
use messkit_core::{CMat, Error, C64};

fn plus() -> CMat {
    real_matrix(2, 2, &[0.5, 0.5, 0.5, 0.5])
}

fn up() -> CMat {
    real_matrix(2, 2, &[1.0, 0.0, 0.0, 0.0])
}

fn dephasing_model() -> SystemModel {
    SystemModel::new(sigma_z() * c(0.5, 0.0), sigma_z()).unwrap()
}

/// C(t) of undamped modes at inverse temperature beta.
fn discrete_correlation(modes: Vec<DiscreteMode>, beta: f64) -> impl Fn(f64) -> C64 + Sync {
    move |t| {
        modes
            .iter()
            .map(|m| {
                let n = if beta.is_infinite() {
                    0.0
                } else {
                    1.0 / ((beta * m.omega).exp() - 1.0)
                };
                (C64::new(0.0, -m.omega * t).exp() * (n + 1.0)
                    + C64::new(0.0, m.omega * t).exp() * n)
                    * (m.g * m.g)
            })
            .sum()
    }
}

#[test]
fn prefactor_calibration_is_frozen() {
    let mode = DiscreteMode { g: 0.3, omega: 1.0 };
    let grid = uniform_grid(3.0, 60);
    let oracle = dephasing_oracle(
        &dephasing_model(),
        &plus(),
        &FnCorrelator(discrete_correlation(vec![mode], f64::INFINITY)),
        &grid,
    )
    .unwrap();
    let truth = discretized_bath_oracle(
        &dephasing_model(),
        &plus(),
        &[mode],
        &grid,
        &DiscretizedOptions::new(vec![40], f64::INFINITY),
    )
    .unwrap();
    assert_eq!(DEPHASING_PREFACTOR, 1.0);
    assert!(oracle.max_deviation(&truth).unwrap() <= 1e-10);
}

#[test]
fn oracles_agree_on_commuting_fixtures() {
    let grid_for = |modes: &[DiscreteMode]| uniform_grid(0.3 * recurrence_time(modes), 40);
    let cases = [
        (
            vec![
                DiscreteMode { g: 0.2, omega: 1.0 },
                DiscreteMode {
                    g: 0.15,
                    omega: 1.7,
                },
            ],
            f64::INFINITY,
            vec![30, 30],
        ),
        (vec![DiscreteMode { g: 0.2, omega: 1.0 }], 1.5, vec![45]),
        (
            vec![
                DiscreteMode { g: 0.1, omega: 0.8 },
                DiscreteMode { g: 0.1, omega: 2.0 },
            ],
            2.0,
            vec![30, 20],
        ),
    ];
    for (modes, beta, cutoffs) in cases {
        let grid = grid_for(&modes);
        for rho0 in [plus(), real_matrix(2, 2, &[0.7, 0.2, 0.2, 0.3])] {
            let a = dephasing_oracle(
                &dephasing_model(),
                &rho0,
                &FnCorrelator(discrete_correlation(modes.clone(), beta)),
                &grid,
            )
            .unwrap();
            let b = discretized_bath_oracle(
                &dephasing_model(),
                &rho0,
                &modes,
                &grid,
                &DiscretizedOptions::new(cutoffs.clone(), beta),
            )
            .unwrap();
            let dev = a.max_deviation(&b).unwrap();
            assert!(dev <= 1e-8, "beta {beta}: {dev:e}");
        }
    }
}

#[test]
fn zero_correlation_keeps_coherence() {
    let grid = uniform_grid(10.0, 50);
    let r = dephasing_oracle(
        &dephasing_model(),
        &plus(),
        &FnCorrelator(|_| C64::new(0.0, 0.0)),
        &grid,
    )
    .unwrap();
    for rho in &r.rho {
        assert!((rho[(0, 1)].norm() - 0.5).abs() <= 1e-14);
        assert!((rho[(0, 0)].re - 0.5).abs() <= 1e-14);
    }
}

#[test]
fn ohmic_coherence_decays_monotonically() {
    let power = NoisePower::new(SpectralDensity::ohmic(0.1, 5.0), 1.0).unwrap();
    let cf = CorrelationFunction::quadrature(power, QuadratureOptions::default()).unwrap();
    let grid = uniform_grid(5.0, 100);
    let r = dephasing_oracle(&dephasing_model(), &plus(), &cf, &grid).unwrap();
    let mags: Vec<f64> = r.rho.iter().map(|m| m[(0, 1)].norm()).collect();
    for w in mags.windows(2) {
        assert!(w[1] <= w[0] + 1e-14, "{} -> {}", w[0], w[1]);
    }
    assert!(mags[mags.len() - 1] < 0.5 * mags[0]);
    for rho in &r.rho {
        assert!((rho[(0, 0)].re - 0.5).abs() <= 1e-14);
    }
}

#[test]
fn non_commuting_coupling_is_rejected() {
    let model = SystemModel::new(sigma_z(), sigma_x()).unwrap();
    let r = dephasing_oracle(
        &model,
        &plus(),
        &FnCorrelator(|_| C64::new(1.0, 0.0)),
        &[0.0, 1.0],
    );
    assert!(matches!(r, Err(Error::Precondition(_))));
    assert!(common_eigenbasis(&model).is_err());
}

#[test]
fn no_modes_is_unitary() {
    let model =
        SystemModel::new(sigma_z() * c(0.5, 0.0) + sigma_x() * c(0.4, 0.0), sigma_z()).unwrap();
    let grid = uniform_grid(10.0, 40);
    let r = discretized_bath_oracle(
        &model,
        &up(),
        &[],
        &grid,
        &DiscretizedOptions::new(vec![], f64::INFINITY),
    )
    .unwrap();
    let free = heom_propagate(
        &SystemModel::new(model.h.clone(), CMat::zeros(2, 2)).unwrap(),
        &up(),
        &ExponentialModes::new(vec![], vec![]).unwrap(),
        &TruncationSpec::hierarchy(1, 0),
        HeomVariant::Generalized,
        &grid,
        &HeomOptions {
            tol: messkit_core::ode::Tolerances {
                rtol: 1e-12,
                atol: 1e-14,
            },
            ..Default::default()
        },
    )
    .unwrap();
    assert!(r.max_deviation(&free).unwrap() <= 1e-9);
    assert!(recurrence_time(&[]).is_infinite());
}

#[test]
fn resonant_mode_shows_vacuum_rabi_oscillation() {
    // excited two-level system resonant with one empty mode
    let model = SystemModel::new(sigma_z() * c(0.5, 0.0), sigma_x()).unwrap();
    let g = 0.2;
    let grid = uniform_grid(std::f64::consts::PI / g, 100);
    let r = discretized_bath_oracle(
        &model,
        &up(),
        &[DiscreteMode { g, omega: 1.0 }],
        &grid,
        &DiscretizedOptions::new(vec![12], f64::INFINITY),
    )
    .unwrap();
    for (t, rho) in grid.iter().zip(&r.rho) {
        let rwa = (g * t).cos().powi(2);
        assert!(
            (rho[(0, 0)].re - rwa).abs() <= 0.05,
            "t = {t}: {} vs {rwa}",
            rho[(0, 0)].re
        );
    }
    assert!(r.diagnostics.notes.iter().any(|n| n.starts_with("warning")));
}

#[test]
fn dimension_guard_suggests_cutoffs() {
    let modes = vec![DiscreteMode { g: 0.1, omega: 1.0 }; 4];
    let r = discretized_bath_oracle(
        &dephasing_model(),
        &plus(),
        &modes,
        &[0.0, 1.0],
        &DiscretizedOptions::new(vec![40; 4], f64::INFINITY),
    );
    match r {
        Err(Error::DimensionGuard { dim, limit, hint }) => {
            assert_eq!(dim, 2 * 41usize.pow(4));
            assert_eq!(limit, 1_000_000);
            assert!(2 * hint.iter().map(|&c| c + 1).product::<usize>() <= limit);
        }
        other => panic!("expected a dimension guard, got {other:?}"),
    }
}

/// Two undamped modes at T = 0, cutoff 8, on 0.3 of the recurrence estimate.
#[test]
fn every_deterministic_backend_matches_the_unitary_oracle() {
    let model =
        SystemModel::new(sigma_z() * c(0.5, 0.0) + sigma_x() * c(0.5, 0.0), sigma_z()).unwrap();
    let dm = [
        DiscreteMode {
            g: 0.075,
            omega: 1.0,
        },
        DiscreteMode {
            g: 0.05,
            omega: 1.5,
        },
    ];
    let grid = uniform_grid(0.3 * recurrence_time(&dm), 100);
    let truth = discretized_bath_oracle(
        &model,
        &up(),
        &dm,
        &grid,
        &DiscretizedOptions::new(vec![8, 8], f64::INFINITY),
    )
    .unwrap();
    assert!(!truth
        .diagnostics
        .notes
        .iter()
        .any(|n| n.starts_with("warning")));
    let modes = ExponentialModes::new(
        dm.iter().map(|m| c(m.g * m.g, 0.0)).collect(),
        dm.iter().map(|m| c(1e-6, m.omega)).collect(),
    )
    .unwrap();
    let mut results = Vec::new();
    for variant in [HeomVariant::Generalized, HeomVariant::Ikeda] {
        results.push(
            heom_propagate(
                &model,
                &up(),
                &modes,
                &TruncationSpec::hierarchy(6, 2),
                variant,
                &grid,
                &HeomOptions::default(),
            )
            .unwrap(),
        );
    }
    let set = EffectiveModeSet::star(&modes);
    let sym = EffectiveModeSet::star_symmetric(&modes).unwrap();
    for form in [
        GeneratorForm::FirstForm,
        GeneratorForm::SecondForm,
        GeneratorForm::QuasiLindblad,
        GeneratorForm::StrictLindblad,
    ] {
        let s = if form == GeneratorForm::StrictLindblad {
            &sym
        } else {
            &set
        };
        results.push(
            pseudomode_propagate(
                &model,
                &up(),
                PseudomodeBath::Set(s),
                &TruncationSpec::fock(vec![6, 6]),
                form,
                &grid,
                &PseudomodeOptions::default(),
            )
            .unwrap(),
        );
    }
    results.push(tcl2_propagate(&model, &up(), &modes, &grid, &Tcl2Options::default()).unwrap());
    for r in &results {
        let rep = cross_compare(r, &truth, ToleranceSpec::absolute(1e-3)).unwrap();
        assert!(rep.pass, "{}", rep.line(&r.backend));
    }
}

#[test]
fn comparison_is_symmetric_and_reflexive() {
    let model =
        SystemModel::new(sigma_z() * c(0.5, 0.0) + sigma_x() * c(0.5, 0.0), sigma_z()).unwrap();
    let modes = ExponentialModes::new(vec![c(0.04, 0.0)], vec![c(0.2, 1.0)]).unwrap();
    let a = heom_propagate(
        &model,
        &up(),
        &modes,
        &TruncationSpec::hierarchy(4, 1),
        HeomVariant::Generalized,
        &uniform_grid(5.0, 50),
        &HeomOptions::default(),
    )
    .unwrap();
    let b = tcl2_propagate(
        &model,
        &up(),
        &modes,
        &uniform_grid(6.0, 37),
        &Tcl2Options::default(),
    )
    .unwrap();
    let same = cross_compare(&a, &a, ToleranceSpec::default()).unwrap();
    assert!(same.pass && same.max_abs == 0.0 && !same.monte_carlo());
    let ab = cross_compare(&a, &b, ToleranceSpec::default()).unwrap();
    let ba = cross_compare(&b, &a, ToleranceSpec::default()).unwrap();
    assert_eq!(ab.times, ba.times);
    assert_eq!(ab.max_abs, ba.max_abs);
    assert_eq!(ab.elements, ba.elements);
    assert!(*ab.times.last().unwrap() <= 5.0);
    assert!(ab
        .line("heom-vs-tcl2")
        .ends_with(if ab.pass { "PASS" } else { "FAIL" }));
    // element (0,0) and (1,1) deviations agree by trace preservation
    assert!((ab.elements[0].max_abs - ab.elements[3].max_abs).abs() <= 1e-9);
}

#[test]
fn disjoint_grids_are_an_error() {
    let model = dephasing_model();
    let c0 = FnCorrelator(|_| C64::new(0.0, 0.0));
    let a = dephasing_oracle(&model, &plus(), &c0, &[0.0, 1.0]).unwrap();
    let mut b = a.clone();
    b.times = vec![2.0, 3.0];
    assert!(matches!(
        cross_compare(&a, &b, ToleranceSpec::default()),
        Err(Error::Validation(_))
    ));
}

#[test]
fn ensembles_are_compared_in_standard_errors() {
    let model =
        SystemModel::new(sigma_z() * c(0.5, 0.0) + sigma_x() * c(0.5, 0.0), sigma_z()).unwrap();
    let modes = ExponentialModes::new(vec![c(0.04, 0.0)], vec![c(0.2, 1.0)]).unwrap();
    let grid = uniform_grid(2.0, 4);
    let ens = sln_propagate_ensemble(
        &model,
        &up(),
        NoiseSource::Modes(&modes),
        &grid,
        200,
        7,
        &SlnOptions::default(),
    )
    .unwrap();
    let heom = heom_propagate(
        &model,
        &up(),
        &modes,
        &TruncationSpec::hierarchy(6, 1),
        HeomVariant::Generalized,
        &grid,
        &HeomOptions::default(),
    )
    .unwrap();
    let rep = cross_compare(&ens, &heom, ToleranceSpec::default()).unwrap();
    assert!(rep.monte_carlo());
    assert!(rep.line("sln").contains("max_sigma="));
    let sigma = rep.max_sigma.unwrap();
    assert!(sigma.is_finite());
    let flipped = cross_compare(&heom, &ens, ToleranceSpec::default()).unwrap();
    assert_eq!(flipped.max_sigma, rep.max_sigma);
    // the t = 0 point has zero spread and zero deviation
    assert!(max_abs(&(&ens.mean[0] - &up())) <= 1e-15);
}
