use messkit_core::decomposition::{
    EffectiveModeSet, ExponentialModes, QuasiThermalModes, Topology,
};
use messkit_core::linalg::{c, max_abs, sigma_x, sigma_z};
use messkit_core::ode::{Integrator, Tolerances};
use messkit_core::sparse::{mat_from_vec, vec_from_mat};
use messkit_core::state_space::*;
use messkit_core::{CMat, CVec, Error, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model() -> SystemModel {
    SystemModel::new(
        sigma_z() * c(0.25, 0.0) + sigma_x() * c(0.5, 0.0),
        sigma_z(),
    )
    .unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    CMat::from_fn(n, n, |_, _| {
        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

fn two_mode_set() -> EffectiveModeSet {
    let modes = ExponentialModes::new(
        vec![c(0.04, 0.01), c(0.02, -0.005)],
        vec![c(0.3, 1.0), c(0.5, -0.4)],
    )
    .unwrap();
    EffectiveModeSet::star(&modes)
}

fn general_set() -> EffectiveModeSet {
    // non-diagonal E with non-positive spectrum
    let e = CMat::from_row_slice(
        2,
        2,
        &[c(1.0, -0.3), c(0.2, 0.05), c(0.1, -0.02), c(-0.5, -0.4)],
    );
    let kappa = CVec::from_vec(vec![c(-0.2, 0.05), c(0.1, 0.0)]);
    let eta = CVec::from_vec(vec![c(-0.1, 0.0), c(0.06, -0.02)]);
    EffectiveModeSet::new(e, kappa, eta, Topology::General).unwrap()
}

#[test]
fn superops_examples() {
    let s = SystemModel::new(sigma_x(), sigma_z()).unwrap();
    let rho = CMat::identity(2, 2) * c(0.5, 0.0);
    let (sc, sq) = apply_superops(&s, &rho).unwrap();
    assert!(max_abs(&(sc - sigma_z() * c(2f64.sqrt() / 2.0, 0.0))) < 1e-15);
    assert_eq!(max_abs(&sq), 0.0);
    let s = SystemModel::new(sigma_z(), sigma_x()).unwrap();
    let mut rho = CMat::zeros(2, 2);
    rho[(0, 0)] = c(1.0, 0.0);
    let (_, sq) = apply_superops(&s, &rho).unwrap();
    let want = (sigma_x() * &rho - &rho * sigma_x()) * c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    assert!(max_abs(&(&sq - want)) < 1e-16);
    assert!(sq.trace().norm() < 1e-16);
    assert!(apply_superops(&s, &CMat::zeros(3, 3)).is_err());
}

#[test]
fn model_validation() {
    assert!(SystemModel::new(
        sigma_x()
            + CMat::from_fn(2, 2, |i, j| if i == 0 && j == 1 {
                c(0.0, 1.0)
            } else {
                c(0.0, 0.0)
            }),
        sigma_z()
    )
    .is_err());
    assert!(SystemModel::new(CMat::identity(1, 1), CMat::identity(1, 1)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn sc_and_sq_commute(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_matrix(&mut rng, 3);
        let s = random_matrix(&mut rng, 3);
        let m = SystemModel::new(&h + h.adjoint(), &s + s.adjoint()).unwrap();
        let rho = random_matrix(&mut rng, 3);
        let (c1, _) = apply_superops(&m, &rho).unwrap();
        let (_, qc) = apply_superops(&m, &c1).unwrap();
        let (_, q1) = apply_superops(&m, &rho).unwrap();
        let (cq, _) = apply_superops(&m, &q1).unwrap();
        prop_assert!(max_abs(&(qc - cq)) <= 1e-12);
    }
}

fn all_generators() -> Vec<ExtendedGenerator> {
    let m = model();
    let opts = GeneratorOptions::default();
    let trunc = TruncationSpec::fock(vec![3, 2]);
    let mut out = Vec::new();
    for set in [two_mode_set(), general_set()] {
        for form in [
            GeneratorForm::FirstForm,
            GeneratorForm::SecondForm,
            GeneratorForm::QuasiLindblad,
        ] {
            out.push(build_extended_generator(&m, &set, &trunc, form, &opts).unwrap());
        }
    }
    let sym = EffectiveModeSet::star_symmetric(
        &ExponentialModes::new(
            vec![c(0.04, 0.0), c(0.01, 0.0)],
            vec![c(0.2, 1.0), c(0.1, -0.5)],
        )
        .unwrap(),
    )
    .unwrap();
    out.push(
        build_extended_generator(&m, &sym, &trunc, GeneratorForm::StrictLindblad, &opts).unwrap(),
    );
    let herm = EffectiveModeSet::new(
        CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.3, 0.0), c(0.3, 0.0), c(1.5, 0.0)]),
        CVec::from_vec(vec![c(0.2, 0.0), c(0.0, 0.0)]),
        CVec::from_vec(vec![c(0.2, 0.0), c(0.0, 0.0)]),
        Topology::Chain,
    )
    .unwrap();
    out.push(
        build_extended_generator(&m, &herm, &trunc, GeneratorForm::ChainUnitary, &opts).unwrap(),
    );
    let qt = QuasiThermalModes {
        g: vec![0.1, 0.2],
        n: vec![0.5, 0.0],
        omega: vec![1.0, 0.3],
        gamma: vec![0.2, 0.1],
        residual: 0.0,
        tol: 0.0,
        flagged: false,
    };
    out.push(build_quasi_thermal_generator(&m, &qt, &trunc, &opts).unwrap());
    out
}

#[test]
fn trace_preservation_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for gen in all_generators() {
        let n = gen.dim();
        let mut y = vec![C64::new(0.0, 0.0); n * n];
        for _ in 0..100 {
            let x = vec_from_mat(&random_matrix(&mut rng, n));
            gen.apply(&x, &mut y);
            let dtr = gen.project(&y).trace;
            assert!(dtr.norm() <= 1e-12, "{:?}: {dtr}", gen.form);
        }
    }
}

#[test]
fn second_form_equals_strict_lindblad_when_kappa_minus_vanishes() {
    let m = model();
    let opts = GeneratorOptions::default();
    let trunc = TruncationSpec::fock(vec![3, 3]);
    let sym = EffectiveModeSet::star_symmetric(
        &ExponentialModes::new(
            vec![c(0.04, 0.0), c(0.01, 0.0)],
            vec![c(0.2, 1.0), c(0.1, -0.5)],
        )
        .unwrap(),
    )
    .unwrap();
    let a = build_extended_generator(&m, &sym, &trunc, GeneratorForm::SecondForm, &opts)
        .unwrap()
        .op
        .to_dense();
    let b = build_extended_generator(&m, &sym, &trunc, GeneratorForm::StrictLindblad, &opts)
        .unwrap()
        .op
        .to_dense();
    assert!(max_abs(&(a - b)) <= 1e-12);
}

#[test]
fn quasi_lindblad_matches_second_form() {
    let m = model();
    let opts = GeneratorOptions::default();
    let trunc = TruncationSpec::fock(vec![2, 2]);
    for set in [two_mode_set(), general_set()] {
        let a = build_extended_generator(&m, &set, &trunc, GeneratorForm::SecondForm, &opts)
            .unwrap()
            .op
            .to_dense();
        let b = build_extended_generator(&m, &set, &trunc, GeneratorForm::QuasiLindblad, &opts)
            .unwrap()
            .op
            .to_dense();
        assert!(max_abs(&(a - b)) <= 1e-12);
    }
    // the regularizing corner adds gamma_s D[S]
    let set = two_mode_set();
    let reg = GeneratorOptions {
        gamma_s: 0.1,
        ..opts
    };
    let a = build_extended_generator(&m, &set, &trunc, GeneratorForm::QuasiLindblad, &opts)
        .unwrap()
        .op
        .to_dense();
    let b = build_extended_generator(&m, &set, &trunc, GeneratorForm::QuasiLindblad, &reg)
        .unwrap()
        .op
        .to_dense();
    assert!(max_abs(&(a - b)) > 1e-3);
}

#[test]
fn hermitian_modes_give_unitary_generator() {
    let m = model();
    let set = EffectiveModeSet::new(
        CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.3, 0.1), c(0.3, -0.1), c(1.5, 0.0)]),
        CVec::from_vec(vec![c(0.2, 0.1), c(0.05, 0.0)]),
        CVec::from_vec(vec![c(0.2, 0.1), c(0.05, 0.0)]),
        Topology::General,
    )
    .unwrap();
    let l = build_extended_generator(
        &m,
        &set,
        &TruncationSpec::fock(vec![2, 2]),
        GeneratorForm::SecondForm,
        &GeneratorOptions::default(),
    )
    .unwrap()
    .op
    .to_dense();
    let herm_part = (&l + l.adjoint()) * c(0.5, 0.0);
    assert!(max_abs(&herm_part) <= 1e-12);
}

#[test]
fn structural_preconditions() {
    let m = model();
    let opts = GeneratorOptions::default();
    let trunc = TruncationSpec::fock(vec![2, 2]);
    let err = build_extended_generator(
        &m,
        &two_mode_set(),
        &trunc,
        GeneratorForm::StrictLindblad,
        &opts,
    )
    .unwrap_err();
    assert!(
        matches!(err, Error::Structural(ref s) if s.contains("kappa = eta")),
        "{err}"
    );
    let err = build_extended_generator(
        &m,
        &two_mode_set(),
        &trunc,
        GeneratorForm::ChainUnitary,
        &opts,
    )
    .unwrap_err();
    assert!(
        matches!(err, Error::Structural(ref s) if s.contains("Gamma")),
        "{err}"
    );
    let err = build_extended_generator(
        &m,
        &two_mode_set(),
        &TruncationSpec::fock(vec![2]),
        GeneratorForm::SecondForm,
        &opts,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Validation(_)));
    let err = build_extended_generator(
        &m,
        &two_mode_set(),
        &TruncationSpec::fock(vec![40, 40]),
        GeneratorForm::SecondForm,
        &opts,
    )
    .unwrap_err();
    assert!(matches!(err, Error::DimensionGuard { .. }));
}

#[test]
fn projection_of_product_state_and_linearity() {
    let m = model();
    let gen = build_extended_generator(
        &m,
        &two_mode_set(),
        &TruncationSpec::fock(vec![2, 3]),
        GeneratorForm::SecondForm,
        &GeneratorOptions::default(),
    )
    .unwrap();
    let rho_s = CMat::from_row_slice(2, 2, &[c(0.7, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.0)]);
    let ext = gen.space.vacuum_product(&rho_s);
    let red = gen.project(&vec_from_mat(&ext));
    assert_eq!(red.rho, rho_s);
    let first = build_extended_generator(
        &m,
        &two_mode_set(),
        &TruncationSpec::fock(vec![2, 3]),
        GeneratorForm::FirstForm,
        &GeneratorOptions::default(),
    )
    .unwrap();
    assert_eq!(first.project(&vec_from_mat(&ext)).rho, rho_s);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = gen.dim();
    let a = random_matrix(&mut rng, n);
    let b = random_matrix(&mut rng, n);
    let sum = gen.project(&vec_from_mat(&(&a + &b))).rho;
    let parts = gen.project(&vec_from_mat(&a)).rho + gen.project(&vec_from_mat(&b)).rho;
    assert!(max_abs(&(sum - parts)) < 1e-12);
}

fn evolve(gen: &ExtendedGenerator, rho_s: &CMat, times: &[f64]) -> Vec<CMat> {
    let y0 = vec_from_mat(&gen.space.vacuum_product(rho_s));
    let mut out = Vec::new();
    let mut rhs = |_t: f64, y: &[C64], dy: &mut [C64]| gen.apply(y, dy);
    Integrator::new(Tolerances {
        rtol: 1e-11,
        atol: 1e-13,
    })
    .integrate(&mut rhs, &y0, times, |_, y| out.push(gen.project(y).rho))
    .unwrap();
    out
}

#[test]
fn first_and_second_form_agree() {
    let m = model();
    let opts = GeneratorOptions::default();
    let rho_s = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    let times: Vec<f64> = (0..=20).map(|i| 0.1 * i as f64).collect();
    // K = 1, short time
    let one = EffectiveModeSet::star(
        &ExponentialModes::new(vec![c(0.04, 0.0)], vec![c(0.1, 1.0)]).unwrap(),
    );
    let trunc = TruncationSpec::fock(vec![8]);
    let a = evolve(
        &build_extended_generator(&m, &one, &trunc, GeneratorForm::FirstForm, &opts).unwrap(),
        &rho_s,
        &times,
    );
    let b = evolve(
        &build_extended_generator(&m, &one, &trunc, GeneratorForm::SecondForm, &opts).unwrap(),
        &rho_s,
        &times,
    );
    let worst = a
        .iter()
        .zip(&b)
        .map(|(x, y)| max_abs(&(x - y)))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-8, "K=1: {worst:.3e}");
    // K = 2 general topology, longer time
    let times: Vec<f64> = (0..=30).map(|i| 0.2 * i as f64).collect();
    let trunc = TruncationSpec::fock(vec![6, 6]);
    let set = general_set();
    let a = evolve(
        &build_extended_generator(&m, &set, &trunc, GeneratorForm::FirstForm, &opts).unwrap(),
        &rho_s,
        &times,
    );
    let b = evolve(
        &build_extended_generator(&m, &set, &trunc, GeneratorForm::SecondForm, &opts).unwrap(),
        &rho_s,
        &times,
    );
    let worst = a
        .iter()
        .zip(&b)
        .map(|(x, y)| max_abs(&(x - y)))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-6, "K=2: {worst:.3e}");
    for r in &b {
        assert!(max_abs(&(r - r.adjoint())) < 1e-9);
        assert!((r.trace() - c(1.0, 0.0)).norm() < 1e-9);
    }
}

#[test]
fn quasi_thermal_with_zero_occupation_is_strict_lindblad() {
    let m = model();
    let opts = GeneratorOptions::default();
    let trunc = TruncationSpec::fock(vec![4]);
    let (g, w, gam) = (0.2, 1.0, 0.1);
    let qt = QuasiThermalModes {
        g: vec![g],
        n: vec![0.0],
        omega: vec![w],
        gamma: vec![gam],
        residual: 0.0,
        tol: 0.0,
        flagged: false,
    };
    let a = build_quasi_thermal_generator(&m, &qt, &trunc, &opts)
        .unwrap()
        .op
        .to_dense();
    let set = EffectiveModeSet::star_symmetric(
        &ExponentialModes::new(vec![c(g * g, 0.0)], vec![c(gam, w)]).unwrap(),
    )
    .unwrap();
    let b = build_extended_generator(&m, &set, &trunc, GeneratorForm::StrictLindblad, &opts)
        .unwrap()
        .op
        .to_dense();
    assert!(max_abs(&(a - b)) <= 1e-14);
}

#[test]
fn thermal_product_state() {
    let space = FockSpace::new(2, &[30]);
    let rho_s = CMat::identity(2, 2) * c(0.5, 0.0);
    let ext = space.thermal_product(&rho_s, &[0.5]).unwrap();
    assert!((ext.trace() - c(1.0, 0.0)).norm() < 1e-14);
    let a = space.annihilation(0).to_dense();
    let occ = (a.adjoint() * &a * &ext).trace().re;
    assert!((occ - 0.5).abs() < 1e-4);
    let _ = mat_from_vec(&vec_from_mat(&ext), space.dim());
}
