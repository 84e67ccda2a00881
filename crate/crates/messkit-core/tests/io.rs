use messkit_core::decomposition::{EffectiveModeSet, ExponentialModes};
use messkit_core::deterministic::{heom_propagate, uniform_grid, HeomOptions, HeomVariant};
use messkit_core::io::*;
use messkit_core::linalg::{c, real_matrix, sigma_x, sigma_z};
use messkit_core::state_space::{SystemModel, TruncationSpec};
use messkit_core::stochastic::{sln_propagate_ensemble, NoiseSource, SlnOptions};
use proptest::prelude::*;

fn fixture() -> (SystemModel, messkit_core::CMat, ExponentialModes) {
    let model =
        SystemModel::new(sigma_z() * c(0.5, 0.0) + sigma_x() * c(0.5, 0.0), sigma_z()).unwrap();
    let rho0 = real_matrix(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let modes = ExponentialModes::new(vec![c(0.04, 0.0)], vec![c(0.2, 1.0)]).unwrap();
    (model, rho0, modes)
}

#[test]
fn csv_round_trips_to_full_precision() {
    let (model, rho0, modes) = fixture();
    let grid = uniform_grid(3.0, 30);
    let r = heom_propagate(
        &model,
        &rho0,
        &modes,
        &TruncationSpec::hierarchy(4, 1),
        HeomVariant::Generalized,
        &grid,
        &HeomOptions::default(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    write_timeseries(&path, &r, &Observable::defaults(2)).unwrap();
    let table = read_timeseries(&path).unwrap();
    assert_eq!(
        table.header,
        [
            "t",
            "trace",
            "sz",
            "re_rho_0_0",
            "im_rho_0_0",
            "re_rho_0_1",
            "im_rho_0_1",
            "re_rho_1_1",
            "im_rho_1_1"
        ]
    );
    assert_eq!(table, timeseries_table(&r, &Observable::defaults(2)));
    for (row, rho) in table.rows.iter().zip(&r.rho) {
        assert_eq!(row[5], rho[(0, 1)].re);
        assert_eq!(row[6], rho[(0, 1)].im);
        assert!((row[1] - 1.0).abs() < 1e-10);
        assert_eq!(row[2], (rho[(0, 0)] - rho[(1, 1)]).re);
    }
    assert_eq!(table.column("t").unwrap(), grid);
}

#[test]
fn ensembles_add_stderr_columns() {
    let (model, rho0, modes) = fixture();
    let grid = uniform_grid(2.0, 10);
    let e = sln_propagate_ensemble(
        &model,
        &rho0,
        NoiseSource::Modes(&modes),
        &grid,
        64,
        3,
        &SlnOptions::default(),
    )
    .unwrap();
    let t = timeseries_table(&e, &Observable::defaults(2));
    assert_eq!(
        &t.header[..5],
        ["t", "trace", "trace_stderr", "sz", "sz_stderr"]
    );
    assert_eq!(t.header.len(), 1 + 2 * (2 + 6));
    let k = t
        .header
        .iter()
        .position(|h| h == "re_rho_0_1_stderr")
        .unwrap();
    for (row, se) in t.rows.iter().zip(&e.stderr) {
        assert_eq!(row[k], se[(0, 1)].re);
    }
    assert!(t.column("sz_stderr").unwrap()[5] > 0.0);
}

#[test]
fn metadata_sidecar_records_the_run() {
    let (model, rho0, modes) = fixture();
    let grid = uniform_grid(1.0, 5);
    let e = sln_propagate_ensemble(
        &model,
        &rho0,
        NoiseSource::Modes(&modes),
        &grid,
        16,
        9,
        &SlnOptions::default(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_timeseries(
        dir.path(),
        "e",
        &e,
        &[],
        serde_json::json!({ "label": "x" }),
        true,
    )
    .unwrap();
    let meta: RunMetadata = read_json(&dir.path().join("e.json")).unwrap();
    assert_eq!(meta.schema_version, SCHEMA_VERSION);
    assert_eq!(meta.seed, Some(9));
    assert_eq!(meta.trajectories, Some(16));
    assert_eq!(meta.extra["label"], "x");
    let script = std::fs::read_to_string(dir.path().join("e.gp")).unwrap();
    assert!(script.contains("'e.csv' using 1:2") && !script.contains("using 1:3 "));
}

#[test]
fn observables_are_validated() {
    assert!(Observable::by_name("sz", 3).is_err());
    assert!(Observable::by_name("p3", 3).is_err());
    assert!(Observable::by_name("q", 2).is_err());
    assert_eq!(
        Observable::by_name("p2", 3).unwrap().op[(2, 2)],
        c(1.0, 0.0)
    );
    assert!(Observable::defaults(3).is_empty());
}

#[test]
fn mode_set_file_round_trips() {
    let modes = ExponentialModes::new(
        vec![c(0.04, 0.01), c(0.1, 0.0)],
        vec![c(0.2, 1.0), c(1.0 / 3.0, -0.7)],
    )
    .unwrap();
    let set = EffectiveModeSet::star(&modes).to_chain().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.modes");
    write_modeset(&path, &set, 1.25e-7).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("K,2\ntopology,chain\ntolerance,1.25e-7\nkind,i,j,re,im\n"));
    let (back, tol) = read_modeset(&path).unwrap();
    assert_eq!(tol, 1.25e-7);
    assert_eq!(back.e, set.e);
    assert_eq!(back.kappa, set.kappa);
    assert_eq!(back.eta, set.eta);
    std::fs::write(&path, text.replace("kappa,1", "kappa,5")).unwrap();
    assert!(read_modeset(&path).is_err());
}

proptest! {
    #[test]
    fn floats_print_in_shortest_round_trip_form(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        let s = format_float(x);
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        prop_assert!(s.len() <= 24);
    }
}
