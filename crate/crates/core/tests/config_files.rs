use std::path::Path;

use irs_direct::harness::{load_config, parse_config, Metric, SweepVariable};
use irs_direct::schemes::SchemeId;
use irs_direct::Error;

const MINIMAL: &str = "[sweep]\nvariable = T\nvalues = 16\n";

fn parse(text: &str) -> irs_direct::Result<irs_direct::harness::ExperimentSpec> {
    parse_config(text, Path::new("/tmp"))
}

#[test]
fn minimal_file_takes_defaults() {
    let spec = parse(MINIMAL).unwrap();
    assert_eq!(spec.base.users_per_cell, 2);
    assert_eq!(spec.base.num_cells, 2);
    assert_eq!(spec.base.n_irs, 16);
    assert_eq!(spec.base.bts_antennas, 6);
    assert_eq!(spec.base.rician_factor, 10.0);
    assert_eq!(spec.n_trials, 100);
    assert_eq!(spec.metric, Metric::Downlink);
    assert_eq!(spec.schemes, SchemeId::ALL.to_vec());
    assert_eq!(spec.sweep.variable, SweepVariable::PilotLen);
    assert_eq!(spec.output_path, Path::new("/tmp/results.csv"));
}

#[test]
fn unsorted_values_name_the_list() {
    let err = parse("[sweep]\nvariable = T\nvalues = 4, 2\n").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("sweep.values"), "{msg}");
    assert!(msg.contains("ascending"), "{msg}");
    assert!(msg.contains("line 3"), "{msg}");
}

#[test]
fn negative_noise_rejected() {
    let err = parse("[system]\nnoise_var = -1\n[sweep]\nvariable = T\nvalues = 16\n").unwrap_err();
    assert!(err.to_string().contains("noise_var"), "{err}");
    // zero is just as invalid
    assert!(parse("[system]\nnoise_var = 0\n[sweep]\nvariable = T\nvalues = 16\n").is_err());
}

#[test]
fn unknown_keys_report_line_numbers() {
    match parse("# c\n[system]\nn_irs = 4\nbogus = 1\n").unwrap_err() {
        Error::ConfigLine { line, message } => {
            assert_eq!(line, 4);
            assert!(message.contains("bogus"));
        }
        other => panic!("{other:?}"),
    }
    match parse("[nope]\n").unwrap_err() {
        Error::ConfigLine { line, .. } => assert_eq!(line, 1),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse("n_irs = 4\n").unwrap_err(), Error::ConfigLine { line: 1, .. }));
    assert!(matches!(
        parse("[system]\nn_irs = 4\nn_irs = 5\n").unwrap_err(),
        Error::ConfigLine { line: 3, .. }
    ));
}

#[test]
fn missing_and_mistyped_keys_name_the_key() {
    let err = parse("[sweep]\nvariable = T\n").unwrap_err();
    assert!(matches!(&err, Error::ConfigKey { key, .. } if key == "sweep.values"), "{err:?}");
    let err = parse("[system]\nn_irs = many\n[sweep]\nvariable = T\nvalues = 16\n").unwrap_err();
    assert!(matches!(&err, Error::ConfigKey { key, .. } if key == "system.n_irs"), "{err:?}");
    let err = parse("[system]\nnoise_var = 1\nnoise_var_db = 0\n[sweep]\nvariable = T\nvalues = 16\n").unwrap_err();
    assert!(err.to_string().contains("not both"));
    let err = parse("[experiment]\nschemes = perfect_csi, perfect_csi\n[sweep]\nvariable = T\nvalues = 16\n").unwrap_err();
    assert!(err.to_string().contains("twice"));
    assert!(parse("[sweep]\nvariable = X\nvalues = 16\n").is_err());
    assert!(parse("[sweep]\nvariable = T\nvalues = 0\n").is_err());
    assert!(parse("[experiment]\nn_trials = 0\n[sweep]\nvariable = T\nvalues = 16\n").is_err());
    assert!(parse("[training]\ncodebook = hadamard\n[system]\nn_irs = 16\n[sweep]\nvariable = T\nvalues = 16\n").is_err());
}

#[test]
fn full_file_round_trips_values() {
    let text = "\
[system]
num_cells = 4
users_per_cell = 1
n_irs = 8
ue_antennas = 2
rician_factor = 0
noise_var_db = 0
tx_power = 2
n_fb = 3
seed = 99

[optimizer]
grid_points = 4
max_iters = 50
n_starts = 2
analytic_gradient = false

[training]
n_alt = 6
noise_mismatch_db = -10
codebook = hadamard
pilots = walsh

[experiment]
schemes = RandomTheta, direct_central
n_trials = 7
metric = ul
output = out/x.csv

[sweep]
variable = N_IRS
values = 3, 7
";
    let spec = parse_config(text, Path::new("/data")).unwrap();
    assert_eq!(spec.base.num_cells, 4);
    assert_eq!(spec.base.ue_antennas, 2);
    assert_eq!(spec.base.noise_var, 1.0);
    assert_eq!(spec.base.tx_power, 2.0);
    assert_eq!(spec.base.n_fb, 3);
    assert_eq!(spec.base.rng_seed, 99);
    assert_eq!(spec.settings.optimizer.grid_points, 4);
    assert!(!spec.settings.optimizer.analytic_gradient);
    assert_eq!(spec.settings.n_alt, 6);
    assert_eq!(spec.settings.noise_mismatch_db, -10.0);
    assert_eq!(spec.schemes, vec![SchemeId::RandomTheta, SchemeId::DirectCentral]);
    assert_eq!(spec.metric, Metric::Uplink);
    assert_eq!(spec.output_path, Path::new("/data/out/x.csv"));
    assert_eq!(spec.sweep.values, vec![3.0, 7.0]);
}

#[test]
fn shipped_presets_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "conf") {
            load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
    let fig2 = load_config(dir.join("fig2_miso_vs_T.conf")).unwrap();
    assert_eq!(fig2.sweep.values, vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0]);
    assert_eq!(fig2.base.ue_antennas, 1);
    let fig4 = load_config(dir.join("fig4_mimo_vs_T.conf")).unwrap();
    assert_eq!((fig4.base.ue_antennas, fig4.base.n_fb, fig4.settings.n_alt), (2, 2, 3));
    let fig5 = load_config(dir.join("fig5_ul_vs_nirs.conf")).unwrap();
    assert_eq!((fig5.base.users_per_cell, fig5.base.num_cells - 1), (1, 3));
    assert_eq!(fig5.base.rician_factor, 0.0);
    assert_eq!(fig5.sweep.values.last(), Some(&64.0));
}

#[test]
fn unreadable_file_is_an_io_error() {
    assert!(matches!(
        load_config("/nonexistent/dir/x.conf").unwrap_err(),
        Error::Io { .. }
    ));
}
