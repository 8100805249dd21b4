use std::path::Path;

use super::*;

fn tiny_spec(schemes: Vec<SchemeId>, n_trials: usize) -> ExperimentSpec {
    let base = SystemConfig {
        n_irs: 4,
        pilot_len: 8,
        ..SystemConfig::default()
    };
    let mut spec = ExperimentSpec::new(base, SweepVariable::PilotLen, vec![8.0], schemes);
    spec.n_trials = n_trials;
    spec.settings.optimizer.max_iters = 20;
    spec
}

#[test]
fn sweep_validation() {
    let ok = Sweep {
        variable: SweepVariable::PilotLen,
        values: vec![1.0, 2.0, 4.0],
    };
    assert!(ok.validate().is_ok());
    let unsorted = Sweep {
        values: vec![2.0, 1.0],
        ..ok.clone()
    };
    assert!(unsorted.validate().unwrap_err().contains("ascending"));
    let frac = Sweep {
        values: vec![1.5],
        ..ok.clone()
    };
    assert!(frac.validate().is_err());
    let noise = Sweep {
        variable: SweepVariable::NoiseInvDb,
        values: vec![-10.0, 0.5],
    };
    assert!(noise.validate().is_ok());
    assert!(Sweep { values: vec![], ..ok }.validate().is_err());
}

#[test]
fn config_at_applies_variable() {
    let mut spec = tiny_spec(vec![SchemeId::PerfectCsi], 1);
    spec.sweep.variable = SweepVariable::NoiseInvDb;
    let cfg = spec.config_at(20.0).unwrap();
    assert!((cfg.noise_var - 0.01).abs() < 1e-15);
    spec.sweep.variable = SweepVariable::NIrs;
    assert_eq!(spec.config_at(32.0).unwrap().n_irs, 32);
    spec.sweep.variable = SweepVariable::PilotLen;
    assert_eq!(spec.config_at(64.0).unwrap().pilot_len, 64);
    assert!(spec.config_at(0.0).is_err());
}

#[test]
fn single_trial_single_scheme() {
    let table = run_experiment(&tiny_spec(vec![SchemeId::PerfectCsi], 1)).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert_eq!(table.rows[0].mean.len(), 1);
    assert_eq!(table.rows[0].se, vec![0.0]);
    assert!(table.rows[0].mean[0].is_finite());
}

#[test]
fn failures_are_excluded_and_counted() {
    let spec = tiny_spec(vec![SchemeId::PerfectCsi, SchemeId::RandomTheta], 4);
    let flaky = |id: SchemeId, real: &NetworkRealization, cfg: &SystemConfig, s: &SchemeSettings, seeds: &TrialSeeds| {
        if id == SchemeId::RandomTheta && seeds == &TrialSeeds::new(cfg.rng_seed, 1) {
            return Err(Error::Unsupported("probe".into()));
        }
        run_scheme(id, real, cfg, s, seeds)
    };
    let table = run_experiment_with(&spec, &flaky).unwrap();
    let row = &table.rows[0];
    assert_eq!(row.failures, vec![0, 1]);
    assert!(row.samples[1][1].is_none());
    let ok: Vec<f64> = row.samples[1].iter().flatten().copied().collect();
    assert_eq!(ok.len(), 3);
    assert_eq!(row.mean[1], mean_se(&ok).0);
}

#[test]
fn mean_se_known_values() {
    let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(m, 2.5);
    // sample sd sqrt(5/3), divided by 2
    assert!((se - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
    assert!(mean_se(&[]).0.is_nan());
}

#[test]
fn sig6_formatting() {
    assert_eq!(format_sig6(1.23456789), "1.23457");
    assert_eq!(format_sig6(123456.789), "123457");
    assert_eq!(format_sig6(0.000123456789), "0.000123457");
    assert_eq!(format_sig6(0.0), "0");
    assert_eq!(format_sig6(-2.5), "-2.50000");
    let big: f64 = format_sig6(1.234567e20).parse().unwrap();
    assert!((big / 1.23457e20 - 1.0).abs() < 1e-12);
}

#[test]
fn csv_refuses_empty_and_bad_paths() {
    let table = ResultTable {
        variable: SweepVariable::NIrs,
        metric: Metric::Uplink,
        schemes: vec![SchemeId::PerfectCsi],
        rows: vec![],
    };
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_csv(&table, dir.path().join("x.csv")).is_err());
    let table = ResultTable {
        rows: vec![ResultRow {
            value: 4.0,
            mean: vec![1.0],
            se: vec![0.1],
            failures: vec![0],
            samples: vec![vec![Some(1.0)]],
        }],
        ..table
    };
    // a regular file used as a directory
    let file = dir.path().join("f");
    std::fs::write(&file, "").unwrap();
    assert!(emit_csv(&table, Path::new(&file).join("out.csv")).is_err());
    emit_csv(&table, dir.path().join("sub/out.csv")).unwrap();
    let text = std::fs::read_to_string(dir.path().join("sub/out.csv")).unwrap();
    assert_eq!(text, "N_IRS,Perfect_CSI,Perfect_CSI_se\n4,1.00000,0.100000\n");
}

#[test]
fn self_check_passes() {
    for c in self_check() {
        assert!(c.passed, "{}: {}", c.name, c.detail);
    }
}
