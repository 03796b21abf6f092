mod common;

use blindcrb::harness::*;
use blindcrb::model::{InnerKind, RedundancyKind, SystemConfig};
use blindcrb::Error;

fn small_plan(n: usize) -> ExperimentPlan {
    let cfg = SystemConfig::new(4, 1, n, 1.0, RedundancyKind::Cp, InnerKind::Identity).unwrap();
    let mut plan = ExperimentPlan::desk_scale(cfg);
    plan.n_channels = 4;
    plan.n_trials = 3;
    plan.snr_db_grid = vec![10.0, 20.0, 30.0];
    plan
}

fn csv(records: &[ResultRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv(records, &mut out).unwrap();
    out
}

#[test]
fn oracle_estimator_has_zero_error() {
    let records = run_experiment_with(&small_plan(6), &OracleEstimator).unwrap();
    assert_eq!(records.len(), 3);
    for r in &records {
        assert_eq!(r.mse_avg, 0.0);
        assert!(r.crb_avg > 0.0);
        assert_eq!(r.excluded_trials, 0);
    }
}

#[test]
fn runs_are_deterministic() {
    let plan = small_plan(6);
    let a = csv(&run_experiment(&plan).unwrap());
    let b = csv(&run_experiment(&plan).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(text.lines().count(), 4);

    let mut other = plan.clone();
    other.master_seed = 2;
    assert_ne!(csv(&run_experiment(&other).unwrap()), csv(&run_experiment(&plan).unwrap()));
}

#[test]
fn single_cell_matches_the_full_run() {
    let plan = small_plan(6);
    let all = run_experiment(&plan).unwrap();
    let one = run_cell(&plan, 20.0).unwrap();
    assert_eq!(one, all[1]);
}

#[test]
fn bound_decreases_with_snr_and_frame_length() {
    let short = run_experiment(&small_plan(4)).unwrap();
    let long = run_experiment(&small_plan(8)).unwrap();
    for w in short.windows(2) {
        assert!(w[1].snr_db > w[0].snr_db && w[1].crb_avg < w[0].crb_avg);
        let slope = 10.0 * (w[0].crb_avg / w[1].crb_avg).log10() / ((w[1].snr_db - w[0].snr_db) / 10.0);
        assert!((slope - 10.0).abs() < 1e-9);
    }
    for (a, b) in short.iter().zip(&long) {
        assert!(b.crb_avg < a.crb_avg);
    }
}

#[test]
fn zero_padding_reference_column() {
    let mut plan = small_plan(6);
    plan.config = SystemConfig::new(4, 1, 6, 1.0, RedundancyKind::Zp, InnerKind::Identity).unwrap();
    plan.compute_zp_reference = true;
    let records = run_experiment(&plan).unwrap();
    for r in &records {
        let z = r.crb_zp_ref_avg.unwrap();
        assert!(z > 0.0 && z <= r.crb_avg);
        assert_eq!(r.csv_row().split(',').count(), CSV_HEADER.split(',').count());
    }
}

#[test]
fn plan_validation() {
    let mut plan = small_plan(6);
    plan.snr_db_grid = vec![20.0, 10.0];
    assert!(plan.validate().is_err());
    let mut plan = small_plan(6);
    plan.compute_zp_reference = true;
    assert!(matches!(run_experiment(&plan), Err(Error::InvalidConfig(_)) | Err(Error::NotZeroPadded(_))));
    assert!((sigma2_from_snr_db(20.0) - 0.01).abs() < 1e-18);
}

struct Failing;

impl BlindEstimator for Failing {
    fn estimate(&self, _: &TrialInput<'_>) -> blindcrb::Result<blindcrb::estimator::ChannelEstimate> {
        Err(Error::InsufficientData("always".into()))
    }
}

#[test]
fn excessive_exclusions_fail_the_cell() {
    let plan = small_plan(6);
    assert!(matches!(run_cell_with(&plan, 10.0, &Failing), Err(Error::CellFailed { excluded: 12, total: 12, .. })));
    match run_experiment_with(&plan, &Failing) {
        Err(Error::CellsFailed(cells)) => assert_eq!(cells.len(), 3),
        other => panic!("expected CellsFailed, got {other:?}"),
    }
}
