//! Emulator → batches → predictors → detector through the public API only.

use plcwatch_core::detector::ThresholdMode;
use plcwatch_core::emulator::{generate_batches, generate_dataset, FaultSpec, Scenario};
use plcwatch_core::eval::{run_transfer, Monitor};
use plcwatch_core::forecast::{ArimaSpec, PredictorSpec};
use plcwatch_core::load::LoadModelKind;
use plcwatch_core::timeseries::batch_average;
use plcwatch_core::SAMPLES_PER_DAY;

fn arima211() -> PredictorSpec {
    PredictorSpec::Arima(ArimaSpec::fixed(2, 1, 1))
}

#[test]
fn self_transfer_keeps_the_false_alarm_target() {
    let (b, _) = generate_batches(&Scenario::with_days(LoadModelKind::L1, 60, 21), 9).unwrap();
    let r = run_transfer(&b, &b, &arima211(), SAMPLES_PER_DAY, 0, None, 0.01, ThresholdMode::Empirical).unwrap();
    assert!((r.alarm_rate() - 0.01).abs() <= 0.005, "{}", r.alarm_rate());
}

#[test]
fn medium_distributed_fault_is_flagged_after_transfer() {
    let onset = 25 * SAMPLES_PER_DAY;
    for seed in 0..3 {
        let (source, _) = generate_batches(&Scenario::with_days(LoadModelKind::L1, 20, seed), 9).unwrap();
        let target = Scenario::with_days(LoadModelKind::L1, 30, 100 + seed).with_fault(FaultSpec::Distributed {
            onset_index: onset,
            location_m: 100.0,
            extent_m: 300.0,
            severity: 0.6,
        });
        let (target, mask) = generate_batches(&target, 9).unwrap();
        assert!(mask[onset] && !mask[onset - 1]);
        let r = run_transfer(&source, &target, &arima211(), SAMPLES_PER_DAY, seed, None, 0.01, ThresholdMode::Theoretical)
            .unwrap();
        let first = r.first_alarm_from(onset).unwrap();
        assert!(first <= onset + 4, "seed {seed}: first alarm {first}, onset {onset}");
    }
}

#[test]
fn batches_average_the_generated_panel() {
    let scenario = Scenario::with_days(LoadModelKind::L2, 2, 3);
    let data = generate_dataset(&scenario).unwrap();
    let direct = batch_average(&data.panel, 9).unwrap();
    let (streamed, mask) = generate_batches(&scenario, 9).unwrap();
    assert_eq!(direct, streamed);
    assert_eq!(mask, data.mask);
}

#[test]
fn monitor_ignores_history_before_the_scored_span() {
    let (b, _) = generate_batches(&Scenario::with_days(LoadModelKind::L3, 12, 8), 9).unwrap();
    let m = Monitor::fit(&b.slice(0..960), &PredictorSpec::Baseline, 24, 0, None).unwrap();
    let full = m.smd_series(&b, 960).unwrap();
    let tail = m.smd_series(&b.slice(900..b.len()), 60).unwrap();
    assert_eq!(full, tail);
    assert!(full.iter().all(|&d| d >= 0.0));
}
