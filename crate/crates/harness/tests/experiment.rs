use proptest::prelude::*;
use stepfreq::config::{EstimatorMode, ExperimentConfig, GridSpec, TargetSpec};
use stepfreq::experiment::{Experiment, OccurrenceMap, TrialRecord};
use stepfreq::output::{emit_results, read_heatmap, Manifest, HEATMAP_FILE, MANIFEST_FILE, TRIALS_FILE};
use stepfreq_core::sensing::ParamGrid;

const FIG3: &str = include_str!("../configs/fig3_decoupled.cfg");

/// Small noiseless decoupled run with one target.
fn tiny() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml(FIG3).unwrap();
    cfg.scenario.num_tx = 8;
    cfg.scenario.num_rx = 4;
    cfg.scenario.compressed_len = 8;
    cfg.scenario.snr_db = 300.0;
    cfg.jammers.clear();
    cfg.waveform.samples_per_pulse = 64;
    cfg.grid = GridSpec {
        angle_start_deg: -1.0,
        angle_step_deg: 1.0,
        angle_count: 3,
        velocity_start_mps: 60.0,
        velocity_step_mps: 10.0,
        velocity_count: 3,
        range_start_m: 1100.0,
        range_step_m: 50.0,
        range_count: 3,
    };
    cfg.targets = vec![TargetSpec {
        azimuth_deg: 1.0,
        speed_mps: 70.0,
        range_m: 1150.0,
        reflection_re: 1.0,
        reflection_im: 0.0,
    }];
    cfg.experiment.trials = 1;
    cfg
}

#[test]
fn single_noiseless_trial_counts_only_the_true_cell() {
    let exp = Experiment::new(tiny()).unwrap();
    let out = exp.run().unwrap();
    let truth = out.map.truth_indices();
    assert_eq!(truth.len(), 1);
    for (n, &c) in out.map.counts.iter().enumerate() {
        assert_eq!(c, u32::from(n == truth[0]), "cell {n}");
    }
    let rec = &out.records[0];
    assert!(rec.hits_all(&truth));
    assert_eq!(rec.false_cells(&truth), 0);
    assert_eq!(rec.stages.len(), 4);
    let cx = rec.complexity.unwrap();
    assert_eq!((cx.angle_solves, cx.detected_angles, cx.detected_pairs), (2, 1, 1));
}

#[test]
fn joint_mode_matches_the_same_cell() {
    let mut cfg = tiny();
    cfg.estimator.mode = EstimatorMode::Joint;
    cfg.estimator.stages.truncate(1);
    let exp = Experiment::new(cfg).unwrap();
    let out = exp.run().unwrap();
    assert_eq!(out.map.counts.iter().sum::<u32>(), 1);
    assert!(out.records[0].hits_all(&out.map.truth_indices()));
}

#[test]
fn runs_are_deterministic_across_worker_counts() {
    let mut cfg = tiny();
    cfg.scenario.snr_db = 5.0;
    cfg.experiment.trials = 6;
    cfg.experiment.workers = 1;
    let a = Experiment::new(cfg.clone()).unwrap().run().unwrap();
    cfg.experiment.workers = 3;
    let b = Experiment::new(cfg).unwrap().run().unwrap();
    assert_eq!(a.map, b.map);
    assert_eq!(a.records, b.records);

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let exp = Experiment::new(tiny()).unwrap();
    let out = exp.run().unwrap();
    emit_results(&exp, &out, dir_a.path()).unwrap();
    emit_results(&exp, &exp.run().unwrap(), dir_b.path()).unwrap();
    for f in [MANIFEST_FILE, HEATMAP_FILE, TRIALS_FILE] {
        let x = std::fs::read(dir_a.path().join(f)).unwrap();
        let y = std::fs::read(dir_b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn artifacts_round_trip() {
    let exp = Experiment::new(tiny()).unwrap();
    let out = exp.run().unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_results(&exp, &out, dir.path()).unwrap();

    let manifest = Manifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.config, exp.config);
    assert_eq!(manifest.trial_seeds.len(), 1);

    let rows = read_heatmap(&dir.path().join(HEATMAP_FILE)).unwrap();
    assert_eq!(rows.len(), exp.grid.len());
    assert_eq!(rows.iter().map(|r| r.count).sum::<u32>(), 1);
    assert_eq!(rows.iter().filter(|r| r.truth == 1).count(), 1);

    let text = std::fs::read_to_string(dir.path().join(TRIALS_FILE)).unwrap();
    let recs: Vec<TrialRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs, out.records);
}

#[test]
fn empty_detections_give_a_zero_heatmap() {
    let exp = Experiment::new(tiny()).unwrap();
    let rec = TrialRecord {
        trial: 0,
        seed: 1,
        error: Some("no detections in angle".into()),
        detections: vec![],
        stages: vec![],
        complexity: None,
    };
    let map = OccurrenceMap::accumulate(&exp.grid, &exp.truth_cells(), &[rec]);
    let dir = tempfile::tempdir().unwrap();
    stepfreq::output::write_heatmap(&map, dir.path()).unwrap();
    let rows = read_heatmap(&dir.path().join(HEATMAP_FILE)).unwrap();
    assert_eq!(rows.len(), exp.grid.len());
    assert!(rows.iter().all(|r| r.count == 0));
}

#[test]
fn off_grid_truth_is_snapped_and_recorded() {
    let mut cfg = tiny();
    cfg.targets[0].speed_mps = 71.0;
    let exp = Experiment::new(cfg).unwrap();
    assert_eq!(exp.truth[0].radial_speed, 70.0);
    assert!((exp.snaps[0].velocity_mps + 1.0).abs() < 1e-12);
    assert!(!exp.snaps[0].is_exact());
}

#[test]
fn failures_are_recorded_and_only_total_failure_is_fatal() {
    let mut cfg = tiny();
    cfg.targets.clear();
    let exp = Experiment::new(cfg).unwrap();
    let rec = exp.run_trial(0);
    assert!(rec.error.as_deref().unwrap().contains("no detections"));
    assert!(matches!(exp.run(), Err(stepfreq::HarnessError::AllTrialsFailed(1))));
}

#[test]
fn unwritable_output_is_an_error() {
    let exp = Experiment::new(tiny()).unwrap();
    let out = exp.run().unwrap();
    let file = tempfile::NamedTempFile::new().unwrap();
    assert!(emit_results(&exp, &out, &file.path().join("sub")).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn configs_round_trip(trials in 1usize..1000, seed in 0u64..i64::MAX as u64, snr in -20.0f64..40.0, count in 1usize..20) {
        let mut cfg = ExperimentConfig::from_toml(FIG3).unwrap();
        cfg.experiment.trials = trials;
        cfg.experiment.seed = seed;
        cfg.scenario.snr_db = snr;
        cfg.grid.velocity_count = count;
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn counts_never_exceed_trials(cells in prop::collection::vec(prop::collection::vec(0usize..27, 0..5), 1..20)) {
        let grid = ParamGrid::product(vec![0.0, 0.01, 0.02], vec![1.0, 2.0, 3.0], vec![1000.0, 1050.0, 1100.0]).unwrap();
        let records: Vec<TrialRecord> = cells.iter().enumerate().map(|(i, cs)| {
            let mut cs = cs.clone();
            cs.sort_unstable();
            cs.dedup();
            TrialRecord {
                trial: i,
                seed: 0,
                error: None,
                detections: cs.iter().map(|&c| stepfreq::experiment::DetectionRecord {
                    cell: Some(c),
                    angle_deg: 0.0,
                    velocity_mps: 0.0,
                    range_m: 0.0,
                    amplitude_re: 1.0,
                    amplitude_im: 0.0,
                    magnitude: 1.0,
                }).collect(),
                stages: vec![],
                complexity: None,
            }
        }).collect();
        let map = OccurrenceMap::accumulate(&grid, &[], &records);
        prop_assert!(map.counts.iter().all(|&c| c as usize <= records.len()));
        let total: usize = records.iter().map(|r| r.detections.len()).sum();
        prop_assert_eq!(map.counts.iter().map(|&c| c as usize).sum::<usize>(), total);
    }
}
