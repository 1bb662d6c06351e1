//! Stepping conditions, the h metric and column correlations.

mod common;

use std::f64::consts::PI;

use rand::Rng;
use stepfreq_core::analysis::{
    check_sufficient_conditions, column_correlation, h_metric, h_unstepped, resolution_alpha,
};
use stepfreq_core::linalg::C64;
use stepfreq_core::rng::substream;
use stepfreq_core::scene::deg_to_rad;
use stepfreq_core::sensing::{build_sensing_matrix, ParamGrid, DEFAULT_ENTRY_BUDGET};
use stepfreq_core::waveform::StepMode;

use common::{setup, Shape, CARRIER, PRI};

/// `|sum_m e^{j alpha (1 + df_m) m}|`, evaluated directly.
fn h_direct(steps: &[f64], alpha: f64) -> f64 {
    steps
        .iter()
        .enumerate()
        .map(|(m, df)| C64::from_polar(1.0, alpha * (1.0 + df) * m as f64))
        .sum::<C64>()
        .norm()
}

#[test]
fn verdict_true_draws_lower_h() {
    let mut rng = substream(77, 0);
    let (mut draws, mut positive, mut lowered) = (0, 0, 0);
    while draws < 4000 {
        let np = rng.gen_range(3..=10);
        let steps: Vec<f64> = (0..np).map(|_| rng.gen_range(0.0..=1e-2)).collect();
        let alpha = rng.gen_range(1e-3..PI / (np - 1) as f64);
        draws += 1;
        let report = check_sufficient_conditions(&steps, alpha);
        assert!((h_metric(&steps, alpha) - h_direct(&steps, alpha)).abs() < 1e-9);
        if report.verdict {
            positive += 1;
            if h_direct(&steps, alpha) < h_direct(&vec![0.0; np], alpha) {
                lowered += 1;
            }
        }
    }
    assert!(positive >= 1000, "only {positive} verdict-true draws");
    let share = lowered as f64 / positive as f64;
    println!(
        "{lowered}/{positive} verdict-true draws lowered h ({:.2}%)",
        100.0 * share
    );
    assert!(share >= 0.995);
}

#[test]
fn five_pulse_thresholds() {
    let alpha = 0.5;
    // df_4 / df_2 exactly 1/3 passes, just below fails
    let at = [0.0, 0.03, 0.0, 0.01, 0.02];
    let r = check_sufficient_conditions(&at, alpha);
    let c4 = r.ratio_checks.iter().find(|c| c.m == 4).unwrap();
    assert_eq!(c4.threshold, 1.0 / 3.0);
    assert!(c4.holds);
    let below = [0.0, 0.03, 0.0, 0.0099, 0.02];
    assert!(!check_sufficient_conditions(&below, alpha).ratio_condition());
    // m = 5 compares df_5 with df_1 against 0
    let c5 = r.ratio_checks.iter().find(|c| c.m == 5).unwrap();
    assert_eq!(c5.threshold, 0.0);
    assert_eq!(r.alpha_bound, PI / 4.0);
    assert!(check_sufficient_conditions(&at, PI / 4.0 - 1e-9).sine_condition);
    assert!(!check_sufficient_conditions(&at, PI / 4.0).sine_condition);
}

#[test]
fn linear_steps_satisfy_the_ratio_condition() {
    for np in 2..=16 {
        let steps: Vec<f64> = (1..=np).map(|m| m as f64 * 1e-4).collect();
        assert!(check_sufficient_conditions(&steps, 0.1).ratio_condition(), "Np = {np}");
    }
}

#[test]
fn unstepped_h_is_the_geometric_sum() {
    for np in 2..=10 {
        for k in 1..20 {
            let alpha = k as f64 * 0.15;
            assert!((h_unstepped(np, alpha) - h_direct(&vec![0.0; np], alpha)).abs() < 1e-9);
        }
    }
}

#[test]
fn adjacent_velocity_correlation_tracks_h() {
    let dv = 5.0;
    let alpha = resolution_alpha(dv, PRI, CARRIER);
    for seed in 0..8 {
        let shape = Shape {
            mt: 10,
            nr: 3,
            m: 10,
            samples: 64,
            radius: 1e-3,
            constant: 0,
            stepped: 10,
            mode: StepMode::Random { min: 1e-4, max: 1e-3 },
        };
        let s = setup(&shape, vec![], seed);
        let grid = ParamGrid::product(vec![deg_to_rad(1.0)], vec![60.0, 60.0 + dv], vec![1500.0]).unwrap();
        let pulses: Vec<usize> = (0..10).collect();
        let theta = build_sensing_matrix(&grid, &s, &pulses, DEFAULT_ENTRY_BUDGET).unwrap();
        let ratio = column_correlation(theta.matrix(), 0, 1) / column_correlation(theta.matrix(), 0, 0);
        let h = h_direct(s.schedule.steps(), alpha) / 10.0;
        assert!(
            (ratio - h).abs() <= 0.1 * h,
            "seed {seed}: measured {ratio}, predicted {h}"
        );
    }
}
