#![allow(dead_code)]

use stepfreq_core::rng::substream;
use stepfreq_core::scene::{place_nodes_uniform_disk, Scenario, Target};
use stepfreq_core::synth::{gaussian_measurement_matrix, RadarSetup};
use stepfreq_core::waveform::{gen_orthogonal_qpsk, PulseSchedule, StepMode};

pub struct Shape {
    pub mt: usize,
    pub nr: usize,
    pub m: usize,
    pub samples: usize,
    pub radius: f64,
    pub constant: usize,
    pub stepped: usize,
    pub mode: StepMode,
}

impl Default for Shape {
    fn default() -> Self {
        Self {
            mt: 8,
            nr: 3,
            m: 8,
            samples: 32,
            radius: 10.0,
            constant: 0,
            stepped: 4,
            mode: StepMode::Random { min: 0.01, max: 0.1 },
        }
    }
}

pub const CARRIER: f64 = 5e9;
pub const PRI: f64 = 2.5e-4;
pub const TS: f64 = 2e-8;

/// Noiseless setup drawn from `seed`.
pub fn setup(shape: &Shape, targets: Vec<Target>, seed: u64) -> RadarSetup {
    let tx = place_nodes_uniform_disk(shape.mt, shape.radius, &mut substream(seed, 1)).unwrap();
    let rx = place_nodes_uniform_disk(shape.nr, shape.radius, &mut substream(seed, 2)).unwrap();
    let scenario = Scenario::new(tx, rx, targets, vec![], 0.0, CARRIER, seed).unwrap();
    let schedule = PulseSchedule::with_constant_prefix(
        shape.constant,
        shape.mode,
        shape.stepped,
        PRI,
        CARRIER,
        &mut substream(seed, 3),
    )
    .unwrap();
    let x = gen_orthogonal_qpsk(shape.samples, shape.mt, TS, &mut substream(seed, 4)).unwrap();
    let phis = (0..shape.nr)
        .map(|l| gaussian_measurement_matrix(shape.m, shape.mt, l, &mut substream(seed, 100 + l as u64)).unwrap())
        .collect();
    RadarSetup::new(scenario, schedule, x, phis).unwrap()
}
