//! Monte Carlo runs: per-trial setup, estimation and occurrence counting.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stepfreq_core::estimator::{decoupled_complexity, estimate_joint, run_decoupled, EstimateSet, StageReport};
use stepfreq_core::rng::{derive_seed, stream_key, substream, Stream};
use stepfreq_core::scene::{place_nodes_uniform_disk, rad_to_deg, Jammer, Scenario, Target};
use stepfreq_core::sensing::{GridPoint, ParamGrid};
use stepfreq_core::synth::{gaussian_measurement_matrix, noise_power_for_snr, RadarSetup};
use stepfreq_core::waveform::{gen_orthogonal_qpsk, PulseSchedule};
use stepfreq_core::{scene::deg_to_rad, C64};

use crate::config::{EstimatorMode, ExperimentConfig};
use crate::error::HarnessError;

/// Distance between a configured target and the grid cell it was moved to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snap {
    pub target: usize,
    pub angle_deg: f64,
    pub velocity_mps: f64,
    pub range_m: f64,
}

impl Snap {
    pub fn is_exact(&self) -> bool {
        self.angle_deg.abs() < 1e-9 && self.velocity_mps.abs() < 1e-9 && self.range_m.abs() < 1e-9
    }
}

fn nearest(axis: &[f64], x: f64) -> f64 {
    axis.iter()
        .copied()
        .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
        .unwrap_or(x)
}

/// A validated config with its grid and on-grid truth.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub grid: ParamGrid,
    pub truth: Vec<Target>,
    pub snaps: Vec<Snap>,
}

impl Experiment {
    /// Snaps every target to its nearest grid cell, warning when one moves.
    pub fn new(config: ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let g = &config.grid;
        let grid = ParamGrid::product(g.angles_rad(), g.velocities(), g.ranges())?;
        let mut truth = Vec::new();
        let mut snaps = Vec::new();
        for (i, t) in config.targets.iter().enumerate() {
            let a = nearest(grid.angle_axis(), deg_to_rad(t.azimuth_deg));
            let v = nearest(grid.velocity_axis(), t.speed_mps);
            let r = nearest(grid.range_axis(), t.range_m);
            let snap = Snap {
                target: i,
                angle_deg: rad_to_deg(a) - t.azimuth_deg,
                velocity_mps: v - t.speed_mps,
                range_m: r - t.range_m,
            };
            if !snap.is_exact() {
                warn!(
                    "target {i} is off grid; snapped by ({:.3e} deg, {:.3e} m/s, {:.3e} m)",
                    snap.angle_deg, snap.velocity_mps, snap.range_m
                );
            }
            snaps.push(snap);
            truth.push(Target::new(a, v, r).with_reflection(C64::new(t.reflection_re, t.reflection_im)));
        }
        Ok(Self {
            config,
            grid,
            truth,
            snaps,
        })
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.config.experiment.seed, stream_key(Stream::Trial, trial as u32, 0))
    }

    pub fn truth_cells(&self) -> Vec<GridPoint> {
        self.truth
            .iter()
            .map(|t| GridPoint::new(t.azimuth, t.radial_speed, t.initial_range))
            .collect()
    }

    /// Draws the geometry, waveform, compression matrices and carrier steps
    /// of one trial.
    pub fn build_setup(&self, seed: u64) -> Result<RadarSetup, HarnessError> {
        let c = &self.config;
        let s = &c.scenario;
        let stream = |tag, a| substream(seed, stream_key(tag, a, 0));
        let tx = place_nodes_uniform_disk(s.num_tx, s.disk_radius_m, &mut stream(Stream::TxPlacement, 0))?;
        let rx = place_nodes_uniform_disk(s.num_rx, s.disk_radius_m, &mut stream(Stream::RxPlacement, 0))?;
        let x = gen_orthogonal_qpsk(
            c.waveform.samples_per_pulse,
            s.num_tx,
            c.waveform.symbol_interval_s,
            &mut stream(Stream::Waveform, 0),
        )?;
        let phis = (0..s.num_rx)
            .map(|l| {
                gaussian_measurement_matrix(
                    s.compressed_len,
                    s.num_tx,
                    l,
                    &mut stream(Stream::Measurement, l as u32),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let schedule = PulseSchedule::with_constant_prefix(
            c.schedule.constant_pulses,
            c.schedule.mode()?,
            c.schedule.stepped_pulses,
            c.schedule.pulse_interval_s,
            s.carrier_hz,
            &mut stream(Stream::Schedule, 0),
        )?;
        let jammers = c
            .jammers
            .iter()
            .map(|j| Jammer::new(j.range_m, deg_to_rad(j.azimuth_deg), j.amplitude))
            .collect::<Result<Vec<_>, _>>()?;
        let noise = noise_power_for_snr(s.snr_db, x.sample_power());
        let scenario = Scenario::with_far_field_factor(
            tx,
            rx,
            self.truth.clone(),
            jammers,
            noise,
            s.carrier_hz,
            seed,
            s.far_field_factor,
        )?;
        Ok(RadarSetup::new(scenario, schedule, x, phis)?)
    }

    fn estimate(&self, setup: &RadarSetup) -> Result<EstimateSet, HarnessError> {
        let data = setup.synthesize()?;
        let est = match self.config.estimator.mode {
            EstimatorMode::Decoupled => run_decoupled(setup, &data, &self.config.decoupled())?,
            EstimatorMode::Joint => {
                let pulses: Vec<usize> = (0..setup.num_pulses()).collect();
                estimate_joint(
                    setup,
                    &data,
                    &self.grid,
                    &pulses,
                    &self.config.estimator.stages[0].into(),
                    &self.config.estimator.solve_options(),
                )?
            }
        };
        Ok(est)
    }

    /// One trial; estimator failures become part of the record.
    pub fn run_trial(&self, trial: usize) -> TrialRecord {
        let seed = self.trial_seed(trial);
        let mut rec = TrialRecord {
            trial,
            seed,
            error: None,
            detections: Vec::new(),
            stages: Vec::new(),
            complexity: None,
        };
        let est = self.build_setup(seed).and_then(|setup| self.estimate(&setup));
        match est {
            Ok(est) => {
                if let Some(last) = est.stages.last() {
                    rec.detections = last
                        .detections
                        .iter()
                        .map(|d| DetectionRecord {
                            cell: self.grid.flat_index(&d.point).ok(),
                            angle_deg: rad_to_deg(d.point.angle),
                            velocity_mps: d.point.velocity,
                            range_m: d.point.range,
                            amplitude_re: d.amplitude.re,
                            amplitude_im: d.amplitude.im,
                            magnitude: d.amplitude.norm(),
                        })
                        .collect();
                }
                rec.stages = est.stages.iter().map(StageRecord::from).collect();
                if self.config.estimator.mode == EstimatorMode::Decoupled {
                    rec.complexity = Some(ComplexityRecord::observed(&self.grid, &est));
                }
            }
            Err(e) => rec.error = Some(e.to_string()),
        }
        rec
    }

    /// All trials, in parallel; records come back in trial order.
    pub fn run(&self) -> Result<RunOutcome, HarnessError> {
        let trials = self.config.experiment.trials;
        info!("running {trials} trials");
        let work = || {
            (0..trials)
                .into_par_iter()
                .map(|i| self.run_trial(i))
                .collect::<Vec<_>>()
        };
        let records = match self.config.experiment.workers {
            0 => work(),
            n => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?
                .install(work),
        };
        let failed = records.iter().filter(|r| r.error.is_some()).count();
        if failed == trials {
            return Err(HarnessError::AllTrialsFailed(trials));
        }
        if failed > 0 {
            warn!("{failed}/{trials} trials failed");
        }
        let map = OccurrenceMap::accumulate(&self.grid, &self.truth_cells(), &records);
        Ok(RunOutcome { map, records })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    /// Flat index into the configured grid.
    pub cell: Option<usize>,
    pub angle_deg: f64,
    pub velocity_mps: f64,
    pub range_m: f64,
    pub amplitude_re: f64,
    pub amplitude_im: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub pulses: Vec<usize>,
    pub grid_size: usize,
    pub rows: usize,
    pub detections: usize,
    pub lambda: f64,
    pub iterations: usize,
    pub max_correlation: f64,
    pub l1_norm: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

impl From<&StageReport> for StageRecord {
    fn from(r: &StageReport) -> Self {
        Self {
            stage: r.stage.to_string(),
            pulses: r.pulses.clone(),
            grid_size: r.grid_size,
            rows: r.rows,
            detections: r.detections.len(),
            lambda: r.solver.lambda,
            iterations: r.solver.iterations,
            max_correlation: r.solver.max_correlation,
            l1_norm: r.solver.l1_norm,
            primal_residual: r.solver.primal_residual,
            dual_residual: r.solver.dual_residual,
            gap: r.solver.gap,
        }
    }
}

/// Inputs and outputs of the cubic cost model for one decoupled run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRecord {
    pub angle_cells: usize,
    pub velocity_cells: usize,
    pub range_cells: usize,
    pub angle_solves: usize,
    pub detected_angles: usize,
    pub detected_pairs: usize,
    pub joint: f64,
    pub decoupled: f64,
    pub ratio: f64,
}

impl ComplexityRecord {
    fn observed(grid: &ParamGrid, est: &EstimateSet) -> Self {
        let (na, nb, nc) = (
            grid.angle_axis().len(),
            grid.velocity_axis().len(),
            grid.range_axis().len(),
        );
        let a = est.stages.iter().filter(|s| s.stage == "angle").count();
        let (b, c) = (est.angles.len(), est.pairs.len());
        let cx = decoupled_complexity(na, nb, nc, a, b, c);
        Self {
            angle_cells: na,
            velocity_cells: nb,
            range_cells: nc,
            angle_solves: a,
            detected_angles: b,
            detected_pairs: c,
            joint: cx.joint,
            decoupled: cx.decoupled,
            ratio: cx.ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub error: Option<String>,
    pub detections: Vec<DetectionRecord>,
    pub stages: Vec<StageRecord>,
    pub complexity: Option<ComplexityRecord>,
}

impl TrialRecord {
    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.detections.iter().filter_map(|d| d.cell)
    }

    /// Every truth cell was detected.
    pub fn hits_all(&self, truth: &[usize]) -> bool {
        self.error.is_none() && truth.iter().all(|t| self.cells().any(|c| c == *t))
    }

    pub fn false_cells(&self, truth: &[usize]) -> usize {
        self.detections
            .iter()
            .filter(|d| d.cell.is_none_or(|c| !truth.contains(&c)))
            .count()
    }

    /// Share of the detected magnitude whose velocity is in `velocities`.
    pub fn magnitude_share(&self, velocities: &[f64]) -> f64 {
        let total: f64 = self.detections.iter().map(|d| d.magnitude).sum();
        if total == 0.0 {
            return 0.0;
        }
        let hit: f64 = self
            .detections
            .iter()
            .filter(|d| velocities.iter().any(|v| (v - d.velocity_mps).abs() < 1e-6))
            .map(|d| d.magnitude)
            .sum();
        hit / total
    }
}

/// Per-cell detection counts over all trials.
#[derive(Debug, Clone, PartialEq)]
pub struct OccurrenceMap {
    pub cells: Vec<GridPoint>,
    pub counts: Vec<u32>,
    pub truth: Vec<bool>,
    pub trials: usize,
}

impl OccurrenceMap {
    pub fn accumulate(grid: &ParamGrid, truth: &[GridPoint], records: &[TrialRecord]) -> Self {
        let cells: Vec<GridPoint> = grid.points().collect();
        let mut counts = vec![0u32; cells.len()];
        for rec in records {
            for c in rec.cells() {
                counts[c] += 1;
            }
        }
        let truth_idx: Vec<usize> = truth.iter().filter_map(|p| grid.flat_index(p).ok()).collect();
        let truth = (0..cells.len()).map(|n| truth_idx.contains(&n)).collect();
        Self {
            cells,
            counts,
            truth,
            trials: records.len(),
        }
    }

    pub fn truth_indices(&self) -> Vec<usize> {
        (0..self.cells.len()).filter(|&n| self.truth[n]).collect()
    }

    /// Counts summed over angle and range, per velocity.
    pub fn velocity_marginal(&self) -> Vec<(f64, u32)> {
        let mut out: Vec<(f64, u32)> = Vec::new();
        for (p, &c) in self.cells.iter().zip(&self.counts) {
            match out.iter_mut().find(|(v, _)| (*v - p.velocity).abs() < 1e-9) {
                Some(slot) => slot.1 += c,
                None => out.push((p.velocity, c)),
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub map: OccurrenceMap,
    pub records: Vec<TrialRecord>,
}

impl RunOutcome {
    pub fn failed(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }
}
