//! Received-signal synthesis.
//!
//! The compressed baseband samples of receiver `l` during pulse `m` are
//!
//! ```text
//! r_lm = sum_k beta_k e^{j 2 pi p_lmk} Phi_l X^H D(f_mk) X v_m(theta_k) + y_lm
//! p_lmk = -2 d_k f_m / c + eta_l(theta_k) f_m / c + f_mk m T
//! ```
//!
//! with `f_m` the carrier of pulse `m` and `f_mk = 2 v_k f_m / c`. The range
//! term is kept explicit for every schedule; with a constant carrier it is
//! the same unit scalar for all `(l, m)` and is indistinguishable from a
//! rotation of `beta_k`. `y_lm` collects jammers and thermal noise, both
//! passed through `Phi_l X^H`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{axpy, cdot, phasor_cycles, CMatrix, C64, ZERO};
use crate::rng::{complex_gaussian, stream_key, substream, Stream};
use crate::scene::{PolarNode, Scenario, Target, SPEED_OF_LIGHT};
use crate::waveform::{PulseSchedule, WaveformMatrix};

/// Random compression matrix of one receive node (`M x Mt`).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    entries: CMatrix,
    rx_index: usize,
}

impl MeasurementMatrix {
    pub fn from_matrix(entries: CMatrix, rx_index: usize) -> Result<Self> {
        if entries.rows() > entries.cols() {
            return Err(invalid("measurement matrix", "needs M <= Mt"));
        }
        Ok(Self { entries, rx_index })
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn rx_index(&self) -> usize {
        self.rx_index
    }

    /// `M`
    pub fn compressed_len(&self) -> usize {
        self.entries.rows()
    }
}

/// i.i.d. real `N(0, 1/M)` entries.
pub fn gaussian_measurement_matrix<R: Rng + ?Sized>(
    m: usize,
    num_tx: usize,
    rx_index: usize,
    rng: &mut R,
) -> Result<MeasurementMatrix> {
    if m == 0 || m > num_tx {
        return Err(invalid("M", "requires 1 <= M <= Mt"));
    }
    let sd = 1.0 / (m as f64).sqrt();
    let entries = CMatrix::from_fn(m, num_tx, |_, _| {
        let g: f64 = rng.sample(rand_distr::StandardNormal);
        C64::new(g * sd, 0.0)
    });
    Ok(MeasurementMatrix { entries, rx_index })
}

/// Diagonal of `D(f) = diag(e^{j 2 pi f l Ts})`, `l = 0..L`.
pub fn doppler_matrix(doppler_hz: f64, samples: usize, symbol_interval: f64) -> Vec<C64> {
    (0..samples)
        .map(|l| phasor_cycles(doppler_hz * l as f64 * symbol_interval))
        .collect()
}

/// Transmit steering vector `v_m(theta)` at carrier `carrier_hz`.
pub fn steering_vector(carrier_hz: f64, tx_nodes: &[PolarNode], theta: f64) -> Vec<C64> {
    tx_nodes
        .iter()
        .map(|n| phasor_cycles(carrier_hz * n.eta(theta) / SPEED_OF_LIGHT))
        .collect()
}

/// Inter-pulse Doppler phasors `e^{j 2 pi f_mk m T}` of one target.
pub fn interpulse_phases(target: &Target, schedule: &PulseSchedule) -> Vec<C64> {
    (0..schedule.pulse_count())
        .map(|m| {
            let f_mk = target.doppler_hz(schedule.carrier_of(m));
            phasor_cycles(f_mk * m as f64 * schedule.pulse_interval())
        })
        .collect()
}

/// Thermal noise power per sample for a given SNR, where the SNR compares
/// the per-sample transmit power with the noise power.
pub fn noise_power_for_snr(snr_db: f64, sample_power: f64) -> f64 {
    sample_power / 10f64.powf(snr_db / 10.0)
}

/// Compressed samples of receiver `l` during pulse `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseMeasurement {
    pub rx_index: usize,
    pub pulse_index: usize,
    pub samples: Vec<C64>,
}

/// Everything the fusion center knows about the sensing hardware, plus the
/// ground-truth scene used to synthesize data.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarSetup {
    pub scenario: Scenario,
    pub schedule: PulseSchedule,
    pub waveform: WaveformMatrix,
    pub phis: Vec<MeasurementMatrix>,
}

impl RadarSetup {
    pub fn new(
        scenario: Scenario,
        schedule: PulseSchedule,
        waveform: WaveformMatrix,
        phis: Vec<MeasurementMatrix>,
    ) -> Result<Self> {
        if waveform.num_tx() != scenario.num_tx() {
            return Err(Error::DimensionMismatch {
                context: "waveform columns vs transmitters",
                expected: scenario.num_tx(),
                actual: waveform.num_tx(),
            });
        }
        if phis.len() != scenario.num_rx() {
            return Err(Error::DimensionMismatch {
                context: "measurement matrices vs receivers",
                expected: scenario.num_rx(),
                actual: phis.len(),
            });
        }
        let m = phis[0].compressed_len();
        for (l, phi) in phis.iter().enumerate() {
            if phi.entries().cols() != scenario.num_tx() || phi.compressed_len() != m {
                return Err(Error::DimensionMismatch {
                    context: "measurement matrix shape",
                    expected: scenario.num_tx(),
                    actual: phi.entries().cols(),
                });
            }
            if phi.rx_index() != l {
                return Err(invalid("measurement matrix", "rx_index does not match position"));
            }
        }
        if schedule.base_carrier() != scenario.carrier_hz {
            return Err(invalid("schedule", "base carrier differs from the scenario carrier"));
        }
        Ok(Self {
            scenario,
            schedule,
            waveform,
            phis,
        })
    }

    pub fn num_rx(&self) -> usize {
        self.phis.len()
    }

    pub fn num_pulses(&self) -> usize {
        self.schedule.pulse_count()
    }

    /// `M`
    pub fn compressed_len(&self) -> usize {
        self.phis[0].compressed_len()
    }

    fn check_indices(&self, l: usize, m: usize) -> Result<()> {
        if l >= self.num_rx() {
            return Err(Error::IndexOutOfRange {
                context: "receiver",
                index: l,
                len: self.num_rx(),
            });
        }
        if m >= self.num_pulses() {
            return Err(Error::IndexOutOfRange {
                context: "pulse",
                index: m,
                len: self.num_pulses(),
            });
        }
        Ok(())
    }

    /// `Phi_l X^H y` for a fast-time vector `y` of length `L`.
    pub fn compress(&self, l: usize, fast_time: &[C64]) -> Vec<C64> {
        let x = self.waveform.entries();
        let z: Vec<C64> = (0..x.cols()).map(|i| cdot(x.column(i), fast_time)).collect();
        self.phis[l].entries().mul_vec(&z)
    }

    /// Noiseless contribution of one target to `r_lm`.
    pub fn target_response(&self, target: &Target, l: usize, m: usize) -> Result<Vec<C64>> {
        self.check_indices(l, m)?;
        let f_m = self.schedule.carrier_of(m);
        let doppler = target.doppler_hz(f_m);
        let steer = steering_vector(f_m, &self.scenario.tx_nodes, target.azimuth);
        let mut fast = self.waveform.entries().mul_vec(&steer);
        let ts = self.waveform.symbol_interval();
        for (i, s) in fast.iter_mut().enumerate() {
            *s *= phasor_cycles(doppler * i as f64 * ts);
        }
        let phase = -2.0 * target.initial_range * f_m / SPEED_OF_LIGHT
            + self.scenario.rx_nodes[l].eta(target.azimuth) * f_m / SPEED_OF_LIGHT
            + doppler * m as f64 * self.schedule.pulse_interval();
        let gain = target.reflection * phasor_cycles(phase);
        let mut out = self.compress(l, &fast);
        for v in out.iter_mut() {
            *v *= gain;
        }
        Ok(out)
    }

    /// Jammer-plus-noise term `y_lm` in fast time (before compression).
    fn interference_fast_time(&self, l: usize, m: usize) -> Vec<C64> {
        let len = self.waveform.samples_per_pulse();
        let mut y = vec![ZERO; len];
        let seed = self.scenario.seed;
        let f_m = self.schedule.carrier_of(m);
        let p_x = self.waveform.sample_power();
        for (j, jammer) in self.scenario.jammers.iter().enumerate() {
            if jammer.amplitude == 0.0 {
                continue;
            }
            // the jammer waveform is shared by all receivers
            let mut rng = substream(seed, stream_key(Stream::JammerWaveform, j as u32, m as u32));
            let phase = -(jammer.range - self.scenario.rx_nodes[l].eta(jammer.azimuth)) * f_m / SPEED_OF_LIGHT;
            let gain = phasor_cycles(phase) * jammer.amplitude;
            for s in y.iter_mut() {
                *s += gain * complex_gaussian(&mut rng, p_x);
            }
        }
        if self.scenario.noise_power > 0.0 {
            let mut rng = substream(seed, stream_key(Stream::ThermalNoise, l as u32, m as u32));
            for s in y.iter_mut() {
                *s += complex_gaussian(&mut rng, self.scenario.noise_power);
            }
        }
        y
    }

    /// Synthesizes `r_lm` including jammers and noise. Randomness comes from
    /// substreams keyed by `(scenario.seed, l, m)`, so pulses may be generated
    /// in any order.
    pub fn synthesize_pulse(&self, l: usize, m: usize) -> Result<PulseMeasurement> {
        self.check_indices(l, m)?;
        let mut samples = self.synthesize_noiseless(l, m)?;
        let has_interference =
            self.scenario.noise_power > 0.0 || self.scenario.jammers.iter().any(|j| j.amplitude > 0.0);
        if has_interference {
            let y = self.compress(l, &self.interference_fast_time(l, m));
            axpy(C64::new(1.0, 0.0), &y, &mut samples);
        }
        Ok(PulseMeasurement {
            rx_index: l,
            pulse_index: m,
            samples,
        })
    }

    /// Target returns only.
    pub fn synthesize_noiseless(&self, l: usize, m: usize) -> Result<Vec<C64>> {
        self.check_indices(l, m)?;
        let mut samples = vec![ZERO; self.compressed_len()];
        for t in &self.scenario.targets {
            let resp = self.target_response(t, l, m)?;
            axpy(C64::new(1.0, 0.0), &resp, &mut samples);
        }
        Ok(samples)
    }

    /// All receivers and pulses, fused in receiver-major order.
    pub fn synthesize(&self) -> Result<FusedMeasurements> {
        let mut samples = Vec::with_capacity(self.num_rx() * self.num_pulses() * self.compressed_len());
        for l in 0..self.num_rx() {
            for m in 0..self.num_pulses() {
                samples.extend(self.synthesize_pulse(l, m)?.samples);
            }
        }
        Ok(FusedMeasurements {
            num_rx: self.num_rx(),
            pulses: (0..self.num_pulses()).collect(),
            compressed_len: self.compressed_len(),
            samples,
        })
    }

    /// Noiseless counterpart of [`RadarSetup::synthesize`].
    pub fn synthesize_clean(&self) -> Result<FusedMeasurements> {
        let mut samples = Vec::with_capacity(self.num_rx() * self.num_pulses() * self.compressed_len());
        for l in 0..self.num_rx() {
            for m in 0..self.num_pulses() {
                samples.extend(self.synthesize_noiseless(l, m)?);
            }
        }
        Ok(FusedMeasurements {
            num_rx: self.num_rx(),
            pulses: (0..self.num_pulses()).collect(),
            compressed_len: self.compressed_len(),
            samples,
        })
    }

    /// Expected power of the jammer-plus-noise term in one compressed sample.
    pub fn interference_power(&self) -> f64 {
        let jam: f64 = self
            .scenario
            .jammers
            .iter()
            .map(|j| j.amplitude * j.amplitude * self.waveform.sample_power())
            .sum();
        let mt = self.scenario.num_tx() as f64;
        let m = self.compressed_len() as f64;
        mt / m * (self.scenario.noise_power + jam)
    }

    /// Largest intra-pulse Doppler excursion `|f_mk| Ts L` over targets and
    /// pulses. The slow-target approximation wants this well below 0.1.
    pub fn intrapulse_doppler_cycles(&self) -> f64 {
        let dur = self.waveform.pulse_duration();
        let mut worst: f64 = 0.0;
        for t in &self.scenario.targets {
            for m in 0..self.num_pulses() {
                worst = worst.max(t.doppler_hz(self.schedule.carrier_of(m)).abs() * dur);
            }
        }
        worst
    }
}

/// Threshold of the slow-target advisory on `|f_mk| Ts L`.
pub const SLOW_TARGET_LIMIT: f64 = 0.1;

/// Fused data vector: blocks `r_lm` stacked receiver-major, pulses in the
/// order of `pulses`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedMeasurements {
    pub num_rx: usize,
    pub pulses: Vec<usize>,
    pub compressed_len: usize,
    pub samples: Vec<C64>,
}

impl FusedMeasurements {
    pub fn block(&self, l: usize, pulse: usize) -> Option<&[C64]> {
        let pos = self.pulses.iter().position(|p| *p == pulse)?;
        let start = (l * self.pulses.len() + pos) * self.compressed_len;
        self.samples.get(start..start + self.compressed_len)
    }

    /// Restacks the data for a pulse subset, receiver-major.
    pub fn select_pulses(&self, pulses: &[usize]) -> Result<Vec<C64>> {
        let mut out = Vec::with_capacity(self.num_rx * pulses.len() * self.compressed_len);
        for l in 0..self.num_rx {
            for &p in pulses {
                let block = self.block(l, p).ok_or(Error::IndexOutOfRange {
                    context: "fused pulse",
                    index: p,
                    len: self.pulses.len(),
                })?;
                out.extend_from_slice(block);
            }
        }
        Ok(out)
    }
}
