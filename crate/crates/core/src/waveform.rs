//! Transmit waveforms and carrier step schedules.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_4;
#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::linalg::{CMatrix, C64};

/// Orthonormal transmit waveforms: column `i` is the fast-time code of
/// transmitter `i`, and `X^H X = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformMatrix {
    entries: CMatrix,
    symbol_interval: f64,
}

impl WaveformMatrix {
    /// Wraps an existing matrix after checking orthonormality to 1e-10.
    pub fn from_matrix(entries: CMatrix, symbol_interval: f64) -> Result<Self> {
        if entries.rows() < entries.cols() {
            return Err(invalid("waveform", "needs at least as many samples as transmitters"));
        }
        if !(symbol_interval > 0.0) {
            return Err(invalid("symbol_interval", "must be positive"));
        }
        if entries.gram().max_deviation_from_identity() > 1e-10 {
            return Err(invalid("waveform", "columns are not orthonormal"));
        }
        Ok(Self {
            entries,
            symbol_interval,
        })
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    /// `L`, the fast-time samples per pulse.
    pub fn samples_per_pulse(&self) -> usize {
        self.entries.rows()
    }

    pub fn num_tx(&self) -> usize {
        self.entries.cols()
    }

    /// `T_s`, seconds between fast-time samples.
    pub fn symbol_interval(&self) -> f64 {
        self.symbol_interval
    }

    pub fn pulse_duration(&self) -> f64 {
        self.symbol_interval * self.samples_per_pulse() as f64
    }

    /// Per-sample power of one transmit column, `1/L`.
    pub fn sample_power(&self) -> f64 {
        1.0 / self.samples_per_pulse() as f64
    }

    /// `max |X^H X - I|`
    pub fn orthogonality_error(&self) -> f64 {
        self.entries.gram().max_deviation_from_identity()
    }
}

/// Draws QPSK codes (scaled by `1/sqrt(L)`) for `num_tx` transmitters and
/// orthonormalizes them.
pub fn gen_orthogonal_qpsk<R: Rng + ?Sized>(
    samples_per_pulse: usize,
    num_tx: usize,
    symbol_interval: f64,
    rng: &mut R,
) -> Result<WaveformMatrix> {
    if num_tx == 0 {
        return Err(invalid("num_tx", "at least one transmitter is required"));
    }
    if samples_per_pulse < num_tx {
        return Err(invalid(
            "samples_per_pulse",
            "must be at least the number of transmitters",
        ));
    }
    if !(symbol_interval > 0.0) {
        return Err(invalid("symbol_interval", "must be positive"));
    }
    let scale = 1.0 / (samples_per_pulse as f64).sqrt();
    // A random QPSK matrix can be rank deficient for tiny sizes; redraw.
    for _ in 0..64 {
        let mut m = CMatrix::from_fn(samples_per_pulse, num_tx, |_, _| {
            let k: u8 = rng.gen_range(0..4);
            C64::from_polar(scale, FRAC_PI_4 * (2 * k + 1) as f64)
        });
        if m.orthonormalize_columns() {
            return Ok(WaveformMatrix {
                entries: m,
                symbol_interval,
            });
        }
    }
    Err(invalid("waveform", "could not draw a full-rank QPSK matrix"))
}

/// How carrier steps `Delta f_m` are generated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepMode {
    Constant,
    /// `Delta f_m = (m - 1) step`
    Linear {
        step: f64,
    },
    /// `Delta f_m ~ U[min, max]`
    Random {
        min: f64,
        max: f64,
    },
}

impl StepMode {
    fn validate(&self, count: usize) -> Result<()> {
        match *self {
            StepMode::Constant => Ok(()),
            StepMode::Linear { step } => {
                if !(step > 0.0) {
                    return Err(invalid("linear step", "must be positive"));
                }
                if step * count.saturating_sub(1) as f64 >= 1.0 {
                    return Err(invalid("linear step", "largest step must stay below 1"));
                }
                Ok(())
            }
            StepMode::Random { min, max } => {
                if !(0.0 < min && min < max && max < 1.0) {
                    return Err(invalid("random step range", "requires 0 < min < max < 1"));
                }
                Ok(())
            }
        }
    }

    fn draw<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        match *self {
            StepMode::Constant => alloc::vec![0.0; count],
            StepMode::Linear { step } => (0..count).map(|i| i as f64 * step).collect(),
            StepMode::Random { min, max } => (0..count).map(|_| rng.gen_range(min..=max)).collect(),
        }
    }
}

/// Pulse train: carrier of pulse `m` is `f (1 + Delta f_m)`.
///
/// An optional block of constant-carrier pulses may precede the stepped
/// pulses; the decoupled estimator needs both.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSchedule {
    pulse_interval: f64,
    carrier_hz: f64,
    steps: Vec<f64>,
    mode: StepMode,
    constant_prefix: usize,
}

/// Builds an `Np`-pulse schedule of a single mode.
pub fn make_schedule<R: Rng + ?Sized>(
    mode: StepMode,
    pulse_count: usize,
    pulse_interval: f64,
    carrier_hz: f64,
    rng: &mut R,
) -> Result<PulseSchedule> {
    PulseSchedule::with_constant_prefix(0, mode, pulse_count, pulse_interval, carrier_hz, rng)
}

impl PulseSchedule {
    /// `constant_prefix` constant-carrier pulses followed by `stepped_count`
    /// pulses whose steps follow `mode`.
    pub fn with_constant_prefix<R: Rng + ?Sized>(
        constant_prefix: usize,
        mode: StepMode,
        stepped_count: usize,
        pulse_interval: f64,
        carrier_hz: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if constant_prefix + stepped_count == 0 {
            return Err(invalid("pulse_count", "at least one pulse is required"));
        }
        if !(pulse_interval > 0.0) {
            return Err(invalid("pulse_interval", "must be positive"));
        }
        if !(carrier_hz > 0.0) {
            return Err(invalid("carrier_hz", "must be positive"));
        }
        mode.validate(stepped_count)?;
        let mut steps = alloc::vec![0.0; constant_prefix];
        steps.extend(mode.draw(stepped_count, rng));
        Ok(Self {
            pulse_interval,
            carrier_hz,
            steps,
            mode,
            constant_prefix,
        })
    }

    /// Schedule from explicit steps, e.g. for analysis of a hand-picked
    /// sequence. The mode is recorded as given.
    pub fn from_steps(steps: Vec<f64>, mode: StepMode, pulse_interval: f64, carrier_hz: f64) -> Result<Self> {
        if steps.is_empty() {
            return Err(invalid("steps", "at least one pulse is required"));
        }
        if steps.iter().any(|s| !(0.0..1.0).contains(s)) {
            return Err(invalid("steps", "every step must lie in [0, 1)"));
        }
        if !(pulse_interval > 0.0) || !(carrier_hz > 0.0) {
            return Err(invalid("schedule", "interval and carrier must be positive"));
        }
        Ok(Self {
            pulse_interval,
            carrier_hz,
            steps,
            mode,
            constant_prefix: 0,
        })
    }

    pub fn pulse_count(&self) -> usize {
        self.steps.len()
    }

    pub fn pulse_interval(&self) -> f64 {
        self.pulse_interval
    }

    pub fn base_carrier(&self) -> f64 {
        self.carrier_hz
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn mode(&self) -> StepMode {
        self.mode
    }

    pub fn constant_prefix(&self) -> usize {
        self.constant_prefix
    }

    /// Carrier of pulse `m` (0-based).
    pub fn carrier_of(&self, m: usize) -> f64 {
        self.carrier_hz * (1.0 + self.steps[m])
    }

    /// True when every pulse uses the base carrier.
    pub fn is_constant(&self) -> bool {
        self.steps.iter().all(|s| *s == 0.0)
    }

    /// The first `n` pulses as a schedule of their own.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.steps.len()).max(1);
        let steps = self.steps[..n].to_vec();
        let mode = if steps.iter().all(|s| *s == 0.0) {
            StepMode::Constant
        } else {
            self.mode
        };
        Self {
            pulse_interval: self.pulse_interval,
            carrier_hz: self.carrier_hz,
            constant_prefix: self.constant_prefix.min(n),
            steps,
            mode,
        }
    }

    /// Number of distinct carriers among `pulses`.
    pub fn distinct_carriers(&self, pulses: &[usize]) -> usize {
        let mut seen: Vec<f64> = Vec::new();
        for &m in pulses {
            let s = self.steps[m];
            if !seen.contains(&s) {
                seen.push(s);
            }
        }
        seen.len()
    }
}
