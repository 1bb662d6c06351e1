//! Counter-style random substreams.
//!
//! Every random draw in a simulation is taken from a ChaCha stream selected
//! by `(seed, stream key)`, so pulses, receivers and trials can be generated
//! in any order (or in parallel) and still reproduce bit for bit.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::C64;

pub type SimRng = ChaCha8Rng;

/// Purpose tags for stream keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Stream {
    TxPlacement = 1,
    RxPlacement = 2,
    Waveform = 3,
    Measurement = 4,
    Schedule = 5,
    ThermalNoise = 6,
    JammerWaveform = 7,
    Trial = 8,
}

/// Packs a purpose tag and two indices into a stream id.
pub fn stream_key(tag: Stream, a: u32, b: u32) -> u64 {
    ((tag as u64) << 56) | ((a as u64 & 0x00ff_ffff) << 32) | b as u64
}

pub fn substream(seed: u64, key: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

/// Derives an independent child seed, e.g. a per-trial seed from a master seed.
pub fn derive_seed(seed: u64, key: u64) -> u64 {
    substream(seed, key).next_u64()
}

/// Circular complex Gaussian sample with `E|z|^2 = power`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, power: f64) -> C64 {
    let scale = libm::sqrt(power / 2.0);
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * scale, im * scale)
}
