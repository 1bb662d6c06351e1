//! Network geometry, targets and jammers.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::C64;

/// Propagation speed used throughout the model (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Default far-field factor: targets must sit at least this many times
/// farther away than the outermost node.
pub const DEFAULT_FAR_FIELD_FACTOR: f64 = 100.0;

pub fn deg_to_rad(deg: f64) -> f64 {
    deg * PI / 180.0
}

pub fn rad_to_deg(rad: f64) -> f64 {
    rad * 180.0 / PI
}

fn wrap_azimuth(a: f64) -> f64 {
    let w = num_traits::Euclid::rem_euclid(&a, &(2.0 * PI));
    // rem_euclid may round up to exactly 2 pi
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

/// Antenna location in polar coordinates about the array center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarNode {
    radius: f64,
    azimuth: f64,
}

impl PolarNode {
    /// The azimuth is wrapped into `[0, 2 pi)`.
    pub fn new(radius: f64, azimuth: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(invalid("radius", "must be finite and non-negative"));
        }
        if !azimuth.is_finite() {
            return Err(invalid("azimuth", "must be finite"));
        }
        Ok(Self {
            radius,
            azimuth: wrap_azimuth(azimuth),
        })
    }

    pub fn origin() -> Self {
        Self {
            radius: 0.0,
            azimuth: 0.0,
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    /// Path-length advance of this node toward a far-field direction `theta`:
    /// `r cos(theta - alpha)`.
    pub fn eta(&self, theta: f64) -> f64 {
        self.radius * (theta - self.azimuth).cos()
    }
}

/// Free-function form of [`PolarNode::eta`].
pub fn eta(node: &PolarNode, theta: f64) -> f64 {
    node.eta(theta)
}

/// Places `count` nodes uniformly by area on a disk.
pub fn place_nodes_uniform_disk<R: Rng + ?Sized>(
    count: usize,
    disk_radius: f64,
    rng: &mut R,
) -> Result<Vec<PolarNode>> {
    if count == 0 {
        return Err(invalid("count", "at least one node is required"));
    }
    if !(disk_radius > 0.0) || !disk_radius.is_finite() {
        return Err(invalid("disk_radius", "must be positive"));
    }
    Ok((0..count)
        .map(|_| {
            let u: f64 = rng.gen();
            let azimuth = rng.gen::<f64>() * 2.0 * PI;
            PolarNode {
                radius: disk_radius * u.sqrt(),
                azimuth: wrap_azimuth(azimuth),
            }
        })
        .collect())
}

/// Point target moving at constant radial speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    /// Azimuth in radians.
    pub azimuth: f64,
    /// Radial speed in m/s, positive when closing.
    pub radial_speed: f64,
    /// Range at time zero in meters.
    pub initial_range: f64,
    pub reflection: C64,
}

impl Target {
    /// Target with unit reflection coefficient.
    pub fn new(azimuth: f64, radial_speed: f64, initial_range: f64) -> Self {
        Self {
            azimuth,
            radial_speed,
            initial_range,
            reflection: C64::new(1.0, 0.0),
        }
    }

    pub fn with_reflection(mut self, reflection: C64) -> Self {
        self.reflection = reflection;
        self
    }

    /// Doppler shift `2 v f / c` at carrier `carrier_hz`.
    pub fn doppler_hz(&self, carrier_hz: f64) -> f64 {
        2.0 * self.radial_speed * carrier_hz / SPEED_OF_LIGHT
    }

    /// Coefficient with the carrier-`f` range phase folded in:
    /// `beta e^{-j 4 pi d0 f / c}`. Under a constant carrier this is the
    /// amplitude a range-free dictionary recovers.
    pub fn absorbed_coefficient(&self, carrier_hz: f64) -> C64 {
        self.reflection * crate::linalg::phasor_cycles(-2.0 * self.initial_range * carrier_hz / SPEED_OF_LIGHT)
    }
}

/// Stationary noise jammer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jammer {
    pub range: f64,
    pub azimuth: f64,
    /// Amplitude relative to a transmit waveform.
    pub amplitude: f64,
}

impl Jammer {
    pub fn new(range: f64, azimuth: f64, amplitude: f64) -> Result<Self> {
        if !(amplitude >= 0.0) {
            return Err(invalid("jammer amplitude", "must be non-negative"));
        }
        Ok(Self {
            range,
            azimuth,
            amplitude,
        })
    }
}

/// Ground truth for one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub tx_nodes: Vec<PolarNode>,
    pub rx_nodes: Vec<PolarNode>,
    pub targets: Vec<Target>,
    pub jammers: Vec<Jammer>,
    /// Thermal noise power per fast-time sample.
    pub noise_power: f64,
    pub carrier_hz: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn new(
        tx_nodes: Vec<PolarNode>,
        rx_nodes: Vec<PolarNode>,
        targets: Vec<Target>,
        jammers: Vec<Jammer>,
        noise_power: f64,
        carrier_hz: f64,
        seed: u64,
    ) -> Result<Self> {
        Self::with_far_field_factor(
            tx_nodes,
            rx_nodes,
            targets,
            jammers,
            noise_power,
            carrier_hz,
            seed,
            DEFAULT_FAR_FIELD_FACTOR,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_far_field_factor(
        tx_nodes: Vec<PolarNode>,
        rx_nodes: Vec<PolarNode>,
        targets: Vec<Target>,
        jammers: Vec<Jammer>,
        noise_power: f64,
        carrier_hz: f64,
        seed: u64,
        far_field_factor: f64,
    ) -> Result<Self> {
        if tx_nodes.is_empty() {
            return Err(invalid("tx_nodes", "at least one transmitter is required"));
        }
        if rx_nodes.is_empty() {
            return Err(invalid("rx_nodes", "at least one receiver is required"));
        }
        if !(noise_power >= 0.0) {
            return Err(invalid("noise_power", "must be non-negative"));
        }
        if !(carrier_hz > 0.0) {
            return Err(invalid("carrier_hz", "must be positive"));
        }
        let scenario = Self {
            tx_nodes,
            rx_nodes,
            targets,
            jammers,
            noise_power,
            carrier_hz,
            seed,
        };
        let required = far_field_factor * scenario.max_node_radius();
        for t in &scenario.targets {
            if !(t.initial_range > 0.0) || t.initial_range < required {
                return Err(Error::FarField {
                    range_m: t.initial_range,
                    required_m: required,
                });
            }
        }
        Ok(scenario)
    }

    pub fn max_node_radius(&self) -> f64 {
        self.tx_nodes
            .iter()
            .chain(&self.rx_nodes)
            .map(PolarNode::radius)
            .fold(0.0, f64::max)
    }

    pub fn num_tx(&self) -> usize {
        self.tx_nodes.len()
    }

    pub fn num_rx(&self) -> usize {
        self.rx_nodes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn eta_examples() {
        let origin = PolarNode::new(0.0, 1.3).unwrap();
        assert_eq!(origin.eta(0.7), 0.0);
        let aligned = PolarNode::new(10.0, 0.0).unwrap();
        assert_abs_diff_eq!(aligned.eta(0.0), 10.0);

        // cartesian projection onto the unit direction of theta
        let node = PolarNode::new(10.0, PI / 3.0).unwrap();
        let theta = PI / 3.0 + PI / 2.0;
        let (x, y) = (10.0 * (PI / 3.0).cos(), 10.0 * (PI / 3.0).sin());
        let projected = x * theta.cos() + y * theta.sin();
        assert_abs_diff_eq!(eta(&node, theta), projected, epsilon = 1e-12);
        assert_abs_diff_eq!(eta(&node, theta), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn node_validation() {
        assert!(PolarNode::new(-1.0, 0.0).is_err());
        assert!(PolarNode::new(1.0, f64::NAN).is_err());
        let n = PolarNode::new(1.0, -PI / 2.0).unwrap();
        assert_abs_diff_eq!(n.azimuth(), 1.5 * PI, epsilon = 1e-15);
    }

    #[test]
    fn placement_respects_disk() {
        let nodes = place_nodes_uniform_disk(30, 10.0, &mut substream(1, 0)).unwrap();
        assert_eq!(nodes.len(), 30);
        assert!(nodes.iter().all(|n| n.radius() <= 10.0 && n.azimuth() < 2.0 * PI));

        let tiny = place_nodes_uniform_disk(1, 1e-12, &mut substream(1, 0)).unwrap();
        assert!(tiny[0].radius() <= 1e-12);

        let again = place_nodes_uniform_disk(30, 10.0, &mut substream(1, 0)).unwrap();
        assert_eq!(nodes, again);

        assert!(place_nodes_uniform_disk(0, 10.0, &mut substream(1, 0)).is_err());
        assert!(place_nodes_uniform_disk(3, 0.0, &mut substream(1, 0)).is_err());
        assert!(place_nodes_uniform_disk(3, -2.0, &mut substream(1, 0)).is_err());
    }

    #[test]
    fn placement_is_area_uniform() {
        let r = 10.0;
        let nodes = place_nodes_uniform_disk(100_000, r, &mut substream(42, 9)).unwrap();
        let inner = nodes.iter().filter(|n| n.radius() <= r / 2f64.sqrt()).count();
        let frac = inner as f64 / nodes.len() as f64;
        assert!((frac - 0.5).abs() <= 0.01, "{frac}");
    }

    #[test]
    fn scenario_enforces_far_field() {
        let nodes = place_nodes_uniform_disk(4, 10.0, &mut substream(2, 0)).unwrap();
        let near = Target::new(0.0, 0.0, 50.0);
        let err = Scenario::new(
            nodes.clone(),
            nodes.clone(),
            alloc::vec![near],
            alloc::vec![],
            0.0,
            5e9,
            0,
        );
        assert!(matches!(err, Err(Error::FarField { .. })));
        let far = Target::new(0.0, 0.0, 1500.0);
        assert!(Scenario::new(
            nodes.clone(),
            nodes.clone(),
            alloc::vec![far],
            alloc::vec![],
            0.0,
            5e9,
            0
        )
        .is_ok());
        assert!(Scenario::new(alloc::vec![], nodes, alloc::vec![], alloc::vec![], 0.0, 5e9, 0).is_err());
        assert!(Jammer::new(1e4, 0.1, -1.0).is_err());
    }

    #[test]
    fn default_reflection_is_one() {
        assert_eq!(Target::new(0.0, 1.0, 1e3).reflection, C64::new(1.0, 0.0));
    }

    proptest! {
        #[test]
        fn eta_bounded_by_radius(r in 0.0f64..50.0, a in 0.0f64..core::f64::consts::TAU, th in -20.0f64..20.0) {
            let n = PolarNode::new(r, a).unwrap();
            prop_assert!(n.eta(th).abs() <= r + 1e-12);
        }

        #[test]
        fn eta_is_periodic(r in 0.0f64..50.0, a in 0.0f64..core::f64::consts::TAU, th in -5.0f64..5.0) {
            let n = PolarNode::new(r, a).unwrap();
            prop_assert!((n.eta(th) - n.eta(th + 2.0 * PI)).abs() < 1e-9);
        }
    }
}
