//! Parameter grids and the stacked sensing dictionary.
//!
//! Column `n` of the dictionary is the noiseless fused response of a unit
//! target at grid point `(a_n, b_n, c_n)`. Block `(l, m)` of that column is
//!
//! ```text
//! e^{j 2 pi q_lmn} Phi_l X^H D(2 b_n f_m / c) X v_m(a_n)
//! q_lmn = -2 c_n f_m / c + eta_l(a_n) f_m / c + 2 b_n f_m m T / c
//! ```
//!
//! Blocks are stacked receiver-major, pulses in the order requested.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::{cdot, norm2, phasor_cycles, CMatrix, C64, ZERO};
use crate::scene::SPEED_OF_LIGHT;
use crate::synth::{steering_vector, RadarSetup};

/// One cell of the angle-velocity-range space (radians, m/s, meters).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GridPoint {
    pub angle: f64,
    pub velocity: f64,
    pub range: f64,
}

impl GridPoint {
    pub fn new(angle: f64, velocity: f64, range: f64) -> Self {
        Self { angle, velocity, range }
    }
}

/// Which dimensions are swept by axes; the rest come from anchors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActiveDims {
    pub angle: bool,
    pub velocity: bool,
    pub range: bool,
}

impl ActiveDims {
    pub const ALL: Self = Self {
        angle: true,
        velocity: true,
        range: true,
    };
}

/// `count` points `start + i * step`.
pub fn uniform_axis(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start + i as f64 * step).collect()
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn axis_position(axis: &[f64], value: f64) -> Option<usize> {
    let i = axis.partition_point(|x| *x < value);
    [i.wrapping_sub(1), i]
        .into_iter()
        .filter(|&k| k < axis.len())
        .find(|&k| same(axis[k], value))
}

/// Discretized parameter space.
///
/// A grid is a list of anchor points crossed with the axes of its active
/// dimensions. A full joint grid has one anchor and all three dimensions
/// active; the restricted grids of the decoupled estimator sweep one axis
/// over the estimates of the previous stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    anchors: Vec<GridPoint>,
    active: ActiveDims,
    angles: Vec<f64>,
    velocities: Vec<f64>,
    ranges: Vec<f64>,
}

impl ParamGrid {
    pub fn new(
        anchors: Vec<GridPoint>,
        active: ActiveDims,
        angles: Vec<f64>,
        velocities: Vec<f64>,
        ranges: Vec<f64>,
    ) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::EmptyGrid);
        }
        for (on, axis) in [
            (active.angle, &angles),
            (active.velocity, &velocities),
            (active.range, &ranges),
        ] {
            if on {
                if axis.is_empty() {
                    return Err(Error::EmptyGrid);
                }
                if axis.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(invalid("grid axis", "must be strictly increasing"));
                }
            } else if !axis.is_empty() {
                return Err(invalid(
                    "grid axis",
                    "inactive dimensions take their values from anchors",
                ));
            }
        }
        let grid = Self {
            anchors,
            active,
            angles,
            velocities,
            ranges,
        };
        for (i, a) in grid.anchors.iter().enumerate() {
            if grid.anchors[..i].iter().any(|b| grid.anchor_matches(b, a)) {
                return Err(invalid("grid anchors", "duplicate anchor"));
            }
        }
        Ok(grid)
    }

    /// Full product grid over all three axes.
    pub fn product(angles: Vec<f64>, velocities: Vec<f64>, ranges: Vec<f64>) -> Result<Self> {
        Self::new(
            alloc::vec![GridPoint::default()],
            ActiveDims::ALL,
            angles,
            velocities,
            ranges,
        )
    }

    /// Angle axis with fixed velocity and range.
    pub fn angles_only(angles: Vec<f64>, velocity: f64, range: f64) -> Result<Self> {
        Self::new(
            alloc::vec![GridPoint::new(0.0, velocity, range)],
            ActiveDims {
                angle: true,
                velocity: false,
                range: false,
            },
            angles,
            Vec::new(),
            Vec::new(),
        )
    }

    /// Each angle crossed with the velocity axis at a fixed range.
    pub fn velocity_over(angles: &[f64], velocities: Vec<f64>, range: f64) -> Result<Self> {
        let anchors = angles.iter().map(|a| GridPoint::new(*a, 0.0, range)).collect();
        Self::new(
            anchors,
            ActiveDims {
                angle: false,
                velocity: true,
                range: false,
            },
            Vec::new(),
            velocities,
            Vec::new(),
        )
    }

    /// Each (angle, velocity) pair crossed with the range axis.
    pub fn range_over(pairs: &[(f64, f64)], ranges: Vec<f64>) -> Result<Self> {
        let anchors = pairs.iter().map(|(a, b)| GridPoint::new(*a, *b, 0.0)).collect();
        Self::new(
            anchors,
            ActiveDims {
                angle: false,
                velocity: false,
                range: true,
            },
            Vec::new(),
            Vec::new(),
            ranges,
        )
    }

    pub fn active(&self) -> ActiveDims {
        self.active
    }

    pub fn anchors(&self) -> &[GridPoint] {
        &self.anchors
    }

    pub fn angle_axis(&self) -> &[f64] {
        &self.angles
    }

    pub fn velocity_axis(&self) -> &[f64] {
        &self.velocities
    }

    pub fn range_axis(&self) -> &[f64] {
        &self.ranges
    }

    fn dim_len(&self, on: bool, axis: &[f64]) -> usize {
        if on {
            axis.len()
        } else {
            1
        }
    }

    fn block_len(&self) -> usize {
        self.dim_len(self.active.angle, &self.angles)
            * self.dim_len(self.active.velocity, &self.velocities)
            * self.dim_len(self.active.range, &self.ranges)
    }

    /// Number of grid points `N`.
    pub fn len(&self) -> usize {
        self.anchors.len() * self.block_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn anchor_matches(&self, anchor: &GridPoint, p: &GridPoint) -> bool {
        (self.active.angle || same(anchor.angle, p.angle))
            && (self.active.velocity || same(anchor.velocity, p.velocity))
            && (self.active.range || same(anchor.range, p.range))
    }

    /// Grid point of flat index `n`.
    pub fn point(&self, n: usize) -> Result<GridPoint> {
        if n >= self.len() {
            return Err(Error::IndexOutOfRange {
                context: "grid",
                index: n,
                len: self.len(),
            });
        }
        let block = self.block_len();
        let mut p = self.anchors[n / block];
        let mut rest = n % block;
        let nr = self.dim_len(self.active.range, &self.ranges);
        let nv = self.dim_len(self.active.velocity, &self.velocities);
        if self.active.range {
            p.range = self.ranges[rest % nr];
        }
        rest /= nr;
        if self.active.velocity {
            p.velocity = self.velocities[rest % nv];
        }
        rest /= nv;
        if self.active.angle {
            p.angle = self.angles[rest];
        }
        Ok(p)
    }

    /// Flat index of an on-grid point.
    pub fn flat_index(&self, p: &GridPoint) -> Result<usize> {
        let off = || Error::OffGrid {
            angle: p.angle,
            velocity: p.velocity,
            range: p.range,
        };
        let anchor = self
            .anchors
            .iter()
            .position(|a| self.anchor_matches(a, p))
            .ok_or_else(off)?;
        let find = |on: bool, axis: &[f64], v: f64| -> Option<usize> {
            if on {
                axis_position(axis, v)
            } else {
                Some(0)
            }
        };
        let ia = find(self.active.angle, &self.angles, p.angle).ok_or_else(off)?;
        let iv = find(self.active.velocity, &self.velocities, p.velocity).ok_or_else(off)?;
        let ir = find(self.active.range, &self.ranges, p.range).ok_or_else(off)?;
        let nv = self.dim_len(self.active.velocity, &self.velocities);
        let nr = self.dim_len(self.active.range, &self.ranges);
        Ok(anchor * self.block_len() + (ia * nv + iv) * nr + ir)
    }

    pub fn points(&self) -> impl Iterator<Item = GridPoint> + '_ {
        (0..self.len()).map(move |n| self.point(n).expect("index in range"))
    }
}

/// Dictionary column block `(l, m)` for one grid point, computed directly.
pub fn basis_column(point: &GridPoint, l: usize, m: usize, setup: &RadarSetup) -> Result<Vec<C64>> {
    if l >= setup.num_rx() || m >= setup.num_pulses() {
        return Err(Error::IndexOutOfRange {
            context: "basis block",
            index: if l >= setup.num_rx() { l } else { m },
            len: if l >= setup.num_rx() {
                setup.num_rx()
            } else {
                setup.num_pulses()
            },
        });
    }
    let f_m = setup.schedule.carrier_of(m);
    let g = doppler_gram(setup, 2.0 * point.velocity * f_m / SPEED_OF_LIGHT);
    let steer = steering_vector(f_m, &setup.scenario.tx_nodes, point.angle);
    let w = g.mul_vec(&steer);
    let mut col = setup.phis[l].entries().mul_vec(&w);
    let phase = phasor_cycles(basis_phase(point, l, m, setup));
    for z in col.iter_mut() {
        *z *= phase;
    }
    Ok(col)
}

/// `q_lmn` in cycles.
fn basis_phase(point: &GridPoint, l: usize, m: usize, setup: &RadarSetup) -> f64 {
    let f_m = setup.schedule.carrier_of(m);
    let rx = &setup.scenario.rx_nodes[l];
    -2.0 * point.range * f_m / SPEED_OF_LIGHT
        + rx.eta(point.angle) * f_m / SPEED_OF_LIGHT
        + 2.0 * point.velocity * f_m * m as f64 * setup.schedule.pulse_interval() / SPEED_OF_LIGHT
}

/// `X^H D(f) X`, an `Mt x Mt` matrix.
fn doppler_gram(setup: &RadarSetup, doppler_hz: f64) -> CMatrix {
    let x = setup.waveform.entries();
    let ts = setup.waveform.symbol_interval();
    let d: Vec<C64> = (0..x.rows())
        .map(|i| phasor_cycles(doppler_hz * i as f64 * ts))
        .collect();
    let mt = x.cols();
    let mut dx = x.clone();
    for j in 0..mt {
        for (z, di) in dx.column_mut(j).iter_mut().zip(&d) {
            *z *= di;
        }
    }
    x.adjoint_mul(&dx)
}

/// Linear map from grid coefficients to fused measurements.
pub trait SensingOperator {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn column(&self, n: usize) -> Vec<C64>;

    /// `Theta s`
    fn apply(&self, s: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.rows()];
        for (n, sn) in s.iter().enumerate() {
            if *sn != ZERO {
                crate::linalg::axpy(*sn, &self.column(n), &mut out);
            }
        }
        out
    }

    /// `Theta^H r`
    fn apply_adjoint(&self, r: &[C64]) -> Vec<C64> {
        (0..self.cols()).map(|n| cdot(&self.column(n), r)).collect()
    }

    /// `Theta^H Theta`
    fn gram(&self) -> CMatrix {
        let n = self.cols();
        let mut g = CMatrix::zeros(n, n);
        for j in 0..n {
            let col = self.apply_adjoint(&self.column(j));
            g.column_mut(j).copy_from_slice(&col);
        }
        g
    }

    /// Largest column 2-norm.
    fn max_column_norm(&self) -> f64 {
        (0..self.cols()).map(|n| norm2(&self.column(n))).fold(0.0, f64::max)
    }
}

impl SensingOperator for CMatrix {
    fn rows(&self) -> usize {
        CMatrix::rows(self)
    }

    fn cols(&self) -> usize {
        CMatrix::cols(self)
    }

    fn column(&self, n: usize) -> Vec<C64> {
        CMatrix::column(self, n).to_vec()
    }

    fn apply(&self, s: &[C64]) -> Vec<C64> {
        self.mul_vec(s)
    }

    fn apply_adjoint(&self, r: &[C64]) -> Vec<C64> {
        self.adjoint_mul_vec(r)
    }

    fn gram(&self) -> CMatrix {
        CMatrix::gram(self)
    }

    fn max_column_norm(&self) -> f64 {
        (0..CMatrix::cols(self))
            .map(|n| norm2(CMatrix::column(self, n)))
            .fold(0.0, f64::max)
    }
}

/// Default cap on materialized dictionary entries (complex values).
pub const DEFAULT_ENTRY_BUDGET: usize = 40_000_000;

/// Materialized dictionary `Theta` for a grid and pulse subset.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    matrix: CMatrix,
    grid: ParamGrid,
    pulses: Vec<usize>,
    num_rx: usize,
    compressed_len: usize,
}

impl SensingMatrix {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn grid(&self) -> &ParamGrid {
        &self.grid
    }

    pub fn pulses(&self) -> &[usize] {
        &self.pulses
    }

    /// Rows of block `(l, pulses[k])` within column `n`.
    pub fn block(&self, n: usize, l: usize, k: usize) -> &[C64] {
        let start = (l * self.pulses.len() + k) * self.compressed_len;
        &self.matrix.column(n)[start..start + self.compressed_len]
    }

    pub fn num_rx(&self) -> usize {
        self.num_rx
    }
}

impl SensingOperator for SensingMatrix {
    fn rows(&self) -> usize {
        self.matrix.rows()
    }

    fn cols(&self) -> usize {
        self.matrix.cols()
    }

    fn column(&self, n: usize) -> Vec<C64> {
        self.matrix.column(n).to_vec()
    }

    fn apply(&self, s: &[C64]) -> Vec<C64> {
        self.matrix.mul_vec(s)
    }

    fn apply_adjoint(&self, r: &[C64]) -> Vec<C64> {
        self.matrix.adjoint_mul_vec(r)
    }

    fn gram(&self) -> CMatrix {
        self.matrix.gram()
    }

    fn max_column_norm(&self) -> f64 {
        SensingOperator::max_column_norm(&self.matrix)
    }
}

/// Precomputed pieces shared by many dictionary columns: one `X^H D X` per
/// distinct (velocity, pulse) and one steering vector per (angle, pulse).
struct ColumnFactory<'a> {
    setup: &'a RadarSetup,
    grid: &'a ParamGrid,
    pulses: &'a [usize],
    angles: Vec<f64>,
    velocities: Vec<f64>,
    // [velocity][pulse]
    grams: Vec<Vec<CMatrix>>,
    // [angle][pulse]
    steering: Vec<Vec<Vec<C64>>>,
}

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

impl<'a> ColumnFactory<'a> {
    fn new(setup: &'a RadarSetup, grid: &'a ParamGrid, pulses: &'a [usize]) -> Self {
        let angles = distinct(grid.points().map(|p| p.angle));
        let velocities = distinct(grid.points().map(|p| p.velocity));
        let grams = velocities
            .iter()
            .map(|v| {
                pulses
                    .iter()
                    .map(|&m| {
                        let f_m = setup.schedule.carrier_of(m);
                        doppler_gram(setup, 2.0 * v * f_m / SPEED_OF_LIGHT)
                    })
                    .collect()
            })
            .collect();
        let steering = angles
            .iter()
            .map(|a| {
                pulses
                    .iter()
                    .map(|&m| steering_vector(setup.schedule.carrier_of(m), &setup.scenario.tx_nodes, *a))
                    .collect()
            })
            .collect();
        Self {
            setup,
            grid,
            pulses,
            angles,
            velocities,
            grams,
            steering,
        }
    }

    fn rows(&self) -> usize {
        self.setup.num_rx() * self.pulses.len() * self.setup.compressed_len()
    }

    fn fill_column(&self, n: usize, out: &mut [C64]) {
        let p = self.grid.point(n).expect("column index in range");
        let ia = self.angles.iter().position(|x| *x == p.angle).expect("cached angle");
        let iv = self
            .velocities
            .iter()
            .position(|x| *x == p.velocity)
            .expect("cached velocity");
        let m_len = self.setup.compressed_len();
        let np = self.pulses.len();
        let projected: Vec<Vec<C64>> = (0..np)
            .map(|k| self.grams[iv][k].mul_vec(&self.steering[ia][k]))
            .collect();
        for l in 0..self.setup.num_rx() {
            let phi = self.setup.phis[l].entries();
            for (k, &m) in self.pulses.iter().enumerate() {
                let phase = phasor_cycles(basis_phase(&p, l, m, self.setup));
                let start = (l * np + k) * m_len;
                let block = &mut out[start..start + m_len];
                block.fill(ZERO);
                for (j, wj) in projected[k].iter().enumerate() {
                    let c = *wj * phase;
                    for (b, f) in block.iter_mut().zip(phi.column(j)) {
                        *b += c * f;
                    }
                }
            }
        }
    }
}

fn check_pulses(setup: &RadarSetup, pulses: &[usize]) -> Result<()> {
    if pulses.is_empty() {
        return Err(invalid("pulse subset", "must not be empty"));
    }
    if let Some(&bad) = pulses.iter().find(|&&m| m >= setup.num_pulses()) {
        return Err(Error::IndexOutOfRange {
            context: "pulse subset",
            index: bad,
            len: setup.num_pulses(),
        });
    }
    Ok(())
}

/// Builds `Theta` for `grid` over the pulses in `pulses`, refusing when the
/// matrix would exceed `entry_budget` complex entries.
pub fn build_sensing_matrix(
    grid: &ParamGrid,
    setup: &RadarSetup,
    pulses: &[usize],
    entry_budget: usize,
) -> Result<SensingMatrix> {
    check_pulses(setup, pulses)?;
    let rows = setup.num_rx() * pulses.len() * setup.compressed_len();
    let requested = rows.saturating_mul(grid.len());
    if requested > entry_budget {
        return Err(Error::BudgetExceeded {
            requested,
            budget: entry_budget,
        });
    }
    let factory = ColumnFactory::new(setup, grid, pulses);
    let mut data = vec![ZERO; requested];
    for (n, col) in data.chunks_mut(rows).enumerate() {
        factory.fill_column(n, col);
    }
    Ok(SensingMatrix {
        matrix: CMatrix::from_columns(rows, grid.len(), data),
        grid: grid.clone(),
        pulses: pulses.to_vec(),
        num_rx: setup.num_rx(),
        compressed_len: setup.compressed_len(),
    })
}

/// Dictionary that regenerates columns on demand instead of storing them.
pub struct LazySensing<'a> {
    factory: ColumnFactory<'a>,
}

impl<'a> LazySensing<'a> {
    pub fn new(grid: &'a ParamGrid, setup: &'a RadarSetup, pulses: &'a [usize]) -> Result<Self> {
        check_pulses(setup, pulses)?;
        Ok(Self {
            factory: ColumnFactory::new(setup, grid, pulses),
        })
    }
}

impl SensingOperator for LazySensing<'_> {
    fn rows(&self) -> usize {
        self.factory.rows()
    }

    fn cols(&self) -> usize {
        self.factory.grid.len()
    }

    fn column(&self, n: usize) -> Vec<C64> {
        let mut out = vec![ZERO; self.rows()];
        self.factory.fill_column(n, &mut out);
        out
    }
}

/// Sparse scene vector for a scenario whose targets sit on `grid`.
///
/// Dimensions the grid pins by anchor take the anchor value; the target's
/// actual value in such a dimension must make the anchored column parallel
/// to the true response, which holds for range under a constant carrier
/// (the range phase is folded into the coefficient here).
pub fn scene_vector(grid: &ParamGrid, setup: &RadarSetup) -> Result<Vec<C64>> {
    let mut s = vec![ZERO; grid.len()];
    for t in &setup.scenario.targets {
        let mut p = GridPoint::new(t.azimuth, t.radial_speed, t.initial_range);
        let mut coef = t.reflection;
        let active = grid.active();
        if !active.range {
            let anchor = grid
                .anchors()
                .iter()
                .find(|a| (active.angle || same(a.angle, p.angle)) && (active.velocity || same(a.velocity, p.velocity)))
                .map(|a| a.range);
            if let Some(r) = anchor {
                // only valid for constant carriers: fold the range offset in
                coef *= phasor_cycles(-2.0 * (t.initial_range - r) * setup.scenario.carrier_hz / SPEED_OF_LIGHT);
                p.range = r;
            }
        }
        let n = grid.flat_index(&p)?;
        s[n] += coef;
    }
    Ok(s)
}
