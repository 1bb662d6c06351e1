//! Joint and decoupled angle-velocity-range estimation.
//!
//! The decoupled pipeline runs three small sparse solves instead of one
//! large one:
//!
//! 1. angles only, one constant-carrier pulse at a time (union of results);
//! 2. velocities for the detected angles, over the constant-carrier block;
//! 3. ranges for the detected (angle, velocity) pairs, over the stepped block.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::linalg::{max_abs, C64};
use crate::scene::SPEED_OF_LIGHT;
use crate::sensing::{build_sensing_matrix, GridPoint, ParamGrid, SensingOperator, DEFAULT_ENTRY_BUDGET};
use crate::solver::{
    dantzig_from_gram, extract_support, noise_lambda, DantzigOptions, Detection, DetectionPolicy, SolverDiagnostics,
};
use crate::synth::{FusedMeasurements, RadarSetup};

/// How the Dantzig bound is chosen for one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaPolicy {
    Fixed(f64),
    /// `kappa sigma max ||theta_n|| sqrt(2 ln N)` with `sigma^2` the known
    /// interference power per compressed sample, floored at `1e-6 ||b||_inf`.
    Noise {
        kappa: f64,
    },
    /// A fraction of `||Theta^H r||_inf`.
    Relative {
        fraction: f64,
    },
}

impl Default for LambdaPolicy {
    fn default() -> Self {
        LambdaPolicy::Noise { kappa: 1.0 }
    }
}

/// Relative floor applied to noise-calibrated bounds.
const LAMBDA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageConfig {
    pub lambda: LambdaPolicy,
    pub detection: DetectionPolicy,
}

/// What one sparse solve saw and produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: &'static str,
    pub pulses: Vec<usize>,
    pub grid_size: usize,
    pub rows: usize,
    pub detections: Vec<Detection>,
    pub solver: SolverDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EstimateSet {
    pub angles: Vec<f64>,
    pub pairs: Vec<(f64, f64)>,
    pub triples: Vec<GridPoint>,
    pub stages: Vec<StageReport>,
}

fn push_unique<T: PartialEq>(v: &mut Vec<T>, x: T) {
    if !v.contains(&x) {
        v.push(x);
    }
}

/// Builds the dictionary, picks lambda and solves one Dantzig problem.
#[allow(clippy::too_many_arguments)]
fn solve_stage(
    stage: &'static str,
    setup: &RadarSetup,
    data: &FusedMeasurements,
    grid: &ParamGrid,
    pulses: &[usize],
    cfg: &StageConfig,
    opts: &DantzigOptions,
    budget: usize,
) -> Result<StageReport> {
    let theta = build_sensing_matrix(grid, setup, pulses, budget)?;
    let r = data.select_pulses(pulses)?;
    let a = theta.gram();
    let b = theta.apply_adjoint(&r);
    let lambda = match cfg.lambda {
        LambdaPolicy::Fixed(l) => l,
        LambdaPolicy::Relative { fraction } => fraction * max_abs(&b),
        LambdaPolicy::Noise { kappa } => {
            let sigma = setup.interference_power().sqrt();
            let col = (0..grid.len()).map(|n| a[(n, n)].re.sqrt()).fold(0.0, f64::max);
            noise_lambda(kappa, sigma, col, grid.len()).max(LAMBDA_FLOOR * max_abs(&b))
        }
    };
    let result = dantzig_from_gram(&a, &b, lambda, opts)?;
    let detections = extract_support(&result.coefficients, grid, cfg.detection)?;
    Ok(StageReport {
        stage,
        pulses: pulses.to_vec(),
        grid_size: grid.len(),
        rows: theta.matrix().rows(),
        detections,
        solver: result.diagnostics,
    })
}

/// Velocities of `axis` inside one ambiguity interval `[axis[0], axis[0] + V_u)`
/// for the given pulses, or the whole axis when they alias nowhere.
///
/// With a single carrier, velocities `b` and `b + c / (2 f T g)` produce the
/// same inter-pulse phases, `g` being the gcd of the pulse index offsets.
pub fn ambiguity_window(axis: &[f64], setup: &RadarSetup, pulses: &[usize]) -> Vec<f64> {
    let schedule = &setup.schedule;
    if pulses.len() < 2 || schedule.distinct_carriers(pulses) != 1 || axis.is_empty() {
        return axis.to_vec();
    }
    let g = pulses.iter().fold(0usize, |g, &m| gcd(g, m.abs_diff(pulses[0])));
    let f = schedule.carrier_of(pulses[0]);
    let v_u = SPEED_OF_LIGHT / (2.0 * f * schedule.pulse_interval() * g as f64);
    let end = axis[0] + v_u * (1.0 - 1e-9);
    axis.iter().copied().filter(|v| *v < end).collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Options shared by the joint and decoupled estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub solver: DantzigOptions,
    pub entry_budget: usize,
    /// Restrict velocity axes to one ambiguity interval when the pulses in
    /// use share a carrier.
    pub fold_velocity: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            solver: DantzigOptions::default(),
            entry_budget: DEFAULT_ENTRY_BUDGET,
            fold_velocity: true,
        }
    }
}

/// One sparse solve over a full angle x velocity x range grid.
pub fn estimate_joint(
    setup: &RadarSetup,
    data: &FusedMeasurements,
    grid: &ParamGrid,
    pulses: &[usize],
    stage: &StageConfig,
    opts: &SolveOptions,
) -> Result<EstimateSet> {
    let active = grid.active();
    if !(active.angle && active.velocity && active.range) {
        return Err(invalid("joint grid", "all three dimensions must be active"));
    }
    let folded;
    let grid = if opts.fold_velocity {
        let v = ambiguity_window(grid.velocity_axis(), setup, pulses);
        folded = ParamGrid::product(grid.angle_axis().to_vec(), v, grid.range_axis().to_vec())?;
        &folded
    } else {
        grid
    };
    let report = solve_stage(
        "joint",
        setup,
        data,
        grid,
        pulses,
        stage,
        &opts.solver,
        opts.entry_budget,
    )?;
    let mut out = EstimateSet::default();
    for d in &report.detections {
        push_unique(&mut out.angles, d.point.angle);
        push_unique(&mut out.pairs, (d.point.angle, d.point.velocity));
        out.triples.push(d.point);
    }
    out.stages.push(report);
    Ok(out)
}

/// Configuration of the three-step estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledConfig {
    /// Pulses of the constant-carrier block (step 2).
    pub constant_pulses: Vec<usize>,
    /// Pulses of the stepped block (step 3).
    pub stepped_pulses: Vec<usize>,
    /// Pulses solved one at a time in step 1; a subset of the constant block.
    pub step1_pulses: Vec<usize>,
    pub angle_axis: Vec<f64>,
    pub velocity_axis: Vec<f64>,
    pub range_axis: Vec<f64>,
    pub stages: [StageConfig; 3],
    pub options: SolveOptions,
}

impl DecoupledConfig {
    /// `nc` constant pulses followed by `ns` stepped ones; step 1 uses the
    /// first and last constant pulse.
    pub fn new(nc: usize, ns: usize, angle_axis: Vec<f64>, velocity_axis: Vec<f64>, range_axis: Vec<f64>) -> Self {
        let step1 = if nc > 1 { alloc::vec![0, nc - 1] } else { alloc::vec![0] };
        Self {
            constant_pulses: (0..nc).collect(),
            stepped_pulses: (nc..nc + ns).collect(),
            step1_pulses: step1,
            angle_axis,
            velocity_axis,
            range_axis,
            stages: [StageConfig::default(); 3],
            options: SolveOptions::default(),
        }
    }

    pub fn validate(&self, setup: &RadarSetup) -> Result<()> {
        if self.constant_pulses.is_empty() || self.stepped_pulses.is_empty() {
            return Err(invalid(
                "decoupled config",
                "needs at least one constant and one stepped pulse",
            ));
        }
        if self.step1_pulses.is_empty() || self.step1_pulses.iter().any(|p| !self.constant_pulses.contains(p)) {
            return Err(invalid(
                "step1_pulses",
                "must be a non-empty subset of the constant block",
            ));
        }
        let np = setup.num_pulses();
        if let Some(&bad) = self
            .constant_pulses
            .iter()
            .chain(&self.stepped_pulses)
            .find(|&&m| m >= np)
        {
            return Err(Error::IndexOutOfRange {
                context: "decoupled pulses",
                index: bad,
                len: np,
            });
        }
        if setup.schedule.distinct_carriers(&self.constant_pulses) != 1 {
            return Err(invalid("constant_pulses", "must share one carrier"));
        }
        Ok(())
    }
}

/// Step 1: angle-only solves on single pulses, returning the union of the
/// detected angles in axis order.
pub fn step1_angles(
    setup: &RadarSetup,
    data: &FusedMeasurements,
    cfg: &DecoupledConfig,
) -> Result<(Vec<f64>, Vec<StageReport>)> {
    let grid = ParamGrid::angles_only(cfg.angle_axis.clone(), 0.0, 0.0)?;
    let mut angles = Vec::new();
    let mut reports = Vec::new();
    for &m in &cfg.step1_pulses {
        let rep = solve_stage(
            "angle",
            setup,
            data,
            &grid,
            &[m],
            &cfg.stages[0],
            &cfg.options.solver,
            cfg.options.entry_budget,
        )?;
        for d in &rep.detections {
            push_unique(&mut angles, d.point.angle);
        }
        reports.push(rep);
    }
    angles.sort_by(f64::total_cmp);
    Ok((angles, reports))
}

/// Step 2: velocities for the given angles over the constant block.
pub fn step2_velocity(
    setup: &RadarSetup,
    data: &FusedMeasurements,
    angles: &[f64],
    cfg: &DecoupledConfig,
) -> Result<(Vec<(f64, f64)>, StageReport)> {
    let axis = if cfg.options.fold_velocity {
        ambiguity_window(&cfg.velocity_axis, setup, &cfg.constant_pulses)
    } else {
        cfg.velocity_axis.clone()
    };
    let grid = ParamGrid::velocity_over(angles, axis, 0.0)?;
    let rep = solve_stage(
        "velocity",
        setup,
        data,
        &grid,
        &cfg.constant_pulses,
        &cfg.stages[1],
        &cfg.options.solver,
        cfg.options.entry_budget,
    )?;
    let mut pairs = Vec::new();
    for d in &rep.detections {
        push_unique(&mut pairs, (d.point.angle, d.point.velocity));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok((pairs, rep))
}

/// Step 3: ranges for the given pairs over the stepped block.
pub fn step3_range(
    setup: &RadarSetup,
    data: &FusedMeasurements,
    pairs: &[(f64, f64)],
    cfg: &DecoupledConfig,
) -> Result<(Vec<GridPoint>, StageReport)> {
    if setup.schedule.distinct_carriers(&cfg.stepped_pulses) < 2 {
        return Err(Error::RangeUnidentifiable);
    }
    let grid = ParamGrid::range_over(pairs, cfg.range_axis.clone())?;
    let rep = solve_stage(
        "range",
        setup,
        data,
        &grid,
        &cfg.stepped_pulses,
        &cfg.stages[2],
        &cfg.options.solver,
        cfg.options.entry_budget,
    )?;
    let mut triples: Vec<GridPoint> = rep.detections.iter().map(|d| d.point).collect();
    triples.sort_by(|a, b| {
        a.angle
            .total_cmp(&b.angle)
            .then(a.velocity.total_cmp(&b.velocity))
            .then(a.range.total_cmp(&b.range))
    });
    Ok((triples, rep))
}

/// Runs steps 1-3. An empty stage aborts with [`Error::NoDetections`].
pub fn run_decoupled(setup: &RadarSetup, data: &FusedMeasurements, cfg: &DecoupledConfig) -> Result<EstimateSet> {
    cfg.validate(setup)?;
    let mut out = EstimateSet::default();
    let (angles, reports) = step1_angles(setup, data, cfg)?;
    out.stages.extend(reports);
    if angles.is_empty() {
        return Err(Error::NoDetections { stage: "angle" });
    }
    let (pairs, rep) = step2_velocity(setup, data, &angles, cfg)?;
    out.stages.push(rep);
    if pairs.is_empty() {
        return Err(Error::NoDetections { stage: "velocity" });
    }
    let (triples, rep) = step3_range(setup, data, &pairs, cfg)?;
    out.stages.push(rep);
    if triples.is_empty() {
        return Err(Error::NoDetections { stage: "range" });
    }
    out.angles = angles;
    out.pairs = pairs;
    out.triples = triples;
    Ok(out)
}

/// Cubic cost model of joint versus decoupled recovery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complexity {
    /// `(Na Nb Nc)^3`
    pub joint: f64,
    /// `A Na^3 + (B Nb)^3 + (C Nc)^3`
    pub decoupled: f64,
    /// `decoupled / joint`
    pub ratio: f64,
}

/// `A` angle-only solves, `B` detected angles, `C` detected pairs.
pub fn decoupled_complexity(na: usize, nb: usize, nc: usize, a: usize, b: usize, c: usize) -> Complexity {
    let cube = |x: f64| x * x * x;
    let joint = cube(na as f64 * nb as f64 * nc as f64);
    let decoupled = a as f64 * cube(na as f64) + cube(b as f64 * nb as f64) + cube(c as f64 * nc as f64);
    Complexity {
        joint,
        decoupled,
        ratio: decoupled / joint,
    }
}

/// Coefficients of the scene restricted to `grid`, for diagnostics.
pub fn detected_amplitudes(report: &StageReport) -> Vec<C64> {
    report.detections.iter().map(|d| d.amplitude).collect()
}
