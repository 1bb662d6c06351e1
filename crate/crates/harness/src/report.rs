//! Text reports behind the `ambiguity`, `resolution` and `validate` commands.

use std::fmt::Write;

use rand::Rng;
use serde::Serialize;
use stepfreq_core::analysis::{
    ambiguity_report, check_sufficient_conditions, h_metric, h_unstepped, resolution_report, Ambiguity, AmbiguityReport,
};
use stepfreq_core::rng::{stream_key, substream, Stream};
use stepfreq_core::sensing::{build_sensing_matrix, scene_vector, SensingOperator};
use stepfreq_core::synth::{RadarSetup, SLOW_TARGET_LIMIT};
use stepfreq_core::waveform::{PulseSchedule, StepMode};

use crate::error::HarnessError;
use crate::experiment::Experiment;

fn fmt_ambiguity(a: &Ambiguity, unit: &str) -> String {
    match a {
        Ambiguity::Finite(v) => format!("{v:.6} {unit}"),
        Ambiguity::Unbounded {
            effective: Some(e),
            searched_to,
        } => format!("unbounded in closed form; effective {e:.6} {unit} (scan to {searched_to:.3e})"),
        Ambiguity::Unbounded {
            effective: None,
            searched_to,
        } => format!("unbounded (no coincidence below {searched_to:.3e} {unit})"),
    }
}

fn push_ambiguity(out: &mut String, label: &str, r: &AmbiguityReport) {
    let _ = writeln!(out, "[{label}] mode: {:?}", r.mode);
    let _ = writeln!(out, "[{label}] R_u = {}", fmt_ambiguity(&r.range, "m"));
    let _ = writeln!(out, "[{label}] V_u = {}", fmt_ambiguity(&r.velocity, "m/s"));
    for n in &r.notes {
        let _ = writeln!(out, "[{label}] note: {n}");
    }
}

/// Schedule of trial 0, the one the `ambiguity` and `resolution` reports use.
pub fn reference_setup(exp: &Experiment) -> Result<RadarSetup, HarnessError> {
    exp.build_setup(exp.trial_seed(0))
}

/// Constant-carrier block of a schedule, if it has one of two or more pulses.
fn constant_block(schedule: &PulseSchedule) -> Option<PulseSchedule> {
    let nc = schedule.constant_prefix();
    (nc >= 2 && nc < schedule.pulse_count()).then(|| schedule.prefix(nc))
}

pub fn ambiguity_text(exp: &Experiment) -> Result<String, HarnessError> {
    let setup = reference_setup(exp)?;
    let mut out = String::new();
    push_ambiguity(&mut out, "schedule", &ambiguity_report(&setup.schedule));
    if let Some(block) = constant_block(&setup.schedule) {
        push_ambiguity(&mut out, "constant block", &ambiguity_report(&block));
    }
    Ok(out)
}

/// Outcome of a randomized sweep of the stepping conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionSweep {
    pub draws: usize,
    pub verdict_true: usize,
    /// Verdict-true draws where stepping lowered `h`.
    pub improved: usize,
}

/// Draws `(steps, alpha)` with steps in `[0, max_step]`, `Np` in
/// `pulses`, `alpha` in `(0, pi/(Np-1))`, and tallies how often a positive
/// verdict coincides with `h(df) < h(0)`.
pub fn condition_sweep(
    draws: usize,
    max_step: f64,
    pulses: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> ConditionSweep {
    let mut rng = substream(seed, stream_key(Stream::Schedule, 0xff, 0));
    let mut sweep = ConditionSweep {
        draws,
        verdict_true: 0,
        improved: 0,
    };
    for _ in 0..draws {
        let np = rng.gen_range(pulses.clone());
        let steps: Vec<f64> = (0..np).map(|_| rng.gen_range(0.0..=max_step)).collect();
        let alpha = rng.gen_range(0.0..1.0) * std::f64::consts::PI / (np - 1).max(1) as f64;
        if check_sufficient_conditions(&steps, alpha).verdict {
            sweep.verdict_true += 1;
            if h_metric(&steps, alpha) < h_unstepped(np, alpha) {
                sweep.improved += 1;
            }
        }
    }
    sweep
}

pub fn resolution_text(exp: &Experiment, draws: usize) -> Result<String, HarnessError> {
    let setup = reference_setup(exp)?;
    let dv = exp.config.grid.velocity_step_mps;
    let s = &setup.schedule;
    let stepped = if s.constant_prefix() > 0 && s.constant_prefix() < s.pulse_count() {
        PulseSchedule::from_steps(
            s.steps()[s.constant_prefix()..].to_vec(),
            s.mode(),
            s.pulse_interval(),
            s.base_carrier(),
        )?
    } else {
        s.clone()
    };
    let r = resolution_report(&stepped, dv);
    let mut out = String::new();
    let _ = writeln!(out, "velocity spacing {dv} m/s, alpha = {:.6} rad", r.alpha);
    let _ = writeln!(out, "steps: {:?}", stepped.steps());
    let _ = writeln!(
        out,
        "h(stepped) = {:.6}, h(constant) = {:.6}",
        r.h_stepped, r.h_constant
    );
    for c in &r.conditions.ratio_checks {
        let _ = writeln!(
            out,
            "ratio m={}: {:.6} >= {:.6} -> {}{}",
            c.m,
            c.ratio,
            c.threshold,
            c.holds,
            c.diagnostic.as_deref().map(|d| format!(" ({d})")).unwrap_or_default()
        );
    }
    let _ = writeln!(
        out,
        "sine condition: {} (alpha < {:.6}); verdict: {}",
        r.conditions.sine_condition, r.conditions.alpha_bound, r.conditions.verdict
    );
    if draws > 0 {
        let max_step = match s.mode() {
            StepMode::Random { max, .. } => max,
            StepMode::Linear { step } => step * (stepped.pulse_count().max(2) - 1) as f64,
            StepMode::Constant => 1e-2,
        };
        let sw = condition_sweep(draws, max_step, 3..=10, exp.config.experiment.seed);
        let _ = writeln!(
            out,
            "sweep: {} draws, {} verdict-true, {} of those with h(df) < h(0)",
            sw.draws, sw.verdict_true, sw.improved
        );
    }
    Ok(out)
}

/// One named invariant check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Invariants of the trial-0 setup: waveform orthogonality, fused synthesis
/// against the dictionary, slow-target regime and on-grid truth.
pub fn validate(exp: &Experiment) -> Result<Vec<Check>, HarnessError> {
    let setup = reference_setup(exp)?;
    let mut checks = Vec::new();
    let orth = setup.waveform.orthogonality_error();
    checks.push(Check {
        name: "waveform orthogonality",
        pass: orth <= 1e-10,
        detail: format!("max |X^H X - I| = {orth:.3e}"),
    });
    let cycles = setup.intrapulse_doppler_cycles();
    checks.push(Check {
        name: "slow-target regime",
        pass: cycles < SLOW_TARGET_LIMIT,
        detail: format!("max |f_d| L Ts = {cycles:.3e}"),
    });
    let off = exp.snaps.iter().filter(|s| !s.is_exact()).count();
    checks.push(Check {
        name: "truth on grid",
        pass: off == 0,
        detail: format!("{off} target(s) snapped"),
    });
    let pulses: Vec<usize> = (0..setup.num_pulses()).collect();
    let detail = match build_sensing_matrix(&exp.grid, &setup, &pulses, exp.config.estimator.entry_budget) {
        Ok(theta) => {
            let s = scene_vector(&exp.grid, &setup)?;
            let model = theta.apply(&s);
            let clean = setup.synthesize_clean()?;
            let scale = clean.samples.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
            let err = model
                .iter()
                .zip(&clean.samples)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
                / scale;
            Some((err <= 1e-9, format!("relative max error {err:.3e}")))
        }
        Err(stepfreq_core::Error::BudgetExceeded { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    checks.push(match detail {
        Some((pass, detail)) => Check {
            name: "synthesis matches dictionary",
            pass,
            detail,
        },
        None => Check {
            name: "synthesis matches dictionary",
            pass: true,
            detail: "skipped: full dictionary exceeds the entry budget".into(),
        },
    });
    Ok(checks)
}
