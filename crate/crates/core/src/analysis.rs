//! Ambiguity limits, velocity resolution and the step-sequence conditions
//! under which stepping sharpens velocity resolution.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

use crate::linalg::{cdot, phasor_cycles, CMatrix, C64, ZERO};
use crate::scene::SPEED_OF_LIGHT;
use crate::waveform::{PulseSchedule, StepMode};

/// Denominator bound of the rational reconstruction of carrier ratios.
pub const MAX_DENOMINATOR: u64 = 1_000_000;
/// Relative tolerance of the rational reconstruction.
pub const RATIO_TOLERANCE: f64 = 1e-9;
/// Phase-coincidence tolerance of the effective-ambiguity scan, in radians.
pub const PHASE_TOLERANCE: f64 = 1e-6;
/// Candidates examined by the effective-ambiguity scan.
pub const SCAN_CANDIDATES: u64 = 200_000;

/// An ambiguity extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ambiguity {
    Finite(f64),
    /// No finite extent exists in closed form. `effective` is the smallest
    /// coincidence the numeric scan found, if any below `searched_to`.
    Unbounded {
        effective: Option<f64>,
        searched_to: f64,
    },
}

impl Ambiguity {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Ambiguity::Finite(v) => Some(*v),
            Ambiguity::Unbounded { .. } => None,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, Ambiguity::Unbounded { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityReport {
    pub mode: StepMode,
    pub range: Ambiguity,
    pub velocity: Ambiguity,
    pub notes: Vec<String>,
}

/// Best rational approximation `p / q` of `x > 0` with `q <= max_den`,
/// from the continued-fraction convergents. Returns the first convergent
/// within `rel_tol` of `x`.
pub fn rational_approximation(x: f64, rel_tol: f64, max_den: u64) -> Option<(u64, u64)> {
    if !(x > 0.0) || !x.is_finite() {
        return None;
    }
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut rest = x;
    for _ in 0..64 {
        let a = rest.floor();
        if a > u64::MAX as f64 / 4.0 {
            return None;
        }
        let a = a as u64;
        let p2 = a.checked_mul(p1)?.checked_add(p0)?;
        let q2 = a.checked_mul(q1)?.checked_add(q0)?;
        if q2 > max_den {
            return None;
        }
        if ((p2 as f64 / q2 as f64) - x).abs() <= rel_tol * x {
            return Some((p2, q2));
        }
        let frac = rest - a as f64;
        if frac <= 0.0 {
            return None;
        }
        rest = 1.0 / frac;
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
    }
    None
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Smallest `x > 0` with `x g_i` an integer (to `PHASE_TOLERANCE / 2 pi`
/// cycles) for every `g_i`, scanning integer multiples of `1 / g_ref`.
fn coincidence_scan(rates: &[f64]) -> (Option<f64>, f64) {
    let rates: Vec<f64> = rates.iter().copied().filter(|g| *g != 0.0).map(f64::abs).collect();
    let Some(&g_ref) = rates.iter().min_by(|a, b| a.total_cmp(b)) else {
        return (None, f64::INFINITY);
    };
    let tol = PHASE_TOLERANCE / (2.0 * PI);
    for k in 1..=SCAN_CANDIDATES {
        let x = k as f64 / g_ref;
        if rates.iter().all(|g| {
            let c = x * g;
            (c - c.round()).abs() <= tol
        }) {
            return (Some(x), x);
        }
    }
    (None, SCAN_CANDIDATES as f64 / g_ref)
}

/// Unambiguous range of a schedule.
pub fn unambiguous_range(schedule: &PulseSchedule) -> Ambiguity {
    let f = schedule.base_carrier();
    let t = schedule.pulse_interval();
    match schedule.mode() {
        _ if schedule.is_constant() => Ambiguity::Finite(SPEED_OF_LIGHT * t / 2.0),
        StepMode::Linear { step } => Ambiguity::Finite(SPEED_OF_LIGHT / (2.0 * f * step)),
        _ => {
            // range phase -4 pi dc f_m / c agrees across pulses when
            // 2 dc (f_m - f_1) / c is an integer for all m
            let f1 = schedule.carrier_of(0);
            let rates: Vec<f64> = (1..schedule.pulse_count())
                .map(|m| 2.0 * (schedule.carrier_of(m) - f1) / SPEED_OF_LIGHT)
                .collect();
            let (effective, searched_to) = coincidence_scan(&rates);
            Ambiguity::Unbounded { effective, searched_to }
        }
    }
}

/// Unambiguous velocity of a schedule.
pub fn unambiguous_velocity(schedule: &PulseSchedule) -> Ambiguity {
    let np = schedule.pulse_count();
    let f = schedule.base_carrier();
    let t = schedule.pulse_interval();
    // inter-pulse phase 4 pi b f_m m T / c agrees for b and b + db when
    // 2 db f_m m T / c is an integer for every pulse
    let rates: Vec<f64> = (1..np)
        .map(|m| 2.0 * schedule.carrier_of(m) * m as f64 * t / SPEED_OF_LIGHT)
        .collect();
    if np < 2 {
        return Ambiguity::Unbounded {
            effective: None,
            searched_to: f64::INFINITY,
        };
    }
    match schedule.mode() {
        _ if schedule.is_constant() => Ambiguity::Finite(SPEED_OF_LIGHT / (2.0 * f * t)),
        StepMode::Linear { .. } | StepMode::Constant => {
            // lcm of c / (2 f_m T): with f_m / f_1 = p_m / q_m the lcm is
            // (c / (2 f_1 T)) lcm(q_m)
            let f1 = schedule.carrier_of(0);
            let v1 = SPEED_OF_LIGHT / (2.0 * f1 * t);
            let mut l: u64 = 1;
            for m in 1..np {
                let Some((_, q)) =
                    rational_approximation(schedule.carrier_of(m) / f1, RATIO_TOLERANCE, MAX_DENOMINATOR)
                else {
                    return Ambiguity::Unbounded {
                        effective: None,
                        searched_to: v1 * MAX_DENOMINATOR as f64,
                    };
                };
                l = match (l / gcd(l, q)).checked_mul(q) {
                    Some(v) if v <= MAX_DENOMINATOR * MAX_DENOMINATOR => v,
                    _ => {
                        return Ambiguity::Unbounded {
                            effective: None,
                            searched_to: v1 * (MAX_DENOMINATOR * MAX_DENOMINATOR) as f64,
                        }
                    }
                };
            }
            Ambiguity::Finite(v1 * l as f64)
        }
        StepMode::Random { .. } => {
            let (effective, searched_to) = coincidence_scan(&rates);
            Ambiguity::Unbounded { effective, searched_to }
        }
    }
}

pub fn ambiguity_report(schedule: &PulseSchedule) -> AmbiguityReport {
    let range = unambiguous_range(schedule);
    let velocity = unambiguous_velocity(schedule);
    let mut notes = Vec::new();
    let np = schedule.pulse_count();
    match schedule.mode() {
        _ if schedule.is_constant() => {
            notes.push(String::from("constant carrier: R_u = cT/2, V_u = c/(2fT)"));
        }
        StepMode::Linear { step } => {
            notes.push(format!(
                "linear steps of {step}: R_u = c/(2 f df); V_u = lcm of c/(2 f_m T)"
            ));
        }
        _ => notes.push(String::from(
            "random steps: no closed-form extent; effective values come from a phase-coincidence scan",
        )),
    }
    if np < 2 {
        notes.push(String::from(
            "single pulse: no inter-pulse phase, velocity cannot alias",
        ));
    }
    for (name, a) in [("range", range), ("velocity", velocity)] {
        if let Ambiguity::Unbounded {
            effective: None,
            searched_to,
        } = a
        {
            if searched_to.is_finite() {
                notes.push(format!("no finite {name} ambiguity below {searched_to:.6e}"));
            }
        }
    }
    AmbiguityReport {
        mode: schedule.mode(),
        range,
        velocity,
        notes,
    }
}

/// `|sum_m e^{j alpha (1 + df_m)(m - 1)}|`
pub fn h_metric(steps: &[f64], alpha: f64) -> f64 {
    let mut acc = ZERO;
    for (m, df) in steps.iter().enumerate() {
        let phase = alpha * (1.0 + df) * m as f64;
        acc += C64::new(phase.cos(), phase.sin());
    }
    acc.norm()
}

/// `|sin(N alpha / 2) / sin(alpha / 2)|`, the unstepped value of `h`.
pub fn h_unstepped(pulses: usize, alpha: f64) -> f64 {
    let half = alpha / 2.0;
    if half.sin().abs() < 1e-12 {
        return pulses as f64;
    }
    ((pulses as f64 * half).sin() / half.sin()).abs()
}

/// `alpha = 4 pi db T f / c` for adjacent velocities `db` apart.
pub fn resolution_alpha(delta_velocity: f64, pulse_interval: f64, carrier_hz: f64) -> f64 {
    4.0 * PI * delta_velocity * pulse_interval * carrier_hz / SPEED_OF_LIGHT
}

/// One ratio check `df_m / df_{Np+1-m} >= (Np - m) / (m - 1)` (1-based `m`).
#[derive(Debug, Clone, PartialEq)]
pub struct RatioCheck {
    pub m: usize,
    pub ratio: f64,
    pub threshold: f64,
    pub holds: bool,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub ratio_checks: Vec<RatioCheck>,
    /// `sin(alpha n) > 0` for `n = 1..Np-1`.
    pub sine_condition: bool,
    /// `pi / (Np - 1)`: the sine condition is `alpha < alpha_bound` for `alpha > 0`.
    pub alpha_bound: f64,
    pub verdict: bool,
}

impl ConditionReport {
    pub fn ratio_condition(&self) -> bool {
        self.ratio_checks.iter().all(|c| c.holds)
    }
}

/// Values of `sin` this close to zero count as zero in the strict test.
const SINE_ZERO: f64 = 1e-12;

/// Sufficient conditions for stepping to lower the adjacent-velocity
/// correlation relative to a constant carrier.
///
/// `steps` holds `df_1..df_Np`. A zero denominator with a positive numerator
/// is an infinite ratio and passes; `0 / 0` is reported as violated.
pub fn check_sufficient_conditions(steps: &[f64], alpha: f64) -> ConditionReport {
    let np = steps.len();
    let mut ratio_checks = Vec::new();
    for m in (np / 2 + 1)..=np {
        if m < 2 {
            continue;
        }
        let num = steps[m - 1];
        let den = steps[np - m];
        let threshold = (np - m) as f64 / (m - 1) as f64;
        let (ratio, holds, diagnostic) = if den > 0.0 {
            let r = num / den;
            (r, r >= threshold, None)
        } else if num > 0.0 {
            (f64::INFINITY, true, None)
        } else {
            (f64::NAN, false, Some(format!("df_{m} / df_{} is 0/0", np + 1 - m)))
        };
        ratio_checks.push(RatioCheck {
            m,
            ratio,
            threshold,
            holds,
            diagnostic,
        });
    }
    let sine_condition = (1..np).all(|n| (alpha * n as f64).sin() > SINE_ZERO);
    let alpha_bound = if np > 1 { PI / (np - 1) as f64 } else { f64::INFINITY };
    let verdict = sine_condition && ratio_checks.iter().all(|c| c.holds);
    ConditionReport {
        ratio_checks,
        sine_condition,
        alpha_bound,
        verdict,
    }
}

/// `|<g_k, g_k'>|` between two dictionary columns.
pub fn column_correlation(theta: &CMatrix, k: usize, k_prime: usize) -> f64 {
    cdot(theta.column(k), theta.column(k_prime)).norm()
}

/// Velocity-resolution summary for adjacent velocity cells `db` apart.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionReport {
    pub alpha: f64,
    pub h_stepped: f64,
    pub h_constant: f64,
    pub conditions: ConditionReport,
    /// Measured `p_kk' / p_kk` ratios, filled by callers that build a dictionary.
    pub correlation_samples: Vec<f64>,
}

pub fn resolution_report(schedule: &PulseSchedule, delta_velocity: f64) -> ResolutionReport {
    let alpha = resolution_alpha(delta_velocity, schedule.pulse_interval(), schedule.base_carrier());
    let steps = schedule.steps();
    ResolutionReport {
        alpha,
        h_stepped: h_metric(steps, alpha),
        h_constant: h_unstepped(steps.len(), alpha),
        conditions: check_sufficient_conditions(steps, alpha),
        correlation_samples: Vec::new(),
    }
}

/// Inter-pulse phasors `e^{j 4 pi b f_m m T / c}` of a velocity `b`.
pub fn velocity_phase_sequence(schedule: &PulseSchedule, velocity: f64) -> Vec<C64> {
    (0..schedule.pulse_count())
        .map(|m| {
            phasor_cycles(
                2.0 * velocity * schedule.carrier_of(m) * m as f64 * schedule.pulse_interval() / SPEED_OF_LIGHT,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::waveform::make_schedule;
    use approx::assert_relative_eq;

    fn sched(mode: StepMode, np: usize) -> PulseSchedule {
        make_schedule(mode, np, 1.0 / 4000.0, 5e9, &mut substream(3, 3)).unwrap()
    }

    #[test]
    fn constant_carrier_extents() {
        let s = sched(StepMode::Constant, 10);
        assert_relative_eq!(unambiguous_range(&s).finite().unwrap(), 37_500.0, max_relative = 1e-12);
        assert!((unambiguous_velocity(&s).finite().unwrap() - 120.0).abs() < 1e-6);
    }

    #[test]
    fn linear_step_extents() {
        let s = sched(StepMode::Linear { step: 1e-4 }, 3);
        assert_relative_eq!(unambiguous_range(&s).finite().unwrap(), 300.0, max_relative = 1e-9);
        // f_m / f_1 = 1.0001, 1.0002 -> denominators 10000, 5000; lcm 10000
        let v = unambiguous_velocity(&s).finite().unwrap();
        assert_relative_eq!(v, 120.0 * 10_000.0, max_relative = 1e-9);
        // the lcm really is a common period of every inter-pulse phase
        let a = velocity_phase_sequence(&s, 3.0);
        let b = velocity_phase_sequence(&s, 3.0 + v);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-6));
    }

    #[test]
    fn random_and_single_pulse_are_unbounded() {
        let s = sched(StepMode::Random { min: 0.001, max: 0.01 }, 10);
        let v = unambiguous_velocity(&s);
        assert!(matches!(v, Ambiguity::Unbounded { effective: None, .. }), "{v:?}");
        assert!(unambiguous_range(&s).is_unbounded());
        assert!(unambiguous_velocity(&sched(StepMode::Constant, 1)).is_unbounded());
        let report = ambiguity_report(&s);
        assert!(report.notes.iter().any(|n| n.contains("no finite velocity")));
    }

    #[test]
    fn rational_reconstruction() {
        assert_eq!(rational_approximation(1.25, 1e-12, 100), Some((5, 4)));
        assert_eq!(rational_approximation(1.0001, 1e-12, 1_000_000), Some((10001, 10000)));
        assert_eq!(rational_approximation(PI, 1e-12, 100), None);
    }

    #[test]
    fn h_examples() {
        assert_relative_eq!(h_metric(&[0.0, 0.3, 0.1, 0.7], 0.0), 4.0, max_relative = 1e-14);
        assert_relative_eq!(h_metric(&[0.4], 1.3), 1.0, max_relative = 1e-14);
        let np = 6;
        assert!(h_metric(&[0.0; 6], 2.0 * PI / np as f64) < 1e-12);
        for alpha in [0.1, 0.37, 1.0] {
            assert_relative_eq!(h_metric(&[0.0; 7], alpha), h_unstepped(7, alpha), max_relative = 1e-12);
        }
    }

    #[test]
    fn five_pulse_thresholds() {
        let r = check_sufficient_conditions(&[0.0, 0.003, 0.004, 0.001, 0.005], 0.5);
        let nontrivial: Vec<_> = r
            .ratio_checks
            .iter()
            .filter(|c| c.threshold > 0.0 && c.threshold != 1.0)
            .collect();
        assert_eq!(nontrivial.len(), 1);
        assert_eq!(nontrivial[0].m, 4);
        assert_relative_eq!(nontrivial[0].threshold, 1.0 / 3.0);
        assert!(nontrivial[0].holds);
        assert_relative_eq!(r.alpha_bound, PI / 4.0);
        assert!(r.verdict);

        let fail = check_sufficient_conditions(&[0.0, 0.003, 0.004, 0.0009, 0.005], 0.5);
        assert!(!fail.ratio_condition());
        assert!(!check_sufficient_conditions(&[0.0, 0.003, 0.004, 0.001, 0.005], PI / 4.0).sine_condition);
        assert!(check_sufficient_conditions(&[0.0, 0.003, 0.004, 0.001, 0.005], PI / 4.0 - 1e-9).sine_condition);
    }

    #[test]
    fn linear_steps_satisfy_ratio_condition() {
        for np in 2..=16 {
            let steps: Vec<f64> = (1..=np).map(|m| m as f64 * 1e-4).collect();
            assert!(check_sufficient_conditions(&steps, 0.01).ratio_condition(), "Np = {np}");
        }
    }

    #[test]
    fn zero_over_zero_is_violated() {
        let r = check_sufficient_conditions(&[0.0, 0.0, 0.0], 0.1);
        assert!(!r.verdict);
        assert!(r.ratio_checks.iter().any(|c| c.diagnostic.is_some()));
    }

    #[test]
    fn alpha_boundary_fails() {
        for np in 3..=10 {
            let steps = alloc::vec![0.001; np];
            assert!(!check_sufficient_conditions(&steps, PI / (np - 1) as f64).sine_condition);
        }
    }
}
