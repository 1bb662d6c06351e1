//! Sparse recovery.
//!
//! The main solver is the complex Dantzig selector
//!
//! ```text
//! min ||s||_1   subject to   ||Theta^H (r - Theta s)||_inf <= lambda
//! ```
//!
//! posed on the Gram data `A = Theta^H Theta`, `b = Theta^H r`. Complex
//! moduli are handled with regular polygons: each constraint disc is replaced
//! by its inscribed `P`-gon, so every returned point is feasible for the exact
//! problem, and each objective modulus by the matching polygonal gauge, which
//! under-estimates `|s_n|` by at most a factor `cos(pi / P)`. The resulting
//! LP is solved with a Mehrotra predictor-corrector interior point method
//! whose normal equations keep the `2N x 2N` real structure of `A`.
//!
//! An ISTA solver for the l1-regularized least-squares surrogate is provided
//! as a cheap first-order alternative.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

use thiserror::Error;

use crate::error::Error;
use crate::linalg::{cholesky_in_place, cholesky_solve, max_abs, CMatrix, C64, ZERO};
use crate::sensing::{GridPoint, ParamGrid, SensingOperator};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("lambda must be finite and non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("dimension mismatch: {context} expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("interior point method stopped after {iterations} iterations (primal {primal:.2e}, dual {dual:.2e}, gap {gap:.2e})")]
    NotConverged {
        iterations: usize,
        primal: f64,
        dual: f64,
        gap: f64,
    },
    #[error("numerical failure: {0}")]
    Numerical(&'static str),
}

/// Tuning of the interior point Dantzig solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DantzigOptions {
    /// Sides of the polygons replacing complex moduli; at least 4.
    pub polygon_sides: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for DantzigOptions {
    fn default() -> Self {
        Self {
            polygon_sides: 16,
            tolerance: 1e-9,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub lambda: f64,
    /// `||b - A s||_inf` at the returned point.
    pub max_correlation: f64,
    /// `||s||_1` at the returned point.
    pub l1_norm: f64,
    /// Final relative primal residual, dual residual and duality gap.
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    /// Objective per iteration (first-order solver only).
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub coefficients: Vec<C64>,
    pub diagnostics: SolverDiagnostics,
}

fn check_inputs(a: &CMatrix, b: &[C64], lambda: f64) -> Result<(), SolverError> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(SolverError::NegativeLambda(lambda));
    }
    if a.rows() != a.cols() {
        return Err(SolverError::DimensionMismatch {
            context: "gram matrix columns",
            expected: a.rows(),
            actual: a.cols(),
        });
    }
    if b.len() != a.rows() {
        return Err(SolverError::DimensionMismatch {
            context: "correlation vector",
            expected: a.rows(),
            actual: b.len(),
        });
    }
    if a.as_slice()
        .iter()
        .chain(b)
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(SolverError::Numerical("non-finite input"));
    }
    Ok(())
}

fn finish(a: &CMatrix, b: &[C64], lambda: f64, s: Vec<C64>, mut diag: SolverDiagnostics) -> RecoveryResult {
    let as_ = a.mul_vec(&s);
    diag.lambda = lambda;
    diag.max_correlation = b.iter().zip(&as_).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    diag.l1_norm = s.iter().map(|z| z.norm()).sum();
    RecoveryResult {
        coefficients: s,
        diagnostics: diag,
    }
}

/// Dantzig selector for a dictionary `theta` and data `r`.
pub fn dantzig_selector<S: SensingOperator + ?Sized>(
    theta: &S,
    r: &[C64],
    lambda: f64,
    opts: &DantzigOptions,
) -> Result<RecoveryResult, SolverError> {
    if r.len() != theta.rows() {
        return Err(SolverError::DimensionMismatch {
            context: "measurement vector",
            expected: theta.rows(),
            actual: r.len(),
        });
    }
    let a = theta.gram();
    let b = theta.apply_adjoint(r);
    dantzig_from_gram(&a, &b, lambda, opts)
}

/// Dantzig selector on Gram data: `min ||s||_1` s.t. `||b - A s||_inf <= lambda`.
/// `A` must be Hermitian positive semidefinite with `b` in its range.
pub fn dantzig_from_gram(
    a: &CMatrix,
    b: &[C64],
    lambda: f64,
    opts: &DantzigOptions,
) -> Result<RecoveryResult, SolverError> {
    check_inputs(a, b, lambda)?;
    if opts.polygon_sides < 4 {
        return Err(SolverError::Numerical("polygon needs at least 4 sides"));
    }
    let n = a.cols();
    let b_max = max_abs(b);
    if b_max <= lambda || n == 0 {
        return Ok(finish(a, b, lambda, vec![ZERO; n], SolverDiagnostics::default()));
    }
    let a_max = (0..n).map(|i| a[(i, i)].re).fold(0.0, f64::max);
    if !(a_max > 0.0) {
        return Err(SolverError::Numerical("gram matrix has an empty diagonal"));
    }
    // unit-scale problem: A' = A / a_max, b' = b / b_max, s = s' b_max / a_max
    let a_s = CMatrix::from_fn(n, n, |i, j| a[(i, j)] / a_max);
    let b_s: Vec<C64> = b.iter().map(|z| z / b_max).collect();
    let (s_s, diag) = Polygonal::new(&a_s, &b_s, lambda / b_max, opts.polygon_sides).solve(opts)?;
    let s = s_s.into_iter().map(|z| z * (b_max / a_max)).collect();
    Ok(finish(a, b, lambda, s, diag))
}

/// The polygonal LP in `x = [u; w; t]` with `s = u + j w`:
///
/// ```text
/// min sum t
///   c_p u_n + s_p w_n - t_n <= 0                               (objective rows)
///   -Re(e^{-j phi_p} (A s)_n) <= rho - Re(e^{-j phi_p} b_n)     (constraint rows)
/// ```
///
/// with `phi_p = 2 pi p / P` and `rho = lambda cos(pi / P)`. Rows are
/// ordered objective rows first, each block `n`-major.
struct Polygonal<'a> {
    a: &'a CMatrix,
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    h: Vec<f64>,
    // rows of M = [[A_re, -A_im], [A_im, A_re]], row-major, 2n x 2n
    m_rows: Vec<f64>,
}

impl<'a> Polygonal<'a> {
    fn new(a: &'a CMatrix, b: &[C64], lambda: f64, sides: usize) -> Self {
        let n = a.cols();
        let (sin, cos): (Vec<f64>, Vec<f64>) = (0..sides)
            .map(|p| (2.0 * PI * p as f64 / sides as f64).sin_cos())
            .unzip();
        let rho = lambda * (PI / sides as f64).cos();
        let mut h = vec![0.0; 2 * n * sides];
        for k in 0..n {
            for p in 0..sides {
                h[n * sides + k * sides + p] = rho - (cos[p] * b[k].re + sin[p] * b[k].im);
            }
        }
        let w = 2 * n;
        let mut m_rows = vec![0.0; w * w];
        for i in 0..n {
            for j in 0..n {
                let z = a[(i, j)];
                m_rows[(2 * i) * w + j] = z.re;
                m_rows[(2 * i) * w + n + j] = -z.im;
                m_rows[(2 * i + 1) * w + j] = z.im;
                m_rows[(2 * i + 1) * w + n + j] = z.re;
            }
        }
        Self {
            a,
            n,
            cos,
            sin,
            h,
            m_rows,
        }
    }

    fn sides(&self) -> usize {
        self.cos.len()
    }

    fn rows(&self) -> usize {
        2 * self.n * self.sides()
    }

    fn coefficients(&self, x: &[f64]) -> Vec<C64> {
        (0..self.n).map(|k| C64::new(x[k], x[self.n + k])).collect()
    }

    /// `G x`
    fn g(&self, x: &[f64]) -> Vec<f64> {
        let (n, p) = (self.n, self.sides());
        let mut out = vec![0.0; self.rows()];
        for k in 0..n {
            for q in 0..p {
                out[k * p + q] = self.cos[q] * x[k] + self.sin[q] * x[n + k] - x[2 * n + k];
            }
        }
        let y = self.a.mul_vec(&self.coefficients(x));
        for k in 0..n {
            for q in 0..p {
                out[n * p + k * p + q] = -(self.cos[q] * y[k].re + self.sin[q] * y[k].im);
            }
        }
        out
    }

    /// `G^T v`
    fn gt(&self, v: &[f64]) -> Vec<f64> {
        let (n, p) = (self.n, self.sides());
        let mut out = vec![0.0; 3 * n];
        let mut zeta = vec![ZERO; n];
        for k in 0..n {
            for q in 0..p {
                let o = v[k * p + q];
                out[k] += self.cos[q] * o;
                out[n + k] += self.sin[q] * o;
                out[2 * n + k] -= o;
                let c = v[n * p + k * p + q];
                zeta[k] += C64::new(self.cos[q] * c, self.sin[q] * c);
            }
        }
        let az = self.a.adjoint_mul_vec(&zeta);
        for k in 0..n {
            out[k] -= az[k].re;
            out[n + k] -= az[k].im;
        }
        out
    }

    /// `G^T diag(d) G`, row-major `3n x 3n`.
    fn normal_matrix(&self, d: &[f64]) -> Vec<f64> {
        let (n, p) = (self.n, self.sides());
        let dim = 3 * n;
        let w = 2 * n;
        let mut hm = vec![0.0; dim * dim];

        // constraint rows: M^T W M with 2x2 blocks W_k
        let mut wm = vec![0.0; w * w];
        for k in 0..n {
            let (mut w00, mut w01, mut w11) = (0.0, 0.0, 0.0);
            for q in 0..p {
                let dd = d[n * p + k * p + q];
                w00 += dd * self.cos[q] * self.cos[q];
                w01 += dd * self.cos[q] * self.sin[q];
                w11 += dd * self.sin[q] * self.sin[q];
            }
            let (r0, r1) = (2 * k * w, (2 * k + 1) * w);
            for j in 0..w {
                let (re, im) = (self.m_rows[r0 + j], self.m_rows[r1 + j]);
                wm[r0 + j] = w00 * re + w01 * im;
                wm[r1 + j] = w01 * re + w11 * im;
            }
        }
        for r in 0..w {
            let mrow = &self.m_rows[r * w..(r + 1) * w];
            let wrow = &wm[r * w..(r + 1) * w];
            for i in 0..w {
                let mi = mrow[i];
                if mi == 0.0 {
                    continue;
                }
                let dst = &mut hm[i * dim..i * dim + w];
                // upper triangle only, mirrored below
                for j in i..w {
                    dst[j] += mi * wrow[j];
                }
            }
        }
        for i in 0..w {
            for j in 0..i {
                hm[i * dim + j] = hm[j * dim + i];
            }
        }

        // objective rows: local 3x3 blocks on (u_k, w_k, t_k)
        for k in 0..n {
            let idx = [k, n + k, 2 * n + k];
            for q in 0..p {
                let dd = d[k * p + q];
                let g = [self.cos[q], self.sin[q], -1.0];
                for a in 0..3 {
                    for b in 0..3 {
                        hm[idx[a] * dim + idx[b]] += dd * g[a] * g[b];
                    }
                }
            }
        }
        hm
    }

    fn solve(&self, opts: &DantzigOptions) -> Result<(Vec<C64>, SolverDiagnostics), SolverError> {
        let n = self.n;
        let rows = self.rows();
        let dim = 3 * n;
        let mut c = vec![0.0; dim];
        c[2 * n..].fill(1.0);
        let h_norm = self.h.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        let mut x = vec![0.0; dim];
        let mut s = vec![1.0; rows];
        let mut z = vec![1.0; rows];
        let mut diag = SolverDiagnostics::default();
        // best iterate by its worst residual, kept for stalled runs
        let mut best: Option<(f64, Vec<f64>, SolverDiagnostics)> = None;
        let mut stalled = 0;

        for it in 0..=opts.max_iterations {
            let gx = self.g(&x);
            let rp: Vec<f64> = (0..rows).map(|i| gx[i] + s[i] - self.h[i]).collect();
            let gtz = self.gt(&z);
            let rd: Vec<f64> = (0..dim).map(|i| c[i] + gtz[i]).collect();
            let mu = s.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() / rows as f64;
            let pres = rp.iter().fold(0.0f64, |m, v| m.max(v.abs())) / (1.0 + h_norm);
            let dres = rd.iter().fold(0.0f64, |m, v| m.max(v.abs())) / 2.0;
            let primal_obj: f64 = x[2 * n..].iter().sum();
            let gap = mu * rows as f64 / (1.0 + primal_obj.abs());
            diag.iterations = it;
            diag.primal_residual = pres;
            diag.dual_residual = dres;
            diag.gap = gap;
            if !(pres.is_finite() && dres.is_finite() && gap.is_finite()) {
                break;
            }
            if pres <= opts.tolerance && dres <= opts.tolerance && gap <= opts.tolerance {
                return Ok((self.coefficients(&x), diag));
            }
            let score = pres.max(dres).max(gap);
            match &best {
                Some((b, _, _)) if *b <= score => stalled += 1,
                _ => {
                    best = Some((score, x.clone(), diag.clone()));
                    stalled = 0;
                }
            }
            // rounding floor: complementarity is spent but residuals no longer improve
            if it == opts.max_iterations || (stalled >= STALL_ITERATIONS && gap < opts.tolerance) {
                break;
            }

            let d: Vec<f64> = z.iter().zip(&s).map(|(zi, si)| zi / si).collect();
            let mut hm = self.normal_matrix(&d);
            if factor_regularized(&mut hm, dim).is_err() {
                break;
            }

            let newton = |rc: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
                let v: Vec<f64> = (0..rows).map(|i| d[i] * rp[i] - rc[i] / s[i]).collect();
                let gtv = self.gt(&v);
                let mut dx: Vec<f64> = (0..dim).map(|i| -rd[i] - gtv[i]).collect();
                cholesky_solve(&hm, dim, &mut dx);
                let gdx = self.g(&dx);
                let dz: Vec<f64> = (0..rows).map(|i| d[i] * (gdx[i] + rp[i]) - rc[i] / s[i]).collect();
                let ds: Vec<f64> = (0..rows).map(|i| -(rc[i] + s[i] * dz[i]) / z[i]).collect();
                (dx, ds, dz)
            };

            let rc_aff: Vec<f64> = s.iter().zip(&z).map(|(a, b)| a * b).collect();
            let (_, ds_a, dz_a) = newton(&rc_aff);
            let ap = max_step(&s, &ds_a);
            let ad = max_step(&z, &dz_a);
            let mu_aff = (0..rows)
                .map(|i| (s[i] + ap * ds_a[i]) * (z[i] + ad * dz_a[i]))
                .sum::<f64>()
                / rows as f64;
            let sigma = (mu_aff / mu).powi(3).min(1.0);

            let rc: Vec<f64> = (0..rows)
                .map(|i| s[i] * z[i] + ds_a[i] * dz_a[i] - sigma * mu)
                .collect();
            let (dx, ds, dz) = newton(&rc);
            let ap = (0.99 * max_step(&s, &ds)).min(1.0);
            let ad = (0.99 * max_step(&z, &dz)).min(1.0);
            for i in 0..dim {
                x[i] += ap * dx[i];
            }
            for i in 0..rows {
                s[i] += ap * ds[i];
                z[i] += ad * dz[i];
            }
        }
        match best {
            Some((score, x, d)) if score <= ACCEPT_TOLERANCE => Ok((self.coefficients(&x), d)),
            _ => Err(SolverError::NotConverged {
                iterations: diag.iterations,
                primal: diag.primal_residual,
                dual: diag.dual_residual,
                gap: diag.gap,
            }),
        }
    }
}

/// Iterations without improvement before a run counts as stalled.
const STALL_ITERATIONS: usize = 5;
/// Worst residual accepted from a stalled run; the strict tolerance can sit
/// below the rounding floor of the normal equations.
pub const ACCEPT_TOLERANCE: f64 = 1e-6;

/// Largest `alpha <= 1/0.99`-ish such that `v + alpha dv >= 0`.
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (a, d) in v.iter().zip(dv) {
        if *d < 0.0 {
            alpha = alpha.min(-a / d);
        }
    }
    alpha.min(1.0 / 0.99)
}

/// Cholesky with a growing diagonal shift when the normal matrix is only
/// numerically semidefinite.
fn factor_regularized(hm: &mut [f64], dim: usize) -> Result<(), SolverError> {
    let scale = (0..dim).map(|i| hm[i * dim + i]).fold(0.0f64, f64::max).max(1.0);
    let original = hm.to_vec();
    let mut shift = 1e-14 * scale;
    for _ in 0..8 {
        hm.copy_from_slice(&original);
        for i in 0..dim {
            hm[i * dim + i] += shift;
        }
        if cholesky_in_place(hm, dim).is_ok() {
            return Ok(());
        }
        shift *= 100.0;
    }
    Err(SolverError::Numerical("normal equations are not positive definite"))
}

/// Options of the first-order l1 solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IstaOptions {
    pub max_iterations: usize,
    /// Stop once `||s_k - s_{k-1}|| <= tolerance * max(||s_k||, tiny)`.
    pub tolerance: f64,
    pub record_objective: bool,
}

impl Default for IstaOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            tolerance: 1e-8,
            record_objective: false,
        }
    }
}

fn soft_threshold(z: C64, tau: f64) -> C64 {
    let m = z.norm();
    if m <= tau {
        ZERO
    } else {
        z * ((m - tau) / m)
    }
}

/// Largest eigenvalue of a Hermitian PSD matrix by power iteration.
pub fn spectral_norm_estimate(a: &CMatrix, iterations: usize) -> f64 {
    let n = a.cols();
    if n == 0 {
        return 0.0;
    }
    let mut v: Vec<C64> = (0..n).map(|i| C64::new(1.0, 0.1 * i as f64)).collect();
    let mut est = 0.0;
    for _ in 0..iterations {
        let w = a.mul_vec(&v);
        let nrm = crate::linalg::norm2(&w);
        if nrm == 0.0 {
            return 0.0;
        }
        est = nrm / crate::linalg::norm2(&v);
        v = w.into_iter().map(|z| z / nrm).collect();
    }
    est
}

/// `0.5 s^H A s - Re(b^H s) + tau ||s||_1`, i.e. the lasso objective up to
/// the constant `0.5 ||r||^2`.
pub fn lasso_objective(a: &CMatrix, b: &[C64], tau: f64, s: &[C64]) -> f64 {
    let as_ = a.mul_vec(s);
    let quad = crate::linalg::cdot(s, &as_).re;
    let lin = crate::linalg::cdot(b, s).re;
    0.5 * quad - lin + tau * s.iter().map(|z| z.norm()).sum::<f64>()
}

/// ISTA for `min 0.5 ||r - Theta s||^2 + tau ||s||_1` on Gram data.
pub fn l1_first_order(a: &CMatrix, b: &[C64], tau: f64, opts: &IstaOptions) -> Result<RecoveryResult, SolverError> {
    check_inputs(a, b, tau)?;
    let n = a.cols();
    let lip = 1.02 * spectral_norm_estimate(a, 100);
    let mut s = vec![ZERO; n];
    let mut diag = SolverDiagnostics::default();
    if lip == 0.0 {
        return Ok(finish(a, b, tau, s, diag));
    }
    let step = 1.0 / lip;
    for it in 0..opts.max_iterations {
        let grad = a.mul_vec(&s);
        let next: Vec<C64> = (0..n)
            .map(|i| soft_threshold(s[i] - (grad[i] - b[i]) * step, tau * step))
            .collect();
        let change: f64 = next.iter().zip(&s).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let size = crate::linalg::norm2(&next).max(f64::MIN_POSITIVE);
        s = next;
        diag.iterations = it + 1;
        if opts.record_objective {
            diag.objective_trace.push(lasso_objective(a, b, tau, &s));
        }
        if change <= opts.tolerance * size {
            break;
        }
    }
    Ok(finish(a, b, tau, s, diag))
}

/// How recovered coefficients are turned into detections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectionPolicy {
    /// Keep entries with `|s_n| >= fraction * max |s|`.
    Threshold { fraction: f64 },
    /// Keep the `k` largest nonzero entries.
    TopK { k: usize },
}

impl Default for DetectionPolicy {
    fn default() -> Self {
        DetectionPolicy::Threshold { fraction: 0.5 }
    }
}

/// Indices selected by `policy`, in decreasing magnitude.
pub fn support_indices(s: &[C64], policy: DetectionPolicy) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..s.len()).filter(|&i| s[i].norm() > 0.0).collect();
    idx.sort_by(|&i, &j| s[j].norm().total_cmp(&s[i].norm()).then(i.cmp(&j)));
    match policy {
        DetectionPolicy::Threshold { fraction } => {
            let peak = idx.first().map(|&i| s[i].norm()).unwrap_or(0.0);
            idx.retain(|&i| s[i].norm() >= fraction * peak);
        }
        DetectionPolicy::TopK { k } => idx.truncate(k),
    }
    idx
}

/// One recovered grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub index: usize,
    pub point: GridPoint,
    pub amplitude: C64,
}

pub fn extract_support(s: &[C64], grid: &ParamGrid, policy: DetectionPolicy) -> Result<Vec<Detection>, Error> {
    if s.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            context: "coefficients vs grid",
            expected: grid.len(),
            actual: s.len(),
        });
    }
    support_indices(s, policy)
        .into_iter()
        .map(|i| {
            Ok(Detection {
                index: i,
                point: grid.point(i)?,
                amplitude: s[i],
            })
        })
        .collect()
}

/// Noise-calibrated `lambda = kappa sigma max_n ||theta_n|| sqrt(2 ln N)`,
/// where `sigma^2` is the interference power per compressed sample.
pub fn noise_lambda(kappa: f64, sigma: f64, max_column_norm: f64, columns: usize) -> f64 {
    let n = columns.max(2) as f64;
    kappa * sigma * max_column_norm * (2.0 * n.ln()).sqrt()
}
