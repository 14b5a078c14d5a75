//! Solvers whose unknowns are the signals themselves: calibrated basis
//! pursuit, A-Cal, and the over-determined closed-form solver.

use std::time::Instant;

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use serde::{Deserialize, Serialize};

use super::admm::{Admm, AdmmRun, AffineTerm, L1Term, Prox};
use super::{check_shapes, zero_column_diagnostics, Diagnostic, InverseGains, SolveResult, SolverConfig, SolverKind};
use crate::model::{cross_measurements, CrossMode, GainVector};
use crate::numerics::{AffineProjector, ComplexMatrix};
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
/// Condition estimate above which the closed-form system is flagged.
const CONDITION_WARN: f64 = 1e12;
/// Relative residual up to which a closed-form solve counts as exact.
const CLOSED_FORM_RESIDUAL: f64 = 1e-6;

/// Root-mean-square magnitude, or 1 for an all-zero input.
pub(crate) fn rms(values: impl Iterator<Item = C64>) -> f64 {
    let (mut acc, mut count) = (0.0, 0usize);
    for v in values {
        acc += v.norm_sqr();
        count += 1;
    }
    let r = (acc / count.max(1) as f64).sqrt();
    if r > 0.0 && r.is_finite() {
        r
    } else {
        1.0
    }
}

pub(crate) fn matrix_values(a: &ComplexMatrix) -> impl Iterator<Item = C64> + '_ {
    (0..a.cols()).flat_map(move |j| (0..a.rows()).map(move |i| a.get(i, j)))
}

/// Common fields of an ADMM-based result.
pub(crate) fn admm_result(kind: SolverKind, signals: ComplexMatrix, run: &AdmmRun, started: Instant) -> SolveResult {
    let mut diagnostics = Vec::new();
    if let Some((first_iteration, count)) = run.merit_increase {
        diagnostics.push(Diagnostic::MeritIncrease { first_iteration, count });
    }
    SolveResult {
        solver: kind,
        signals_hat: signals,
        gains_hat: None,
        tau_hat: None,
        iterations: run.iterations,
        converged: run.converged,
        primal_residual: run.primal,
        dual_residual: run.dual,
        constraint_residual: 0.0,
        penalty: run.rho,
        rank_one_gap: None,
        diagnostics,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        iteration_ms: run.loop_ms / run.iterations.max(1) as f64,
    }
}

/// Tracks `max |lhs − rhs|` against the largest magnitude on either side.
#[derive(Default)]
pub(crate) struct Violation {
    worst: f64,
    scale: f64,
}

impl Violation {
    pub fn add(&mut self, lhs: C64, rhs: C64) {
        self.worst = self.worst.max((lhs - rhs).norm());
        self.scale = self.scale.max(lhs.norm()).max(rhs.norm());
    }

    pub fn relative(&self) -> f64 {
        if self.worst == 0.0 {
            0.0
        } else {
            self.worst / self.scale
        }
    }
}

/// `|Σ t − c| / |c|`.
pub(crate) fn sum_violation(tau: &[C64], c: f64) -> f64 {
    (tau.iter().sum::<C64>() - C64::new(c, 0.0)).norm() / c.abs()
}

/// Relative violation of `y_{iℓ} τ_i = m_i^H z_ℓ` and `Σ τ = c`.
fn linear_violation(y: &ComplexMatrix, sensing: &ComplexMatrix, z: &ComplexMatrix, tau: &[C64], c: f64) -> Result<f64> {
    let pred = sensing.matmul(z)?;
    let mut v = Violation::default();
    for l in 0..y.cols() {
        for i in 0..y.rows() {
            v.add(y.get(i, l) * tau[i], pred.get(i, l));
        }
    }
    Ok(v.relative().max(sum_violation(tau, c)))
}

/// Gains `1/τ̂`, or a diagnostic when some `τ̂_i` is too small to invert.
fn gains_from_tau(tau: &[C64], c: f64, diagnostics: &mut Vec<Diagnostic>) -> Option<GainVector> {
    let floor = 1e-10 * c.abs() / tau.len().max(1) as f64;
    match tau.iter().position(|t| t.norm() < floor) {
        Some(sensor) => {
            diagnostics.push(Diagnostic::GainRecoveryFailed { sensor });
            None
        }
        None => Some(GainVector::from_inverse(tau)),
    }
}

/// Stacked system `y_{iℓ} t_i − m_i^H z_ℓ = 0`, `Σ t = c` over `(z_1..z_L, t)`.
fn acal_system(y: &ComplexMatrix, sensing: &ComplexMatrix, y_scale: f64, c: f64) -> (ComplexMatrix, Vec<C64>) {
    let (m, n, l) = (sensing.rows(), sensing.cols(), y.cols());
    let mut a = ComplexMatrix::zeros(m * l + 1, n * l + m);
    for k in 0..l {
        for i in 0..m {
            let row = k * m + i;
            for b in 0..n {
                a.set(row, k * n + b, -sensing.get(i, b));
            }
            a.set(row, n * l + i, y.get(i, k) / y_scale);
        }
    }
    for i in 0..m {
        a.set(m * l, n * l + i, C64::new(1.0, 0.0));
    }
    let mut b = vec![ZERO; m * l + 1];
    b[m * l] = C64::new(c, 0.0);
    (a, b)
}

/// Calibrated basis pursuit, column by column: `min ‖z‖₁` s.t. `y_ℓ = M z`.
pub fn solve_calibrated_bp(y: &ComplexMatrix, sensing: &ComplexMatrix, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    check_shapes(y, sensing)?;
    let started = Instant::now();
    let (n, l) = (sensing.cols(), y.cols());
    let s = rms(matrix_values(y));
    let mut terms: Vec<Box<dyn Prox>> = vec![Box::new(L1Term::uniform(vec![0..n * l]))];
    let mut dropped = 0;
    for k in 0..l {
        let b: Vec<C64> = y.column(k).iter().map(|v| v / s).collect();
        let p = AffineProjector::new_allow_redundant(sensing, &b)?;
        dropped += p.num_dropped();
        terms.push(Box::new(AffineTerm::new(vec![k * n..(k + 1) * n], p)));
    }
    let run = Admm::new(n * l, terms).run(vec![ZERO; n * l], cfg)?;
    let signals = ComplexMatrix::from_fn(n, l, |i, k| run.locals[1 + k][i] * s);

    let pred = sensing.matmul(&signals)?;
    let mut v = Violation::default();
    for k in 0..l {
        for i in 0..y.rows() {
            v.add(y.get(i, k), pred.get(i, k));
        }
    }
    let mut result = admm_result(SolverKind::Bp, signals, &run, started);
    result.constraint_residual = v.relative();
    result.gains_hat = Some(GainVector::unit(y.rows()));
    if dropped > 0 {
        result.diagnostics.push(Diagnostic::RedundantConstraints { dropped });
    }
    result.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(result)
}

/// A-Cal: `min Σ‖z_ℓ‖₁` s.t. `y_{iℓ} t_i = m_i^H z_ℓ`, `Σ t = c`, with complex
/// `t`. Gains are recovered as `1/τ̂`.
pub fn solve_acal(y: &ComplexMatrix, sensing: &ComplexMatrix, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    check_shapes(y, sensing)?;
    let started = Instant::now();
    let (m, n, l) = (sensing.rows(), sensing.cols(), y.cols());
    let c = cfg.sum_constant(m);
    let s = rms(matrix_values(y));
    let (a, b) = acal_system(y, sensing, s, c);
    let projector = AffineProjector::new_allow_redundant(&a, &b)?;
    let dropped = projector.num_dropped();
    let dim = n * l + m;
    let terms: Vec<Box<dyn Prox>> = vec![
        Box::new(L1Term::uniform(vec![0..n * l])),
        Box::new(AffineTerm::new(vec![0..dim], projector)),
    ];
    let mut z0 = vec![ZERO; dim];
    for t in &mut z0[n * l..] {
        *t = C64::new(c / m as f64, 0.0);
    }
    let run = Admm::new(dim, terms).run(z0, cfg)?;
    let w = &run.locals[1];
    let signals = ComplexMatrix::from_fn(n, l, |i, k| w[k * n + i] * s);
    let tau = w[n * l..].to_vec();

    let mut result = admm_result(SolverKind::Acal, signals, &run, started);
    result.constraint_residual = linear_violation(y, sensing, &result.signals_hat, &tau, c)?;
    result.diagnostics.extend(zero_column_diagnostics(y));
    if dropped > 0 {
        result.diagnostics.push(Diagnostic::RedundantConstraints { dropped });
    }
    result.gains_hat = gains_from_tau(&tau, c, &mut result.diagnostics);
    result.tau_hat = Some(InverseGains { tau });
    result.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(result)
}

/// Which linear system the closed-form solver recovers the gains from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClosedFormMode {
    /// Complex inverse gains `τ = 1/(d e^{jθ})` from the linear measurements.
    #[default]
    Amplitude,
    /// Real inverse gains `τ = 1/d²` of the cross-measurement system, with
    /// phases recovered afterwards.
    Complete,
}

/// Least-squares solve of the stacked linear system when it has at least as
/// many independent equations as unknowns, `M (L − 1) + 1 ≥ N L`.
///
/// In complete mode the lifted system alone has `L²N² + M` unknowns, so the
/// gains are obtained from the linear system and mapped to `τ_C ∝ |τ|²`,
/// normalized to `Σ τ_C = c`; the lifted constraints are then checked on
/// `X̂ = x̂ x̂^H`.
pub fn solve_closed_form(
    y: &ComplexMatrix,
    sensing: &ComplexMatrix,
    cfg: &SolverConfig,
    mode: ClosedFormMode,
) -> Result<SolveResult> {
    cfg.validate()?;
    check_shapes(y, sensing)?;
    let started = Instant::now();
    let (m, n, l) = (sensing.rows(), sensing.cols(), y.cols());
    if m * (l - 1) + 1 < n * l {
        return Err(Error::Argument(format!(
            "closed form needs M(L-1)+1 >= NL, got M={m}, N={n}, L={l}"
        )));
    }
    let c = cfg.sum_constant(m);
    let s = rms(matrix_values(y));
    let (a, b) = acal_system(y, sensing, s, c);
    let (rows, cols) = (a.rows(), a.cols());
    let mut am = Mat::<C64>::zeros(rows, cols);
    let mut rhs = Mat::<C64>::zeros(rows, 1);
    for i in 0..rows {
        let norm = (0..cols).map(|j| a.get(i, j).norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        for j in 0..cols {
            am[(i, j)] = a.get(i, j) / norm;
        }
        rhs[(i, 0)] = b[i] / norm;
    }
    let mut diagnostics = zero_column_diagnostics(y);
    let sv = am.singular_values().map_err(|_| Error::EigenNonConvergence { dimension: cols })?;
    let smin = sv.last().copied().unwrap_or(0.0);
    let condition = if smin > 0.0 { sv[0] / smin } else { f64::INFINITY };
    if condition > CONDITION_WARN {
        diagnostics.push(Diagnostic::IllConditioned { condition });
    }
    am.col_piv_qr().solve_lstsq_in_place(rhs.as_mut());
    let z = ComplexMatrix::from_fn(n, l, |i, k| rhs[(k * n + i, 0)] * s);
    let tau_a: Vec<C64> = (0..m).map(|i| rhs[(n * l + i, 0)]).collect();

    let mut result = SolveResult {
        solver: SolverKind::ClosedForm,
        signals_hat: z,
        gains_hat: None,
        tau_hat: None,
        iterations: 0,
        converged: false,
        primal_residual: 0.0,
        dual_residual: 0.0,
        constraint_residual: 0.0,
        penalty: cfg.rho,
        rank_one_gap: None,
        diagnostics,
        wall_ms: 0.0,
        iteration_ms: 0.0,
    };
    match mode {
        ClosedFormMode::Amplitude => {
            result.constraint_residual = linear_violation(y, sensing, &result.signals_hat, &tau_a, c)?;
            result.gains_hat = gains_from_tau(&tau_a, c, &mut result.diagnostics);
            result.tau_hat = Some(InverseGains { tau: tau_a });
        }
        ClosedFormMode::Complete => {
            let mag: Vec<f64> = tau_a.iter().map(|t| t.norm_sqr()).collect();
            let total: f64 = mag.iter().sum();
            if total == 0.0 {
                return Err(Error::Argument("closed-form gains vanished".into()));
            }
            let beta = c / total;
            let tau: Vec<C64> = mag.iter().map(|v| C64::new(v * beta, 0.0)).collect();
            result.signals_hat = result.signals_hat.scale(C64::new(beta.sqrt(), 0.0));
            result.constraint_residual =
                complete_violation(y, sensing, &result.signals_hat, &tau)?.max(sum_violation(&tau, c));
            result.tau_hat = Some(InverseGains { tau });
            super::attach_gains(&mut result, y, sensing)?;
        }
    }
    result.converged = result.constraint_residual <= CLOSED_FORM_RESIDUAL;
    result.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(result)
}

/// Relative violation of `τ_i g_{i,k,ℓ} = m_i^H x̂_k x̂_ℓ^H m_i` over all pairs.
fn complete_violation(y: &ComplexMatrix, sensing: &ComplexMatrix, x: &ComplexMatrix, tau: &[C64]) -> Result<f64> {
    let g = cross_measurements(y, CrossMode::Full);
    let pred = sensing.matmul(x)?;
    let mut v = Violation::default();
    for i in 0..y.rows() {
        for k in 0..y.cols() {
            for l in 0..y.cols() {
                let lhs = tau[i] * g.get(i, k, l).unwrap_or(ZERO);
                v.add(lhs, pred.get(i, k) * pred.get(i, l).conj());
            }
        }
    }
    Ok(v.relative())
}
