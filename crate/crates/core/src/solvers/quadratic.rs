//! Lifted solvers: P-Cal and C-Cal over the full `LN × LN` matrix, and their
//! scalable versions over `L` overlapping `2N × 2N` blocks.
//!
//! Consensus terms per program:
//!
//! * entrywise ℓ1 over the lifted variable,
//! * PSD cone (whole matrix, or one term per block),
//! * the lifted equality constraints, projected exactly (see [`LiftedAffine`]),
//!   coupled through the real gain vector `t` in the complete-calibration
//!   programs.
//!
//! Cross measurements are divided by their RMS before solving; every program
//! is homogeneous in the data, so the lifted solution is rescaled afterwards
//! and `t` is unchanged.

use std::f64::consts::SQRT_2;
use std::ops::Range;
use std::time::Instant;

use faer::{Mat, MatRef};

use super::admm::{Admm, L1Term, Prox};
use super::extract::{chain, extract_full, rank_one_gap, BlockSolution};
use super::lifted::{assemble_block, block_ref, BlockPsd, BlockSlot, DenseLiftedAffine, FullPsd, GramProjector, LiftedAffine};
use super::linear::{admm_result, rms, sum_violation, Violation};
use super::{Diagnostic, InverseGains, SolveResult, SolverConfig, SolverKind};
use crate::model::{CrossMeasurements, CrossMode};
use crate::numerics::ComplexMatrix;
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// P-Cal: `min ‖Z‖₁` s.t. `Z ⪰ 0`, `g_{i,k,ℓ} = m_i^H Z_{k,ℓ} m_i`.
///
/// Returns the result and the lifted estimate `X̂`. Gains are left unset; see
/// [`super::attach_gains`].
pub fn solve_pcal(g: &CrossMeasurements, sensing: &ComplexMatrix, cfg: &SolverConfig) -> Result<(SolveResult, ComplexMatrix)> {
    solve_full(SolverKind::Pcal, g, sensing, cfg, None)
}

/// P-Cal started from `start` (`LN × LN`) instead of zero.
pub fn solve_pcal_from(
    g: &CrossMeasurements,
    sensing: &ComplexMatrix,
    cfg: &SolverConfig,
    start: &ComplexMatrix,
) -> Result<(SolveResult, ComplexMatrix)> {
    solve_full(SolverKind::Pcal, g, sensing, cfg, Some((start, None)))
}

/// C-Cal: `min ‖Z‖₁` s.t. `Z ⪰ 0`, `t_i g_{i,k,ℓ} = m_i^H Z_{k,ℓ} m_i`,
/// `Σ t = c`, with real `t`.
pub fn solve_ccal(g: &CrossMeasurements, sensing: &ComplexMatrix, cfg: &SolverConfig) -> Result<(SolveResult, ComplexMatrix)> {
    solve_full(SolverKind::Ccal, g, sensing, cfg, None)
}

/// C-Cal started from `(start, tau)`.
pub fn solve_ccal_from(
    g: &CrossMeasurements,
    sensing: &ComplexMatrix,
    cfg: &SolverConfig,
    start: &ComplexMatrix,
    tau: &[f64],
) -> Result<(SolveResult, ComplexMatrix)> {
    solve_full(SolverKind::Ccal, g, sensing, cfg, Some((start, Some(tau))))
}

/// P-Cal-Scalable over the banded cross measurements. `L ≤ 2` is delegated to
/// [`solve_pcal`], whose blocks it would duplicate.
pub fn solve_pcal_scalable(
    g: &CrossMeasurements,
    sensing: &ComplexMatrix,
    cfg: &SolverConfig,
) -> Result<(SolveResult, BlockSolution)> {
    solve_banded(SolverKind::PcalScalable, g, sensing, cfg, None)
}

/// P-Cal-Scalable started from the given blocks.
pub fn solve_pcal_scalable_from(
    g: &CrossMeasurements,
    sensing: &ComplexMatrix,
    cfg: &SolverConfig,
    start: &BlockSolution,
) -> Result<(SolveResult, BlockSolution)> {
    solve_banded(SolverKind::PcalScalable, g, sensing, cfg, Some((start, None)))
}

/// C-Cal-Scalable: the P-Cal-Scalable blocks coupled through real gains.
pub fn solve_ccal_scalable(
    g: &CrossMeasurements,
    sensing: &ComplexMatrix,
    cfg: &SolverConfig,
) -> Result<(SolveResult, BlockSolution)> {
    solve_banded(SolverKind::CcalScalable, g, sensing, cfg, None)
}

/// C-Cal-Scalable started from `(start, tau)`.
pub fn solve_ccal_scalable_from(
    g: &CrossMeasurements,
    sensing: &ComplexMatrix,
    cfg: &SolverConfig,
    start: &BlockSolution,
    tau: &[f64],
) -> Result<(SolveResult, BlockSolution)> {
    solve_banded(SolverKind::CcalScalable, g, sensing, cfg, Some((start, Some(tau))))
}

fn with_gains(kind: SolverKind) -> bool {
    matches!(kind, SolverKind::Ccal | SolverKind::CcalScalable)
}

fn check_inputs(g: &CrossMeasurements, sensing: &ComplexMatrix, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if g.sensors() != sensing.rows() {
        return Err(Error::Dimension(format!(
            "cross measurements for {} sensors but sensing matrix has {} rows",
            g.sensors(),
            sensing.rows()
        )));
    }
    if sensing.rows() == 0 || sensing.cols() == 0 || g.signals() == 0 {
        return Err(Error::Dimension("empty problem".into()));
    }
    if !sensing.is_finite() || g.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("non-finite input".into()));
    }
    Ok(())
}

fn zero_columns(g: &CrossMeasurements) -> Vec<Diagnostic> {
    (0..g.signals())
        .filter(|&l| (0..g.sensors()).all(|i| g.diag(i, l) == ZERO))
        .map(|column| Diagnostic::ZeroMeasurementColumn { column })
        .collect()
}

fn initial_gains(m: usize, c: f64, tau: Option<&[f64]>) -> Result<Vec<C64>> {
    match tau {
        Some(t) if t.len() != m => Err(Error::Dimension(format!("{} start gains for {m} sensors", t.len()))),
        Some(t) => Ok(t.iter().map(|&v| C64::new(v, 0.0)).collect()),
        None => Ok(vec![C64::new(c / m as f64, 0.0); m]),
    }
}

/// Builds the affine term, falling back to a dense real projection for coupled
/// programs whose Gram matrix is singular.
fn affine_term(
    scope: Vec<Range<usize>>,
    sensing: &ComplexMatrix,
    blocks: Vec<BlockSlot>,
    gains: Option<(usize, f64)>,
    local_len: usize,
    diagnostics: &mut Vec<Diagnostic>,
) -> Result<Box<dyn Prox>> {
    match (GramProjector::new(sensing), gains) {
        (Ok(gram), None) => Ok(Box::new(LiftedAffine::new(scope, gram, blocks))),
        (Ok(gram), Some((t_offset, c))) => Ok(Box::new(LiftedAffine::new(scope, gram, blocks).with_gains(t_offset, c)?)),
        (Err(e), None) => Err(e),
        (Err(e @ Error::RankDeficient { .. }), Some((_, c))) => {
            match DenseLiftedAffine::new(scope, sensing, &blocks, local_len, c)? {
                Some(term) => {
                    if term.dropped() > 0 {
                        diagnostics.push(Diagnostic::RedundantConstraints { dropped: term.dropped() });
                    }
                    Ok(Box::new(term))
                }
                None => Err(e),
            }
        }
        (Err(e), Some(_)) => Err(e),
    }
}

/// Relative violation of the lifted constraints `m_i^H V m_i = t_i g_i` on
/// the given (unnormalized) blocks.
fn lifted_violation<'a>(
    sensing: &ComplexMatrix,
    blocks: impl Iterator<Item = (MatRef<'a, C64>, Vec<C64>)>,
    tau: Option<&[C64]>,
) -> f64 {
    let s = sensing.as_faer();
    let (m, n) = (s.nrows(), s.ncols());
    let mut work = Mat::<C64>::zeros(m, n);
    let mut v = Violation::default();
    for (block, targets) in blocks {
        faer::linalg::matmul::matmul(work.as_mut(), faer::Accum::Replace, s, block, C64::new(1.0, 0.0), faer::Par::Seq);
        for i in 0..m {
            let lhs: C64 = (0..n).map(|b| work[(i, b)] * s[(i, b)].conj()).sum();
            let rhs = tau.map_or(targets[i], |t| targets[i] * t[i]);
            v.add(lhs, rhs);
        }
    }
    v.relative()
}

fn solve_full(
    kind: SolverKind,
    g: &CrossMeasurements,
    sensing: &ComplexMatrix,
    cfg: &SolverConfig,
    start: Option<(&ComplexMatrix, Option<&[f64]>)>,
) -> Result<(SolveResult, ComplexMatrix)> {
    check_inputs(g, sensing, cfg)?;
    if g.mode() != CrossMode::Full {
        return Err(Error::Argument(format!("{kind} needs full cross measurements")));
    }
    let started = Instant::now();
    let (m, n, l) = (sensing.rows(), sensing.cols(), g.signals());
    let big = l * n;
    let zlen = big * big;
    let gains = with_gains(kind);
    let c = cfg.sum_constant(m);
    let s = rms(g.values().iter().copied());

    let mut blocks = Vec::with_capacity(l * l);
    for k in 0..l {
        for j in 0..l {
            let coeff = (0..m).map(|i| g.get(i, k, j).unwrap_or(ZERO) / s).collect();
            blocks.push(BlockSlot {
                offset: j * n * big + k * n,
                col_stride: big,
                coeff,
            });
        }
    }
    let dim = zlen + if gains { m } else { 0 };
    let mut diagnostics = zero_columns(g);
    let affine = affine_term(
        vec![0..dim],
        sensing,
        blocks.clone(),
        gains.then_some((zlen, c)),
        dim,
        &mut diagnostics,
    )?;
    let terms: Vec<Box<dyn Prox>> = vec![Box::new(L1Term::uniform(vec![0..zlen])), Box::new(FullPsd::new(0, big)), affine];

    let mut z0 = vec![ZERO; dim];
    let start_tau = start.and_then(|s| s.1);
    if let Some((x, _)) = start {
        if x.rows() != big || x.cols() != big {
            return Err(Error::Dimension(format!("start is {}x{}, expected {big}x{big}", x.rows(), x.cols())));
        }
        for col in 0..big {
            for row in 0..big {
                z0[col * big + row] = x.get(row, col) / s;
            }
        }
    }
    if gains {
        z0[zlen..].copy_from_slice(&initial_gains(m, c, start_tau)?);
    }

    let run = Admm::new(dim, terms).run(z0, cfg)?;
    let w = &run.locals[2];
    let x_hat = ComplexMatrix::from_fn(big, big, |r, col| w[col * big + r] * s).hermitized();
    let tau: Option<Vec<C64>> = gains.then(|| w[zlen..].to_vec());

    let (signals, degenerate) = extract_full(&x_hat, l)?;
    let stacked: Vec<C64> = signals.columns().concat();
    let gap = rank_one_gap(&x_hat, &stacked);

    let xf = x_hat.as_faer();
    let violation = lifted_violation(
        sensing,
        blocks.iter().enumerate().map(|(b, _)| {
            let (k, j) = (b / l, b % l);
            let targets = (0..m).map(|i| g.get(i, k, j).unwrap_or(ZERO)).collect();
            (xf.submatrix(k * n, j * n, n, n), targets)
        }),
        tau.as_deref(),
    );

    let mut result = admm_result(kind, signals, &run, started);
    result.diagnostics.extend(diagnostics);
    if degenerate {
        result.diagnostics.push(Diagnostic::DegenerateEigenspace { block: None });
    }
    result.rank_one_gap = Some(gap);
    result.constraint_residual = violation;
    if let Some(tau) = tau {
        result.constraint_residual = result.constraint_residual.max(sum_violation(&tau, c));
        flag_small_gains(&tau, c, &mut result.diagnostics);
        result.tau_hat = Some(InverseGains { tau });
    }
    result.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok((result, x_hat))
}

/// Flags `Re τ̂_i ≤ 1e-10 c/M`, where `d̂_i = 1/√Re τ̂_i` is undefined.
fn flag_small_gains(tau: &[C64], c: f64, diagnostics: &mut Vec<Diagnostic>) {
    let floor = 1e-10 * c.abs() / tau.len().max(1) as f64;
    if let Some(sensor) = tau.iter().position(|t| t.re <= floor) {
        diagnostics.push(Diagnostic::GainRecoveryFailed { sensor });
    }
}

fn solve_banded(
    kind: SolverKind,
    g: &CrossMeasurements,
    sensing: &ComplexMatrix,
    cfg: &SolverConfig,
    start: Option<(&BlockSolution, Option<&[f64]>)>,
) -> Result<(SolveResult, BlockSolution)> {
    check_inputs(g, sensing, cfg)?;
    let (m, n, l) = (sensing.rows(), sensing.cols(), g.signals());
    if l <= 2 {
        return delegate_small(kind, g, sensing, cfg, start);
    }
    let g = if g.mode() == CrossMode::Banded { g.clone() } else { g.to_banded() };
    let started = Instant::now();
    let nn = n * n;
    let zlen = 2 * l * nn;
    let gains = with_gains(kind);
    let c = cfg.sum_constant(m);
    let s = rms(g.values().iter().copied());
    let d_range = |k: usize| k * nn..(k + 1) * nn;
    let o_range = |k: usize| (l + k) * nn..(l + k + 1) * nn;

    let mut blocks = Vec::with_capacity(2 * l);
    for k in 0..l {
        blocks.push(BlockSlot {
            offset: k * nn,
            col_stride: n,
            coeff: (0..m).map(|i| g.diag(i, k) / s).collect(),
        });
    }
    for k in 0..l {
        blocks.push(BlockSlot {
            offset: (l + k) * nn,
            col_stride: n,
            coeff: (0..m).map(|i| g.next(i, k) * SQRT_2 / s).collect(),
        });
    }
    let dim = zlen + if gains { m } else { 0 };
    let mut diagnostics = zero_columns(&g);
    let affine = affine_term(
        vec![0..dim],
        sensing,
        blocks,
        gains.then_some((zlen, c)),
        dim,
        &mut diagnostics,
    )?;
    let mut terms: Vec<Box<dyn Prox>> = vec![
        Box::new(L1Term::new(vec![0..zlen], vec![(l * nn, 1.0), (l * nn, 1.0 / SQRT_2)])),
        affine,
    ];
    for k in 0..l {
        terms.push(Box::new(BlockPsd::new(d_range(k), o_range(k), d_range((k + 1) % l), n)));
    }

    let mut z0 = vec![ZERO; dim];
    if let Some((bs, _)) = start {
        if bs.len() != l || bs.blocks.iter().any(|b| b.rows() != 2 * n || b.cols() != 2 * n) {
            return Err(Error::Dimension(format!("start needs {l} blocks of size {}", 2 * n)));
        }
        for (k, b) in bs.blocks.iter().enumerate() {
            for col in 0..n {
                for row in 0..n {
                    z0[k * nn + col * n + row] = b.get(row, col) / s;
                    z0[(l + k) * nn + col * n + row] = b.get(row, n + col) * SQRT_2 / s;
                }
            }
        }
    }
    if gains {
        z0[zlen..].copy_from_slice(&initial_gains(m, c, start.and_then(|s| s.1))?);
    }

    let run = Admm::new(dim, terms).run(z0, cfg)?;
    let w = &run.locals[1];
    let tau: Option<Vec<C64>> = gains.then(|| w[zlen..].to_vec());
    let unscaled: Vec<C64> = w[..zlen].iter().map(|v| v * s).collect();
    let solution = BlockSolution {
        blocks: (0..l)
            .map(|k| {
                let mut b = Mat::<C64>::zeros(2 * n, 2 * n);
                assemble_block(
                    b.as_mut(),
                    &unscaled[d_range(k)],
                    &unscaled[o_range(k)],
                    &unscaled[d_range((k + 1) % l)],
                    n,
                );
                ComplexMatrix::from(b).hermitized()
            })
            .collect(),
    };
    let chained = chain(&solution, true)?;
    let gap = solution
        .blocks
        .iter()
        .zip(&chained.vectors)
        .map(|(b, v)| rank_one_gap(b, v))
        .fold(0.0, f64::max);

    let mut violation_blocks = Vec::with_capacity(2 * l);
    for k in 0..l {
        let slot = BlockSlot { offset: k * nn, col_stride: n, coeff: vec![] };
        violation_blocks.push((block_ref(&unscaled, &slot, n), (0..m).map(|i| g.diag(i, k)).collect::<Vec<_>>()));
    }
    let offdiag: Vec<C64> = unscaled[l * nn..].iter().map(|v| v / SQRT_2).collect();
    for k in 0..l {
        let slot = BlockSlot { offset: k * nn, col_stride: n, coeff: vec![] };
        violation_blocks.push((block_ref(&offdiag, &slot, n), (0..m).map(|i| g.next(i, k)).collect()));
    }
    let violation = lifted_violation(sensing, violation_blocks.into_iter(), tau.as_deref());

    let mut result = admm_result(kind, chained.signals, &run, started);
    result.diagnostics.extend(diagnostics);
    result.diagnostics.extend(chained.diagnostics);
    result.rank_one_gap = Some(gap);
    result.constraint_residual = violation;
    if let Some(tau) = tau {
        result.constraint_residual = result.constraint_residual.max(sum_violation(&tau, c));
        flag_small_gains(&tau, c, &mut result.diagnostics);
        result.tau_hat = Some(InverseGains { tau });
    }
    result.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok((result, solution))
}

/// `L ≤ 2`: the banded blocks cover (and for `L = 2`, duplicate) the full
/// matrix, so the full program is solved instead.
fn delegate_small(
    kind: SolverKind,
    g: &CrossMeasurements,
    sensing: &ComplexMatrix,
    cfg: &SolverConfig,
    start: Option<(&BlockSolution, Option<&[f64]>)>,
) -> Result<(SolveResult, BlockSolution)> {
    let l = g.signals();
    let n = sensing.cols();
    let full = g.to_full().ok_or_else(|| Error::Argument("cannot form full cross measurements".into()))?;
    let full_kind = if with_gains(kind) { SolverKind::Ccal } else { SolverKind::Pcal };
    let full_start = match start {
        Some((bs, tau)) => {
            let b = bs.blocks.first().ok_or_else(|| Error::Dimension("no start blocks".into()))?;
            if b.rows() != 2 * n {
                return Err(Error::Dimension(format!("start block is {}x{}, expected {}", b.rows(), b.cols(), 2 * n)));
            }
            Some((ComplexMatrix::from_fn(l * n, l * n, |r, c| b.get(r, c)), tau))
        }
        None => None,
    };
    let (mut result, x_hat) = solve_full(
        full_kind,
        &full,
        sensing,
        cfg,
        full_start.as_ref().map(|(x, t)| (x, *t)),
    )?;
    result.solver = kind;
    result.diagnostics.push(Diagnostic::DelegatedToFull { l });
    Ok((result, BlockSolution::from_full(&x_hat, l)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::verdict;
    use crate::model::{cross_measurements, generate_instance, GeneratorConfig, ProblemInstance};
    use crate::numerics::psd_project;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn inst(n: usize, m: usize, l: usize, k: usize, sigma: f64, seed: u64) -> ProblemInstance {
        generate_instance(&GeneratorConfig { n, m, l, k, sigma, pc: 1.0, seed }).unwrap()
    }

    fn truth_lift(p: &ProblemInstance) -> ComplexMatrix {
        ComplexMatrix::outer(&p.signals.columns().concat())
    }

    #[test]
    fn scalar_lift() {
        let sensing = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0)]]).unwrap();
        let y = ComplexMatrix::from_rows(&[vec![C64::from_polar(1.5, 0.8)]]).unwrap();
        let g = cross_measurements(&y, CrossMode::Full);
        let (r, x) = solve_pcal(&g, &sensing, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert!((x.get(0, 0) - c(2.25, 0.0)).norm() < 1e-6);
        assert!((r.signals_hat.get(0, 0) - c(1.5, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn pcal_truth_is_fixed_point_of_projections() {
        let p = inst(6, 6, 2, 2, 0.0, 1);
        let g = cross_measurements(&p.measurements, CrossMode::Full);
        let truth = truth_lift(&p);
        let cfg = SolverConfig { max_iter: 1, ..Default::default() };
        let (r, x) = solve_pcal_from(&g, &p.sensing, &cfg, &truth).unwrap();
        // the affine copy of the first iterate is the projection of the start
        assert!(x.sub(&truth).unwrap().frobenius_norm() <= 1e-10 * truth.frobenius_norm());
        assert!(r.constraint_residual < 1e-12);
        let psd = psd_project(&truth).unwrap();
        assert!(psd.sub(&truth).unwrap().frobenius_norm() <= 1e-10 * truth.frobenius_norm());
    }

    #[test]
    fn pcal_recovers_small_sparse_instance() {
        let p = inst(8, 8, 3, 1, 0.0, 2);
        let g = cross_measurements(&p.measurements, CrossMode::Full);
        let (r, _) = solve_pcal(&g, &p.sensing, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.constraint_residual <= 1e-5);
        assert!(verdict(&p.signals, &r.signals_hat).unwrap().perfect);
    }

    #[test]
    fn ccal_two_sensor_hand_system() {
        let sensing = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0)], vec![c(1.0, 0.0)]]).unwrap();
        // x = 1, d = (1, 2): g_1 = 1, g_2 = 4
        let y = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0)], vec![c(2.0, 0.0)]]).unwrap();
        let g = cross_measurements(&y, CrossMode::Full);
        let cfg = SolverConfig { c: Some(2.0), ..Default::default() };
        let (r, x) = solve_ccal(&g, &sensing, &cfg).unwrap();
        assert!(r.converged);
        let tau = &r.tau_hat.as_ref().unwrap().tau;
        assert!((tau[0] - c(1.6, 0.0)).norm() < 1e-6, "{tau:?}");
        assert!((tau[1] - c(0.4, 0.0)).norm() < 1e-6);
        assert!((x.get(0, 0) - c(1.6, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn ccal_truth_is_fixed_point() {
        let p = inst(6, 6, 2, 2, 0.3, 3);
        let g = cross_measurements(&p.measurements, CrossMode::Full);
        let tau_true: Vec<f64> = p.gains.d.iter().map(|d| 1.0 / (d * d)).collect();
        let scale = 6.0 / tau_true.iter().sum::<f64>();
        let tau: Vec<f64> = tau_true.iter().map(|t| t * scale).collect();
        let truth = truth_lift(&p).scale(c(scale, 0.0));
        let cfg = SolverConfig { max_iter: 1, ..Default::default() };
        let (r, x) = solve_ccal_from(&g, &p.sensing, &cfg, &truth, &tau).unwrap();
        assert!(x.sub(&truth).unwrap().frobenius_norm() <= 1e-9 * truth.frobenius_norm());
        let got = &r.tau_hat.unwrap().tau;
        for (a, b) in got.iter().zip(&tau) {
            assert!((a.re - b).abs() < 1e-9 && a.im == 0.0);
        }
    }

    #[test]
    fn scalable_truth_is_fixed_point() {
        let p = inst(5, 5, 4, 2, 0.0, 4);
        let g = cross_measurements(&p.measurements, CrossMode::Banded);
        let truth = BlockSolution::from_signals(&p.signals);
        let cfg = SolverConfig { max_iter: 1, ..Default::default() };
        let (r, blocks) = solve_pcal_scalable_from(&g, &p.sensing, &cfg, &truth).unwrap();
        for (a, b) in blocks.blocks.iter().zip(&truth.blocks) {
            assert!(a.sub(b).unwrap().frobenius_norm() <= 1e-10 * b.frobenius_norm());
        }
        assert!(r.constraint_residual < 1e-12);
    }

    #[test]
    fn ccal_scalable_truth_is_fixed_point() {
        let p = inst(5, 5, 3, 2, 0.3, 5);
        let g = cross_measurements(&p.measurements, CrossMode::Banded);
        let tau_true: Vec<f64> = p.gains.d.iter().map(|d| 1.0 / (d * d)).collect();
        let scale = 5.0 / tau_true.iter().sum::<f64>();
        let tau: Vec<f64> = tau_true.iter().map(|t| t * scale).collect();
        let truth = BlockSolution::from_signals(&p.signals.scale(c(scale.sqrt(), 0.0)));
        let cfg = SolverConfig { max_iter: 1, ..Default::default() };
        let (_, blocks) = solve_ccal_scalable_from(&g, &p.sensing, &cfg, &truth, &tau).unwrap();
        for (a, b) in blocks.blocks.iter().zip(&truth.blocks) {
            assert!(a.sub(b).unwrap().frobenius_norm() <= 1e-9 * b.frobenius_norm());
        }
    }

    #[test]
    fn scalable_recovers_small_instance() {
        let p = inst(8, 8, 4, 1, 0.0, 6);
        let g = cross_measurements(&p.measurements, CrossMode::Banded);
        let (r, _) = solve_pcal_scalable(&g, &p.sensing, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.constraint_residual <= 1e-5);
        assert!(verdict(&p.signals, &r.signals_hat).unwrap().perfect);
    }

    #[test]
    fn scalable_small_l_delegates() {
        let p = inst(4, 4, 2, 1, 0.0, 7);
        let g = cross_measurements(&p.measurements, CrossMode::Banded);
        let (r, blocks) = solve_pcal_scalable(&g, &p.sensing, &SolverConfig::default()).unwrap();
        assert_eq!(r.solver, SolverKind::PcalScalable);
        assert!(r.diagnostics.contains(&Diagnostic::DelegatedToFull { l: 2 }));
        assert_eq!(blocks.len(), 2);
    }

    #[test]
    fn pcal_requires_full_mode() {
        let p = inst(4, 4, 3, 1, 0.0, 8);
        let g = cross_measurements(&p.measurements, CrossMode::Banded);
        assert!(solve_pcal(&g, &p.sensing, &SolverConfig::default()).is_err());
    }
}
