//! Signal and gain extraction from lifted solutions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::Diagnostic;
use crate::numerics::{anchor_index, rank_one_extract, ComplexMatrix, ComplexVector};
use crate::{Error, Result, C64};

/// Relative magnitude below which an overlap vector counts as zero.
const CHAIN_TOL: f64 = 1e-8;
/// Relative magnitude below which `m_i^H x̂_ℓ` counts as zero.
const PHASE_TOL: f64 = 1e-12;

/// The `L` overlapping `2N × 2N` blocks `X̄_ℓ = [X_ℓℓ, X_ℓ,ℓ+1; X_ℓ+1,ℓ, X_ℓ+1,ℓ+1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSolution {
    pub blocks: Vec<ComplexMatrix>,
}

impl BlockSolution {
    /// Banded blocks of a full `LN × LN` lifted matrix (indices wrap mod `L`).
    pub fn from_full(x: &ComplexMatrix, l: usize) -> Result<Self> {
        if !x.is_square() || l == 0 || x.rows() % l != 0 {
            return Err(Error::Dimension(format!(
                "{}x{} matrix is not {l} square blocks",
                x.rows(),
                x.cols()
            )));
        }
        let n = x.rows() / l;
        let blocks = (0..l)
            .map(|k| {
                let nk = (k + 1) % l;
                let pick = |p: usize| if p < n { k * n + p } else { nk * n + p - n };
                ComplexMatrix::from_fn(2 * n, 2 * n, |r, c| x.get(pick(r), pick(c)))
            })
            .collect();
        Ok(Self { blocks })
    }

    /// Blocks of `x x^H` for stacked signals `x` (columns of `signals`).
    pub fn from_signals(signals: &ComplexMatrix) -> Self {
        let (n, l) = (signals.rows(), signals.cols());
        let blocks = (0..l)
            .map(|k| {
                let mut v = signals.column(k);
                v.extend(signals.column((k + 1) % l));
                debug_assert_eq!(v.len(), 2 * n);
                ComplexMatrix::outer(&v)
            })
            .collect();
        Self { blocks }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    fn half(&self) -> Result<usize> {
        let first = self.blocks.first().ok_or_else(|| Error::Dimension("no blocks".into()))?;
        let size = first.rows();
        if size % 2 != 0 || self.blocks.iter().any(|b| b.rows() != size || b.cols() != size) {
            return Err(Error::Dimension("blocks must all be 2N x 2N".into()));
        }
        Ok(size / 2)
    }
}

/// `x̂ = R(X̂, 0)` split into `l` columns of length `N = rows / l`.
pub fn extract_signals_pcal(x: &ComplexMatrix, l: usize) -> Result<ComplexMatrix> {
    Ok(extract_full(x, l)?.0)
}

pub(crate) fn extract_full(x: &ComplexMatrix, l: usize) -> Result<(ComplexMatrix, bool)> {
    if !x.is_square() || l == 0 || x.rows() % l != 0 {
        return Err(Error::Dimension(format!(
            "{}x{} matrix cannot be split into {l} signals",
            x.rows(),
            x.cols()
        )));
    }
    let n = x.rows() / l;
    let r = rank_one_extract(x, 0.0)?;
    Ok((ComplexMatrix::from_fn(n, l, |i, k| r.vector[k * n + i]), r.degenerate))
}

/// Chains the blocks into `N × L` signals sharing one global phase.
///
/// `(x̂_1, v_2) = R(X̄_1, 0)`; each later block is rotated so that its entry at
/// the anchor index of `v_ℓ` (the estimate of `x_ℓ` carried over from block
/// `ℓ−1`) has the phase of `v_ℓ` there. A vanishing overlap is an
/// [`Error::ChainBreak`] with the zero-based block index.
pub fn chain_blocks(blocks: &BlockSolution) -> Result<ComplexMatrix> {
    let chained = chain(blocks, false)?;
    Ok(chained.signals)
}

pub(crate) struct Chained {
    pub signals: ComplexMatrix,
    /// Per block, the chained `2N` vector `[x̂_ℓ; v_ℓ+1]`.
    pub vectors: Vec<ComplexVector>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Chaining; when `lenient`, a break anchors the block at phase 0 and is
/// reported as a diagnostic instead of an error.
pub(crate) fn chain(blocks: &BlockSolution, lenient: bool) -> Result<Chained> {
    let n = blocks.half()?;
    let l = blocks.len();
    let mut diagnostics = Vec::new();
    let mut vectors: Vec<ComplexVector> = Vec::with_capacity(l);
    let scale = blocks
        .blocks
        .iter()
        .map(|b| b.frobenius_norm().sqrt())
        .fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Ok(Chained {
            signals: ComplexMatrix::zeros(n, l),
            vectors: vec![vec![C64::new(0.0, 0.0); 2 * n]; l],
            diagnostics,
        });
    }
    for (k, block) in blocks.blocks.iter().enumerate() {
        let r = rank_one_extract(block, 0.0)?;
        if r.degenerate {
            diagnostics.push(Diagnostic::DegenerateEigenspace { block: Some(k) });
        }
        let mut w = r.vector;
        if k > 0 {
            let overlap = &vectors[k - 1][n..];
            let vmax = overlap.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let anchor = if vmax > CHAIN_TOL * scale { anchor_index(overlap) } else { None };
            let target = anchor.and_then(|i| {
                let wmax = w[..n].iter().map(|z| z.norm()).fold(0.0, f64::max);
                (w[i].norm() > CHAIN_TOL * wmax.max(f64::MIN_POSITIVE)).then_some((i, overlap[i].arg()))
            });
            match target {
                Some((i, phase)) => {
                    let rot = C64::from_polar(1.0, phase - w[i].arg());
                    w.iter_mut().for_each(|z| *z *= rot);
                }
                None if lenient => diagnostics.push(Diagnostic::ChainBreak { block: k }),
                None => return Err(Error::ChainBreak { block: k }),
            }
        }
        vectors.push(w);
    }
    let signals = ComplexMatrix::from_fn(n, l, |i, k| vectors[k][i]);
    Ok(Chained {
        signals,
        vectors,
        diagnostics,
    })
}

/// `‖X − x x^H‖_F / ‖X‖_F` (0 for a zero `X`).
pub fn rank_one_gap(x: &ComplexMatrix, v: &[C64]) -> f64 {
    let norm = x.frobenius_norm();
    if norm == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for c in 0..x.cols() {
        for r in 0..x.rows() {
            acc += (x.get(r, c) - v[r] * v[c].conj()).norm_sqr();
        }
    }
    acc.sqrt() / norm
}

/// Least-squares gain phases.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseEstimate {
    /// `θ̂_i ∈ [0, 2π)`; 0 for sensors listed in `undefined`.
    pub theta: Vec<f64>,
    pub undefined: Vec<usize>,
}

/// `θ̂_i = arg Σ_ℓ y_{i,ℓ} conj(m_i^H x̂_ℓ)`.
pub fn recover_phases(y: &ComplexMatrix, sensing: &ComplexMatrix, signals_hat: &ComplexMatrix) -> Result<PhaseEstimate> {
    if y.rows() != sensing.rows() || sensing.cols() != signals_hat.rows() || y.cols() != signals_hat.cols() {
        return Err(Error::Dimension(format!(
            "measurements {}x{}, sensing {}x{}, signals {}x{}",
            y.rows(),
            y.cols(),
            sensing.rows(),
            sensing.cols(),
            signals_hat.rows(),
            signals_hat.cols()
        )));
    }
    let predicted = sensing.matmul(signals_hat)?;
    let scale = predicted.max_abs();
    let mut theta = Vec::with_capacity(y.rows());
    let mut undefined = Vec::new();
    for i in 0..y.rows() {
        let usable = scale > 0.0 && (0..y.cols()).any(|l| predicted.get(i, l).norm() > PHASE_TOL * scale);
        let acc: C64 = (0..y.cols()).map(|l| y.get(i, l) * predicted.get(i, l).conj()).sum();
        if !usable || acc.norm() == 0.0 {
            undefined.push(i);
            theta.push(0.0);
        } else {
            theta.push(acc.arg().rem_euclid(2.0 * PI));
        }
    }
    Ok(PhaseEstimate { theta, undefined })
}
