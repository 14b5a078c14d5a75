use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::reborrow::{Reborrow, ReborrowMut};
use faer::{Accum, Mat, MatMut, MatRef, Par};

use super::matrix::{ComplexMatrix, ComplexVector};
use crate::{Error, Result, C64};

/// Relative Hermitian-defect tolerance accepted by [`hermitian_eig`].
const HERMITIAN_TOL: f64 = 1e-8;

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose `k`-th column pairs with `eigenvalues[k]`.
    pub eigenvectors: ComplexMatrix,
}

/// Dominant rank-one factor of a Hermitian PSD matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOne {
    pub vector: ComplexVector,
    /// `λ₁ − λ₂ < 1e-8 λ₁`: the leading eigenvector is not well determined.
    pub degenerate: bool,
}

fn hermitian_defect(h: MatRef<'_, C64>) -> f64 {
    let n = h.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            acc += (h[(i, j)] - h[(j, i)].conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Overwrites `h` with `(h + h^H) / 2`.
pub(crate) fn hermitize_in_place(mut h: MatMut<'_, C64>) {
    let n = h.nrows();
    for j in 0..n {
        h[(j, j)] = C64::new(h[(j, j)].re, 0.0);
        for i in (j + 1)..n {
            let avg = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
            h[(i, j)] = avg;
            h[(j, i)] = avg.conj();
        }
    }
}

/// Eigenpairs of a Hermitian matrix (lower triangle is read), ascending order.
pub(crate) fn eigh_ascending(h: MatRef<'_, C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let n = h.nrows();
    let mut s = faer::diag::Diag::<C64>::zeros(n);
    let mut u = Mat::<C64>::zeros(n, n);
    let mut mem = MemBuffer::new(evd::self_adjoint_evd_scratch::<C64>(
        n,
        ComputeEigenvectors::Yes,
        Par::Seq,
        Default::default(),
    ));
    evd::self_adjoint_evd(
        h,
        s.as_mut(),
        Some(u.as_mut()),
        Par::Seq,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .map_err(|_| Error::EigenNonConvergence { dimension: n })?;
    let values = (0..n).map(|k| s[k].re).collect();
    Ok((values, u))
}

/// Eigendecomposition of a Hermitian matrix.
///
/// The input is hermitized as `(H + H^H)/2` before factorization; inputs whose
/// Hermitian defect exceeds `1e-8 · max(1, ‖H‖_F)` are rejected.
pub fn hermitian_eig(h: &ComplexMatrix) -> Result<HermitianEigen> {
    if !h.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let defect = hermitian_defect(h.as_faer());
    if defect > HERMITIAN_TOL * h.frobenius_norm().max(1.0) {
        return Err(Error::Argument(format!(
            "matrix is not Hermitian (defect {defect:.3e})"
        )));
    }
    let mut work = h.clone().into_faer();
    hermitize_in_place(work.as_mut());
    let (vals, vecs) = eigh_ascending(work.as_ref())?;
    let n = vals.len();
    let eigenvalues = vals.iter().rev().copied().collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, k| vecs[(i, n - 1 - k)]);
    Ok(HermitianEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Replaces the square matrix `z` by the Frobenius-nearest Hermitian PSD matrix.
pub(crate) fn psd_project_in_place(mut z: MatMut<'_, C64>) -> Result<()> {
    let n = z.nrows();
    hermitize_in_place(z.rb_mut());
    let (vals, vecs) = eigh_ascending(z.rb())?;
    let first_pos = vals.iter().position(|&v| v > 0.0).unwrap_or(n);
    let positive = n - first_pos;
    if positive == 0 {
        z.fill(C64::new(0.0, 0.0));
        return Ok(());
    }
    if positive == n {
        return Ok(());
    }
    // Rebuild from whichever side of the spectrum is smaller.
    let (range, sign) = if positive <= first_pos {
        (first_pos..n, 1.0)
    } else {
        (0..first_pos, -1.0)
    };
    let r = range.len();
    let mut w = Mat::<C64>::zeros(n, r);
    for (c, k) in range.enumerate() {
        let s = vals[k].abs().sqrt();
        for i in 0..n {
            w[(i, c)] = vecs[(i, k)] * s;
        }
    }
    if sign > 0.0 {
        faer::linalg::matmul::matmul(
            z.rb_mut(),
            Accum::Replace,
            w.as_ref(),
            w.adjoint(),
            C64::new(1.0, 0.0),
            Par::Seq,
        );
    } else {
        // z currently holds the hermitized input: subtract the negative part.
        faer::linalg::matmul::matmul(
            z.rb_mut(),
            Accum::Add,
            w.as_ref(),
            w.adjoint(),
            C64::new(1.0, 0.0),
            Par::Seq,
        );
    }
    Ok(())
}

/// Frobenius-nearest Hermitian PSD matrix to `(Z + Z^H)/2` (eigenvalue clamping).
pub fn psd_project(z: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !z.is_square() {
        return Err(Error::Dimension(format!(
            "PSD projection needs a square matrix, got {}x{}",
            z.rows(),
            z.cols()
        )));
    }
    let mut out = z.clone().into_faer();
    psd_project_in_place(out.as_mut())?;
    Ok(out.into())
}

/// Index of the first entry whose magnitude exceeds `1e-8` times the largest
/// magnitude, or the largest-magnitude entry when none does.
pub fn anchor_index(v: &[C64]) -> Option<usize> {
    let (imax, vmax) = v
        .iter()
        .enumerate()
        .map(|(i, z)| (i, z.norm()))
        .fold((0, 0.0f64), |acc, (i, m)| if m > acc.1 { (i, m) } else { acc });
    if vmax == 0.0 {
        return None;
    }
    let threshold = 1e-8 * vmax;
    Some(v.iter().position(|z| z.norm() > threshold).unwrap_or(imax))
}

/// `√λ₁ v₁` rotated so that its anchor entry (see [`anchor_index`]) has phase `phi`.
///
/// Returns the zero vector when `λ₁ ≤ 1e-12 · ‖Z‖_F`.
pub fn rank_one_extract(z: &ComplexMatrix, phi: f64) -> Result<RankOne> {
    if !z.is_square() {
        return Err(Error::Dimension(format!(
            "rank-one extraction needs a square matrix, got {}x{}",
            z.rows(),
            z.cols()
        )));
    }
    let n = z.rows();
    if n == 0 {
        return Ok(RankOne {
            vector: vec![],
            degenerate: false,
        });
    }
    let mut work = z.clone().into_faer();
    hermitize_in_place(work.as_mut());
    let (vals, vecs) = eigh_ascending(work.as_ref())?;
    let l1 = vals[n - 1];
    let scale = z.frobenius_norm();
    if l1 <= 1e-12 * scale || l1 <= 0.0 {
        return Ok(RankOne {
            vector: vec![C64::new(0.0, 0.0); n],
            degenerate: false,
        });
    }
    let l2 = if n > 1 { vals[n - 2] } else { f64::NEG_INFINITY };
    let degenerate = l1 - l2 < 1e-8 * l1;
    let s = l1.sqrt();
    let mut v: ComplexVector = (0..n).map(|i| vecs[(i, n - 1)] * s).collect();
    if let Some(a) = anchor_index(&v) {
        let rot = C64::from_polar(1.0, phi - v[a].arg());
        v.iter_mut().for_each(|x| *x *= rot);
    }
    Ok(RankOne {
        vector: v,
        degenerate,
    })
}
