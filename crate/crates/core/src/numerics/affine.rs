use faer::{Accum, Mat, MatRef, Par};

use super::matrix::{ComplexMatrix, ComplexVector};
use crate::{Error, Result, C64};

/// Relative pivot threshold below which a Gram row counts as dependent.
pub const PIVOT_TOL: f64 = 1e-12;

/// Cholesky factor `G = L L^H` of a Hermitian positive definite matrix.
///
/// `L` is stored row-major, lower triangle only.
#[derive(Clone, Debug)]
pub struct HermitianFactor {
    n: usize,
    l: Vec<C64>,
}

/// Outcome of an incremental factorization that may skip dependent rows.
pub(crate) struct SelectiveFactor {
    pub factor: HermitianFactor,
    pub selected: Vec<usize>,
}

impl HermitianFactor {
    /// Factorizes `g` (row-major `n × n`). Fails at the first pivot below
    /// `PIVOT_TOL · max_i g_ii`, naming that row.
    pub fn new(g: &[C64], n: usize) -> Result<Self> {
        let sel = Self::factor_rows(g, n, false)?;
        Ok(sel.factor)
    }

    /// Factorizes the largest leading-order subset of rows of `g` that is
    /// numerically independent; dependent rows are skipped.
    pub(crate) fn new_skipping(g: &[C64], n: usize) -> Result<SelectiveFactor> {
        Self::factor_rows(g, n, true)
    }

    fn factor_rows(g: &[C64], n: usize, skip: bool) -> Result<SelectiveFactor> {
        assert_eq!(g.len(), n * n);
        let scale = (0..n).map(|i| g[i * n + i].re).fold(0.0f64, f64::max);
        let mut rows: Vec<Vec<C64>> = Vec::with_capacity(n);
        let mut selected = Vec::with_capacity(n);
        for i in 0..n {
            // conj(l_i) solves L_S conj(l_i) = G[S, i]
            let k = selected.len();
            let mut li = vec![C64::new(0.0, 0.0); k + 1];
            for p in 0..k {
                let s = selected[p];
                let row_p: &Vec<C64> = &rows[p];
                let mut acc = g[s * n + i];
                for q in 0..p {
                    acc -= row_p[q] * li[q];
                }
                li[p] = acc / row_p[p];
            }
            let mut d = g[i * n + i].re;
            for v in li.iter().take(k) {
                d -= v.norm_sqr();
            }
            let tol = PIVOT_TOL * scale.max(g[i * n + i].re);
            if !(d > tol) || scale == 0.0 {
                if skip {
                    continue;
                }
                return Err(Error::RankDeficient { index: i, pivot: d });
            }
            for v in li.iter_mut().take(k) {
                *v = v.conj();
            }
            li[k] = C64::new(d.sqrt(), 0.0);
            rows.push(li);
            selected.push(i);
        }
        let m = selected.len();
        let mut l = vec![C64::new(0.0, 0.0); m * m];
        for (r, row) in rows.iter().enumerate() {
            l[r * m..r * m + row.len()].copy_from_slice(row);
        }
        Ok(SelectiveFactor {
            factor: HermitianFactor { n: m, l },
            selected,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `G x = rhs` in place.
    pub fn solve_in_place(&self, x: &mut [C64]) {
        let n = self.n;
        debug_assert_eq!(x.len(), n);
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let acc: C64 = row.iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - acc) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.l[j * n + i].conj() * x[j];
            }
            x[i] = acc / self.l[i * n + i].conj();
        }
    }
}

/// Projector onto the affine set `{w : A w = b}`.
///
/// Rows of `A` are normalized to unit norm (with `b` scaled to match) and the
/// Gram matrix `A A^H` is factorized once at construction; every projection is
/// then two matrix-vector products and two triangular solves.
#[derive(Clone, Debug)]
pub struct AffineProjector {
    a: Mat<C64>,
    b: ComplexVector,
    factor: HermitianFactor,
    /// Original row indices kept after dropping redundant constraints.
    kept: Vec<usize>,
    total_rows: usize,
}

impl AffineProjector {
    /// Builds the projector; a rank-deficient `A` is an error naming the first
    /// dependent constraint.
    pub fn new(a: &ComplexMatrix, b: &[C64]) -> Result<Self> {
        Self::build(a, b, false)
    }

    /// Builds the projector for a possibly over-determined but consistent
    /// system: rows dependent on earlier rows are dropped, then the dropped rows
    /// are checked to hold on the projected set (relative residual ≤ 1e-8).
    pub fn new_allow_redundant(a: &ComplexMatrix, b: &[C64]) -> Result<Self> {
        Self::build(a, b, true)
    }

    fn build(a: &ComplexMatrix, b: &[C64], allow_redundant: bool) -> Result<Self> {
        let (m, n) = (a.rows(), a.cols());
        if b.len() != m {
            return Err(Error::Dimension(format!(
                "target has {} entries for {m} constraints",
                b.len()
            )));
        }
        if m > n && !allow_redundant {
            return Err(Error::Argument(format!(
                "{m} constraints exceed {n} unknowns; use a redundancy-tolerant projector"
            )));
        }
        let mut an = a.clone().into_faer();
        let mut bn = b.to_vec();
        let mut zero_rows = Vec::new();
        for i in 0..m {
            let norm = (0..n).map(|j| an[(i, j)].norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                zero_rows.push(i);
                continue;
            }
            for j in 0..n {
                an[(i, j)] /= norm;
            }
            bn[i] /= norm;
        }
        let mut gram_mat = Mat::<C64>::zeros(m, m);
        faer::linalg::matmul::matmul(
            gram_mat.as_mut(),
            Accum::Replace,
            an.as_ref(),
            an.adjoint(),
            C64::new(1.0, 0.0),
            Par::Seq,
        );
        let gram: Vec<C64> = (0..m * m).map(|k| gram_mat[(k / m, k % m)]).collect();
        let (factor, kept) = if allow_redundant {
            let sel = HermitianFactor::new_skipping(&gram, m)?;
            (sel.factor, sel.selected)
        } else {
            if let Some(&i) = zero_rows.first() {
                return Err(Error::RankDeficient { index: i, pivot: 0.0 });
            }
            (HermitianFactor::new(&gram, m)?, (0..m).collect())
        };
        let a_kept = Mat::from_fn(kept.len(), n, |r, j| an[(kept[r], j)]);
        let b_kept: ComplexVector = kept.iter().map(|&i| bn[i]).collect();
        let proj = Self {
            a: a_kept,
            b: b_kept,
            factor,
            kept,
            total_rows: m,
        };
        if allow_redundant && proj.kept.len() < m {
            let w0 = proj.project(&vec![C64::new(0.0, 0.0); n])?;
            let residual = relative_residual(an.as_ref(), &bn, &w0);
            if residual > 1e-8 {
                return Err(Error::Inconsistent { residual });
            }
        }
        Ok(proj)
    }

    /// Number of unknowns.
    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// Constraints retained in the factorization.
    pub fn num_constraints(&self) -> usize {
        self.a.nrows()
    }

    /// Constraints dropped as redundant.
    pub fn num_dropped(&self) -> usize {
        self.total_rows - self.kept.len()
    }

    pub fn project(&self, w: &[C64]) -> Result<ComplexVector> {
        if w.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "point has {} entries, projector expects {}",
                w.len(),
                self.dim()
            )));
        }
        let mut out = w.to_vec();
        self.project_in_place(&mut out);
        Ok(out)
    }

    /// `w ← w − A^H (A A^H)^{-1} (A w − b)`.
    pub fn project_in_place(&self, w: &mut [C64]) {
        let m = self.a.nrows();
        let n = self.a.ncols();
        debug_assert_eq!(w.len(), n);
        if m == 0 {
            return;
        }
        let mut r = Mat::<C64>::zeros(m, 1);
        faer::linalg::matmul::matmul(
            r.as_mut(),
            Accum::Replace,
            self.a.as_ref(),
            MatRef::from_column_major_slice(&*w, n, 1),
            C64::new(1.0, 0.0),
            Par::Seq,
        );
        let mut lambda: Vec<C64> = (0..m).map(|i| r[(i, 0)] - self.b[i]).collect();
        self.factor.solve_in_place(&mut lambda);
        let mut delta = Mat::<C64>::zeros(n, 1);
        faer::linalg::matmul::matmul(
            delta.as_mut(),
            Accum::Replace,
            self.a.adjoint(),
            MatRef::from_column_major_slice(&lambda, m, 1),
            C64::new(1.0, 0.0),
            Par::Seq,
        );
        for (j, x) in w.iter_mut().enumerate() {
            *x -= delta[(j, 0)];
        }
    }
}

/// `‖A w − b‖_∞ / max(‖b‖_∞, max_i |(A w)_i|, tiny)`.
fn relative_residual(a: MatRef<'_, C64>, b: &[C64], w: &[C64]) -> f64 {
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..a.nrows() {
        let aw: C64 = (0..a.ncols()).map(|j| a[(i, j)] * w[j]).sum();
        worst = worst.max((aw - b[i]).norm());
        scale = scale.max(b[i].norm()).max(aw.norm());
    }
    worst / scale.max(f64::MIN_POSITIVE)
}
