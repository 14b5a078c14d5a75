//! Projections for the lifted programs.
//!
//! Every lifted equality constraint acts on one `N × N` block through the
//! functionals `Z ↦ m_i^H Z m_i = ⟨m_i m_i^H, Z⟩`. Their Gram matrix
//! `G_ij = |m_i^H m_j|²` is the same for every block, so it is factorized once
//! and the exact projection of a block costs two `M × N × N` products.

use std::f64::consts::SQRT_2;
use std::ops::Range;

use faer::reborrow::ReborrowMut;
use faer::{Accum, Mat, MatMut, MatRef, Par};

use super::admm::Prox;
use crate::numerics::{psd_project_in_place, AffineProjector, ComplexMatrix, HermitianFactor};
use crate::{Error, Result, C64};

const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Exact projector onto `{Z : m_i^H Z m_i = b_i, i = 1..M}` for `N × N` blocks.
#[derive(Clone, Debug)]
pub struct GramProjector {
    /// `M × N`, row `i` is `m_i^H`.
    sensing: Mat<C64>,
    factor: HermitianFactor,
}

impl GramProjector {
    /// Factorizes `G_ij = |m_i^H m_j|²`. Linearly dependent rank-one
    /// functionals (for instance duplicated sensing rows) are a
    /// [`Error::RankDeficient`] naming the first dependent sensor.
    pub fn new(sensing: &ComplexMatrix) -> Result<Self> {
        let s = sensing.as_faer();
        let m = s.nrows();
        let mut inner = Mat::<C64>::zeros(m, m);
        faer::linalg::matmul::matmul(inner.as_mut(), Accum::Replace, s, s.adjoint(), ONE, Par::Seq);
        let g: Vec<C64> = (0..m * m)
            .map(|k| C64::new(inner[(k / m, k % m)].norm_sqr(), 0.0))
            .collect();
        let factor = HermitianFactor::new(&g, m)?;
        Ok(Self {
            sensing: s.to_owned(),
            factor,
        })
    }

    pub fn sensors(&self) -> usize {
        self.sensing.nrows()
    }

    /// Block size `N`.
    pub fn dim(&self) -> usize {
        self.sensing.ncols()
    }

    pub(crate) fn work(&self) -> Mat<C64> {
        Mat::zeros(self.sensors(), self.dim())
    }

    /// `out_i = m_i^H Z m_i`.
    pub(crate) fn measure(&self, z: MatRef<'_, C64>, work: &mut Mat<C64>, out: &mut [C64]) {
        faer::linalg::matmul::matmul(work.as_mut(), Accum::Replace, self.sensing.as_ref(), z, ONE, Par::Seq);
        let n = self.dim();
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for b in 0..n {
                acc += work[(i, b)] * self.sensing[(i, b)].conj();
            }
            *o = acc;
        }
    }

    /// `Z ← Z − Σ_i λ_i m_i m_i^H`.
    pub(crate) fn subtract(&self, z: MatMut<'_, C64>, lambda: &[C64], work: &mut Mat<C64>) {
        let (m, n) = (self.sensors(), self.dim());
        for b in 0..n {
            for i in 0..m {
                work[(i, b)] = lambda[i] * self.sensing[(i, b)];
            }
        }
        faer::linalg::matmul::matmul(
            z,
            Accum::Add,
            self.sensing.adjoint(),
            work.as_ref(),
            C64::new(-1.0, 0.0),
            Par::Seq,
        );
    }

    /// Solves `G λ = r` in place.
    pub(crate) fn solve(&self, r: &mut [C64]) {
        self.factor.solve_in_place(r);
    }

    /// Dense `G^{-1}` (row-major, real).
    pub(crate) fn inverse(&self) -> Vec<f64> {
        let m = self.sensors();
        let mut inv = vec![0.0; m * m];
        let mut col = vec![ZERO; m];
        for j in 0..m {
            col.fill(ZERO);
            col[j] = ONE;
            self.solve(&mut col);
            for i in 0..m {
                inv[i * m + j] = col[i].re;
            }
        }
        inv
    }

    /// Projects one block onto `{m_i^H Z m_i = target_i}`.
    pub fn project_block(&self, z: &mut ComplexMatrix, target: &[C64]) -> Result<()> {
        let (m, n) = (self.sensors(), self.dim());
        if z.rows() != n || z.cols() != n || target.len() != m {
            return Err(Error::Dimension(format!(
                "block {}x{} with {} targets, expected {n}x{n} with {m}",
                z.rows(),
                z.cols(),
                target.len()
            )));
        }
        let mut work = self.work();
        let mut a = vec![ZERO; m];
        self.measure(z.as_faer(), &mut work, &mut a);
        for (ai, t) in a.iter_mut().zip(target) {
            *ai -= t;
        }
        self.solve(&mut a);
        self.subtract(z.as_faer_mut(), &a, &mut work);
        Ok(())
    }
}

/// One `N × N` block of the local vector with its constraint coefficients:
/// `m_i^H V m_i = coeff_i · t_i` (with `t ≡ 1` when there is no gain variable).
#[derive(Clone, Debug)]
pub(crate) struct BlockSlot {
    pub offset: usize,
    pub col_stride: usize,
    pub coeff: Vec<C64>,
}

impl BlockSlot {
    fn span(&self, n: usize) -> Range<usize> {
        self.offset..self.offset + (n - 1) * self.col_stride + n
    }
}

pub(crate) fn block_mut<'a>(v: &'a mut [C64], slot: &BlockSlot, n: usize) -> MatMut<'a, C64> {
    MatMut::from_column_major_slice_with_stride_mut(&mut v[slot.span(n)], n, n, slot.col_stride)
}

pub(crate) fn block_ref<'a>(v: &'a [C64], slot: &BlockSlot, n: usize) -> MatRef<'a, C64> {
    MatRef::from_column_major_slice_with_stride(&v[slot.span(n)], n, n, slot.col_stride)
}

/// Real gain variable `t` shared by all blocks, with `Σ t = c`.
struct Coupling {
    t_offset: usize,
    /// Factor of `Q = I + Σ_b Re(H_b^H G^{-1} H_b)`.
    q: HermitianFactor,
    /// `Q^{-1} 1` and its sum.
    q_ones: Vec<f64>,
    q_ones_sum: f64,
    c: f64,
}

/// Exact projection onto the lifted equality constraints, optionally coupled
/// through a real gain vector.
///
/// With gains, the joint projection of `(V, t)` eliminates each block for
/// fixed `t`, which leaves an `M × M` system `Q t = f + ν 1` for the gains;
/// `Q` is constant and factorized once.
pub(crate) struct LiftedAffine {
    scope: Vec<Range<usize>>,
    gram: GramProjector,
    blocks: Vec<BlockSlot>,
    coupling: Option<Coupling>,
    work: Mat<C64>,
    a: Vec<Vec<C64>>,
    r: Vec<C64>,
}

impl LiftedAffine {
    pub fn new(scope: Vec<Range<usize>>, gram: GramProjector, blocks: Vec<BlockSlot>) -> Self {
        let m = gram.sensors();
        let work = gram.work();
        let a = vec![vec![ZERO; m]; blocks.len()];
        Self {
            scope,
            gram,
            blocks,
            coupling: None,
            work,
            a,
            r: vec![ZERO; m],
        }
    }

    /// Adds the gain variable at `t_offset` of the local vector.
    pub fn with_gains(mut self, t_offset: usize, c: f64) -> Result<Self> {
        let m = self.gram.sensors();
        let ginv = self.gram.inverse();
        let mut q = vec![ZERO; m * m];
        for i in 0..m {
            q[i * m + i] = ONE;
        }
        for b in &self.blocks {
            for i in 0..m {
                let hi = b.coeff[i].conj();
                for j in 0..m {
                    q[i * m + j].re += (hi * b.coeff[j]).re * ginv[i * m + j];
                }
            }
        }
        let q = HermitianFactor::new(&q, m)?;
        let mut ones = vec![ONE; m];
        q.solve_in_place(&mut ones);
        let q_ones: Vec<f64> = ones.iter().map(|v| v.re).collect();
        let q_ones_sum = q_ones.iter().sum();
        self.coupling = Some(Coupling {
            t_offset,
            q,
            q_ones,
            q_ones_sum,
            c,
        });
        Ok(self)
    }
}

impl Prox for LiftedAffine {
    fn scope(&self) -> &[Range<usize>] {
        &self.scope
    }

    fn apply(&mut self, v: &mut [C64], _rho: f64) -> Result<()> {
        let n = self.gram.dim();
        let m = self.gram.sensors();
        let Some(cp) = &self.coupling else {
            for b in &self.blocks {
                self.gram.measure(block_ref(v, b, n), &mut self.work, &mut self.r);
                for (r, h) in self.r.iter_mut().zip(&b.coeff) {
                    *r -= h;
                }
                self.gram.solve(&mut self.r);
                self.gram.subtract(block_mut(v, b, n), &self.r, &mut self.work);
            }
            return Ok(());
        };

        // f = Re t0 + Σ_b Re(conj(h_b) ∘ G^{-1} a_b)
        let mut f: Vec<C64> = (0..m).map(|i| C64::new(v[cp.t_offset + i].re, 0.0)).collect();
        for (b, a) in self.blocks.iter().zip(self.a.iter_mut()) {
            self.gram.measure(block_ref(v, b, n), &mut self.work, a);
            self.r.copy_from_slice(a);
            self.gram.solve(&mut self.r);
            for i in 0..m {
                f[i].re += (b.coeff[i].conj() * self.r[i]).re;
            }
        }
        cp.q.solve_in_place(&mut f);
        let nu = (cp.c - f.iter().map(|x| x.re).sum::<f64>()) / cp.q_ones_sum;
        let t: Vec<f64> = f.iter().zip(&cp.q_ones).map(|(x, q)| x.re + nu * q).collect();

        for (b, a) in self.blocks.iter().zip(&self.a) {
            for i in 0..m {
                self.r[i] = a[i] - b.coeff[i] * t[i];
            }
            self.gram.solve(&mut self.r);
            self.gram.subtract(block_mut(v, b, n), &self.r, &mut self.work);
        }
        for (i, ti) in t.iter().enumerate() {
            v[cp.t_offset + i] = C64::new(*ti, 0.0);
        }
        Ok(())
    }
}

/// Largest problem (rows × unknowns) for which the dense real fallback is built.
const DENSE_FALLBACK_LIMIT: usize = 25_000_000;

/// Dense projection for coupled lifted constraints whose Gram matrix is
/// singular (dependent sensing functionals). Coordinates are the real and
/// imaginary parts of every block entry followed by the real gains.
pub(crate) struct DenseLiftedAffine {
    scope: Vec<Range<usize>>,
    t_offset: usize,
    projector: AffineProjector,
    real: Vec<C64>,
}

impl DenseLiftedAffine {
    /// `local_len` is the local vector length; gains occupy its last `M` entries.
    pub fn new(
        scope: Vec<Range<usize>>,
        sensing: &ComplexMatrix,
        blocks: &[BlockSlot],
        local_len: usize,
        c: f64,
    ) -> Result<Option<Self>> {
        let (m, n) = (sensing.rows(), sensing.cols());
        let t_offset = local_len - m;
        let cols = 2 * t_offset + m;
        let rows = 2 * m * blocks.len() + 1;
        if rows.saturating_mul(cols) > DENSE_FALLBACK_LIMIT {
            return Ok(None);
        }
        let mut a = ComplexMatrix::zeros(rows, cols);
        let mut row = 0;
        for b in blocks {
            for i in 0..m {
                for col in 0..n {
                    for r in 0..n {
                        let coef = sensing.get(i, r) * sensing.get(i, col).conj();
                        let idx = b.offset + col * b.col_stride + r;
                        a.set(row, 2 * idx, C64::new(coef.re, 0.0));
                        a.set(row, 2 * idx + 1, C64::new(-coef.im, 0.0));
                        a.set(row + 1, 2 * idx, C64::new(coef.im, 0.0));
                        a.set(row + 1, 2 * idx + 1, C64::new(coef.re, 0.0));
                    }
                }
                a.set(row, 2 * t_offset + i, C64::new(-b.coeff[i].re, 0.0));
                a.set(row + 1, 2 * t_offset + i, C64::new(-b.coeff[i].im, 0.0));
                row += 2;
            }
        }
        for i in 0..m {
            a.set(row, 2 * t_offset + i, ONE);
        }
        let mut target = vec![ZERO; rows];
        target[rows - 1] = C64::new(c, 0.0);
        let projector = AffineProjector::new_allow_redundant(&a, &target)?;
        Ok(Some(Self {
            scope,
            t_offset,
            projector,
            real: vec![ZERO; cols],
        }))
    }

    pub fn dropped(&self) -> usize {
        self.projector.num_dropped()
    }
}

impl Prox for DenseLiftedAffine {
    fn scope(&self) -> &[Range<usize>] {
        &self.scope
    }

    fn apply(&mut self, v: &mut [C64], _rho: f64) -> Result<()> {
        let t0 = self.t_offset;
        for (k, x) in v[..t0].iter().enumerate() {
            self.real[2 * k] = C64::new(x.re, 0.0);
            self.real[2 * k + 1] = C64::new(x.im, 0.0);
        }
        for (k, x) in v[t0..].iter().enumerate() {
            self.real[2 * t0 + k] = C64::new(x.re, 0.0);
        }
        self.projector.project_in_place(&mut self.real);
        for k in 0..t0 {
            v[k] = C64::new(self.real[2 * k].re, self.real[2 * k + 1].re);
        }
        for k in t0..v.len() {
            v[k] = C64::new(self.real[t0 + k].re, 0.0);
        }
        Ok(())
    }
}

/// PSD cone over one square matrix stored column-major in the local vector.
pub(crate) struct FullPsd {
    scope: Vec<Range<usize>>,
    n: usize,
}

impl FullPsd {
    pub fn new(offset: usize, n: usize) -> Self {
        Self {
            scope: vec![offset..offset + n * n],
            n,
        }
    }
}

impl Prox for FullPsd {
    fn scope(&self) -> &[Range<usize>] {
        &self.scope
    }

    fn apply(&mut self, v: &mut [C64], _rho: f64) -> Result<()> {
        psd_project_in_place(MatMut::from_column_major_slice_mut(v, self.n, self.n))
    }
}

/// PSD cone over `[D_a, O/√2; O^H/√2, D_b]`, with local vector `(D_a, O, D_b)`.
///
/// The off-diagonal block is stored scaled by `√2` so that the Euclidean norm
/// of the local vector equals the Frobenius norm of the block matrix.
pub(crate) struct BlockPsd {
    scope: Vec<Range<usize>>,
    n: usize,
    work: Mat<C64>,
}

impl BlockPsd {
    pub fn new(d_a: Range<usize>, off: Range<usize>, d_b: Range<usize>, n: usize) -> Self {
        Self {
            scope: vec![d_a, off, d_b],
            n,
            work: Mat::zeros(2 * n, 2 * n),
        }
    }
}

/// Assembles `[D_a, O/√2; O^H/√2, D_b]` from `(D_a, O, D_b)` column-major parts.
pub(crate) fn assemble_block(mut out: MatMut<'_, C64>, d_a: &[C64], off: &[C64], d_b: &[C64], n: usize) {
    for c in 0..n {
        for r in 0..n {
            out[(r, c)] = d_a[c * n + r];
            out[(n + r, n + c)] = d_b[c * n + r];
            let o = off[c * n + r] / SQRT_2;
            out[(r, n + c)] = o;
            out.rb_mut()[(n + c, r)] = o.conj();
        }
    }
}

impl Prox for BlockPsd {
    fn scope(&self) -> &[Range<usize>] {
        &self.scope
    }

    fn apply(&mut self, v: &mut [C64], _rho: f64) -> Result<()> {
        let n = self.n;
        let nn = n * n;
        let (d_a, rest) = v.split_at_mut(nn);
        let (off, d_b) = rest.split_at_mut(nn);
        assemble_block(self.work.as_mut(), d_a, off, d_b, n);
        psd_project_in_place(self.work.as_mut())?;
        for c in 0..n {
            for r in 0..n {
                d_a[c * n + r] = self.work[(r, c)];
                d_b[c * n + r] = self.work[(n + r, n + c)];
                off[c * n + r] = self.work[(r, n + c)] * SQRT_2;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{hermitian_eig, psd_project};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(r: usize, c: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(r, c, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    /// Independent oracle: the same projection through a dense vectorized
    /// constraint matrix and the generic affine projector.
    #[test]
    fn block_projection_matches_dense_projector() {
        let (m, n) = (5, 3);
        let s = random_matrix(m, n, 1);
        let z = random_matrix(n, n, 2);
        let target: Vec<C64> = random_matrix(m, 1, 3).column(0);
        let gp = GramProjector::new(&s).unwrap();
        let mut fast = z.clone();
        gp.project_block(&mut fast, &target).unwrap();

        let a = ComplexMatrix::from_fn(m, n * n, |i, k| {
            let (r, c) = (k % n, k / n);
            s.get(i, r) * s.get(i, c).conj()
        });
        let dense = AffineProjector::new(&a, &target).unwrap();
        let zv: Vec<C64> = (0..n * n).map(|k| z.get(k % n, k / n)).collect();
        let want = dense.project(&zv).unwrap();
        for k in 0..n * n {
            assert!((fast.get(k % n, k / n) - want[k]).norm() < 1e-10);
        }
    }

    #[test]
    fn duplicate_sensing_rows_rejected() {
        let mut s = random_matrix(4, 3, 4);
        for c in 0..3 {
            let v = s.get(0, c);
            s.set(2, c, v);
        }
        match GramProjector::new(&s) {
            Err(Error::RankDeficient { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    /// The coupled projection agrees with the dense real projector on the
    /// same constraint set.
    #[test]
    fn coupled_projection_matches_dense_real_projector() {
        let (m, n) = (4, 2);
        let s = random_matrix(m, n, 5);
        let h0: Vec<C64> = random_matrix(m, 1, 6).column(0);
        let h1: Vec<C64> = random_matrix(m, 1, 7).column(0);
        let blocks = vec![
            BlockSlot { offset: 0, col_stride: n, coeff: h0 },
            BlockSlot { offset: n * n, col_stride: n, coeff: h1 },
        ];
        let len = 2 * n * n + m;
        let scope = vec![0..len];
        let mut fast = LiftedAffine::new(scope.clone(), GramProjector::new(&s).unwrap(), blocks.clone())
            .with_gains(2 * n * n, 2.5)
            .unwrap();
        let mut dense = DenseLiftedAffine::new(scope, &s, &blocks, len, 2.5).unwrap().unwrap();
        let mut v1: Vec<C64> = random_matrix(len, 1, 8).column(0);
        for t in &mut v1[2 * n * n..] {
            t.im = 0.0;
        }
        let mut v2 = v1.clone();
        fast.apply(&mut v1, 1.0).unwrap();
        dense.apply(&mut v2, 1.0).unwrap();
        for (a, b) in v1.iter().zip(&v2) {
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
        let tsum: f64 = v1[2 * n * n..].iter().map(|t| t.re).sum();
        assert!((tsum - 2.5).abs() < 1e-12);
    }

    #[test]
    fn block_psd_matches_direct_projection() {
        let n = 3;
        let raw = random_matrix(3 * n * n, 1, 9).column(0);
        let mut v = raw.clone();
        let mut term = BlockPsd::new(0..9, 9..18, 18..27, n);
        term.apply(&mut v, 1.0).unwrap();
        let mut b = Mat::<C64>::zeros(2 * n, 2 * n);
        assemble_block(b.as_mut(), &raw[0..9], &raw[9..18], &raw[18..27], n);
        let p = psd_project(&ComplexMatrix::from(b)).unwrap();
        let mut got = Mat::<C64>::zeros(2 * n, 2 * n);
        assemble_block(got.as_mut(), &v[0..9], &v[9..18], &v[18..27], n);
        let got = ComplexMatrix::from(got);
        assert!(got.sub(&p).unwrap().frobenius_norm() < 1e-10);
        let eig = hermitian_eig(&got.hermitized()).unwrap();
        assert!(eig.eigenvalues.iter().all(|&l| l > -1e-10));
    }
}
