//! Global-variable consensus ADMM.
//!
//! Each term `f_j` sees a slice `z[S_j]` of the global variable through its own
//! local copy `x_j`. One iteration is
//!
//! ```text
//! x_j ← prox_{f_j/ρ}(z[S_j] − u_j)
//! z   ← average over copies of (x_j + u_j)
//! u_j ← u_j + x_j − z[S_j]
//! ```
//!
//! with scaled duals `u_j`.

use std::collections::VecDeque;
use std::ops::Range;
use std::time::Instant;

use super::{SolverConfig, PENALTY_RANGE};
use crate::numerics::shrink;
use crate::numerics::AffineProjector;
use crate::{Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
/// Residual ratio that triggers a penalty update.
const BALANCE_RATIO: f64 = 10.0;
/// Iterations between penalty updates.
const ADAPT_INTERVAL: usize = 10;
/// Penalty updates allowed before the penalty is frozen.
const MAX_PENALTY_CHANGES: usize = 20;
/// Window over which the fixed-penalty merit must not increase.
const MERIT_WINDOW: usize = 50;

/// One term of the consensus problem.
pub(crate) trait Prox: Send {
    /// Global index ranges concatenated, in order, into the local vector.
    fn scope(&self) -> &[Range<usize>];

    /// Overwrites `v` with `prox_{f/ρ}(v)`.
    fn apply(&mut self, v: &mut [C64], rho: f64) -> Result<()>;
}

struct Slot {
    term: Box<dyn Prox>,
    x: Vec<C64>,
    u: Vec<C64>,
}

/// Outcome of an ADMM run.
pub(crate) struct AdmmRun {
    /// Local copies `x_j` at exit.
    pub locals: Vec<Vec<C64>>,
    pub iterations: usize,
    pub converged: bool,
    pub primal: f64,
    pub dual: f64,
    pub rho: f64,
    /// First iteration and number of fixed-penalty merit increases.
    pub merit_increase: Option<(usize, usize)>,
    /// Wall time spent in the iteration loop.
    pub loop_ms: f64,
}

pub(crate) struct Admm {
    dim: usize,
    slots: Vec<Slot>,
    counts: Vec<f64>,
    local_dim: usize,
}

fn gather(src: &[C64], scope: &[Range<usize>], dst: &mut [C64]) {
    let mut off = 0;
    for r in scope {
        dst[off..off + r.len()].copy_from_slice(&src[r.clone()]);
        off += r.len();
    }
}

impl Admm {
    /// Panics if some global coordinate is covered by no term.
    pub fn new(dim: usize, terms: Vec<Box<dyn Prox>>) -> Self {
        let mut counts = vec![0.0; dim];
        let mut local_dim = 0;
        let slots = terms
            .into_iter()
            .map(|term| {
                let len: usize = term.scope().iter().map(|r| r.len()).sum();
                for r in term.scope() {
                    for c in &mut counts[r.clone()] {
                        *c += 1.0;
                    }
                }
                local_dim += len;
                Slot {
                    term,
                    x: vec![ZERO; len],
                    u: vec![ZERO; len],
                }
            })
            .collect();
        assert!(counts.iter().all(|&c| c > 0.0), "uncovered consensus coordinate");
        Self {
            dim,
            slots,
            counts,
            local_dim,
        }
    }

    pub fn run(mut self, z0: Vec<C64>, cfg: &SolverConfig) -> Result<AdmmRun> {
        assert_eq!(z0.len(), self.dim);
        let mut z = z0;
        let mut z_old = vec![ZERO; self.dim];
        let mut rho = cfg.rho;
        let sqrt_p = (self.local_dim as f64).sqrt();
        let mut merit: VecDeque<f64> = VecDeque::with_capacity(MERIT_WINDOW + 1);
        let mut merit_increase: Option<(usize, usize)> = None;
        let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
        let mut converged = false;
        let mut iterations = 0;
        let mut changes = 0;
        let start = Instant::now();

        for it in 1..=cfg.max_iter {
            iterations = it;
            for slot in &mut self.slots {
                gather(&z, slot.term.scope(), &mut slot.x);
                for (x, u) in slot.x.iter_mut().zip(&slot.u) {
                    *x -= u;
                }
                slot.term.apply(&mut slot.x, rho)?;
            }

            std::mem::swap(&mut z, &mut z_old);
            z.fill(ZERO);
            for slot in &self.slots {
                let mut off = 0;
                for r in slot.term.scope() {
                    for (k, zi) in z[r.clone()].iter_mut().enumerate() {
                        *zi += slot.x[off + k] + slot.u[off + k];
                    }
                    off += r.len();
                }
            }
            for (zi, c) in z.iter_mut().zip(&self.counts) {
                *zi /= *c;
            }

            let (mut r2, mut x2, mut u2) = (0.0, 0.0, 0.0);
            for slot in &mut self.slots {
                let mut off = 0;
                for r in slot.term.scope() {
                    for (k, zi) in z[r.clone()].iter().enumerate() {
                        let d = slot.x[off + k] - zi;
                        slot.u[off + k] += d;
                        r2 += d.norm_sqr();
                        x2 += slot.x[off + k].norm_sqr();
                        u2 += slot.u[off + k].norm_sqr();
                    }
                    off += r.len();
                }
            }
            let (mut dz2, mut z2) = (0.0, 0.0);
            for ((zi, zo), c) in z.iter().zip(&z_old).zip(&self.counts) {
                dz2 += c * (zi - zo).norm_sqr();
                z2 += c * zi.norm_sqr();
            }
            primal = r2.sqrt();
            dual = rho * dz2.sqrt();
            let eps_pri = sqrt_p * cfg.tol_abs + cfg.tol_rel * x2.sqrt().max(z2.sqrt());
            let eps_dual = sqrt_p * cfg.tol_abs + cfg.tol_rel * rho * u2.sqrt();

            if !cfg.adaptive_penalty {
                let m = primal.max(dual);
                if merit.len() == MERIT_WINDOW {
                    let past = merit.pop_front().unwrap_or(m);
                    if m > past {
                        merit_increase = Some(match merit_increase {
                            None => (it, 1),
                            Some((first, n)) => (first, n + 1),
                        });
                    }
                }
                merit.push_back(m);
            }

            if primal <= eps_pri && dual <= eps_dual {
                converged = true;
                break;
            }

            if cfg.adaptive_penalty && it % ADAPT_INTERVAL == 0 && changes < MAX_PENALTY_CHANGES {
                let factor = if primal > BALANCE_RATIO * dual {
                    2.0
                } else if dual > BALANCE_RATIO * primal {
                    0.5
                } else {
                    1.0
                };
                let next = rho * factor;
                if factor != 1.0 && (PENALTY_RANGE.0..=PENALTY_RANGE.1).contains(&next) {
                    rho = next;
                    changes += 1;
                    for slot in &mut self.slots {
                        for u in &mut slot.u {
                            *u /= factor;
                        }
                    }
                }
            }
        }

        let loop_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(AdmmRun {
            locals: self.slots.into_iter().map(|s| s.x).collect(),
            iterations,
            converged,
            primal,
            dual,
            rho,
            merit_increase,
            loop_ms,
        })
    }
}

/// Weighted entrywise ℓ1 norm over consecutive segments of the local vector.
pub(crate) struct L1Term {
    scope: Vec<Range<usize>>,
    /// `(length, weight)` segments covering the local vector.
    segments: Vec<(usize, f64)>,
}

impl L1Term {
    pub fn new(scope: Vec<Range<usize>>, segments: Vec<(usize, f64)>) -> Self {
        debug_assert_eq!(
            scope.iter().map(|r| r.len()).sum::<usize>(),
            segments.iter().map(|s| s.0).sum::<usize>()
        );
        Self { scope, segments }
    }

    /// Unit weight over every scoped coordinate.
    pub fn uniform(scope: Vec<Range<usize>>) -> Self {
        let len = scope.iter().map(|r| r.len()).sum();
        Self::new(scope, vec![(len, 1.0)])
    }
}

impl Prox for L1Term {
    fn scope(&self) -> &[Range<usize>] {
        &self.scope
    }

    fn apply(&mut self, v: &mut [C64], rho: f64) -> Result<()> {
        let mut off = 0;
        for &(len, w) in &self.segments {
            let kappa = w / rho;
            for x in &mut v[off..off + len] {
                *x = shrink(*x, kappa);
            }
            off += len;
        }
        Ok(())
    }
}

/// Indicator of a dense affine set.
pub(crate) struct AffineTerm {
    scope: Vec<Range<usize>>,
    projector: AffineProjector,
}

impl AffineTerm {
    pub fn new(scope: Vec<Range<usize>>, projector: AffineProjector) -> Self {
        Self { scope, projector }
    }
}

impl Prox for AffineTerm {
    fn scope(&self) -> &[Range<usize>] {
        &self.scope
    }

    fn apply(&mut self, v: &mut [C64], _rho: f64) -> Result<()> {
        self.projector.project_in_place(v);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ComplexMatrix;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// min |w1| + |w2| subject to w1 + w2 = 1 (real): any split of 1 with
    /// non-negative parts is optimal, and the objective value is 1.
    #[test]
    fn tiny_l1_with_affine() {
        let a = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)]]).unwrap();
        let p = AffineProjector::new(&a, &[c(1.0, 0.0)]).unwrap();
        let terms: Vec<Box<dyn Prox>> = vec![Box::new(L1Term::uniform(vec![0..2])), Box::new(AffineTerm::new(vec![0..2], p))];
        let run = Admm::new(2, terms).run(vec![ZERO; 2], &SolverConfig::default()).unwrap();
        assert!(run.converged);
        let w = &run.locals[1];
        assert!((w[0] + w[1] - c(1.0, 0.0)).norm() < 1e-12);
        assert!((w[0].norm() + w[1].norm() - 1.0).abs() < 1e-3);
    }

    /// Sparse recovery: x = e_3 from three generic equations in five unknowns.
    #[test]
    fn sparse_solution_recovered() {
        let rows = vec![
            vec![c(1.0, 0.2), c(-0.4, 1.0), c(0.3, -0.7), c(0.9, 0.1), c(-1.1, 0.5)],
            vec![c(0.2, -0.6), c(1.3, 0.0), c(-0.8, 0.4), c(0.1, 1.2), c(0.5, 0.5)],
            vec![c(-0.7, 0.9), c(0.6, -0.3), c(1.1, 1.0), c(-0.2, -0.9), c(0.4, -1.3)],
        ];
        let a = ComplexMatrix::from_rows(&rows).unwrap();
        let b: Vec<C64> = rows.iter().map(|r| r[2] * 2.0).collect();
        let p = AffineProjector::new(&a, &b).unwrap();
        let terms: Vec<Box<dyn Prox>> = vec![Box::new(L1Term::uniform(vec![0..5])), Box::new(AffineTerm::new(vec![0..5], p))];
        let cfg = SolverConfig { tol_abs: 1e-9, tol_rel: 1e-8, ..Default::default() };
        let run = Admm::new(5, terms).run(vec![ZERO; 5], &cfg).unwrap();
        assert!(run.converged);
        let w = &run.locals[1];
        for (k, v) in w.iter().enumerate() {
            let want = if k == 2 { c(2.0, 0.0) } else { ZERO };
            assert!((v - want).norm() < 1e-5, "{k}: {v}");
        }
    }

    #[test]
    fn fixed_penalty_reports_iterations() {
        let terms: Vec<Box<dyn Prox>> = vec![Box::new(L1Term::uniform(vec![0..3]))];
        let cfg = SolverConfig { adaptive_penalty: false, max_iter: 7, ..Default::default() };
        let run = Admm::new(3, terms).run(vec![c(5.0, 0.0); 3], &cfg).unwrap();
        assert!(run.iterations <= 7);
        assert_eq!(run.rho, 1.0);
    }

    #[test]
    #[should_panic(expected = "uncovered")]
    fn uncovered_coordinate_panics() {
        let terms: Vec<Box<dyn Prox>> = vec![Box::new(L1Term::uniform(vec![0..2]))];
        Admm::new(3, terms);
    }
}
