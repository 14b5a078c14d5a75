//! Recovery quality metrics and the perfect-recovery criterion.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::numerics::{inner, vector_norm, ComplexMatrix};
use crate::{Error, Result, C64};

/// Mean correlation a recovery must exceed (strictly) to count as perfect.
pub const PERFECT_THRESHOLD: f64 = 0.999;

/// Absolute correlation `|x1^H x2| / (‖x1‖ ‖x2‖)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correlation {
    pub mu: f64,
    /// Set when either vector is zero; `mu` is then 0.
    pub degenerate: bool,
}

pub fn abs_correlation(x1: &[C64], x2: &[C64]) -> Result<Correlation> {
    if x1.len() != x2.len() {
        return Err(Error::Dimension(format!(
            "correlation of vectors with lengths {} and {}",
            x1.len(),
            x2.len()
        )));
    }
    let (n1, n2) = (vector_norm(x1), vector_norm(x2));
    if n1 == 0.0 || n2 == 0.0 {
        return Ok(Correlation {
            mu: 0.0,
            degenerate: true,
        });
    }
    let mu = (inner(x1, x2).norm() / (n1 * n2)).clamp(0.0, 1.0);
    Ok(Correlation {
        mu,
        degenerate: false,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryVerdict {
    pub per_column_mu: Vec<f64>,
    pub mean_mu: f64,
    pub perfect: bool,
    /// Columns where either the truth or the estimate is zero.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate_columns: Vec<usize>,
}

/// Per-column correlations between true and estimated signals.
pub fn verdict(truth: &ComplexMatrix, estimate: &ComplexMatrix) -> Result<RecoveryVerdict> {
    if truth.rows() != estimate.rows() || truth.cols() != estimate.cols() {
        return Err(Error::Dimension(format!(
            "truth is {}x{} but estimate is {}x{}",
            truth.rows(),
            truth.cols(),
            estimate.rows(),
            estimate.cols()
        )));
    }
    let mut per_column_mu = Vec::with_capacity(truth.cols());
    let mut degenerate_columns = Vec::new();
    for col in 0..truth.cols() {
        let c = abs_correlation(&truth.column(col), &estimate.column(col))?;
        if c.degenerate {
            degenerate_columns.push(col);
        }
        per_column_mu.push(c.mu);
    }
    let mean_mu = if per_column_mu.is_empty() {
        0.0
    } else {
        per_column_mu.iter().sum::<f64>() / per_column_mu.len() as f64
    };
    Ok(RecoveryVerdict {
        per_column_mu,
        mean_mu,
        perfect: mean_mu > PERFECT_THRESHOLD,
        degenerate_columns,
    })
}

/// Phase-transition coordinates `δ = M/N`, `ρ = K/M` as exact rationals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridCoords {
    pub delta: Ratio<u64>,
    pub rho: Ratio<u64>,
}

impl GridCoords {
    pub fn delta_f64(&self) -> f64 {
        *self.delta.numer() as f64 / *self.delta.denom() as f64
    }

    pub fn rho_f64(&self) -> f64 {
        *self.rho.numer() as f64 / *self.rho.denom() as f64
    }
}

pub fn grid_coords(m: u64, n: u64, k: u64) -> Result<GridCoords> {
    if m == 0 || n == 0 {
        return Err(Error::Argument(format!("grid coordinates need m, n >= 1 (m={m}, n={n})")));
    }
    Ok(GridCoords {
        delta: Ratio::new(m, n),
        rho: Ratio::new(k, m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn correlation_examples() {
        let x1 = vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0)];
        let s = C64::from_polar(3.0, PI / 4.0);
        let x2: Vec<C64> = x1.iter().map(|v| v * s).collect();
        assert!((abs_correlation(&x1, &x2).unwrap().mu - 1.0).abs() < 1e-15);
        let mu = abs_correlation(&[c(1.0, 0.0), c(0.0, 0.0)], &[c(0.0, 0.0), c(1.0, 0.0)]).unwrap().mu;
        assert_eq!(mu, 0.0);
        let mu = abs_correlation(&[c(1.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap().mu;
        assert!((mu - 0.70711).abs() < 1e-5);
    }

    #[test]
    fn zero_vector_is_degenerate() {
        let r = abs_correlation(&[c(0.0, 0.0)], &[c(1.0, 0.0)]).unwrap();
        assert_eq!(r.mu, 0.0);
        assert!(r.degenerate);
        assert!(abs_correlation(&[c(0.0, 0.0)], &[]).is_err());
    }

    #[test]
    fn verdict_examples() {
        let truth = ComplexMatrix::from_fn(6, 5, |i, j| c((i * j) as f64 + 1.0, i as f64 - j as f64));
        let v = verdict(&truth, &truth).unwrap();
        assert!(v.perfect);
        assert!((v.mean_mu - 1.0).abs() < 1e-15);

        let rotated = truth.scale(C64::from_polar(0.3, 1.1));
        assert!(verdict(&truth, &rotated).unwrap().perfect);

        let mut bad = truth.clone();
        // column 2 replaced by a vector orthogonal to the truth column
        let col = truth.column(2);
        let mut w = vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let proj = inner(&col, &w) / inner(&col, &col);
        for (wi, ci) in w.iter_mut().zip(&col) {
            *wi -= proj * ci;
        }
        for i in 0..6 {
            bad.set(i, 2, w[i]);
        }
        let v = verdict(&truth, &bad).unwrap();
        assert!(v.per_column_mu[2] < 1e-12);
        assert!(v.mean_mu <= 0.8);
        assert!(!v.perfect);

        assert!(verdict(&truth, &ComplexMatrix::zeros(6, 4)).is_err());
    }

    #[test]
    fn threshold_is_strict() {
        let v = RecoveryVerdict {
            per_column_mu: vec![PERFECT_THRESHOLD],
            mean_mu: PERFECT_THRESHOLD,
            perfect: PERFECT_THRESHOLD > PERFECT_THRESHOLD,
            degenerate_columns: vec![],
        };
        assert!(!v.perfect);
    }

    #[test]
    fn grid_examples() {
        let g = grid_coords(80, 100, 16).unwrap();
        assert_eq!((g.delta_f64(), g.rho_f64()), (0.8, 0.2));
        let g = grid_coords(100, 100, 100).unwrap();
        assert_eq!((g.delta_f64(), g.rho_f64()), (1.0, 1.0));
        assert!(grid_coords(0, 10, 1).is_err());
    }

    fn cvec(len: usize) -> impl Strategy<Value = Vec<C64>> {
        proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0).prop_map(|(a, b)| c(a, b)), len)
    }

    proptest! {
        #[test]
        fn rho_times_delta_is_sparsity_ratio(m in 1u64..500, n in 1u64..500, k in 0u64..500) {
            let g = grid_coords(m, n, k).unwrap();
            prop_assert_eq!(g.rho * g.delta, Ratio::new(k, n));
        }

        #[test]
        fn correlation_properties(a in cvec(6), b in cvec(6), s1 in 0.1f64..5.0, p1 in 0.0f64..6.3, s2 in 0.1f64..5.0, p2 in 0.0f64..6.3) {
            prop_assume!(vector_norm(&a) > 1e-3 && vector_norm(&b) > 1e-3);
            let mu = abs_correlation(&a, &b).unwrap().mu;
            let mu_ba = abs_correlation(&b, &a).unwrap().mu;
            prop_assert!((0.0..=1.0).contains(&mu));
            prop_assert!((mu - mu_ba).abs() < 1e-12);
            let w1 = C64::from_polar(s1, p1);
            let w2 = C64::from_polar(s2, p2);
            let a2: Vec<C64> = a.iter().map(|v| v * w1).collect();
            let b2: Vec<C64> = b.iter().map(|v| v * w2).collect();
            prop_assert!((abs_correlation(&a2, &b2).unwrap().mu - mu).abs() < 1e-12);
            prop_assert!((abs_correlation(&a, &a2).unwrap().mu - 1.0).abs() < 1e-12);
        }

        #[test]
        fn non_parallel_pairs_below_one(a in cvec(4)) {
            prop_assume!(vector_norm(&a) > 1e-2);
            let mut b = a.clone();
            // perturb orthogonally: swap-and-conjugate the first two entries
            b[0] += a[1].conj() * 0.5;
            b[1] -= a[0].conj() * 0.5;
            prop_assume!(a[0].norm() + a[1].norm() > 1e-2);
            prop_assert!(abs_correlation(&a, &b).unwrap().mu < 1.0 - 1e-12);
        }

        #[test]
        fn verdict_invariant_to_global_phase(vals in cvec(12), phase in 0.0f64..6.3) {
            let truth = ComplexMatrix::from_fn(4, 3, |i, j| vals[i * 3 + j]);
            let est = ComplexMatrix::from_fn(4, 3, |i, j| vals[(i * 3 + j + 1) % 12]);
            let v1 = verdict(&truth, &est).unwrap();
            let v2 = verdict(&truth, &est.scale(C64::from_polar(1.0, phase))).unwrap();
            for (x, y) in v1.per_column_mu.iter().zip(&v2.per_column_mu) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
