use serde::{Deserialize, Serialize};

use crate::numerics::ComplexMatrix;
use crate::C64;

/// Which cross products `g_{i,k,ℓ} = y_{i,k} conj(y_{i,ℓ})` are formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossMode {
    /// Every pair `(k, ℓ)`: `M·L²` values.
    Full,
    /// Only `(ℓ, ℓ)` and `(ℓ, ℓ mod L + 1)`: `2·M·L` values.
    Banded,
}

/// Lifted measurements `g_{i,k,ℓ}` (indices are zero-based here).
#[derive(Clone, Debug, PartialEq)]
pub struct CrossMeasurements {
    mode: CrossMode,
    m: usize,
    l: usize,
    values: Vec<C64>,
}

impl CrossMeasurements {
    pub fn mode(&self) -> CrossMode {
        self.mode
    }

    pub fn sensors(&self) -> usize {
        self.m
    }

    pub fn signals(&self) -> usize {
        self.l
    }

    /// Raw values: full mode is `[i][k][ℓ]`, banded mode is `[i][ℓ][diag, next]`.
    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// `g_{i,k,ℓ}` when stored in this mode.
    pub fn get(&self, i: usize, k: usize, l: usize) -> Option<C64> {
        let big_l = self.l;
        match self.mode {
            CrossMode::Full => Some(self.values[(i * big_l + k) * big_l + l]),
            CrossMode::Banded => {
                if k == l {
                    Some(self.diag(i, k))
                } else if l == (k + 1) % big_l {
                    Some(self.next(i, k))
                } else if k == (l + 1) % big_l {
                    Some(self.next(i, l).conj())
                } else {
                    None
                }
            }
        }
    }

    /// `g_{i,ℓ,ℓ}`.
    pub fn diag(&self, i: usize, l: usize) -> C64 {
        match self.mode {
            CrossMode::Full => self.values[(i * self.l + l) * self.l + l],
            CrossMode::Banded => self.values[i * 2 * self.l + 2 * l],
        }
    }

    /// `g_{i,ℓ,(ℓ+1) mod L}`.
    pub fn next(&self, i: usize, l: usize) -> C64 {
        let nl = (l + 1) % self.l;
        match self.mode {
            CrossMode::Full => self.values[(i * self.l + l) * self.l + nl],
            CrossMode::Banded => self.values[i * 2 * self.l + 2 * l + 1],
        }
    }

    /// The `M` values `g_{·,k,ℓ}` for one block.
    pub fn block(&self, k: usize, l: usize) -> Option<Vec<C64>> {
        (0..self.m).map(|i| self.get(i, k, l)).collect()
    }

    /// Full view, available when every pair is stored (full mode, or `L ≤ 2`).
    pub fn to_full(&self) -> Option<CrossMeasurements> {
        if self.mode == CrossMode::Full {
            return Some(self.clone());
        }
        if self.l > 2 {
            return None;
        }
        let mut values = Vec::with_capacity(self.m * self.l * self.l);
        for i in 0..self.m {
            for k in 0..self.l {
                for l in 0..self.l {
                    values.push(self.get(i, k, l)?);
                }
            }
        }
        Some(CrossMeasurements {
            mode: CrossMode::Full,
            m: self.m,
            l: self.l,
            values,
        })
    }

    /// Banded view of any measurement set.
    pub fn to_banded(&self) -> CrossMeasurements {
        let mut values = Vec::with_capacity(2 * self.m * self.l);
        for i in 0..self.m {
            for l in 0..self.l {
                values.push(self.diag(i, l));
                values.push(self.next(i, l));
            }
        }
        CrossMeasurements {
            mode: CrossMode::Banded,
            m: self.m,
            l: self.l,
            values,
        }
    }
}

/// Forms the cross measurements of `Y` (`M × L`).
pub fn cross_measurements(y: &ComplexMatrix, mode: CrossMode) -> CrossMeasurements {
    let (m, l) = (y.rows(), y.cols());
    let values = match mode {
        CrossMode::Full => {
            let mut v = Vec::with_capacity(m * l * l);
            for i in 0..m {
                for k in 0..l {
                    for j in 0..l {
                        v.push(y.get(i, k) * y.get(i, j).conj());
                    }
                }
            }
            v
        }
        CrossMode::Banded => {
            let mut v = Vec::with_capacity(2 * m * l);
            for i in 0..m {
                for k in 0..l {
                    v.push(C64::new(y.get(i, k).norm_sqr(), 0.0));
                    v.push(y.get(i, k) * y.get(i, (k + 1) % l).conj());
                }
            }
            v
        }
    };
    CrossMeasurements { mode, m, l, values }
}
