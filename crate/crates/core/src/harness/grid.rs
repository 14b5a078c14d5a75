use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Slack on `(end − start)/step` being integral.
const INTEGRAL_SLACK: f64 = 1e-9;

/// Arithmetic grid `start:step:end`.
///
/// `end` is included when `(end − start)/step` is an integer up to `1e-9`;
/// otherwise the grid stops at the last point below `end`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub step: f64,
    pub end: f64,
}

impl Grid {
    pub fn new(start: f64, step: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && step.is_finite() && end.is_finite()) {
            return Err(Error::Argument("grid bounds must be finite".into()));
        }
        if step <= 0.0 {
            return Err(Error::Argument(format!("grid step must be positive, got {step}")));
        }
        if end < start {
            return Err(Error::Argument(format!("empty grid {start}:{step}:{end}")));
        }
        Ok(Self { start, step, end })
    }

    /// A one-point grid.
    pub fn single(value: f64) -> Self {
        Self {
            start: value,
            step: 1.0,
            end: value,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let span = (self.end - self.start) / self.step;
        let nearest = span.round();
        let count = if (span - nearest).abs() <= INTEGRAL_SLACK {
            nearest as usize + 1
        } else {
            span.floor() as usize + 1
        };
        (0..count).map(|k| self.start + k as f64 * self.step).collect()
    }
}

impl FromStr for Grid {
    type Err = Error;

    /// Parses `a:s:b`, or a single value `a`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let num = |p: &str| {
            p.parse::<f64>()
                .map_err(|_| Error::Argument(format!("bad grid value {p:?} in {s:?}")))
        };
        match parts.as_slice() {
            [a] => Ok(Self::single(num(a)?)),
            [a, step, b] => Self::new(num(a)?, num(step)?, num(b)?),
            _ => Err(Error::Argument(format!("grid must look like start:step:end, got {s:?}"))),
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.step, self.end)
    }
}
