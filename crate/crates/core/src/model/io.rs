//! Instance files: JSON with complex numbers as `[re, im]` pairs.
//!
//! ```text
//! {"config": {n, m, l, k, sigma, pc, seed},
//!  "sensing": [[[re, im], ...], ...],        M rows × N
//!  "signals": [...],                          N rows × L (optional)
//!  "gains": {"d": [...], "theta": [...]},     (optional)
//!  "measurements": [...]}                     M rows × L
//! ```
//!
//! Floats are written with the shortest representation that reparses to the
//! same bits. Files carrying ground truth are validated against the gain model
//! on read.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::instance::{GainVector, GeneratorConfig, ProblemInstance};
use crate::numerics::ComplexMatrix;
use crate::{Error, Result};

/// Contents of an instance file; truth fields are absent in blind files.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub config: GeneratorConfig,
    pub sensing: ComplexMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signals: Option<ComplexMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<GainVector>,
    pub measurements: ComplexMatrix,
}

impl InstanceFile {
    pub fn from_instance(inst: &ProblemInstance, include_truth: bool) -> Self {
        Self {
            config: inst.config.clone(),
            sensing: inst.sensing.clone(),
            signals: include_truth.then(|| inst.signals.clone()),
            gains: include_truth.then(|| inst.gains.clone()),
            measurements: inst.measurements.clone(),
        }
    }

    /// The full instance when ground truth is present.
    pub fn instance(&self) -> Option<ProblemInstance> {
        Some(ProblemInstance {
            config: self.config.clone(),
            sensing: self.sensing.clone(),
            signals: self.signals.clone()?,
            gains: self.gains.clone()?,
            measurements: self.measurements.clone(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        if self.sensing.rows() != c.m || self.sensing.cols() != c.n {
            return Err(Error::Instance(format!(
                "sensing is {}x{}, expected {}x{}",
                self.sensing.rows(),
                self.sensing.cols(),
                c.m,
                c.n
            )));
        }
        if self.measurements.rows() != c.m || self.measurements.cols() != c.l {
            return Err(Error::Instance(format!(
                "measurements are {}x{}, expected {}x{}",
                self.measurements.rows(),
                self.measurements.cols(),
                c.m,
                c.l
            )));
        }
        match (&self.signals, &self.gains) {
            (Some(_), Some(_)) => self.instance().expect("truth present").validate(),
            (None, None) => c.validate(),
            _ => Err(Error::Instance("signals and gains must be both present or both absent".into())),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(s)?;
        f.validate()?;
        Ok(f)
    }
}

pub fn write_instance(path: impl AsRef<Path>, inst: &ProblemInstance, include_truth: bool) -> Result<()> {
    let json = InstanceFile::from_instance(inst, include_truth).to_json()?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<InstanceFile> {
    InstanceFile::from_json(&std::fs::read_to_string(path)?)
}
