//! ADMM solvers for the blind calibration programs, the calibrated basis
//! pursuit baseline, the over-determined closed-form solver, and signal/gain
//! extraction.

mod admm;
mod extract;
mod lifted;
mod linear;
mod quadratic;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{cross_measurements, CrossMode, GainVector};
use crate::numerics::{complex_vec_serde, ComplexMatrix};
use crate::{Error, Result, C64};

pub use extract::{chain_blocks, extract_signals_pcal, rank_one_gap, recover_phases, BlockSolution, PhaseEstimate};
pub use lifted::GramProjector;
pub use linear::{solve_acal, solve_calibrated_bp, solve_closed_form, ClosedFormMode};
pub use quadratic::{
    solve_ccal, solve_ccal_from, solve_ccal_scalable, solve_ccal_scalable_from, solve_pcal, solve_pcal_from,
    solve_pcal_scalable, solve_pcal_scalable_from,
};

/// Lower and upper bounds on the adaptive penalty.
pub const PENALTY_RANGE: (f64, f64) = (1e-4, 1e4);

/// ADMM tuning knobs shared by every iterative solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Initial penalty parameter.
    pub rho: f64,
    /// Residual balancing: the penalty is doubled or halved when one residual
    /// exceeds the other by a factor of 10.
    pub adaptive_penalty: bool,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iter: usize,
    /// Constant of the sum constraint `Σ t = c`; defaults to `M`.
    pub c: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            adaptive_penalty: true,
            tol_abs: 1e-6,
            tol_rel: 1e-4,
            max_iter: 5000,
            c: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.rho) {
            return Err(Error::Argument(format!("rho must be positive, got {}", self.rho)));
        }
        if !positive(self.tol_abs) || !positive(self.tol_rel) {
            return Err(Error::Argument("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Argument("max_iter must be at least 1".into()));
        }
        if let Some(c) = self.c {
            if !c.is_finite() || c == 0.0 {
                return Err(Error::Argument(format!("c must be finite and non-zero, got {c}")));
            }
        }
        Ok(())
    }

    /// The sum-constraint constant for `m` sensors.
    pub fn sum_constant(&self, m: usize) -> f64 {
        self.c.unwrap_or(m as f64)
    }
}

/// Recovered inverse gains `τ̂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseGains {
    #[serde(with = "complex_vec_serde")]
    pub tau: Vec<C64>,
}

/// Conditions worth surfacing alongside a solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    /// The leading eigenvalue of a lifted solution is not separated from the
    /// second one; `block` is set for the scalable solvers.
    DegenerateEigenspace { block: Option<usize> },
    /// `τ̂_i` too small to invert.
    GainRecoveryFailed { sensor: usize },
    /// Every `m_i^H x̂_ℓ` vanishes, so the phase of sensor `i` is undefined.
    PhaseUndefined { sensor: usize },
    /// Condition estimate of the closed-form system.
    IllConditioned { condition: f64 },
    /// An all-zero measurement column.
    ZeroMeasurementColumn { column: usize },
    /// `max(primal, dual)` rose over a 50-iteration window (fixed penalty only).
    MeritIncrease { first_iteration: usize, count: usize },
    /// A scalable solver handed a small `L` to its full counterpart.
    DelegatedToFull { l: usize },
    /// Phase chaining lost its anchor at `block`; the block was anchored at phase 0.
    ChainBreak { block: usize },
    /// Linearly dependent equality constraints were dropped.
    RedundantConstraints { dropped: usize },
}

/// Solver identifiers as used on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    #[serde(rename = "bp")]
    Bp,
    #[serde(rename = "closed-form")]
    ClosedForm,
    #[serde(rename = "acal")]
    Acal,
    #[serde(rename = "pcal")]
    Pcal,
    #[serde(rename = "pcal-s")]
    PcalScalable,
    #[serde(rename = "ccal")]
    Ccal,
    #[serde(rename = "ccal-s")]
    CcalScalable,
}

impl SolverKind {
    pub const ALL: [SolverKind; 7] = [
        SolverKind::Bp,
        SolverKind::ClosedForm,
        SolverKind::Acal,
        SolverKind::Pcal,
        SolverKind::PcalScalable,
        SolverKind::Ccal,
        SolverKind::CcalScalable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Bp => "bp",
            SolverKind::ClosedForm => "closed-form",
            SolverKind::Acal => "acal",
            SolverKind::Pcal => "pcal",
            SolverKind::PcalScalable => "pcal-s",
            SolverKind::Ccal => "ccal",
            SolverKind::CcalScalable => "ccal-s",
        }
    }

    /// Whether the solver is iterative (and so reports per-iteration timing).
    pub fn is_iterative(self) -> bool {
        self != SolverKind::ClosedForm
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = SolverKind::ALL.iter().map(|k| k.name()).collect();
                Error::Argument(format!("unknown solver '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

/// Recovered signals and gains with convergence information.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub solver: SolverKind,
    pub signals_hat: ComplexMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains_hat: Option<GainVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_hat: Option<InverseGains>,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Largest relative violation of the program's equality constraints,
    /// re-evaluated on the returned solution.
    pub constraint_residual: f64,
    /// Final penalty parameter.
    pub penalty: f64,
    /// `‖X̂ − x̂ x̂^H‖_F / ‖X̂‖_F` for the lifted solvers (largest over blocks).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_one_gap: Option<f64>,
    pub diagnostics: Vec<Diagnostic>,
    pub wall_ms: f64,
    /// Mean wall time of one ADMM iteration.
    pub iteration_ms: f64,
}

impl SolveResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Runs the named solver on raw measurements `Y` (`M × L`).
///
/// The lifted solvers form their cross measurements from `Y`, and every
/// solver that can estimate gain phases does so with [`recover_phases`].
/// `closed-form` runs in amplitude mode.
pub fn solve(kind: SolverKind, y: &ComplexMatrix, sensing: &ComplexMatrix, cfg: &SolverConfig) -> Result<SolveResult> {
    let mut result = match kind {
        SolverKind::Bp => solve_calibrated_bp(y, sensing, cfg)?,
        SolverKind::ClosedForm => solve_closed_form(y, sensing, cfg, ClosedFormMode::Amplitude)?,
        SolverKind::Acal => solve_acal(y, sensing, cfg)?,
        SolverKind::Pcal => solve_pcal(&cross_measurements(y, CrossMode::Full), sensing, cfg)?.0,
        SolverKind::PcalScalable => solve_pcal_scalable(&cross_measurements(y, CrossMode::Banded), sensing, cfg)?.0,
        SolverKind::Ccal => solve_ccal(&cross_measurements(y, CrossMode::Full), sensing, cfg)?.0,
        SolverKind::CcalScalable => solve_ccal_scalable(&cross_measurements(y, CrossMode::Banded), sensing, cfg)?.0,
    };
    if matches!(
        kind,
        SolverKind::Pcal | SolverKind::PcalScalable | SolverKind::Ccal | SolverKind::CcalScalable
    ) {
        attach_gains(&mut result, y, sensing)?;
    }
    Ok(result)
}

/// Fills `gains_hat` for the lifted solvers: amplitudes from `τ̂` (complete
/// calibration) or unity (phase calibration), phases from [`recover_phases`].
pub fn attach_gains(result: &mut SolveResult, y: &ComplexMatrix, sensing: &ComplexMatrix) -> Result<()> {
    let phases = recover_phases(y, sensing, &result.signals_hat)?;
    for &i in &phases.undefined {
        result.diagnostics.push(Diagnostic::PhaseUndefined { sensor: i });
    }
    let m = phases.theta.len();
    let d = match &result.tau_hat {
        Some(inv) => {
            let c: f64 = inv.tau.iter().map(|t| t.re).sum();
            let floor = 1e-10 * (c.abs() / m.max(1) as f64);
            let mut d = Vec::with_capacity(m);
            for (i, t) in inv.tau.iter().enumerate() {
                if t.re <= floor {
                    let flag = Diagnostic::GainRecoveryFailed { sensor: i };
                    if !result.diagnostics.contains(&flag) {
                        result.diagnostics.push(flag);
                    }
                    return Ok(());
                }
                d.push(1.0 / t.re.sqrt());
            }
            d
        }
        None => vec![1.0; m],
    };
    result.gains_hat = Some(GainVector { d, theta: phases.theta });
    Ok(())
}

/// Zero columns of `Y` make the lifted programs phase-degenerate.
pub(crate) fn zero_column_diagnostics(y: &ComplexMatrix) -> Vec<Diagnostic> {
    (0..y.cols())
        .filter(|&l| (0..y.rows()).all(|i| y.get(i, l) == C64::new(0.0, 0.0)))
        .map(|column| Diagnostic::ZeroMeasurementColumn { column })
        .collect()
}

/// Checks `Y` against the sensing matrix.
pub(crate) fn check_shapes(y: &ComplexMatrix, sensing: &ComplexMatrix) -> Result<()> {
    if y.rows() != sensing.rows() {
        return Err(Error::Dimension(format!(
            "measurements have {} rows but the sensing matrix has {}",
            y.rows(),
            sensing.rows()
        )));
    }
    if sensing.rows() == 0 || sensing.cols() == 0 || y.cols() == 0 {
        return Err(Error::Dimension("empty problem".into()));
    }
    if !y.is_finite() || !sensing.is_finite() {
        return Err(Error::Argument("non-finite input".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_names_round_trip() {
        for k in SolverKind::ALL {
            assert_eq!(k.name().parse::<SolverKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert!("nope".parse::<SolverKind>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = [
            SolverConfig { rho: 0.0, ..Default::default() },
            SolverConfig { tol_abs: -1.0, ..Default::default() },
            SolverConfig { max_iter: 0, ..Default::default() },
            SolverConfig { c: Some(0.0), ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        assert_eq!(SolverConfig::default().sum_constant(7), 7.0);
    }

    #[test]
    fn config_json_defaults_and_unknown_fields() {
        let cfg: SolverConfig = serde_json::from_str(r#"{"max_iter": 10}"#).unwrap();
        assert_eq!(cfg.max_iter, 10);
        assert_eq!(cfg.rho, 1.0);
        assert!(serde_json::from_str::<SolverConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
