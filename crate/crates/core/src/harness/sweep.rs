use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Grid;
use crate::metrics::verdict;
use crate::model::rng::trial_seed;
use crate::model::{generate_instance, GeneratorConfig};
use crate::solvers::{solve, SolverConfig, SolverKind};
use crate::{Error, Result};

/// A Monte-Carlo sweep over a `(δ, ρ)` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub solver: SolverKind,
    pub n: usize,
    pub l: usize,
    pub sigma: f64,
    pub pc: f64,
    pub delta: Grid,
    pub rho: Grid,
    pub trials: usize,
    pub seed: u64,
    pub config: SolverConfig,
    /// Worker threads; results do not depend on it.
    #[serde(skip)]
    pub jobs: usize,
    /// Record mean wall time per cell. Off keeps the output byte-reproducible.
    #[serde(default)]
    pub wall_time: bool,
}

/// One grid point with its realized integer sizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub delta: f64,
    pub rho: f64,
    pub m: usize,
    pub k: usize,
}

impl Cell {
    /// `M/N` as realized.
    pub fn realized_delta(&self, n: usize) -> Ratio<u64> {
        Ratio::new(self.m as u64, n as u64)
    }

    /// `K/M` as realized.
    pub fn realized_rho(&self) -> Ratio<u64> {
        Ratio::new(self.k as u64, self.m as u64)
    }
}

/// `M = round(δN)`, `K = clamp(round(ρM), 1, N)`.
pub fn realize(n: usize, delta: f64, rho: f64) -> (usize, usize) {
    let m = (delta * n as f64).round().max(0.0) as usize;
    let k = ((rho * m as f64).round().max(0.0) as usize).clamp(1, n.max(1));
    (m, k)
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.l == 0 {
            return Err(Error::Argument("n and l must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Argument("trials must be at least 1".into()));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) || !(0.0..=1.0).contains(&self.pc) {
            return Err(Error::Argument(format!("bad sigma={} or pc={}", self.sigma, self.pc)));
        }
        self.config.validate()?;
        let cells = self.cells();
        if cells.is_empty() {
            return Err(Error::Argument("empty grid".into()));
        }
        if let Some(c) = cells.iter().find(|c| c.m == 0) {
            return Err(Error::Argument(format!("delta={} gives M=0 at n={}", c.delta, self.n)));
        }
        if self.delta.values().iter().chain(&self.rho.values()).any(|v| *v < 0.0) {
            return Err(Error::Argument("grid values must be non-negative".into()));
        }
        Ok(())
    }

    /// Cells in `δ`-major order; `index = δ position · |ρ grid| + ρ position`.
    pub fn cells(&self) -> Vec<Cell> {
        let rhos = self.rho.values();
        let mut out = Vec::new();
        for (di, &delta) in self.delta.values().iter().enumerate() {
            for (ri, &rho) in rhos.iter().enumerate() {
                let (m, k) = realize(self.n, delta, rho);
                out.push(Cell {
                    index: di * rhos.len() + ri,
                    delta,
                    rho,
                    m,
                    k,
                });
            }
        }
        out
    }

    /// Instance seed of `(cell, trial)`.
    pub fn trial_seed(&self, cell: usize, trial: usize) -> u64 {
        trial_seed(self.seed, cell as u64, trial as u64)
    }

    /// SHA-256 of the canonical JSON form, as hex. Excludes the job count.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).unwrap_or_default();
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A trial that errored instead of producing an estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub reason: String,
}

/// Aggregate over the trials of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub solver: SolverKind,
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub k: usize,
    pub sigma: f64,
    pub pc: f64,
    /// Grid coordinates; realized ratios are `m/n` and `k/m`.
    pub delta: f64,
    pub rho: f64,
    pub trials: usize,
    pub successes: usize,
    pub mean_mu: f64,
    pub mean_iterations: f64,
    pub mean_wall_ms: f64,
    /// Not serialized.
    pub failures: Vec<TrialFailure>,
}

impl CellResult {
    pub fn success_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }
}

struct TrialOutcome {
    perfect: bool,
    mu: f64,
    iterations: usize,
    wall_ms: f64,
    failure: Option<TrialFailure>,
}

fn run_trial(spec: &SweepSpec, cell: &Cell, trial: usize) -> TrialOutcome {
    let seed = spec.trial_seed(cell.index, trial);
    let started = Instant::now();
    let attempt = || -> Result<(bool, f64, usize)> {
        let inst = generate_instance(&GeneratorConfig {
            n: spec.n,
            m: cell.m,
            l: spec.l,
            k: cell.k,
            sigma: spec.sigma,
            pc: spec.pc,
            seed,
        })?;
        let result = solve(spec.solver, &inst.measurements, &inst.sensing, &spec.config)?;
        let v = verdict(&inst.signals, &result.signals_hat)?;
        Ok((v.perfect, v.mean_mu, result.iterations))
    };
    let outcome = attempt();
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok((perfect, mu, iterations)) => TrialOutcome {
            perfect,
            mu,
            iterations,
            wall_ms,
            failure: None,
        },
        Err(e) => TrialOutcome {
            perfect: false,
            mu: 0.0,
            iterations: 0,
            wall_ms,
            failure: Some(TrialFailure {
                trial,
                seed,
                reason: e.to_string(),
            }),
        },
    }
}

/// Runs every `(cell, trial)` on a pool of `spec.jobs` threads.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<CellResult>> {
    run_sweep_with_progress(spec, |_, _| {})
}

/// [`run_sweep`], calling `progress(done, total)` after each trial.
pub fn run_sweep_with_progress<F>(spec: &SweepSpec, progress: F) -> Result<Vec<CellResult>>
where
    F: Fn(usize, usize) + Sync,
{
    spec.validate()?;
    let cells = spec.cells();
    let work: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..spec.trials).map(move |t| (c, t)))
        .collect();
    let total = work.len();
    let done = AtomicUsize::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        work.par_iter()
            .map(|&(c, t)| {
                let out = run_trial(spec, &cells[c], t);
                progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
                out
            })
            .collect()
    });

    Ok(cells
        .iter()
        .zip(outcomes.chunks(spec.trials))
        .map(|(cell, trials)| aggregate(spec, cell, trials))
        .collect())
}

fn aggregate(spec: &SweepSpec, cell: &Cell, trials: &[TrialOutcome]) -> CellResult {
    let count = trials.len() as f64;
    let mean = |f: &dyn Fn(&TrialOutcome) -> f64| trials.iter().map(f).sum::<f64>() / count;
    CellResult {
        solver: spec.solver,
        n: spec.n,
        m: cell.m,
        l: spec.l,
        k: cell.k,
        sigma: spec.sigma,
        pc: spec.pc,
        delta: cell.delta,
        rho: cell.rho,
        trials: trials.len(),
        successes: trials.iter().filter(|t| t.perfect).count(),
        mean_mu: mean(&|t| t.mu),
        mean_iterations: mean(&|t| t.iterations as f64),
        mean_wall_ms: if spec.wall_time { mean(&|t| t.wall_ms) } else { 0.0 },
        failures: trials.iter().filter_map(|t| t.failure.clone()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    pub(crate) fn spec(solver: SolverKind) -> SweepSpec {
        SweepSpec {
            solver,
            n: 8,
            l: 2,
            sigma: 0.2,
            pc: 1.0,
            delta: "0.5:0.25:1".parse().unwrap(),
            rho: "0.1:0.2:0.5".parse().unwrap(),
            trials: 2,
            seed: 11,
            config: SolverConfig::default(),
            jobs: 1,
            wall_time: false,
        }
    }

    #[test]
    fn realization_rounds_and_clamps() {
        assert_eq!(realize(100, 0.8, 0.1), (80, 8));
        assert_eq!(realize(10, 0.25, 0.01), (3, 1));
        assert_eq!(realize(10, 1.0, 2.0), (10, 10));
        assert_eq!(realize(32, 0.8, 0.05), (26, 1));
    }

    #[test]
    fn cell_indices_are_delta_major() {
        let cells = spec(SolverKind::Bp).cells();
        assert_eq!(cells.len(), 9);
        assert_eq!(cells[4].index, 4);
        assert_eq!((cells[4].delta, cells[4].rho), (0.75, 0.30000000000000004));
        assert_eq!(cells[4].realized_delta(8), Ratio::new(3, 4));
        assert_eq!(cells[4].realized_rho(), Ratio::new(1, 3));
    }

    #[test]
    fn seeds_never_collide() {
        let mut s = spec(SolverKind::Bp);
        s.delta = "0.1:0.01:1".parse().unwrap();
        s.rho = "0.01:0.01:1".parse().unwrap();
        s.trials = 20;
        let mut seen = HashSet::new();
        for cell in s.cells() {
            for t in 0..s.trials {
                assert!(seen.insert(s.trial_seed(cell.index, t)));
            }
        }
        assert_eq!(seen.len(), 91 * 100 * 20);
    }

    #[test]
    fn deterministic_closed_form_success() {
        let mut s = spec(SolverKind::ClosedForm);
        s.n = 4;
        s.l = 2;
        // ceil(7/4 · 4) = 7 sensors
        s.delta = Grid::single(1.75);
        s.rho = Grid::single(0.3);
        s.trials = 1;
        let r = run_sweep(&s).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].m, r[0].successes), (7, 1));
    }

    #[test]
    fn solver_errors_are_recorded_as_failures() {
        let mut s = spec(SolverKind::ClosedForm);
        s.delta = Grid::single(0.5);
        s.rho = Grid::single(0.25);
        let r = run_sweep(&s).unwrap();
        assert_eq!(r[0].successes, 0);
        assert_eq!(r[0].failures.len(), 2);
        assert_eq!(r[0].mean_mu, 0.0);
        assert!(r[0].failures[0].reason.contains("closed form"));
    }

    #[test]
    fn validation() {
        let mut s = spec(SolverKind::Bp);
        s.trials = 0;
        assert!(s.validate().is_err());
        let mut s = spec(SolverKind::Bp);
        s.delta = Grid::single(0.01);
        assert!(s.validate().is_err());
        let mut s = spec(SolverKind::Bp);
        s.pc = 1.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn hash_ignores_jobs() {
        let a = spec(SolverKind::Acal);
        let mut b = a.clone();
        b.jobs = 8;
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
