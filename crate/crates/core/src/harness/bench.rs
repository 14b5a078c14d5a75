//! Per-iteration timing against the number of signals.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sweep::realize;
use crate::model::rng::trial_seed;
use crate::model::{generate_instance, GeneratorConfig};
use crate::solvers::{solve, SolverConfig, SolverKind};
use crate::{Error, Result};

/// Runs shorter than this are excluded from the timing averages.
pub const MIN_TIMED_ITERATIONS: usize = 10;

pub const BENCH_CSV_HEADER: &str = "solver,n,l,trials,per_iteration_ms,slope,fit_residual";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub solvers: Vec<SolverKind>,
    pub l_values: Vec<usize>,
    pub n: usize,
    pub delta: f64,
    pub rho: f64,
    pub sigma: f64,
    pub pc: f64,
    pub trials: usize,
    pub seed: u64,
    /// Iterations per timed solve; the penalty is held fixed.
    pub max_iter: usize,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            solvers: vec![SolverKind::Pcal, SolverKind::PcalScalable],
            l_values: vec![2, 4, 8],
            n: 32,
            delta: 0.8,
            rho: 0.1,
            sigma: 0.0,
            pc: 1.0,
            trials: 10,
            seed: 0,
            max_iter: 50,
        }
    }
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        let mut ls = self.l_values.clone();
        ls.sort_unstable();
        ls.dedup();
        if ls.len() < 2 {
            return Err(Error::Argument("a slope needs at least two distinct l values".into()));
        }
        if ls[0] == 0 || self.n == 0 || self.trials == 0 || self.solvers.is_empty() {
            return Err(Error::Argument("n, l, trials and the solver list must be non-empty".into()));
        }
        if self.max_iter < MIN_TIMED_ITERATIONS {
            return Err(Error::Argument(format!("max_iter must be at least {MIN_TIMED_ITERATIONS}")));
        }
        if realize(self.n, self.delta, self.rho).0 == 0 {
            return Err(Error::Argument("delta gives no sensors".into()));
        }
        Ok(())
    }

    fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            adaptive_penalty: false,
            tol_abs: f64::MIN_POSITIVE,
            tol_rel: f64::MIN_POSITIVE,
            max_iter: self.max_iter,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingResult {
    pub solver: SolverKind,
    /// `l` values with at least one timed run.
    pub l_values: Vec<usize>,
    /// Mean per-iteration wall time for each entry of `l_values`.
    pub per_iteration_ms: Vec<f64>,
    /// Runs that counted towards each mean.
    pub trials: Vec<usize>,
    /// Least-squares slope of `ln ms` against `ln l`, if two points remain.
    pub slope: Option<f64>,
    /// RMS residual of that fit.
    pub fit_residual: Option<f64>,
    pub warnings: Vec<String>,
}

/// Least-squares line through `(ln x, ln y)`: `(slope, rms residual)`.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ss: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    Some((slope, (ss / n).sqrt()))
}

/// Times every solver on the same instances, one set per `l`.
pub fn run_timing_bench(spec: &BenchSpec) -> Result<Vec<TimingResult>> {
    run_timing_bench_with_progress(spec, |_, _, _| {})
}

/// [`run_timing_bench`], calling `progress(solver, l, mean_ms)` per point.
pub fn run_timing_bench_with_progress<F>(spec: &BenchSpec, mut progress: F) -> Result<Vec<TimingResult>>
where
    F: FnMut(SolverKind, usize, Option<f64>),
{
    spec.validate()?;
    let cfg = spec.solver_config();
    let (m, k) = realize(spec.n, spec.delta, spec.rho);
    let mut out = Vec::with_capacity(spec.solvers.len());
    for &solver in &spec.solvers {
        let mut res = TimingResult {
            solver,
            l_values: vec![],
            per_iteration_ms: vec![],
            trials: vec![],
            slope: None,
            fit_residual: None,
            warnings: vec![],
        };
        for (li, &l) in spec.l_values.iter().enumerate() {
            let mut times = Vec::with_capacity(spec.trials);
            for t in 0..spec.trials {
                let seed = trial_seed(spec.seed, li as u64, t as u64);
                let inst = generate_instance(&GeneratorConfig {
                    n: spec.n,
                    m,
                    l,
                    k,
                    sigma: spec.sigma,
                    pc: spec.pc,
                    seed,
                })?;
                match solve(solver, &inst.measurements, &inst.sensing, &cfg) {
                    Ok(r) if r.iterations >= MIN_TIMED_ITERATIONS && r.iteration_ms > 0.0 => times.push(r.iteration_ms),
                    Ok(r) => res.warnings.push(format!(
                        "{solver} l={l} trial {t}: only {} iterations, excluded",
                        r.iterations
                    )),
                    Err(e) => res.warnings.push(format!("{solver} l={l} trial {t}: {e}, excluded")),
                }
            }
            if times.is_empty() {
                progress(solver, l, None);
                continue;
            }
            let mean = times.iter().sum::<f64>() / times.len() as f64;
            progress(solver, l, Some(mean));
            res.l_values.push(l);
            res.per_iteration_ms.push(mean);
            res.trials.push(times.len());
        }
        let ls: Vec<f64> = res.l_values.iter().map(|&l| l as f64).collect();
        if let Some((slope, resid)) = log_log_fit(&ls, &res.per_iteration_ms) {
            res.slope = Some(slope);
            res.fit_residual = Some(resid);
        }
        out.push(res);
    }
    Ok(out)
}

#[derive(Serialize)]
struct BenchRow {
    solver: SolverKind,
    n: usize,
    l: usize,
    trials: usize,
    per_iteration_ms: f64,
    slope: Option<f64>,
    fit_residual: Option<f64>,
}

pub fn write_bench_csv_to<W: Write>(results: &[TimingResult], n: usize, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let err = |e: csv::Error| Error::Parse {
        line: 0,
        message: e.to_string(),
    };
    w.write_record(BENCH_CSV_HEADER.split(',')).map_err(err)?;
    for r in results {
        for (i, &l) in r.l_values.iter().enumerate() {
            w.serialize(BenchRow {
                solver: r.solver,
                n,
                l,
                trials: r.trials[i],
                per_iteration_ms: r.per_iteration_ms[i],
                slope: r.slope,
                fit_residual: r.fit_residual,
            })
            .map_err(err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_bench_csv(results: &[TimingResult], n: usize, path: &Path) -> Result<()> {
    write_bench_csv_to(results, n, std::io::BufWriter::new(std::fs::File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_power_law() {
        let x = [2.0, 4.0, 8.0, 16.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 0.3 * v.powf(2.7)).collect();
        let (slope, resid) = log_log_fit(&x, &y).unwrap();
        assert!((slope - 2.7).abs() < 1e-12);
        assert!(resid < 1e-12);
        assert!(log_log_fit(&[2.0], &[1.0]).is_none());
        assert!(log_log_fit(&[2.0, 2.0], &[1.0, 3.0]).is_none());
    }

    #[test]
    fn single_l_is_rejected() {
        let spec = BenchSpec {
            l_values: vec![4, 4],
            ..Default::default()
        };
        assert!(matches!(run_timing_bench(&spec), Err(Error::Argument(_))));
    }

    #[test]
    fn small_bench_has_slopes() {
        let spec = BenchSpec {
            n: 4,
            l_values: vec![1, 3],
            trials: 1,
            max_iter: 12,
            ..Default::default()
        };
        let r = run_timing_bench(&spec).unwrap();
        assert_eq!(r.len(), 2);
        for t in &r {
            assert_eq!(t.l_values, vec![1, 3], "{:?}", t.warnings);
            assert!(t.per_iteration_ms.iter().all(|&v| v > 0.0));
            assert!(t.slope.is_some());
        }
        let mut buf = Vec::new();
        write_bench_csv_to(&r, 4, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(BENCH_CSV_HEADER));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn short_runs_are_excluded() {
        // the closed form does no iterations
        let spec = BenchSpec {
            solvers: vec![SolverKind::ClosedForm],
            n: 2,
            delta: 2.0,
            l_values: vec![2, 3],
            trials: 1,
            ..Default::default()
        };
        let r = run_timing_bench(&spec).unwrap();
        assert!(r[0].l_values.is_empty());
        assert_eq!(r[0].warnings.len(), 2);
        assert!(r[0].slope.is_none());
    }
}
