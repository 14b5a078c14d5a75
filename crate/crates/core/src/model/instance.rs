use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::rng::{stream_rng, Stream};
use crate::numerics::ComplexMatrix;
use crate::{Error, Result, C64};

/// Parameters of a synthetic blind-calibration instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Signal dimension N.
    pub n: usize,
    /// Sensor count M.
    pub m: usize,
    /// Number of signals L.
    pub l: usize,
    /// Non-zeros per signal K.
    pub k: usize,
    /// Standard deviation of the log-amplitudes.
    pub sigma: f64,
    /// Phase variability: phases are uniform on `[0, 2π·pc)`.
    pub pc: f64,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.l == 0 {
            return Err(Error::Argument(format!(
                "n, m, l must be positive (n={}, m={}, l={})",
                self.n, self.m, self.l
            )));
        }
        if self.k == 0 || self.k > self.n {
            return Err(Error::Argument(format!(
                "sparsity k={} must lie in [1, n={}]",
                self.k, self.n
            )));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Argument(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(0.0..=1.0).contains(&self.pc) {
            return Err(Error::Argument(format!("pc must lie in [0, 1], got {}", self.pc)));
        }
        Ok(())
    }
}

/// Per-sensor gains `d_i e^{jθ_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainVector {
    pub d: Vec<f64>,
    pub theta: Vec<f64>,
}

impl GainVector {
    pub fn unit(m: usize) -> Self {
        Self {
            d: vec![1.0; m],
            theta: vec![0.0; m],
        }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn complex(&self) -> Vec<C64> {
        self.d
            .iter()
            .zip(&self.theta)
            .map(|(&d, &t)| C64::from_polar(d, t))
            .collect()
    }

    /// Gains `1/τ_i` for inverse gains `τ`.
    pub fn from_inverse(tau: &[C64]) -> Self {
        let (d, theta) = tau
            .iter()
            .map(|t| {
                let g = t.inv();
                (g.norm(), g.arg().rem_euclid(2.0 * PI))
            })
            .unzip();
        Self { d, theta }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d.len() != self.theta.len() {
            return Err(Error::Instance("gain amplitude and phase lengths differ".into()));
        }
        if let Some(i) = self.d.iter().position(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::Instance(format!("gain amplitude {i} is not positive")));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Instance("gain phase is not finite".into()));
        }
        Ok(())
    }
}

/// One trial: ground truth plus the measurements a solver sees.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProblemInstance {
    pub config: GeneratorConfig,
    /// `M × N`; row `i` is `m_i^H`.
    pub sensing: ComplexMatrix,
    /// `N × L`; column `ℓ` is `x_ℓ`.
    pub signals: ComplexMatrix,
    pub gains: GainVector,
    /// `M × L`; entry `(i, ℓ)` is `y_{i,ℓ}`.
    pub measurements: ComplexMatrix,
}

fn complex_normal<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

/// Draws a random instance.
///
/// Sensing entries and non-zero signal entries are circular complex normal
/// with independent standard-normal real and imaginary parts. Supports are
/// `k` indices drawn uniformly without replacement per column. Amplitudes are
/// `exp(σ η)` with `η ~ N(0, 1)`; phases are uniform on `[0, 2π·pc)`.
pub fn generate_instance(cfg: &GeneratorConfig) -> Result<ProblemInstance> {
    cfg.validate()?;
    let (n, m, l, k) = (cfg.n, cfg.m, cfg.l, cfg.k);

    let mut rng = stream_rng(cfg.seed, Stream::Sensing);
    let mut sensing = ComplexMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            sensing.set(i, j, complex_normal(&mut rng));
        }
    }

    let mut support_rng = stream_rng(cfg.seed, Stream::Supports);
    let mut value_rng = stream_rng(cfg.seed, Stream::SignalValues);
    let mut signals = ComplexMatrix::zeros(n, l);
    for col in 0..l {
        let mut support = rand::seq::index::sample(&mut support_rng, n, k).into_vec();
        support.sort_unstable();
        for idx in support {
            signals.set(idx, col, complex_normal(&mut value_rng));
        }
    }

    let mut amp_rng = stream_rng(cfg.seed, Stream::Amplitudes);
    let d = (0..m)
        .map(|_| {
            let eta: f64 = amp_rng.sample(StandardNormal);
            (cfg.sigma * eta).exp()
        })
        .collect();
    let mut phase_rng = stream_rng(cfg.seed, Stream::Phases);
    let theta = (0..m)
        .map(|_| 2.0 * PI * cfg.pc * phase_rng.random::<f64>())
        .collect();
    let gains = GainVector { d, theta };

    let measurements = measure(&sensing, &signals, &gains)?;
    Ok(ProblemInstance {
        config: cfg.clone(),
        sensing,
        signals,
        gains,
        measurements,
    })
}

/// `y_{i,ℓ} = d_i e^{jθ_i} (row i of sensing) · x_ℓ`.
pub fn measure(sensing: &ComplexMatrix, signals: &ComplexMatrix, gains: &GainVector) -> Result<ComplexMatrix> {
    if sensing.cols() != signals.rows() {
        return Err(Error::Dimension(format!(
            "sensing is {}x{} but signals have {} rows",
            sensing.rows(),
            sensing.cols(),
            signals.rows()
        )));
    }
    if gains.len() != sensing.rows() || gains.theta.len() != gains.len() {
        return Err(Error::Dimension(format!(
            "{} gains for {} sensors",
            gains.len(),
            sensing.rows()
        )));
    }
    let mut y = sensing.matmul(signals)?;
    for (i, g) in gains.complex().into_iter().enumerate() {
        for col in 0..y.cols() {
            y.set(i, col, y.get(i, col) * g);
        }
    }
    Ok(y)
}

impl ProblemInstance {
    /// Checks shapes, sparsity, gain validity and that the stored measurements
    /// reproduce `measure(sensing, signals, gains)` to `1e-12` relative.
    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        c.validate()?;
        let shape = |name: &str, mat: &ComplexMatrix, r: usize, co: usize| {
            if mat.rows() != r || mat.cols() != co {
                Err(Error::Instance(format!(
                    "{name} is {}x{}, expected {r}x{co}",
                    mat.rows(),
                    mat.cols()
                )))
            } else {
                Ok(())
            }
        };
        shape("sensing", &self.sensing, c.m, c.n)?;
        shape("signals", &self.signals, c.n, c.l)?;
        shape("measurements", &self.measurements, c.m, c.l)?;
        self.gains.validate()?;
        if self.gains.len() != c.m {
            return Err(Error::Instance(format!("{} gains for m={}", self.gains.len(), c.m)));
        }
        for col in 0..c.l {
            let nnz = self.signals.column(col).iter().filter(|z| z.norm() != 0.0).count();
            if nnz != c.k {
                return Err(Error::Instance(format!(
                    "signal {col} has {nnz} non-zeros, expected k={}",
                    c.k
                )));
            }
        }
        let y = measure(&self.sensing, &self.signals, &self.gains)?;
        let err = y.sub(&self.measurements)?.frobenius_norm();
        let scale = self.measurements.frobenius_norm().max(f64::MIN_POSITIVE);
        if err > 1e-12 * scale {
            return Err(Error::Instance(format!(
                "measurements violate the gain model (relative error {:.3e})",
                err / scale
            )));
        }
        Ok(())
    }
}
