//! Posterior sampling for the Clayton parameters of a model.
//!
//! Three samplers share one driver loop and differ in what they keep around:
//!
//! * [`run_collapsed`] updates each `log theta_j` against the exact
//!   log-likelihood, with every indicator summed out.
//! * [`run_discrete_latent`] keeps one indicator vector per data point and
//!   alternates Gibbs sweeps over the indicators with parameter updates.
//! * [`run_continuous_latent`] keeps one Gamma latent per factor and data
//!   point, updated by random-walk Metropolis on the log scale.
//!
//! Parameters are always updated by univariate slice sampling on `log theta`,
//! one factor at a time in ascending order.

mod diagnostics;
mod samplers;
mod slice;

use std::fmt;

use crate::copula::{THETA_MAX, THETA_MIN};
use crate::error::{CdfError, Result};
use crate::numeric::gamma_log_pdf;

pub use diagnostics::{ess, summarize, Ess, ParamSummary, Summary};
pub use samplers::{run_collapsed, run_continuous_latent, run_discrete_latent};
pub use slice::{slice_sample, SliceOutcome};

/// Independent `Gamma(shape, rate)` prior on every Clayton parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prior {
    shape: f64,
    rate: f64,
}

impl Default for Prior {
    fn default() -> Self {
        Prior { shape: 2.0, rate: 2.0 }
    }
}

impl Prior {
    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
            return Err(CdfError::Parameter(format!(
                "prior needs positive shape and rate, got ({shape}, {rate})"
            )));
        }
        Ok(Prior { shape, rate })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn log_density(&self, theta: f64) -> f64 {
        gamma_log_pdf(theta, self.shape, self.rate)
    }

    /// Log prior of `eta = log theta`, including the Jacobian; `-inf` outside
    /// the admissible parameter range.
    pub fn log_density_log_scale(&self, eta: f64) -> f64 {
        let theta = eta.exp();
        if !(THETA_MIN..=THETA_MAX).contains(&theta) {
            return f64::NEG_INFINITY;
        }
        self.log_density(theta) + eta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Collapsed,
    DiscreteLatent,
    ContinuousLatent,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Collapsed => "collapsed",
            SamplerKind::DiscreteLatent => "discrete",
            SamplerKind::ContinuousLatent => "continuous",
        }
    }

    /// What the trace's `log_post` column measures for this sampler.
    pub fn target(self) -> &'static str {
        match self {
            SamplerKind::Collapsed => "marginal log posterior",
            SamplerKind::DiscreteLatent | SamplerKind::ContinuousLatent => "augmented log posterior",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Recorded in the trace metadata; the samplers draw from the RNG they are given.
    pub seed: u64,
    /// Initial slice width on the `log theta` scale.
    pub slice_width: f64,
    pub max_stepouts: usize,
    /// Standard deviation of the random-walk proposal on `log h`.
    pub rw_std: f64,
    /// Largest induced width the collapsed sampler accepts.
    pub treewidth_cap: usize,
}

impl SamplerConfig {
    /// Defaults with burn-in at 20% of `iterations`.
    pub fn new(iterations: usize, seed: u64) -> Self {
        SamplerConfig {
            iterations,
            burn_in: iterations / 5,
            thinning: 1,
            seed,
            slice_width: 1.0,
            max_stepouts: 50,
            rw_std: 0.5,
            treewidth_cap: crate::likelihood::DEFAULT_TREEWIDTH_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 && self.burn_in != 0 {
            return Err(CdfError::Argument(
                "burn-in must be 0 when there are no iterations".into(),
            ));
        }
        if self.iterations > 0 && self.burn_in >= self.iterations {
            return Err(CdfError::Argument(format!(
                "burn-in {} must be below the iteration count {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thinning == 0 {
            return Err(CdfError::Argument("thinning must be at least 1".into()));
        }
        if !(self.slice_width > 0.0 && self.slice_width.is_finite()) {
            return Err(CdfError::Argument(format!(
                "slice width {} must be positive",
                self.slice_width
            )));
        }
        if !(self.rw_std > 0.0 && self.rw_std.is_finite()) {
            return Err(CdfError::Argument(format!(
                "random-walk std {} must be positive",
                self.rw_std
            )));
        }
        if self.treewidth_cap > crate::likelihood::MAX_TREEWIDTH_CAP {
            return Err(CdfError::Argument(format!(
                "treewidth cap {} exceeds {}",
                self.treewidth_cap,
                crate::likelihood::MAX_TREEWIDTH_CAP
            )));
        }
        Ok(())
    }

    /// Number of rows a complete run keeps.
    pub fn kept_rows(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thinning)
    }

    fn keeps(&self, iteration: usize) -> bool {
        iteration >= self.burn_in && (iteration - self.burn_in).is_multiple_of(self.thinning)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub sampler: SamplerKind,
    pub config: SamplerConfig,
    pub prior: Prior,
    pub model_hash: String,
    /// Factor index of each trace column.
    pub factors: Vec<usize>,
}

/// Per-parameter and per-latent-column update statistics, counted over all
/// iterations including burn-in.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Acceptance {
    /// Log-density evaluations spent by slice updates of each parameter.
    pub slice_evaluations: Vec<u64>,
    /// Slice updates of each parameter whose bracket shrank to nothing.
    pub slice_collapses: Vec<u64>,
    /// Random-walk proposals and acceptances for each factor's latents
    /// (continuous-latent sampler only).
    pub rw_proposed: Vec<u64>,
    pub rw_accepted: Vec<u64>,
}

impl Acceptance {
    fn new(params: usize, latent_columns: usize) -> Self {
        Acceptance {
            slice_evaluations: vec![0; params],
            slice_collapses: vec![0; params],
            rw_proposed: vec![0; latent_columns],
            rw_accepted: vec![0; latent_columns],
        }
    }

    pub fn rw_rates(&self) -> Vec<f64> {
        self.rw_proposed
            .iter()
            .zip(&self.rw_accepted)
            .map(|(&p, &a)| if p == 0 { f64::NAN } else { a as f64 / p as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    /// One-based iteration number of each kept row.
    pub iterations: Vec<usize>,
    /// Parameters of the Clayton factors at each kept row.
    pub thetas: Vec<Vec<f64>>,
    /// Log posterior density on the `theta` scale at each kept row; see
    /// [`SamplerKind::target`].
    pub log_post: Vec<f64>,
    pub acceptance: Acceptance,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.thetas.iter().map(|r| r[k]).collect()
    }
}

/// A sampler failure, with whatever had been recorded before it.
#[derive(Debug)]
pub struct RunError {
    pub error: CdfError,
    /// Kept rows up to the failure; `None` when the run never started.
    pub partial: Option<Box<Trace>>,
    /// One-based iteration in which the failure happened.
    pub iteration: Option<usize>,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.iteration {
            Some(t) => write!(f, "sampler stopped in iteration {t}: {}", self.error),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for RunError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<CdfError> for RunError {
    fn from(error: CdfError) -> Self {
        RunError {
            error,
            partial: None,
            iteration: None,
        }
    }
}
