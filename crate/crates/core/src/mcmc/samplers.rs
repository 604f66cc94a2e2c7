use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use super::slice::slice_sample;
use super::{Acceptance, Prior, RunError, SamplerConfig, SamplerKind, Trace, TraceMeta};
use crate::error::{CdfError, Result};
use crate::latent::{
    augmented_loglik_continuous, clayton_thetas, factor_block_logdensity, sample_latents, LatentState,
};
use crate::likelihood::{
    check_indicators, ln_interior, local_log_weights, log_phi_full, loglik_with_plan, min_fill_order,
    normalize_log_weights, EliminationPlan,
};
use crate::model::CdnModel;

/// What a sampler keeps beyond the parameters.
trait Target {
    /// Refreshes auxiliary variables given the current parameters.
    fn update_latents<R: Rng + ?Sized>(&mut self, model: &CdnModel, rng: &mut R, acc: &mut Acceptance) -> Result<()>;

    /// Log-likelihood terms that depend on the parameter of factor `j`.
    fn factor_loglik(&mut self, model: &CdnModel, j: usize) -> Result<f64>;

    /// Full (possibly augmented) log-likelihood.
    fn loglik(&mut self, model: &CdnModel) -> Result<f64>;
}

fn log_data(model: &CdnModel, data: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    data.iter()
        .enumerate()
        .map(|(d, row)| {
            if row.len() != model.p() {
                return Err(
                    CdfError::Argument(format!("row has {} values, expected {}", row.len(), model.p())).at_row(d),
                );
            }
            let mut ln_u = Vec::with_capacity(row.len());
            ln_interior(row, &mut ln_u).map_err(|e| e.at_row(d))?;
            Ok(ln_u)
        })
        .collect()
}

struct Collapsed<'a> {
    plan: EliminationPlan,
    data: &'a [Vec<f64>],
}

impl Target for Collapsed<'_> {
    fn update_latents<R: Rng + ?Sized>(&mut self, _: &CdnModel, _: &mut R, _: &mut Acceptance) -> Result<()> {
        Ok(())
    }

    fn factor_loglik(&mut self, model: &CdnModel, _: usize) -> Result<f64> {
        self.loglik(model)
    }

    fn loglik(&mut self, model: &CdnModel) -> Result<f64> {
        loglik_with_plan(model, &self.plan, self.data)
    }
}

struct Discrete {
    ln_u: Vec<Vec<f64>>,
    z: Vec<Vec<usize>>,
    scratch: Vec<f64>,
}

impl Target for Discrete {
    fn update_latents<R: Rng + ?Sized>(&mut self, model: &CdnModel, rng: &mut R, _: &mut Acceptance) -> Result<()> {
        for i in 0..model.p() {
            let domain = model.z_domains().domain(i);
            if domain.len() == 1 {
                continue;
            }
            for (d, (ln_u, z)) in self.ln_u.iter().zip(self.z.iter_mut()).enumerate() {
                let lw = local_log_weights(model, ln_u, z, i, &mut self.scratch);
                let probs = normalize_log_weights(&lw, i).map_err(|e| e.at_row(d))?;
                let r: f64 = rng.random();
                let mut cum = 0.0;
                let mut pick = domain.len() - 1;
                for (k, p) in probs.iter().enumerate() {
                    cum += p;
                    if r < cum {
                        pick = k;
                        break;
                    }
                }
                z[i] = domain[pick];
            }
        }
        Ok(())
    }

    fn factor_loglik(&mut self, model: &CdnModel, j: usize) -> Result<f64> {
        let f = model.factor(j);
        Ok(self
            .ln_u
            .iter()
            .zip(&self.z)
            .map(|(ln_u, z)| log_phi_full(f, j, ln_u, z, &mut self.scratch))
            .sum())
    }

    fn loglik(&mut self, model: &CdnModel) -> Result<f64> {
        (0..model.num_factors()).map(|j| self.factor_loglik(model, j)).sum()
    }
}

struct Continuous<'a> {
    data: &'a [Vec<f64>],
    ln_u: Vec<Vec<f64>>,
    h: LatentState,
    thetas: Vec<f64>,
    ln_gamma_shape: Vec<f64>,
    rw_std: f64,
    scratch: Vec<f64>,
    rates: Vec<(f64, f64)>,
    row: Vec<f64>,
}

impl Continuous<'_> {
    fn sync(&mut self, model: &CdnModel, j: usize) {
        let t = model.factor(j).copula().theta().expect("all factors are Clayton");
        if t != self.thetas[j] {
            self.thetas[j] = t;
            self.ln_gamma_shape[j] = ln_gamma(1.0 / t);
        }
    }

    fn block(&mut self, model: &CdnModel, j: usize, d: usize, h: &[f64]) -> f64 {
        factor_block_logdensity(
            model,
            &self.thetas,
            &self.ln_gamma_shape,
            j,
            &self.ln_u[d],
            h,
            &mut self.scratch,
            &mut self.rates,
        )
    }
}

impl Target for Continuous<'_> {
    fn update_latents<R: Rng + ?Sized>(&mut self, model: &CdnModel, rng: &mut R, acc: &mut Acceptance) -> Result<()> {
        for j in 0..model.num_factors() {
            self.sync(model, j);
            for d in 0..self.h.rows() {
                let mut row = std::mem::take(&mut self.row);
                row.clear();
                row.extend_from_slice(self.h.row(d));
                let current = row[j];
                let before = self.block(model, j, d, &row);
                let step: f64 = StandardNormal.sample(rng);
                let eta = current.ln();
                let proposal = (eta + self.rw_std * step).exp();
                let u: f64 = rng.random();
                acc.rw_proposed[j] += 1;
                if proposal > 0.0 && proposal.is_finite() {
                    row[j] = proposal;
                    let after = self.block(model, j, d, &row);
                    if after.is_nan() || before.is_nan() {
                        return Err(CdfError::Sampler(format!("latent density of factor {j} is NaN")).at_row(d));
                    }
                    let log_ratio = after - before + proposal.ln() - eta;
                    if u.ln() < log_ratio {
                        self.h.set(d, j, proposal);
                        acc.rw_accepted[j] += 1;
                    }
                }
                self.row = row;
            }
        }
        Ok(())
    }

    fn factor_loglik(&mut self, model: &CdnModel, j: usize) -> Result<f64> {
        self.sync(model, j);
        let mut total = 0.0;
        for d in 0..self.h.rows() {
            let mut row = std::mem::take(&mut self.row);
            row.clear();
            row.extend_from_slice(self.h.row(d));
            total += self.block(model, j, d, &row);
            self.row = row;
        }
        Ok(total)
    }

    fn loglik(&mut self, model: &CdnModel) -> Result<f64> {
        augmented_loglik_continuous(model, self.data, &self.h)
    }
}

/// Shared loop: latent refresh, then one slice update per parameter.
fn drive<T: Target, R: Rng + ?Sized>(
    kind: SamplerKind,
    input: &CdnModel,
    prior: &Prior,
    config: &SamplerConfig,
    target: &mut T,
    latent_columns: usize,
    rng: &mut R,
) -> std::result::Result<Trace, RunError> {
    let mut model = input.clone();
    let factors = model.clayton_factors();
    let mut trace = Trace {
        meta: TraceMeta {
            sampler: kind,
            config: config.clone(),
            prior: *prior,
            model_hash: input.canonical_hash(),
            factors: factors.clone(),
        },
        iterations: Vec::with_capacity(config.kept_rows()),
        thetas: Vec::with_capacity(config.kept_rows()),
        log_post: Vec::with_capacity(config.kept_rows()),
        acceptance: Acceptance::new(factors.len(), latent_columns),
    };

    for t in 0..config.iterations {
        if let Err(error) = iterate(&mut model, &factors, prior, config, target, &mut trace, t, rng) {
            return Err(RunError {
                error,
                partial: Some(Box::new(trace)),
                iteration: Some(t + 1),
            });
        }
    }
    Ok(trace)
}

#[allow(clippy::too_many_arguments)]
fn iterate<T: Target, R: Rng + ?Sized>(
    model: &mut CdnModel,
    factors: &[usize],
    prior: &Prior,
    config: &SamplerConfig,
    target: &mut T,
    trace: &mut Trace,
    t: usize,
    rng: &mut R,
) -> Result<()> {
    target.update_latents(model, rng, &mut trace.acceptance)?;
    for (k, &j) in factors.iter().enumerate() {
        let theta0 = model.factor(j).copula().theta().expect("Clayton factor");
        let mut failure = None;
        let outcome = {
            let mut log_post = |eta: f64| -> f64 {
                let lp = prior.log_density_log_scale(eta);
                if lp == f64::NEG_INFINITY || failure.is_some() {
                    return f64::NEG_INFINITY;
                }
                match model
                    .set_theta(j, eta.exp())
                    .and_then(|_| target.factor_loglik(model, j))
                {
                    Ok(ll) => ll + lp,
                    Err(e) => {
                        failure = Some(e);
                        f64::NAN
                    }
                }
            };
            slice_sample(&mut log_post, theta0.ln(), config.slice_width, config.max_stepouts, rng)
        };
        if let Some(e) = failure {
            return Err(e);
        }
        let outcome = outcome?;
        model.set_theta(j, outcome.x.exp())?;
        trace.acceptance.slice_evaluations[k] += outcome.evaluations;
        trace.acceptance.slice_collapses[k] += u64::from(outcome.collapsed);
    }
    if config.keeps(t) {
        let thetas = model.thetas();
        let log_prior: f64 = thetas.iter().map(|&th| prior.log_density(th)).sum();
        let ll = target.loglik(model)?;
        trace.iterations.push(t + 1);
        trace.thetas.push(thetas);
        trace.log_post.push(ll + log_prior);
    }
    Ok(())
}

/// Slice sampling of every `log theta_j` against the exact log-likelihood.
pub fn run_collapsed<R: Rng + ?Sized>(
    model: &CdnModel,
    data: &[Vec<f64>],
    prior: &Prior,
    config: &SamplerConfig,
    rng: &mut R,
) -> std::result::Result<Trace, RunError> {
    config.validate()?;
    log_data(model, data)?;
    let plan = EliminationPlan::new(model, &min_fill_order(model), config.treewidth_cap)?;
    let mut target = Collapsed { plan, data };
    drive(SamplerKind::Collapsed, model, prior, config, &mut target, 0, rng)
}

/// Gibbs sweeps over per-row indicator vectors alternated with slice updates
/// of the parameters against the augmented likelihood. Indicators start at
/// the first factor of each variable.
pub fn run_discrete_latent<R: Rng + ?Sized>(
    model: &CdnModel,
    data: &[Vec<f64>],
    prior: &Prior,
    config: &SamplerConfig,
    rng: &mut R,
) -> std::result::Result<Trace, RunError> {
    config.validate()?;
    let ln_u = log_data(model, data)?;
    let z0: Vec<usize> = (0..model.p()).map(|i| model.z_domains().domain(i)[0]).collect();
    check_indicators(model, &z0)?;
    let mut target = Discrete {
        z: vec![z0; ln_u.len()],
        ln_u,
        scratch: Vec::new(),
    };
    drive(SamplerKind::DiscreteLatent, model, prior, config, &mut target, 0, rng)
}

/// Random-walk Metropolis on every `log h` alternated with slice updates of
/// the parameters against the augmented likelihood. Latents start from
/// their prior given the initial parameters.
pub fn run_continuous_latent<R: Rng + ?Sized>(
    model: &CdnModel,
    data: &[Vec<f64>],
    prior: &Prior,
    config: &SamplerConfig,
    rng: &mut R,
) -> std::result::Result<Trace, RunError> {
    config.validate()?;
    let thetas = clayton_thetas(model, "run_continuous_latent")?;
    let ln_u = log_data(model, data)?;
    let h = sample_latents(model, data.len(), rng)?;
    let mut target = Continuous {
        data,
        ln_u,
        h,
        ln_gamma_shape: thetas.iter().map(|t| ln_gamma(1.0 / t)).collect(),
        thetas,
        rw_std: config.rw_std,
        scratch: Vec::new(),
        rates: Vec::new(),
        row: Vec::new(),
    };
    let k = model.num_factors();
    drive(SamplerKind::ContinuousLatent, model, prior, config, &mut target, k, rng)
}
