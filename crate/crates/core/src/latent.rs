//! Gamma-frailty representation of Clayton products.
//!
//! A Clayton factor with parameter `theta` is the law of
//! `U_i = (1 - log(X_i) / H)^(-1/theta)` with `H ~ Gamma(1/theta, 1)` and
//! `X_i` iid uniform. Given one latent `h_j` per factor, variable `i` is
//! conditionally independent of the others with CDF
//!
//! ```text
//! F_i(u | h) = prod_{j in Par(i)} exp(-h_j (u^(-theta_j a_ij) - 1))
//! ```
//!
//! whose derivative is the conditional density used by the continuous-latent
//! sampler. Only Clayton factors have a latent; models with other families
//! are rejected here.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01};

use crate::error::{CdfError, Result};
use crate::model::CdnModel;
use crate::numeric::{gamma_log_pdf, log_sum_exp};

const INVERSION_TOLERANCE: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;

/// Latent values `h[d][j] > 0`, one row per data point and one column per factor.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl LatentState {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(CdfError::Argument("latent rows differ in length".into()));
        }
        let n = rows.len();
        let values = rows.concat();
        if let Some(pos) = values.iter().position(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(CdfError::Parameter(format!(
                "latent ({}, {}) is not positive",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(LatentState { rows: n, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, d: usize) -> &[f64] {
        &self.values[d * self.cols..(d + 1) * self.cols]
    }

    pub fn get(&self, d: usize, j: usize) -> f64 {
        self.values[d * self.cols + j]
    }

    pub(crate) fn set(&mut self, d: usize, j: usize, h: f64) {
        self.values[d * self.cols + j] = h;
    }

    /// Column `j` across all rows.
    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(j).step_by(self.cols.max(1)).copied()
    }
}

/// Clayton parameters of every factor, or an error naming the first
/// factor of another family.
pub(crate) fn clayton_thetas(model: &CdnModel, operation: &'static str) -> Result<Vec<f64>> {
    model
        .factors()
        .iter()
        .enumerate()
        .map(|(j, f)| {
            f.copula().theta().ok_or(CdfError::UnsupportedFamily {
                operation,
                factor: j,
                family: f.copula().family().name(),
            })
        })
        .collect()
}

fn check_latents(model: &CdnModel, i: usize, h_row: &[f64]) -> Result<()> {
    if i >= model.p() {
        return Err(CdfError::Argument(format!("no variable {i}")));
    }
    if h_row.len() != model.num_factors() {
        return Err(CdfError::Argument(format!(
            "expected {} latents, got {}",
            model.num_factors(),
            h_row.len()
        )));
    }
    for &j in model.parents().domain(i) {
        let h = h_row[j];
        if !(h > 0.0 && h.is_finite()) {
            return Err(CdfError::Parameter(format!("latent {j} is {h}, must be positive")));
        }
    }
    Ok(())
}

/// `(theta_j * a_ij, h_j)` for every parent `j` of `i`.
fn parent_rates<'a>(model: &'a CdnModel, i: usize, h_row: &'a [f64]) -> Result<Vec<(f64, f64)>> {
    model
        .parents()
        .domain(i)
        .iter()
        .map(|&j| {
            let theta = model.factor(j).copula().theta().ok_or(CdfError::UnsupportedFamily {
                operation: "conditional distribution",
                factor: j,
                family: model.factor(j).copula().family().name(),
            })?;
            Ok((theta * model.exponent(i, j), h_row[j]))
        })
        .collect()
}

#[inline]
fn log_cdf_from(rates: &[(f64, f64)], ln_u: f64) -> f64 {
    -rates.iter().map(|&(c, h)| h * (-c * ln_u).exp_m1()).sum::<f64>()
}

#[inline]
fn log_pdf_from(rates: &[(f64, f64)], ln_u: f64, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(rates.iter().map(|&(c, h)| (c * h).ln() - (c + 1.0) * ln_u));
    log_cdf_from(rates, ln_u) + log_sum_exp(scratch)
}

pub fn log_conditional_cdf(model: &CdnModel, i: usize, u: f64, h_row: &[f64]) -> Result<f64> {
    check_latents(model, i, h_row)?;
    if !(0.0..=1.0).contains(&u) {
        return Err(CdfError::Argument(format!("u = {u} outside [0, 1]")));
    }
    let rates = parent_rates(model, i, h_row)?;
    if u == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(log_cdf_from(&rates, u.ln()))
}

/// `P(U_i <= u | h)`.
pub fn conditional_cdf(model: &CdnModel, i: usize, u: f64, h_row: &[f64]) -> Result<f64> {
    log_conditional_cdf(model, i, u, h_row).map(f64::exp)
}

pub fn log_conditional_pdf(model: &CdnModel, i: usize, u: f64, h_row: &[f64]) -> Result<f64> {
    check_latents(model, i, h_row)?;
    if !(u > 0.0 && u <= 1.0) {
        return Err(CdfError::Argument(format!("u = {u} outside (0, 1]")));
    }
    let rates = parent_rates(model, i, h_row)?;
    Ok(log_pdf_from(&rates, u.ln(), &mut Vec::new()))
}

/// Density of `U_i` given the latents of its parents.
pub fn conditional_pdf(model: &CdnModel, i: usize, u: f64, h_row: &[f64]) -> Result<f64> {
    log_conditional_pdf(model, i, u, h_row).map(f64::exp)
}

/// Draws `h[d][j] ~ Gamma(1/theta_j, 1)` independently, row by row.
pub fn sample_latents<R: Rng + ?Sized>(model: &CdnModel, n: usize, rng: &mut R) -> Result<LatentState> {
    let gammas = latent_priors(model, "sample_latents")?;
    let k = gammas.len();
    let mut values = Vec::with_capacity(n * k);
    for _ in 0..n {
        values.extend(gammas.iter().map(|g| g.sample(rng).max(f64::MIN_POSITIVE)));
    }
    Ok(LatentState {
        rows: n,
        cols: k,
        values,
    })
}

fn latent_priors(model: &CdnModel, operation: &'static str) -> Result<Vec<Gamma<f64>>> {
    clayton_thetas(model, operation)?
        .into_iter()
        .map(|t| Gamma::new(1.0 / t, 1.0).map_err(|e| CdfError::Parameter(e.to_string())))
        .collect()
}

/// Solves `conditional_cdf(u) = x` for `u`.
pub fn invert_conditional_cdf(model: &CdnModel, i: usize, x: f64, h_row: &[f64]) -> Result<f64> {
    check_latents(model, i, h_row)?;
    if !(x > 0.0 && x < 1.0) {
        return Err(CdfError::Argument(format!("target {x} outside (0, 1)")));
    }
    let rates = parent_rates(model, i, h_row)?;
    if let [(c, h)] = rates[..] {
        return Ok(invert_single(c, h, x));
    }
    bisect(&rates, x)
}

/// `(1 - log(x) / h)^(-1/c)`.
#[inline]
fn invert_single(c: f64, h: f64, x: f64) -> f64 {
    (-(-x.ln() / h).ln_1p() / c).exp()
}

fn bisect(rates: &[(f64, f64)], x: f64) -> Result<f64> {
    let cdf = |u: f64| log_cdf_from(rates, u.ln()).exp();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let f = cdf(mid);
        if f.is_nan() {
            return Err(CdfError::Convergence(format!("conditional CDF is NaN at {mid}")));
        }
        if f < x {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
    }
    let u = 0.5 * (lo + hi);
    if (cdf(u) - x).abs() > INVERSION_TOLERANCE {
        return Err(CdfError::Convergence(format!(
            "bisection for target {x} stopped at {u} with residual {}",
            cdf(u) - x
        )));
    }
    Ok(u)
}

/// Draws `n` rows from the model: latents first, then each coordinate by
/// inverting its conditional CDF at an independent uniform.
pub fn sample_dataset<R: Rng + ?Sized>(model: &CdnModel, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let gammas = latent_priors(model, "sample_dataset")?;
    let p = model.p();
    let thetas = clayton_thetas(model, "sample_dataset")?;
    let rates_of = |i: usize, h: &[f64]| -> Vec<(f64, f64)> {
        model
            .parents()
            .domain(i)
            .iter()
            .map(|&j| (thetas[j] * model.exponent(i, j), h[j]))
            .collect()
    };
    let mut h = vec![0.0; gammas.len()];
    let mut out = Vec::with_capacity(n);
    for d in 0..n {
        for (hj, g) in h.iter_mut().zip(&gammas) {
            *hj = g.sample(rng).max(f64::MIN_POSITIVE);
        }
        let mut row = Vec::with_capacity(p);
        for i in 0..p {
            let x: f64 = Open01.sample(rng);
            let rates = rates_of(i, &h);
            let u = match rates[..] {
                [(c, hj)] => invert_single(c, hj, x),
                _ => bisect(&rates, x).map_err(|e| e.at_row(d))?,
            };
            row.push(u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0));
        }
        out.push(row);
    }
    Ok(out)
}

/// Log joint density of data and latents given the parameters:
/// Gamma log densities of every latent plus the conditional log densities
/// of every coordinate.
pub fn augmented_loglik_continuous(model: &CdnModel, data: &[Vec<f64>], latents: &LatentState) -> Result<f64> {
    let thetas = clayton_thetas(model, "augmented_loglik_continuous")?;
    if latents.rows() != data.len() || (!data.is_empty() && latents.cols() != thetas.len()) {
        return Err(CdfError::Argument(format!(
            "latents are {} x {}, data has {} rows and the model {} factors",
            latents.rows(),
            latents.cols(),
            data.len(),
            thetas.len()
        )));
    }
    let mut total = 0.0;
    let mut scratch = Vec::new();
    for (d, row) in data.iter().enumerate() {
        if row.len() != model.p() {
            return Err(CdfError::Argument(format!("row has {} values", row.len())).at_row(d));
        }
        let h = latents.row(d);
        for (j, (&hj, &t)) in h.iter().zip(&thetas).enumerate() {
            let lp = gamma_log_pdf(hj, 1.0 / t, 1.0);
            if !lp.is_finite() {
                return Err(CdfError::Parameter(format!("latent for factor {j} is {hj}")).at_row(d));
            }
            total += lp;
        }
        for (i, &u) in row.iter().enumerate() {
            if !(u > 0.0 && u <= 1.0) {
                return Err(CdfError::Domain(format!("variable {i} is {u}")).at_row(d));
            }
            let rates: Vec<(f64, f64)> = model
                .parents()
                .domain(i)
                .iter()
                .map(|&j| (thetas[j] * model.exponent(i, j), h[j]))
                .collect();
            total += log_pdf_from(&rates, u.ln(), &mut scratch);
        }
    }
    Ok(total)
}

/// Terms of one data point's augmented log density that involve factor `j`:
/// the Gamma log density of `h[j]` and the conditional log densities of the
/// variables in the scope of `j`. `ln_gamma_shape[j]` is `ln Gamma(1/theta_j)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn factor_block_logdensity(
    model: &CdnModel,
    thetas: &[f64],
    ln_gamma_shape: &[f64],
    j: usize,
    ln_u: &[f64],
    h: &[f64],
    scratch: &mut Vec<f64>,
    rates: &mut Vec<(f64, f64)>,
) -> f64 {
    let hj = h[j];
    let mut total = (1.0 / thetas[j] - 1.0) * hj.ln() - hj - ln_gamma_shape[j];
    for &i in model.factor(j).scope() {
        rates.clear();
        rates.extend(
            model
                .parents()
                .domain(i)
                .iter()
                .map(|&k| (thetas[k] * model.exponent(i, k), h[k])),
        );
        total += log_pdf_from(rates, ln_u[i], scratch);
    }
    total
}
