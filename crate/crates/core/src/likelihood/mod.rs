//! Exact density of a distribution field.
//!
//! Differentiating the product once in every coordinate distributes each
//! derivative `d/du_i` onto exactly one factor containing `i`. Writing `z_i`
//! for that factor,
//!
//! ```text
//! c(u) = sum_z prod_j phi_j(u, z),
//! phi_j(u, z) = d^|S| C_j(u^a_j) / d u_S,   S = { i : z_i = j },
//! ```
//!
//! which is an ordinary sum-product over discrete variables `z_i in Z_i`.
//! [`log_density_brute_force`] enumerates every `z`; [`log_density_ve`] sums
//! them out by variable elimination in log space.

mod order;
mod plan;
mod terms;

use rayon::prelude::*;

use crate::error::{CdfError, Result};
use crate::model::CdnModel;
use crate::numeric::log_sum_exp;

pub use order::{bidirected_width, min_fill_order, EliminationOrder};
pub use plan::{EliminationPlan, Workspace, DEFAULT_TREEWIDTH_CAP, MAX_TREEWIDTH_CAP};

pub(crate) use terms::log_phi_full;

/// Default limit on `prod_i |Z_i|` for the enumeration oracle.
pub const DEFAULT_ORACLE_CAP: u128 = 10_000_000;

const PARALLEL_ROWS: usize = 256;

/// Writes `ln u` into `out`, rejecting points outside `(0, 1]^p`.
pub(crate) fn ln_interior(u: &[f64], out: &mut Vec<f64>) -> Result<()> {
    out.clear();
    for &x in u {
        if !(x > 0.0 && x <= 1.0) {
            return Err(CdfError::Domain(format!(
                "density needs coordinates in (0, 1], got {x}"
            )));
        }
        out.push(x.ln());
    }
    Ok(())
}

fn check_len(model: &CdnModel, u: &[f64]) -> Result<()> {
    if u.len() != model.p() {
        return Err(CdfError::Argument(format!(
            "expected {} coordinates, got {}",
            model.p(),
            u.len()
        )));
    }
    Ok(())
}

/// `log phi_j(u, z)`, where `z_scope[k]` is the indicator of the `k`-th
/// variable in the scope of factor `j`.
pub fn log_phi(model: &CdnModel, j: usize, u: &[f64], z_scope: &[usize]) -> Result<f64> {
    check_len(model, u)?;
    if j >= model.num_factors() {
        return Err(CdfError::Argument(format!("no factor {j}")));
    }
    let f = model.factor(j);
    if z_scope.len() != f.scope().len() {
        return Err(CdfError::Argument(format!(
            "factor {j} has {} variables, got {} indicators",
            f.scope().len(),
            z_scope.len()
        )));
    }
    let mut z = vec![usize::MAX; model.p()];
    for (&i, &zi) in f.scope().iter().zip(z_scope) {
        if !model.z_domains().domain(i).contains(&zi) {
            return Err(CdfError::Argument(format!(
                "indicator {zi} is not a factor of variable {i}"
            )));
        }
        z[i] = zi;
    }
    let mut ln_u = vec![0.0; model.p()];
    for &i in f.scope() {
        let x = u[i];
        if !(0.0..=1.0).contains(&x) {
            return Err(CdfError::Argument(format!("coordinate {x} outside [0, 1]")));
        }
        if x == 0.0 {
            if z[i] == j {
                return Err(CdfError::Domain(format!(
                    "derivative in variable {i} is unbounded at 0"
                )));
            }
            return Ok(f64::NEG_INFINITY);
        }
        ln_u[i] = x.ln();
    }
    Ok(log_phi_full(f, j, &ln_u, &z, &mut Vec::new()))
}

pub fn phi(model: &CdnModel, j: usize, u: &[f64], z_scope: &[usize]) -> Result<f64> {
    log_phi(model, j, u, z_scope).map(f64::exp)
}

/// Log density by enumerating all of `Z_1 x ... x Z_p`.
pub fn log_density_brute_force(model: &CdnModel, u: &[f64]) -> Result<f64> {
    log_density_brute_force_capped(model, u, DEFAULT_ORACLE_CAP)
}

pub fn log_density_brute_force_capped(model: &CdnModel, u: &[f64], cap: u128) -> Result<f64> {
    check_len(model, u)?;
    let z = model.z_domains();
    let size = z.size();
    if size > cap {
        return Err(CdfError::OracleTooLarge { size, cap });
    }
    let mut ln_u = Vec::new();
    ln_interior(u, &mut ln_u)?;
    let p = model.p();
    let mut idx = vec![0usize; p];
    let mut assignment: Vec<usize> = (0..p).map(|i| z.domain(i)[0]).collect();
    let mut scratch = Vec::new();
    // streaming log-sum-exp
    let mut max = f64::NEG_INFINITY;
    let mut acc = 0.0;
    loop {
        let term: f64 = model
            .factors()
            .iter()
            .enumerate()
            .map(|(j, f)| log_phi_full(f, j, &ln_u, &assignment, &mut scratch))
            .sum();
        if term > max {
            acc = acc * (max - term).exp() + 1.0;
            max = term;
        } else if term > f64::NEG_INFINITY {
            acc += (term - max).exp();
        }
        let mut ax = p;
        loop {
            if ax == 0 {
                return Ok(if max == f64::NEG_INFINITY { max } else { max + acc.ln() });
            }
            ax -= 1;
            idx[ax] += 1;
            if idx[ax] < z.domain(ax).len() {
                assignment[ax] = z.domain(ax)[idx[ax]];
                break;
            }
            idx[ax] = 0;
            assignment[ax] = z.domain(ax)[0];
        }
    }
}

pub fn density_brute_force(model: &CdnModel, u: &[f64]) -> Result<f64> {
    log_density_brute_force(model, u).map(f64::exp)
}

/// Log density by variable elimination along `order`.
pub fn log_density_ve(model: &CdnModel, u: &[f64], order: &EliminationOrder) -> Result<f64> {
    check_len(model, u)?;
    let plan = EliminationPlan::new(model, order, DEFAULT_TREEWIDTH_CAP)?;
    plan.log_density(model, u, &mut Workspace::new())
}

pub fn density_ve(model: &CdnModel, u: &[f64], order: &EliminationOrder) -> Result<f64> {
    log_density_ve(model, u, order).map(f64::exp)
}

/// Per-row log densities with a precompiled plan. Rows are independent and
/// evaluated in parallel for large inputs; the result order is the row order.
pub fn row_log_densities(model: &CdnModel, plan: &EliminationPlan, data: &[Vec<f64>]) -> Result<Vec<f64>> {
    let eval = |ws: &mut Workspace, (d, row): (usize, &Vec<f64>)| {
        check_len(model, row)
            .and_then(|_| plan.log_density(model, row, ws))
            .map_err(|e| e.at_row(d))
    };
    if data.len() >= PARALLEL_ROWS {
        data.par_iter().enumerate().map_init(Workspace::new, eval).collect()
    } else {
        let mut ws = Workspace::new();
        data.iter().enumerate().map(|r| eval(&mut ws, r)).collect()
    }
}

/// Sum of row log densities using a plan; summation follows row order, so
/// the result does not depend on thread scheduling.
pub fn loglik_with_plan(model: &CdnModel, plan: &EliminationPlan, data: &[Vec<f64>]) -> Result<f64> {
    Ok(row_log_densities(model, plan, data)?.iter().sum())
}

/// Log-likelihood of `data` with a min-fill order and the default width cap.
pub fn loglik(model: &CdnModel, data: &[Vec<f64>]) -> Result<f64> {
    loglik_with_cap(model, data, DEFAULT_TREEWIDTH_CAP)
}

pub fn loglik_with_cap(model: &CdnModel, data: &[Vec<f64>], treewidth_cap: usize) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let order = min_fill_order(model);
    let plan = EliminationPlan::new(model, &order, treewidth_cap)?;
    loglik_with_plan(model, &plan, data)
}

/// Unnormalized log weights of `z_i = j` for each `j` in `Z_i`, holding the
/// other indicators at `z`. Only the factors containing `i` are evaluated.
pub fn gibbs_local_log_weights(model: &CdnModel, u: &[f64], z: &[usize], i: usize) -> Result<Vec<f64>> {
    check_len(model, u)?;
    check_indicators(model, z)?;
    if i >= model.p() {
        return Err(CdfError::Argument(format!("no variable {i}")));
    }
    let mut ln_u = Vec::new();
    ln_interior(u, &mut ln_u)?;
    let mut zz = z.to_vec();
    let mut scratch = Vec::new();
    Ok(local_log_weights(model, &ln_u, &mut zz, i, &mut scratch))
}

pub(crate) fn check_indicators(model: &CdnModel, z: &[usize]) -> Result<()> {
    if z.len() != model.p() {
        return Err(CdfError::Argument(format!(
            "expected {} indicators, got {}",
            model.p(),
            z.len()
        )));
    }
    for (i, &zi) in z.iter().enumerate() {
        if !model.z_domains().domain(i).contains(&zi) {
            return Err(CdfError::Argument(format!(
                "indicator {zi} is not a factor of variable {i}"
            )));
        }
    }
    Ok(())
}

pub(crate) fn local_log_weights(
    model: &CdnModel,
    ln_u: &[f64],
    z: &mut [usize],
    i: usize,
    scratch: &mut Vec<f64>,
) -> Vec<f64> {
    let domain = model.z_domains().domain(i);
    let original = z[i];
    let weights = domain
        .iter()
        .map(|&cand| {
            z[i] = cand;
            domain
                .iter()
                .map(|&j| log_phi_full(model.factor(j), j, ln_u, z, scratch))
                .sum()
        })
        .collect();
    z[i] = original;
    weights
}

/// Normalizes log weights into probabilities.
pub(crate) fn normalize_log_weights(log_w: &[f64], variable: usize) -> Result<Vec<f64>> {
    let total = log_sum_exp(log_w);
    if !total.is_finite() {
        return Err(CdfError::DegenerateConditional { variable });
    }
    Ok(log_w.iter().map(|w| (w - total).exp()).collect())
}

/// Conditional distribution of `z_i` over `Z_i` given the other indicators.
pub fn gibbs_local_weights(model: &CdnModel, u: &[f64], z: &[usize], i: usize) -> Result<Vec<f64>> {
    let lw = gibbs_local_log_weights(model, u, z, i)?;
    normalize_log_weights(&lw, i)
}

#[cfg(test)]
mod tests;
