use super::{Acceptance, Trace};
use crate::error::{CdfError, Result};
use crate::numeric::compensated_sum;

const MIN_ESS_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ess {
    pub value: f64,
    /// The column is constant, so autocorrelations are undefined.
    pub degenerate: bool,
}

/// Effective sample size by Geyer's initial positive sequence: the
/// autocorrelations are summed in adjacent pairs up to the first pair whose
/// sum is not positive. The result lies in `(0, N]`.
pub fn ess(column: &[f64]) -> Result<Ess> {
    let n = column.len();
    if n < MIN_ESS_LEN {
        return Err(CdfError::Argument(format!(
            "effective sample size needs at least {MIN_ESS_LEN} draws, got {n}"
        )));
    }
    if let Some(x) = column.iter().find(|x| !x.is_finite()) {
        return Err(CdfError::Argument(format!("column contains {x}")));
    }
    let nf = n as f64;
    let mean = column.iter().sum::<f64>() / nf;
    let centered: Vec<f64> = column.iter().map(|x| x - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / nf
    };
    let gamma0 = autocov(0);
    if gamma0 <= 0.0 || column.iter().all(|&x| x == column[0]) {
        return Ok(Ess {
            value: nf,
            degenerate: true,
        });
    }
    // tau = -1 + 2 * sum_k (rho_{2k} + rho_{2k+1})
    let mut tau = -1.0;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (autocov(2 * k) + autocov(2 * k + 1)) / gamma0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 1;
    }
    let value = if tau > 0.0 { (nf / tau).min(nf) } else { nf };
    Ok(Ess {
        value,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    /// Factor carrying this parameter.
    pub factor: usize,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
    /// `None` when the trace is too short to estimate it.
    pub ess: Option<Ess>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: usize,
    pub params: Vec<ParamSummary>,
    pub acceptance: Acceptance,
}

/// Quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Posterior summaries of every parameter column over the kept rows.
pub fn summarize(trace: &Trace) -> Result<Summary> {
    if trace.is_empty() {
        return Err(CdfError::Argument("cannot summarize an empty trace".into()));
    }
    let n = trace.len();
    let params = trace
        .meta
        .factors
        .iter()
        .enumerate()
        .map(|(k, &factor)| {
            let col = trace.column(k);
            let mut sorted = col.clone();
            sorted.sort_by(f64::total_cmp);
            let (mean, sd) = if sorted[0] == sorted[n - 1] {
                (sorted[0], 0.0)
            } else {
                let mean = compensated_sum(col.iter().copied()) / n as f64;
                let ss = compensated_sum(col.iter().map(|x| (x - mean).powi(2)));
                (mean, (ss / (n - 1) as f64).sqrt())
            };
            Ok(ParamSummary {
                factor,
                mean,
                sd,
                q025: quantile(&sorted, 0.025),
                q50: quantile(&sorted, 0.5),
                q975: quantile(&sorted, 0.975),
                ess: if n >= MIN_ESS_LEN { Some(ess(&col)?) } else { None },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Summary {
        rows: n,
        params,
        acceptance: trace.acceptance.clone(),
    })
}
