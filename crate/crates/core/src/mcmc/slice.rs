//! Univariate slice sampling with stepping out and shrinkage.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{CdfError, Result};

/// Intervals narrower than this end the shrinkage loop without a move.
const COLLAPSE_WIDTH: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceOutcome {
    pub x: f64,
    /// Log density at `x`.
    pub log_density: f64,
    pub evaluations: u64,
    /// The bracket shrank to nothing and `x` is the starting point.
    pub collapsed: bool,
}

/// One slice-sampling update of `x0` under the unnormalized log density `f`.
/// `f` may return `-inf` outside the support; NaN is an error.
pub fn slice_sample<F, R>(mut f: F, x0: f64, w: f64, max_stepouts: usize, rng: &mut R) -> Result<SliceOutcome>
where
    F: FnMut(f64) -> f64,
    R: Rng + ?Sized,
{
    let f0 = f(x0);
    if !f0.is_finite() {
        return Err(CdfError::Argument(format!(
            "log density at the starting point {x0} is {f0}"
        )));
    }
    let mut out = slice_from(f, x0, f0, w, max_stepouts, rng)?;
    out.evaluations += 1;
    Ok(out)
}

/// Same as [`slice_sample`] with the log density at `x0` already known.
pub(crate) fn slice_from<F, R>(
    mut f: F,
    x0: f64,
    f0: f64,
    w: f64,
    max_stepouts: usize,
    rng: &mut R,
) -> Result<SliceOutcome>
where
    F: FnMut(f64) -> f64,
    R: Rng + ?Sized,
{
    let mut evaluations = 0u64;
    let mut eval = |x: f64| -> Result<f64> {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            return Err(CdfError::Sampler(format!("log density is NaN at {x}")));
        }
        Ok(v)
    };
    let e: f64 = Exp1.sample(rng);
    let level = f0 - e;

    let mut lo = x0 - w * rng.random::<f64>();
    let mut hi = lo + w;
    let mut left = (max_stepouts as f64 * rng.random::<f64>()).floor() as usize;
    let mut right = max_stepouts.saturating_sub(1).saturating_sub(left);
    while left > 0 && eval(lo)? > level {
        lo -= w;
        left -= 1;
    }
    while right > 0 && eval(hi)? > level {
        hi += w;
        right -= 1;
    }

    loop {
        let x1 = lo + rng.random::<f64>() * (hi - lo);
        let f1 = eval(x1)?;
        if f1 > level {
            return Ok(SliceOutcome {
                x: x1,
                log_density: f1,
                evaluations,
                collapsed: false,
            });
        }
        if x1 < x0 {
            lo = x1;
        } else {
            hi = x1;
        }
        if hi - lo < COLLAPSE_WIDTH {
            return Ok(SliceOutcome {
                x: x0,
                log_density: f0,
                evaluations,
                collapsed: true,
            });
        }
    }
}
