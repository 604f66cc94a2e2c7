//! Copula families used as factors of a distribution field.
//!
//! Every factor is exchangeable, so a mixed partial derivative only depends on
//! the point `v` and on *how many* and *which* coordinates are differentiated.
//! For the Clayton family with `S_v = sum_i v_i^-theta - k + 1`,
//!
//! ```text
//! C(v)               = S_v^(-1/theta)
//! d^m C / d v_S      = prod_{l<m} (1 + l theta) * S_v^(-1/theta - m) * prod_{i in S} v_i^(-theta-1)
//! ```
//!
//! All derivative work happens on the log scale; `S_v` is accumulated as
//! `1 + sum_i expm1(-theta ln v_i)` so no cancellation occurs near the upper
//! corner, and through a max-shift when the terms overflow.

use crate::error::{CdfError, Result};
use crate::numeric::compensated_sum;

/// Smallest Clayton parameter accepted.
pub const THETA_MIN: f64 = 1e-4;
/// Largest Clayton parameter accepted.
pub const THETA_MAX: f64 = 50.0;
/// Arguments below this value are raised to it in derivative evaluations.
pub const DERIVATIVE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Clayton { theta: f64 },
    Independence,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Clayton { .. } => "clayton",
            Family::Independence => "independence",
        }
    }
}

/// One factor `C_j` of the product, with its arity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopulaFactor {
    family: Family,
    arity: usize,
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if !(THETA_MIN..=THETA_MAX).contains(&theta) {
        return Err(CdfError::Parameter(format!(
            "clayton theta {theta} outside [{THETA_MIN}, {THETA_MAX}]"
        )));
    }
    Ok(())
}

impl CopulaFactor {
    pub fn clayton(theta: f64, arity: usize) -> Result<Self> {
        check_theta(theta)?;
        Self::new(Family::Clayton { theta }, arity)
    }

    pub fn independence(arity: usize) -> Result<Self> {
        Self::new(Family::Independence, arity)
    }

    pub fn new(family: Family, arity: usize) -> Result<Self> {
        if arity == 0 {
            return Err(CdfError::Argument("factor arity must be at least 1".into()));
        }
        if let Family::Clayton { theta } = family {
            check_theta(theta)?;
        }
        Ok(CopulaFactor { family, arity })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// The Clayton parameter, `None` for independence.
    pub fn theta(&self) -> Option<f64> {
        match self.family {
            Family::Clayton { theta } => Some(theta),
            Family::Independence => None,
        }
    }

    pub fn is_clayton(&self) -> bool {
        matches!(self.family, Family::Clayton { .. })
    }

    /// Replaces the Clayton parameter. Fails on independence factors.
    pub fn set_theta(&mut self, theta: f64) -> Result<()> {
        check_theta(theta)?;
        match &mut self.family {
            Family::Clayton { theta: t } => {
                *t = theta;
                Ok(())
            }
            Family::Independence => Err(CdfError::Parameter("independence factors have no parameter".into())),
        }
    }

    fn check_point(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.arity {
            return Err(CdfError::Argument(format!(
                "expected {} arguments, got {}",
                self.arity,
                v.len()
            )));
        }
        if let Some(x) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(CdfError::Argument(format!("argument {x} outside [0, 1]")));
        }
        Ok(())
    }

    fn subset_mask(&self, subset: &[usize]) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.arity];
        for &s in subset {
            if s >= self.arity {
                return Err(CdfError::Argument(format!(
                    "subset index {s} out of range for arity {}",
                    self.arity
                )));
            }
            if mask[s] {
                return Err(CdfError::Argument(format!("subset index {s} repeated")));
            }
            mask[s] = true;
        }
        Ok(mask)
    }

    /// Evaluates the factor CDF at `v`.
    pub fn cdf(&self, v: &[f64]) -> Result<f64> {
        self.check_point(v)?;
        if v.contains(&0.0) {
            return Ok(0.0);
        }
        let ln_v: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        Ok(match self.family {
            Family::Clayton { theta } => (-log_scale_sum(theta, &ln_v) / theta).exp(),
            Family::Independence => v.iter().product(),
        })
    }

    /// Mixed partial derivative with respect to the coordinates in `subset`.
    /// An empty subset gives the CDF.
    pub fn mixed_partial(&self, v: &[f64], subset: &[usize]) -> Result<f64> {
        if subset.is_empty() {
            return self.cdf(v);
        }
        self.log_mixed_partial(v, subset).map(f64::exp)
    }

    /// Logarithm of [`mixed_partial`](Self::mixed_partial), computed without
    /// forming the linear-scale value. Returns `-inf` where the derivative is 0.
    pub fn log_mixed_partial(&self, v: &[f64], subset: &[usize]) -> Result<f64> {
        self.check_point(v)?;
        let mask = self.subset_mask(subset)?;
        let mut ln_v = Vec::with_capacity(self.arity);
        for (i, &x) in v.iter().enumerate() {
            if x == 0.0 {
                if mask[i] {
                    return Err(CdfError::Domain(format!(
                        "derivative in coordinate {i} is unbounded at 0"
                    )));
                }
                return Ok(f64::NEG_INFINITY);
            }
            ln_v.push(x.max(DERIVATIVE_FLOOR).ln());
        }
        let shared = self.shared_term(&ln_v);
        let (m, coords) = mask
            .iter()
            .zip(&ln_v)
            .filter(|(in_s, _)| **in_s)
            .fold((0usize, 0.0), |(m, acc), (_, &lv)| {
                (m + 1, acc + self.coordinate_term(lv))
            });
        Ok(self.log_partial_from(shared, m, coords))
    }

    /// Point-dependent quantity shared by all mixed partials at a point given
    /// by its log arguments: `log S_v` for Clayton, `sum ln v_i` for independence.
    pub(crate) fn shared_term(&self, ln_v: &[f64]) -> f64 {
        match self.family {
            Family::Clayton { theta } => log_scale_sum(theta, ln_v),
            Family::Independence => compensated_sum(ln_v.iter().copied()),
        }
    }

    /// Contribution of one differentiated coordinate with log argument `ln_v`.
    #[inline]
    pub(crate) fn coordinate_term(&self, ln_v: f64) -> f64 {
        match self.family {
            Family::Clayton { theta } => -(theta + 1.0) * ln_v,
            Family::Independence => -ln_v,
        }
    }

    /// Assembles a log mixed partial of order `m` from the shared term and the
    /// summed coordinate terms of the differentiated coordinates.
    #[inline]
    pub(crate) fn log_partial_from(&self, shared: f64, m: usize, coordinate_sum: f64) -> f64 {
        match self.family {
            Family::Clayton { theta } => {
                let rising: f64 = (1..m).map(|l| (l as f64).mul_add(theta, 1.0).ln()).sum();
                rising - (1.0 / theta + m as f64) * shared + coordinate_sum
            }
            Family::Independence => shared + coordinate_sum,
        }
    }
}

/// `log S_v` with `S_v = 1 + sum_i (v_i^-theta - 1)`, given `ln v_i <= 0`.
pub(crate) fn log_scale_sum(theta: f64, ln_v: &[f64]) -> f64 {
    let max = ln_v.iter().map(|&lv| -theta * lv).fold(0.0f64, f64::max);
    if max <= 30.0 {
        let s = compensated_sum(ln_v.iter().map(|&lv| (-theta * lv).exp_m1()));
        s.ln_1p()
    } else {
        let k = ln_v.len() as f64;
        let s = compensated_sum(ln_v.iter().map(|&lv| (-theta * lv - max).exp()));
        max + (s - (k - 1.0) * (-max).exp()).ln()
    }
}
