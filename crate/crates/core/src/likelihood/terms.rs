//! Per-point quantities from which every `phi_j` is assembled.
//!
//! With `v_i = u_i^a_ij`, the log of `phi_j` for differentiated set `S` is
//! `log_partial_from(shared_j, |S|, sum_{i in S} c_ij)`, where `c_ij` folds the
//! copula's coordinate term together with the exponent Jacobian
//! `log(a_ij) + (a_ij - 1) log(u_i)`.

use crate::copula::DERIVATIVE_FLOOR;
use crate::model::{CdnModel, Factor};

#[derive(Debug, Default, Clone)]
pub(crate) struct FactorTerms {
    shared: Vec<f64>,
    offsets: Vec<usize>,
    coords: Vec<f64>,
}

impl FactorTerms {
    pub(crate) fn fill(&mut self, model: &CdnModel, ln_u: &[f64]) {
        self.shared.clear();
        self.offsets.clear();
        self.coords.clear();
        for f in model.factors() {
            let start = self.coords.len();
            self.offsets.push(start);
            self.coords.resize(start + f.scope().len(), 0.0);
            let shared = factor_terms(f, ln_u, &mut self.coords[start..]);
            self.shared.push(shared);
        }
        self.offsets.push(self.coords.len());
    }

    /// `(shared, coordinate terms in scope order)` for factor `j`.
    #[inline]
    pub(crate) fn factor(&self, j: usize) -> (f64, &[f64]) {
        (self.shared[j], &self.coords[self.offsets[j]..self.offsets[j + 1]])
    }
}

/// Writes the coordinate terms of `f` into `coords` and returns its shared term.
pub(crate) fn factor_terms(f: &Factor, ln_u: &[f64], coords: &mut [f64]) -> f64 {
    let floor = DERIVATIVE_FLOOR.ln();
    for ((c, &i), &a) in coords.iter_mut().zip(f.scope()).zip(f.exponents()) {
        *c = (a * ln_u[i]).max(floor);
    }
    let shared = f.copula().shared_term(coords);
    for ((c, &i), &a) in coords.iter_mut().zip(f.scope()).zip(f.exponents()) {
        *c = f.copula().coordinate_term(*c) + a.ln() + (a - 1.0) * ln_u[i];
    }
    shared
}

/// `log phi_j` at a point given by `ln_u`, with `z` the full indicator vector.
pub(crate) fn log_phi_full(f: &Factor, j: usize, ln_u: &[f64], z: &[usize], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.resize(f.scope().len(), 0.0);
    let shared = factor_terms(f, ln_u, scratch);
    let (m, sum) = f
        .scope()
        .iter()
        .zip(scratch.iter())
        .filter(|(&i, _)| z[i] == j)
        .fold((0usize, 0.0), |(m, s), (_, &c)| (m + 1, s + c));
    f.copula().log_partial_from(shared, m, sum)
}
