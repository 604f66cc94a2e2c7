//! The distribution field itself: a product of copula factors whose
//! arguments are raised to per-variable exponents,
//!
//! ```text
//! C(u_1, ..., u_p) = prod_j C_j(u_1^a_1j, ..., u_p^a_pj),   sum_j a_ij = 1.
//! ```
//!
//! Variables are indexed `0..p`. Each factor has a scope (ascending variable
//! indices) and `a_ij > 0` exactly when variable `i` is in the scope of `j`.

use std::collections::BTreeSet;

use sha2::{Digest, Sha256};

use crate::copula::{CopulaFactor, Family};
use crate::error::{CdfError, Result};
use crate::numeric::compensated_sum;

const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// A factor as handed to [`CdnModel::new`]; the scope may be in any order.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSpec {
    pub family: Family,
    pub scope: Vec<usize>,
}

impl FactorSpec {
    pub fn clayton(theta: f64, scope: impl Into<Vec<usize>>) -> Self {
        FactorSpec {
            family: Family::Clayton { theta },
            scope: scope.into(),
        }
    }

    pub fn independence(scope: impl Into<Vec<usize>>) -> Self {
        FactorSpec {
            family: Family::Independence,
            scope: scope.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Exponents {
    /// `a_ij = 1/|Z_i|` for every factor `j` containing `i`.
    Uniform,
    /// A `p x K` matrix, one row per variable.
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    copula: CopulaFactor,
    scope: Vec<usize>,
    exponents: Vec<f64>,
}

impl Factor {
    pub fn copula(&self) -> &CopulaFactor {
        &self.copula
    }

    /// Variable indices, ascending.
    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    /// `a_ij` for each variable of the scope, in scope order.
    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    pub fn position(&self, variable: usize) -> Option<usize> {
        self.scope.binary_search(&variable).ok()
    }
}

/// For every variable, the ascending list of factors whose scope contains it.
/// These are also the latent parents of the variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZDomain {
    domains: Vec<Vec<usize>>,
}

pub type ParentSets = ZDomain;

impl ZDomain {
    pub fn domain(&self, variable: usize) -> &[usize] {
        &self.domains[variable]
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.domains.iter().map(Vec::as_slice)
    }

    /// Number of joint assignments, `prod_i |Z_i|`.
    pub fn size(&self) -> u128 {
        self.domains
            .iter()
            .map(|d| d.len() as u128)
            .fold(1u128, |acc, n| acc.saturating_mul(n))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdnModel {
    p: usize,
    factors: Vec<Factor>,
    /// Row-major `p x K`.
    exponents: Vec<f64>,
    z: ZDomain,
}

impl CdnModel {
    /// Validates and assembles a model over `p` variables.
    pub fn new(p: usize, specs: Vec<FactorSpec>, exponents: Exponents) -> Result<Self> {
        if p == 0 {
            return Err(CdfError::Validation("model needs at least one variable".into()));
        }
        if specs.is_empty() {
            return Err(CdfError::Validation("model needs at least one factor".into()));
        }
        let k = specs.len();
        let mut scopes = Vec::with_capacity(k);
        let mut empty = Vec::new();
        for (j, spec) in specs.iter().enumerate() {
            let mut scope = spec.scope.clone();
            scope.sort_unstable();
            if scope.is_empty() {
                empty.push(j);
            }
            if let Some(&bad) = scope.iter().find(|&&i| i >= p) {
                return Err(CdfError::Validation(format!(
                    "factor {j} references variable {bad}, but the model has {p} variables"
                )));
            }
            if scope.windows(2).any(|w| w[0] == w[1]) {
                return Err(CdfError::Validation(format!(
                    "factor {j} lists a variable more than once"
                )));
            }
            scopes.push(scope);
        }
        if !empty.is_empty() {
            return Err(CdfError::Validation(format!("empty scope in factors {empty:?}")));
        }

        let mut domains = vec![Vec::new(); p];
        for (j, scope) in scopes.iter().enumerate() {
            for &i in scope {
                domains[i].push(j);
            }
        }
        let orphans: Vec<usize> = (0..p).filter(|&i| domains[i].is_empty()).collect();
        if !orphans.is_empty() {
            return Err(CdfError::Validation(format!(
                "variables {orphans:?} appear in no factor"
            )));
        }

        let matrix = match exponents {
            Exponents::Uniform => {
                let mut m = vec![0.0; p * k];
                for (i, d) in domains.iter().enumerate() {
                    let a = 1.0 / d.len() as f64;
                    for &j in d {
                        m[i * k + j] = a;
                    }
                }
                m
            }
            Exponents::Explicit(rows) => {
                if rows.len() != p || rows.iter().any(|r| r.len() != k) {
                    return Err(CdfError::Validation(format!("exponent matrix must be {p} x {k}")));
                }
                let mut support = Vec::new();
                let mut sums = Vec::new();
                for (i, row) in rows.iter().enumerate() {
                    for (j, &a) in row.iter().enumerate() {
                        let in_scope = scopes[j].binary_search(&i).is_ok();
                        if !a.is_finite() || !(0.0..=1.0).contains(&a) || (a > 0.0) != in_scope {
                            support.push((i, j));
                        }
                    }
                    if (compensated_sum(row.iter().copied()) - 1.0).abs() > ROW_SUM_TOLERANCE {
                        sums.push(i);
                    }
                }
                if !support.is_empty() {
                    return Err(CdfError::Validation(format!(
                        "exponents must be positive exactly on factor scopes; offending (variable, factor) entries {support:?}"
                    )));
                }
                if !sums.is_empty() {
                    return Err(CdfError::Validation(format!("exponent rows {sums:?} do not sum to 1")));
                }
                rows.concat()
            }
        };

        let factors = specs
            .iter()
            .zip(scopes)
            .enumerate()
            .map(|(j, (spec, scope))| {
                let copula = CopulaFactor::new(spec.family, scope.len())?;
                let exponents = scope.iter().map(|&i| matrix[i * k + j]).collect();
                Ok(Factor {
                    copula,
                    scope,
                    exponents,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(CdnModel {
            p,
            factors,
            exponents: matrix,
            z: ZDomain { domains },
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn factor(&self, j: usize) -> &Factor {
        &self.factors[j]
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn exponent(&self, i: usize, j: usize) -> f64 {
        self.exponents[i * self.factors.len() + j]
    }

    /// The exponent matrix as rows.
    pub fn exponent_rows(&self) -> Vec<Vec<f64>> {
        self.exponents.chunks(self.factors.len()).map(<[f64]>::to_vec).collect()
    }

    pub fn z_domains(&self) -> &ZDomain {
        &self.z
    }

    pub fn parents(&self) -> &ParentSets {
        &self.z
    }

    pub fn all_clayton(&self) -> bool {
        self.factors.iter().all(|f| f.copula.is_clayton())
    }

    /// Indices of Clayton factors, i.e. the factors carrying a parameter.
    pub fn clayton_factors(&self) -> Vec<usize> {
        (0..self.factors.len())
            .filter(|&j| self.factors[j].copula.is_clayton())
            .collect()
    }

    /// Parameters of the Clayton factors, in factor order.
    pub fn thetas(&self) -> Vec<f64> {
        self.factors.iter().filter_map(|f| f.copula.theta()).collect()
    }

    pub fn set_theta(&mut self, j: usize, theta: f64) -> Result<()> {
        let f = self
            .factors
            .get_mut(j)
            .ok_or_else(|| CdfError::Argument(format!("no factor {j}")))?;
        f.copula.set_theta(theta)
    }

    fn check_point(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.p {
            return Err(CdfError::Argument(format!(
                "expected {} coordinates, got {}",
                self.p,
                u.len()
            )));
        }
        if let Some(x) = u.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(CdfError::Argument(format!("coordinate {x} outside [0, 1]")));
        }
        Ok(())
    }

    /// Joint CDF at `u`.
    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        self.check_point(u)?;
        let mut value = 1.0;
        let mut v = Vec::new();
        for f in &self.factors {
            v.clear();
            v.extend(f.scope.iter().zip(&f.exponents).map(|(&i, &a)| u[i].powf(a)));
            value *= f.copula.cdf(&v)?;
        }
        Ok(value)
    }

    /// CDF of the variables in `subset` at `values`; everything else is set to 1.
    pub fn marginal_cdf(&self, subset: &[usize], values: &[f64]) -> Result<f64> {
        if subset.is_empty() {
            return Err(CdfError::Argument("marginal over an empty subset".into()));
        }
        if subset.len() != values.len() {
            return Err(CdfError::Argument(format!(
                "{} indices but {} values",
                subset.len(),
                values.len()
            )));
        }
        let mut u = vec![1.0; self.p];
        for (&i, &x) in subset.iter().zip(values) {
            if i >= self.p {
                return Err(CdfError::Argument(format!("variable {i} out of range")));
            }
            u[i] = x;
        }
        self.cdf(&u)
    }

    /// Pairs `(m, n)`, `m < n`, that share at least one factor.
    pub fn bidirected_edges(&self) -> BTreeSet<(usize, usize)> {
        let mut edges = BTreeSet::new();
        for f in &self.factors {
            for (a, &m) in f.scope.iter().enumerate() {
                for &n in &f.scope[a + 1..] {
                    edges.insert((m, n));
                }
            }
        }
        edges
    }

    /// Connected components of the bi-directed graph, each ascending.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.p).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            let mut c = x;
            while parent[c] != r {
                let next = parent[c];
                parent[c] = r;
                c = next;
            }
            r
        }
        for f in &self.factors {
            for w in f.scope.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut root_slot = vec![usize::MAX; self.p];
        for i in 0..self.p {
            let r = find(&mut parent, i);
            if root_slot[r] == usize::MAX {
                root_slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[root_slot[r]].push(i);
        }
        groups
    }

    /// Hex digest of a canonical rendering of the model (structure, families,
    /// parameters and exponent bits).
    pub fn canonical_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("p={};K={};", self.p, self.factors.len()));
        for f in &self.factors {
            match f.copula.family() {
                Family::Clayton { theta } => h.update(format!("clayton:{:016x}", theta.to_bits())),
                Family::Independence => h.update("independence"),
            }
            h.update(format!("{:?};", f.scope));
        }
        for a in &self.exponents {
            h.update(a.to_bits().to_le_bytes());
        }
        h.finalize().iter().take(16).map(|b| format!("{b:02x}")).collect()
    }
}

/// Clayton factors over consecutive pairs `(j, j+1)`.
pub fn chain_model(p: usize, thetas: &[f64]) -> Result<CdnModel> {
    if p < 2 {
        return Err(CdfError::Validation("a chain needs at least 2 variables".into()));
    }
    if thetas.len() != p - 1 {
        return Err(CdfError::Validation(format!(
            "a chain over {p} variables needs {} parameters, got {}",
            p - 1,
            thetas.len()
        )));
    }
    let specs = thetas
        .iter()
        .enumerate()
        .map(|(j, &t)| FactorSpec::clayton(t, vec![j, j + 1]))
        .collect();
    CdnModel::new(p, specs, Exponents::Uniform)
}

/// One Clayton factor per cluster, then one per unordered pair of clusters
/// `(a, b)`, `a < b`, in lexicographic order. `assignment[i]` is the cluster
/// label of variable `i`; labels must be `0..c` with every cluster nonempty.
pub fn cluster_pair_model(assignment: &[usize], thetas: &[f64]) -> Result<CdnModel> {
    let c = assignment.iter().max().map_or(0, |m| m + 1);
    if c < 2 {
        return Err(CdfError::Validation("need at least 2 clusters".into()));
    }
    let mut members = vec![Vec::new(); c];
    for (i, &a) in assignment.iter().enumerate() {
        members[a].push(i);
    }
    let empty: Vec<usize> = (0..c).filter(|&a| members[a].is_empty()).collect();
    if !empty.is_empty() {
        return Err(CdfError::Validation(format!("clusters {empty:?} have no members")));
    }
    let needed = c + c * (c - 1) / 2;
    if thetas.len() != needed {
        return Err(CdfError::Validation(format!(
            "{c} clusters need {needed} parameters, got {}",
            thetas.len()
        )));
    }
    let mut scopes: Vec<Vec<usize>> = members.clone();
    for a in 0..c {
        for b in a + 1..c {
            let mut s = members[a].clone();
            s.extend(&members[b]);
            scopes.push(s);
        }
    }
    let specs = scopes
        .into_iter()
        .zip(thetas)
        .map(|(s, &t)| FactorSpec::clayton(t, s))
        .collect();
    CdnModel::new(assignment.len(), specs, Exponents::Uniform)
}
