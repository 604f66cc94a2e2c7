//! The JSON model file.
//!
//! ```json
//! {
//!   "variables": ["U1", "U2", "U3"],
//!   "factors": [
//!     {"family": "clayton", "theta_init": 1.0, "scope": ["U1", "U2"]},
//!     {"family": "clayton", "theta_init": 2.0, "scope": ["U2", "U3"], "name": "right"}
//!   ],
//!   "exponents": "uniform",
//!   "prior": {"shape": 2.0, "rate": 2.0}
//! }
//! ```
//!
//! `exponents` is either `"uniform"` or a matrix with one row per variable and
//! one column per factor. `prior` and factor `name`s are optional.

use std::collections::HashMap;
use std::path::Path;

use cdfield::mcmc::Prior;
use cdfield::{CdnModel, Exponents, FactorSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variables: Vec<String>,
    pub factors: Vec<FactorConfig>,
    #[serde(default = "uniform")]
    pub exponents: ExponentsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorConfig {
    pub family: FamilyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_init: Option<f64>,
    pub scope: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Clayton,
    Independence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExponentsConfig {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

fn uniform() -> ExponentsConfig {
    ExponentsConfig::Named("uniform".into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub shape: f64,
    pub rate: f64,
}

/// A validated configuration: the model plus the names used in files.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub model: CdnModel,
    pub variables: Vec<String>,
    /// Column label of each factor's parameter.
    pub factor_names: Vec<String>,
    pub prior: Prior,
}

impl ModelConfig {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn load(&self) -> CliResult<Loaded> {
        let mut index = HashMap::new();
        for (i, name) in self.variables.iter().enumerate() {
            if index.insert(name.as_str(), i).is_some() {
                return Err(CliError::Validation(format!("variable name {name:?} appears twice")));
            }
        }
        let mut specs = Vec::with_capacity(self.factors.len());
        for (j, f) in self.factors.iter().enumerate() {
            let scope = f
                .scope
                .iter()
                .map(|n| {
                    index
                        .get(n.as_str())
                        .copied()
                        .ok_or_else(|| CliError::Validation(format!("factor {j} names unknown variable {n:?}")))
                })
                .collect::<CliResult<Vec<usize>>>()?;
            specs.push(match (f.family, f.theta_init) {
                (FamilyName::Clayton, Some(theta)) => FactorSpec::clayton(theta, scope),
                (FamilyName::Clayton, None) => {
                    return Err(CliError::Validation(format!("clayton factor {j} needs theta_init")))
                }
                (FamilyName::Independence, None) => FactorSpec::independence(scope),
                (FamilyName::Independence, Some(_)) => {
                    return Err(CliError::Validation(format!(
                        "independence factor {j} has no parameter, drop theta_init"
                    )))
                }
            });
        }
        let exponents = match &self.exponents {
            ExponentsConfig::Named(s) if s == "uniform" => Exponents::Uniform,
            ExponentsConfig::Named(s) => {
                return Err(CliError::Validation(format!(
                    "exponents must be \"uniform\" or a matrix, got {s:?}"
                )))
            }
            ExponentsConfig::Matrix(rows) => Exponents::Explicit(rows.clone()),
        };
        let model = CdnModel::new(self.variables.len(), specs, exponents)?;
        let prior = match self.prior {
            Some(p) => Prior::gamma(p.shape, p.rate)?,
            None => Prior::default(),
        };
        Ok(Loaded {
            model,
            variables: self.variables.clone(),
            factor_names: self.factor_names()?,
            prior,
        })
    }

    /// Given names, or the scope joined by `_`, made unique with a `_<index>` suffix.
    fn factor_names(&self) -> CliResult<Vec<String>> {
        let mut names: Vec<String> = self
            .factors
            .iter()
            .map(|f| f.name.clone().unwrap_or_else(|| f.scope.join("_")))
            .collect();
        let mut seen = HashMap::new();
        for n in &names {
            *seen.entry(n.clone()).or_insert(0) += 1;
        }
        for (j, f) in self.factors.iter().enumerate() {
            if seen[&names[j]] > 1 {
                if f.name.is_some() {
                    return Err(CliError::Validation(format!(
                        "factor name {:?} appears twice",
                        names[j]
                    )));
                }
                names[j] = format!("{}_{j}", names[j]);
            }
        }
        Ok(names)
    }

    /// Configuration describing `model` with the given names.
    pub fn from_model(model: &CdnModel, variables: &[String], prior: Option<Prior>) -> Self {
        let factors = model
            .factors()
            .iter()
            .map(|f| FactorConfig {
                family: if f.copula().is_clayton() {
                    FamilyName::Clayton
                } else {
                    FamilyName::Independence
                },
                theta_init: f.copula().theta(),
                scope: f.scope().iter().map(|&i| variables[i].clone()).collect(),
                name: None,
            })
            .collect();
        let uniform_model = CdnModel::new(
            model.p(),
            model
                .factors()
                .iter()
                .map(|f| FactorSpec::clayton(1.0, f.scope().to_vec()))
                .collect(),
            Exponents::Uniform,
        )
        .expect("same structure");
        let exponents = if uniform_model.exponent_rows() == model.exponent_rows() {
            uniform()
        } else {
            ExponentsConfig::Matrix(model.exponent_rows())
        };
        ModelConfig {
            variables: variables.to_vec(),
            factors,
            exponents,
            prior: prior.map(|p| PriorConfig {
                shape: p.shape(),
                rate: p.rate(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cdfield::cluster_pair_model;

    fn parse(s: &str) -> CliResult<Loaded> {
        serde_json::from_str::<ModelConfig>(s)
            .map_err(|e| CliError::Validation(e.to_string()))?
            .load()
    }

    #[test]
    fn chain_config() {
        let l = parse(
            r#"{"variables": ["U1", "U2", "U3"],
                "factors": [{"family": "clayton", "theta_init": 1.0, "scope": ["U1", "U2"]},
                            {"family": "clayton", "theta_init": 2.0, "scope": ["U3", "U2"]}]}"#,
        )
        .unwrap();
        assert_eq!(l.model, cdfield::chain_model(3, &[1.0, 2.0]).unwrap());
        assert_eq!(l.factor_names, vec!["U1_U2", "U3_U2"]);
        assert_eq!(l.prior, Prior::default());
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            r#"{"variables": ["a", "a"], "factors": [{"family": "clayton", "theta_init": 1.0, "scope": ["a"]}]}"#,
            r#"{"variables": ["a", "b"], "factors": [{"family": "clayton", "theta_init": 1.0, "scope": ["a", "c"]}]}"#,
            r#"{"variables": ["a", "b"], "factors": [{"family": "clayton", "scope": ["a", "b"]}]}"#,
            r#"{"variables": ["a", "b"], "factors": [{"family": "gumbel", "theta_init": 1.0, "scope": ["a", "b"]}]}"#,
            r#"{"variables": ["a", "b"], "factors": [{"family": "clayton", "theta_init": 1.0, "scope": ["a"]}]}"#,
            r#"{"variables": ["a", "b"], "factors": [{"family": "clayton", "theta_init": 1.0, "scope": ["a", "b"]}], "exponents": "random"}"#,
            r#"{"variables": ["a", "b"], "factors": [{"family": "clayton", "theta_init": 1.0, "scope": ["a", "b"]}], "exponents": [[0.5], [1.0]]}"#,
            r#"{"variables": ["a", "b"], "factors": [{"family": "clayton", "theta_init": 1.0, "scope": ["a", "b"]}], "prior": {"shape": -1, "rate": 1}}"#,
            r#"{"variables": ["a", "b"], "factors": [{"family": "clayton", "theta_init": 1.0, "scope": ["a", "b"]}], "extra": 1}"#,
            r#"{"variables": ["a", "b"], "factors": [{"family": "clayton", "theta_init": 1.0, "scope": ["a", "b"], "name": "x"},
                                                     {"family": "clayton", "theta_init": 1.0, "scope": ["a", "b"], "name": "x"}]}"#,
        ];
        for c in cases {
            assert!(matches!(parse(c), Err(CliError::Validation(_))), "{c}");
        }
    }

    #[test]
    fn default_names_are_made_unique() {
        let l = parse(
            r#"{"variables": ["a", "b"],
                "factors": [{"family": "clayton", "theta_init": 1.0, "scope": ["a", "b"]},
                            {"family": "independence", "scope": ["a", "b"]}]}"#,
        )
        .unwrap();
        assert_eq!(l.factor_names, vec!["a_b_0", "a_b_1"]);
    }

    #[test]
    fn round_trip_preserves_the_model() {
        let names: Vec<String> = (0..8).map(|i| format!("x{i}")).collect();
        let m = cluster_pair_model(
            &[0, 0, 1, 1, 2, 2, 3, 3],
            &[0.3, 1.1, 2.7, 0.9, 1.0, 1.5, 0.2, 4.4, 3.3, 0.1],
        )
        .unwrap();
        let cfg = ModelConfig::from_model(&m, &names, Some(Prior::gamma(3.0, 1.5).unwrap()));
        assert_eq!(cfg.exponents, uniform());
        let back: ModelConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        let l = back.load().unwrap();
        assert_eq!(l.model.canonical_hash(), m.canonical_hash());
        assert_eq!(l.prior, Prior::gamma(3.0, 1.5).unwrap());

        let explicit = CdnModel::new(
            3,
            vec![
                FactorSpec::clayton(0.7, vec![0, 1]),
                FactorSpec::clayton(1.9, vec![1, 2]),
            ],
            Exponents::Explicit(vec![vec![1.0, 0.0], vec![0.3, 0.7], vec![0.0, 1.0]]),
        )
        .unwrap();
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let cfg = ModelConfig::from_model(&explicit, &names, None);
        assert!(matches!(cfg.exponents, ExponentsConfig::Matrix(_)));
        let back: ModelConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back.load().unwrap().model.canonical_hash(), explicit.canonical_hash());
    }
}
