//! Cumulative distribution fields: copulas built as products of smaller
//! copulas, with exact densities through a reduction to discrete
//! sum-product, a Gamma-frailty latent representation for Clayton factors,
//! and MCMC samplers for the factor parameters.
//!
//! ```
//! use cdfield::model::chain_model;
//! use cdfield::likelihood::{density_ve, min_fill_order};
//!
//! let model = chain_model(3, &[1.0, 2.0]).unwrap();
//! // the first and last variables are marginally independent
//! let joint = model.cdf(&[0.2, 1.0, 0.9]).unwrap();
//! assert!((joint - 0.18).abs() < 1e-12);
//!
//! let order = min_fill_order(&model);
//! let density = density_ve(&model, &[0.3, 0.6, 0.9], &order).unwrap();
//! assert!(density > 0.0);
//! ```

pub mod copula;
pub mod error;
pub mod latent;
pub mod likelihood;
pub mod mcmc;
pub mod model;
mod numeric;

pub use copula::{CopulaFactor, Family};
pub use error::{CdfError, Result};
pub use model::{chain_model, cluster_pair_model, CdnModel, Exponents, FactorSpec};
