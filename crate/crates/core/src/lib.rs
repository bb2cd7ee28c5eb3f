//! Exact Bayesian evidence for choosing among Gaussian covariance
//! structures: constant diagonal (C), diagonal (D) and arbitrary positive
//! definite (A), for mean-zero samples and for multivariate regression
//! residuals.
//!
//! ```
//! use covsel::data::{suff_stats, Dataset};
//! use covsel::priors::{matched_triple, Hyper};
//! use covsel::structures::{select_structure, Criterion, Structure};
//!
//! let data = Dataset::from_rows(&[
//!     vec![1.0, 0.9],
//!     vec![-0.8, -1.1],
//!     vec![0.4, 0.5],
//!     vec![2.0, 1.7],
//! ])?;
//! let stats = suff_stats(&data);
//! let hypers = matched_triple(&Hyper::gamma(3.0, 2.0)?, 2)?;
//! let sel = select_structure(&stats, &hypers, Criterion::Evidence)?;
//! assert_eq!(sel.ranked.len(), 3);
//! assert_eq!(sel.winner(), Some(Structure::A));
//! # Ok::<(), covsel::Error>(())
//! ```

pub mod asymptotics;
pub mod data;
pub mod error;
pub mod montecarlo;
pub mod priors;
pub mod quadrature;
pub mod regression;
pub mod rng;
pub mod specialfn;
pub mod structures;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/structures.md")]
    mod structures {}
    #[doc = include_str!("../../../book/src/priors.md")]
    mod priors {}
    #[doc = include_str!("../../../book/src/criteria.md")]
    mod criteria {}
    #[doc = include_str!("../../../book/src/regression.md")]
    mod regression {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/rates.md")]
    mod rates {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
