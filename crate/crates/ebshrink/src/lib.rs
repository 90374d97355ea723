//! Empirical Bayes shrinkage for the Gaussian compound-decision problem.
//!
//! Everything revolves around the marginal density m(y) of the observed
//! data. The library estimates it four ways (kernel, exp-polynomial
//! Poisson regression, nonparametric MLE mixture, penalized score
//! matching), turns any estimate into a shrinkage rule through the
//! posterior-mean identity delta(y) = y + d/dy log m(y), and checks
//! whether a candidate marginal could have arisen as a Gaussian
//! convolution of any prior at all.
//!
//! See the guide under `book/` for worked examples; the `ebshrink` CLI
//! wraps the same pipeline for files.

pub mod data;
pub mod diag;
pub mod error;
pub mod fit;
pub mod grid;
pub mod io;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod prior;
pub mod rules;
pub mod simulate;

pub use data::{Family, ObservationSet};
pub use error::{Error, Result};
pub use grid::EvaluationGrid;
pub use model::{Domain, LogMarginalModel, ModelSource, Representation};
pub use oracle::{oracle_posterior_mean, oracle_posterior_var, OracleRule, PosteriorMoments};
pub use prior::{make_prior, MixingMeasure, PriorSpec};
pub use simulate::sample_compound;
