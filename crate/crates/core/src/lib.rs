//! Proximal causal inference with multiple treatments and multiple outcomes.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`proxytest`] tests `A_i ⊥ Y_j | U` for every treatment/outcome pair
//!    using another treatment as a proxy of the latent confounder;
//!    [`discovery`] assembles the results into a bipartite graph.
//! 2. [`discovery::select_proxies`] reads off an admissible treatment-inducing
//!    proxy `Z` and outcome-inducing proxy `W` for a target `(A_S, Y_j)`.
//! 3. [`bridge`] fits the outcome bridge `h(a, w)` and the treatment bridge
//!    `q(a, z)` by penalized kernel moment restriction.
//! 4. [`estimator`] combines them into a kernel doubly robust dose-response
//!    estimate.
//!
//! [`scm`] and [`scenarios`] provide the simulators and Monte Carlo ground
//! truth used by the [`benchmark`] harness.

pub mod benchmark;
pub mod bridge;
pub mod config;
pub mod dataset;
pub mod discovery;
pub mod discretize;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod proxytest;
pub mod rng;
pub mod scenarios;
pub mod scm;
pub mod stats;

pub use dataset::{Column, ColumnRole, Dataset};
pub use discovery::{BipartiteGraph, NullProxyCase, ProxyAssignment, ProxyRule};
pub use error::{Error, Result};
pub use estimator::EffectCurve;
pub use scm::ScmSpec;
