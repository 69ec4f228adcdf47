//! Decision support for personalized colorectal-cancer (CRC) screening.
//!
//! The crate is organised bottom-up:
//!
//! - [`bn`]: discrete Bayesian networks, model files and exact inference
//!   (variable elimination) giving `p(CRC | evidence)`.
//! - [`screening`]: the catalog of interventions (accuracy, cost, comfort,
//!   complications) and the result-node conditional tables.
//! - [`info`]: the information attribute, pointwise mutual information
//!   normalized by the patient's CRC entropy, and its expectations.
//! - [`preference`]: cost aggregation, the comfort-weighted additive value
//!   function, λ elicitation and exponential-utility calibration.
//! - [`policy`]: strategy enumeration, exact expected-utility evaluation,
//!   recommendation and dominance checks.
//! - [`population`]: greedy EU-ordered allocation under operational limits,
//!   Monte Carlo outcome simulation, sweeps and device benchmarking.
//!
//! Heavy loops run on rayon when the `parallel` feature is enabled (the
//! default); every parallel path has a sequential twin producing identical
//! results, see [`par::Exec`].

// `!(x > 0.0)` rejects NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bn;
pub mod bundled;
pub mod error;
pub mod info;
pub mod par;
pub mod policy;
pub mod population;
pub mod preference;
pub mod screening;

pub use bn::{Evidence, Network};
pub use error::{Error, Result};
pub use par::Exec;
pub use policy::{Strategy, StrategyEvaluation};
pub use preference::PreferenceParams;
pub use screening::{InterventionCatalog, InterventionId, InterventionSpec, ResultState};
