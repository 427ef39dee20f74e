//! Discovery of sparse, closed-form governing ODEs from noisy time series.
//!
//! The pipeline has three stages: an evolutionary symbolic search mines
//! candidate basis functions from short random chunks of the training data
//! ([`symreg`]), the raw pool is decomposed, expanded and pruned into a
//! compact low-collinearity library ([`curation`]), and sparse coefficients
//! are fitted by thresholded regression under a bootstrap ensemble
//! ([`sindy`]). [`pipeline`] wires the stages together and also provides
//! the two reference baselines; [`bench`] runs full sweeps over the
//! benchmark systems in [`dynamics`] and persists per-trial records.

pub mod bench;
pub mod curation;
pub mod deriv;
pub mod dynamics;
pub mod expr;
pub mod metrics;
pub(crate) mod numeric;
pub mod pipeline;
pub mod seeds;
pub mod sindy;
pub mod symreg;

pub use expr::{Expr, ExprKind};
