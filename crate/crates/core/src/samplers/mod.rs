//! Posterior samplers: EL importance sampling from the prior, its adaptive
//! multiple importance sampling variant, the ABC rejection baseline, and the
//! summaries and replicate studies built on their output.

mod abc;
mod bcel;
mod prior;
mod replicate;
mod sample;
mod summaries;

pub use abc::{abc_rejection, AbcConfig, Distance, Tolerance};
pub use bcel::{bcel_amis, bcel_basic, AmisConfig, ElTarget, Mixture};
pub use prior::{PriorBlock, PriorSpec, Transform};
pub use replicate::{replicate_study, DataFn, Method, Metrics, MetricsTable, ReplicateFailure};
pub use sample::{ess, ess_from_log, posterior_summary, CoordinateSummary, ElTally, Particle, PosteriorSummary, WeightedSample};
pub use summaries::{garch_mle, GarchFit, SummaryStat};
